use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::math::{luminance, Rgb, Vec3};

/// Distant radiance surrounding the scene.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvMap {
    Constant(Rgb),
    /// Latitude-longitude map with +y up; row 0 is the zenith.
    Equirect {
        width: usize,
        height: usize,
        texels: Vec<Rgb>,
    },
}

impl EnvMap {
    pub fn radiance(&self, dir: &Vec3) -> Rgb {
        match self {
            EnvMap::Constant(c) => *c,
            EnvMap::Equirect {
                width,
                height,
                texels,
            } => {
                let u = 0.5 + dir.x.atan2(-dir.z) / (2.0 * PI);
                let v = dir.y.clamp(-1.0, 1.0).acos() / PI;
                let x = ((u * *width as f64) as usize).min(width - 1);
                let y = ((v * *height as f64) as usize).min(height - 1);
                texels[y * width + x]
            }
        }
    }

    pub fn is_black(&self) -> bool {
        match self {
            EnvMap::Constant(c) => c.max() <= 0.0,
            EnvMap::Equirect { texels, .. } => texels.iter().all(|t| t.max() <= 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Light {
    /// Delta light; `direction` is the direction light travels and
    /// `radiance` the irradiance delivered to a surface facing it.
    Directional { direction: Vec3, radiance: Rgb },
    /// Parallelogram emitter `corner + a*edge_u + b*edge_v`, emitting toward
    /// `edge_u x edge_v` unless two-sided.
    Area {
        corner: Vec3,
        edge_u: Vec3,
        edge_v: Vec3,
        radiance: Rgb,
        two_sided: bool,
    },
    Environment(EnvMap),
}

impl Light {
    pub fn validate(&self) -> Result<()> {
        let bad = |c: &Rgb| c.iter().any(|v| !(*v >= 0.0) || !v.is_finite());
        match self {
            Light::Directional {
                direction,
                radiance,
            } => {
                if (direction.norm() - 1.0).abs() > 1e-6 {
                    return Err(Error::invalid("light", "directional light needs a unit direction"));
                }
                if bad(radiance) {
                    return Err(Error::invalid("light", "negative radiance"));
                }
            }
            Light::Area {
                edge_u,
                edge_v,
                radiance,
                ..
            } => {
                if edge_u.cross(edge_v).norm() < 1e-12 {
                    return Err(Error::invalid("light", "area light edges are parallel"));
                }
                if bad(radiance) {
                    return Err(Error::invalid("light", "negative radiance"));
                }
            }
            Light::Environment(EnvMap::Constant(c)) => {
                if bad(c) {
                    return Err(Error::invalid("light", "negative radiance"));
                }
            }
            Light::Environment(EnvMap::Equirect {
                width,
                height,
                texels,
            }) => {
                if texels.len() != width * height || texels.is_empty() {
                    return Err(Error::invalid("light", "environment map size mismatch"));
                }
                if texels.iter().any(bad) {
                    return Err(Error::invalid("light", "negative radiance"));
                }
            }
        }
        Ok(())
    }

    pub fn radiance_luminance(&self) -> f64 {
        match self {
            Light::Directional { radiance, .. } | Light::Area { radiance, .. } => luminance(radiance),
            Light::Environment(EnvMap::Constant(c)) => luminance(c),
            Light::Environment(EnvMap::Equirect { texels, .. }) => {
                texels.iter().map(luminance).sum::<f64>() / texels.len().max(1) as f64
            }
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Light::Area { edge_u, edge_v, .. } => edge_u.cross(edge_v).norm(),
            _ => 0.0,
        }
    }

    pub fn is_environment(&self) -> bool {
        matches!(self, Light::Environment(_))
    }
}
