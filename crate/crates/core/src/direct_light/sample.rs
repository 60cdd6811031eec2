use rand::Rng;

use super::{EnvMap, Light, Reservoir};
use crate::math::{cosine_hemisphere, luminance, Frame, Rgb, Vec3, INV_PI};
use crate::tracer::{spawn_ray, trace_shadow_stochastic, ProxyAccel};

/// One light sample chosen for a shading point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightSample {
    /// Unit direction from the shading point toward the light.
    pub direction: Vec3,
    /// Distance to the sampled point; infinite for directional lights.
    pub distance: f64,
    /// Incident radiance (irradiance at normal incidence for directional lights).
    pub radiance: Rgb,
    /// Combined selection and point pdf; `radiance * cos / pdf` is unbiased
    /// for the reservoir's light set.
    pub pdf: f64,
}

struct Candidate {
    direction: Vec3,
    distance: f64,
    radiance: Rgb,
    /// Point pdf in solid angle (1 for delta lights).
    pdf: f64,
    cos: f64,
}

fn candidate<R: Rng + ?Sized>(light: &Light, p: &Vec3, n: &Vec3, rng: &mut R) -> Option<Candidate> {
    match light {
        Light::Directional { direction, radiance } => {
            let wi = -direction;
            let cos = n.dot(&wi);
            (cos > 0.0).then_some(Candidate { direction: wi, distance: f64::INFINITY, radiance: *radiance, pdf: 1.0, cos })
        }
        Light::Area { corner, edge_u, edge_v, radiance, two_sided } => {
            let q = corner + edge_u * rng.random::<f64>() + edge_v * rng.random::<f64>();
            let d = q - p;
            let dist = d.norm();
            if dist < 1e-9 {
                return None;
            }
            let wi = d / dist;
            let cos = n.dot(&wi);
            let ln = edge_u.cross(edge_v);
            let area = ln.norm();
            let cos_q = ln.dot(&-wi) / area;
            if cos <= 0.0 || (!two_sided && cos_q <= 0.0) || cos_q.abs() < 1e-9 {
                return None;
            }
            let pdf = dist * dist / (cos_q.abs() * area);
            Some(Candidate { direction: wi, distance: dist, radiance: *radiance, pdf, cos })
        }
        Light::Environment(_) => None,
    }
}

/// Resampled importance sampling over one candidate per reservoir light,
/// weighted by unshadowed diffuse contribution.
pub fn sample_light<R: Rng + ?Sized>(
    p: &Vec3,
    n: &Vec3,
    reservoir: &Reservoir,
    lights: &[Light],
    rng: &mut R,
) -> Option<LightSample> {
    let mut total = 0.0;
    let mut chosen: Option<(Candidate, f64)> = None;
    for &id in &reservoir.lights {
        let Some(c) = candidate(&lights[id as usize], p, n, rng) else { continue };
        let target = luminance(&c.radiance) * c.cos;
        if target <= 0.0 {
            continue;
        }
        let w = target / c.pdf;
        total += w;
        // Streaming selection proportional to w.
        if rng.random::<f64>() * total < w {
            chosen = Some((c, target));
        }
    }
    let (c, target) = chosen?;
    Some(LightSample {
        direction: c.direction,
        distance: c.distance,
        radiance: c.radiance,
        pdf: target / total,
    })
}

/// `cos * L * (1 - b) / pdf` for one sample, with `b` from a stochastic
/// shadow ray. Divide by pi and multiply by albedo for Lambertian radiance.
pub fn sample_irradiance<R: Rng + ?Sized>(
    p: &Vec3,
    n: &Vec3,
    sample: &LightSample,
    accel: &ProxyAccel,
    rng: &mut R,
    scale: f64,
) -> Rgb {
    let cos = n.dot(&sample.direction);
    if cos <= 0.0 {
        return Rgb::zeros();
    }
    let t_max = if sample.distance.is_finite() { sample.distance * (1.0 - 1e-4) - 1e-3 } else { f64::INFINITY };
    let ray = spawn_ray(p, n, &sample.direction, t_max.max(0.0));
    if trace_shadow_stochastic(accel, &ray, rng, scale) {
        return Rgb::zeros();
    }
    sample.radiance * (cos / sample.pdf)
}

/// Lambertian outgoing radiance from one light sample.
pub fn shade_direct<R: Rng + ?Sized>(
    p: &Vec3,
    n: &Vec3,
    albedo: &Rgb,
    sample: &LightSample,
    accel: &ProxyAccel,
    rng: &mut R,
    scale: f64,
) -> Rgb {
    albedo.component_mul(&sample_irradiance(p, n, sample, accel, rng, scale)) * INV_PI
}

/// One cosine-weighted environment sample with a shadow ray; estimates
/// irradiance from the environment.
pub fn environment_irradiance<R: Rng + ?Sized>(
    p: &Vec3,
    n: &Vec3,
    env: &EnvMap,
    accel: &ProxyAccel,
    rng: &mut R,
    scale: f64,
) -> Rgb {
    let local = cosine_hemisphere(rng.random(), rng.random());
    let wi = Frame::from_normal(*n).to_world(&local);
    let l = env.radiance(&wi);
    if l.max() <= 0.0 {
        return Rgb::zeros();
    }
    let ray = spawn_ray(p, n, &wi, f64::INFINITY);
    if trace_shadow_stochastic(accel, &ray, rng, scale) {
        return Rgb::zeros();
    }
    // cos * L / (cos / pi)
    l * std::f64::consts::PI
}
