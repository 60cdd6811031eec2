//! Stretched icosahedral proxies bounding each Gaussian's `ALPHA_MIN`
//! iso-ellipsoid.
//!
//! In the Gaussian's unit space (`x' = diag(1/(m*s)) R^T (x - mu)`, with `m`
//! the Mahalanobis radius of the cutoff) the iso-surface is the unit
//! sphere, and the proxy is an icosahedron with inradius 1.

use std::sync::OnceLock;

use crate::gsmath::{GaussianPrimitive, ALPHA_MIN};
use crate::math::{Mat3, Vec3};

struct Icosahedron {
    /// Unit face normals; faces sit at distance 1 from the origin.
    normals: Vec<Vec3>,
    /// Vertices of the inradius-1 icosahedron.
    vertices: Vec<Vec3>,
}

fn icosahedron() -> &'static Icosahedron {
    static ICO: OnceLock<Icosahedron> = OnceLock::new();
    ICO.get_or_init(|| {
        let phi = 0.5 * (1.0 + 5f64.sqrt());
        let mut raw = Vec::with_capacity(12);
        for &a in &[-1.0, 1.0] {
            for &b in &[-phi, phi] {
                raw.push(Vec3::new(0.0, a, b));
                raw.push(Vec3::new(a, b, 0.0));
                raw.push(Vec3::new(b, 0.0, a));
            }
        }
        // Faces are the vertex triples with all pairwise distances equal to the edge length 2.
        let mut normals = Vec::with_capacity(20);
        let mut inradius = 0.0;
        for i in 0..12 {
            for j in i + 1..12 {
                for k in j + 1..12 {
                    let edge = |p: &Vec3, q: &Vec3| ((p - q).norm() - 2.0).abs() < 1e-9;
                    if edge(&raw[i], &raw[j]) && edge(&raw[j], &raw[k]) && edge(&raw[i], &raw[k]) {
                        let c = (raw[i] + raw[j] + raw[k]) / 3.0;
                        inradius = c.norm();
                        normals.push(c.normalize());
                    }
                }
            }
        }
        debug_assert_eq!(normals.len(), 20);
        let vertices = raw.iter().map(|v| v / inradius).collect();
        Icosahedron { normals, vertices }
    })
}

/// Mahalanobis radius where `opacity * exp(-m^2 / 2) = ALPHA_MIN`, or `None`
/// when the Gaussian never reaches the cutoff.
pub fn iso_radius(opacity: f64) -> Option<f64> {
    (opacity > ALPHA_MIN).then(|| (2.0 * (opacity / ALPHA_MIN).ln()).sqrt())
}

#[derive(Debug, Clone)]
pub struct Proxy {
    pub center: Vec3,
    /// World to proxy unit space.
    pub to_unit: Mat3,
    pub bounds_min: Vec3,
    pub bounds_max: Vec3,
}

impl Proxy {
    pub fn for_gaussian(g: &GaussianPrimitive) -> Option<Proxy> {
        let m = iso_radius(g.opacity)?;
        let r = g.rotation_matrix();
        let axes = g.scale * m;
        let to_world = r * Mat3::from_diagonal(&axes);
        let to_unit = Mat3::from_diagonal(&axes.map(|a| 1.0 / a)) * r.transpose();
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &icosahedron().vertices {
            let w = g.center + to_world * v;
            lo = lo.inf(&w);
            hi = hi.sup(&w);
        }
        Some(Proxy {
            center: g.center,
            to_unit,
            bounds_min: lo,
            bounds_max: hi,
        })
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        let u = self.to_unit * (p - self.center);
        icosahedron().normals.iter().all(|n| n.dot(&u) <= 1.0 + 1e-12)
    }

    /// Parametric interval of the ray inside the polytope (unclipped).
    pub fn intersect(&self, origin: &Vec3, direction: &Vec3) -> Option<(f64, f64)> {
        let o = self.to_unit * (origin - self.center);
        let d = self.to_unit * direction;
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for n in &icosahedron().normals {
            let denom = n.dot(&d);
            let num = 1.0 - n.dot(&o);
            if denom.abs() < 1e-300 {
                if num < 0.0 {
                    return None;
                }
                continue;
            }
            let t = num / denom;
            if denom > 0.0 {
                t1 = t1.min(t);
            } else {
                t0 = t0.max(t);
            }
            if t0 > t1 {
                return None;
            }
        }
        Some((t0, t1))
    }
}
