//! Runtime scene: Gaussians, triangles and lights in world space.

use crate::direct_light::{EnvMap, Light};
use crate::error::{Error, Result};
use crate::gsmath::{GaussianPrimitive, Ray};
use crate::math::{Rgb, Vec3};

pub const DEFAULT_F0: f64 = 0.04;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshMaterial {
    pub albedo: Rgb,
    pub roughness: f64,
    pub emission: Rgb,
    pub f0: f64,
}

impl Default for MeshMaterial {
    fn default() -> Self {
        MeshMaterial {
            albedo: Rgb::new(0.5, 0.5, 0.5),
            roughness: 0.8,
            emission: Rgb::zeros(),
            f0: DEFAULT_F0,
        }
    }
}

impl MeshMaterial {
    pub fn diffuse(albedo: Rgb) -> Self {
        MeshMaterial {
            albedo,
            roughness: 1.0,
            ..Default::default()
        }
    }

    pub fn emissive(emission: Rgb) -> Self {
        MeshMaterial {
            albedo: Rgb::zeros(),
            roughness: 1.0,
            emission,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Triangle {
    pub vertices: [Vec3; 3],
    /// Geometric normal, `(v1 - v0) x (v2 - v0)` normalized.
    pub normal: Vec3,
    pub material: MeshMaterial,
    /// Index of the owning mesh object.
    pub object: u32,
}

impl Triangle {
    pub fn new(v0: Vec3, v1: Vec3, v2: Vec3, material: MeshMaterial, object: u32) -> Result<Self> {
        let n = (v1 - v0).cross(&(v2 - v0));
        if n.norm() < 1e-14 {
            return Err(Error::Scene("degenerate triangle".into()));
        }
        Ok(Triangle {
            vertices: [v0, v1, v2],
            normal: n.normalize(),
            material,
            object,
        })
    }

    /// Moller-Trumbore; returns `t` within the ray's range.
    pub fn intersect(&self, ray: &Ray) -> Option<f64> {
        let [v0, v1, v2] = &self.vertices;
        let e1 = v1 - v0;
        let e2 = v2 - v0;
        let p = ray.direction.cross(&e2);
        let det = e1.dot(&p);
        if det.abs() < 1e-14 {
            return None;
        }
        let inv = 1.0 / det;
        let s = ray.origin - v0;
        let u = s.dot(&p) * inv;
        if !(0.0..=1.0).contains(&u) {
            return None;
        }
        let q = s.cross(&e1);
        let v = ray.direction.dot(&q) * inv;
        if v < 0.0 || u + v > 1.0 {
            return None;
        }
        let t = e2.dot(&q) * inv;
        (t >= ray.t_min && t <= ray.t_max).then_some(t)
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        let [a, b, c] = &self.vertices;
        (a.inf(b).inf(c), a.sup(b).sup(c))
    }

    pub fn centroid(&self) -> Vec3 {
        (self.vertices[0] + self.vertices[1] + self.vertices[2]) / 3.0
    }
}

/// Two triangles spanning `corner`, `corner + u`, `corner + u + v`, `corner + v`.
/// The front face normal is `u x v`.
pub fn quad(corner: Vec3, u: Vec3, v: Vec3, material: MeshMaterial, object: u32) -> Result<[Triangle; 2]> {
    Ok([
        Triangle::new(corner, corner + u, corner + u + v, material, object)?,
        Triangle::new(corner, corner + u + v, corner + v, material, object)?,
    ])
}

/// Axis-aligned box with outward-facing triangles.
pub fn cuboid(min: Vec3, max: Vec3, material: MeshMaterial, object: u32) -> Result<Vec<Triangle>> {
    let d = max - min;
    let (x, y, z) = (Vec3::x() * d.x, Vec3::y() * d.y, Vec3::z() * d.z);
    let faces = [
        (min, z, y),
        (min, x, z),
        (min, y, x),
        (max, -y, -z),
        (max, -z, -x),
        (max, -x, -y),
    ];
    let mut out = Vec::with_capacity(12);
    for (c, u, v) in faces {
        out.extend(quad(c, u, v, material, object)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct Scene {
    pub gaussians: Vec<GaussianPrimitive>,
    pub triangles: Vec<Triangle>,
    pub lights: Vec<Light>,
}

impl Scene {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        for g in &self.gaussians {
            g.validate()?;
        }
        for l in &self.lights {
            l.validate()?;
        }
        Ok(())
    }

    /// First environment light, if any.
    pub fn environment(&self) -> Option<&EnvMap> {
        self.lights.iter().find_map(|l| match l {
            Light::Environment(env) => Some(env),
            _ => None,
        })
    }

    pub fn environment_radiance(&self, dir: &Vec3) -> Rgb {
        self.environment()
            .map(|e| e.radiance(dir))
            .unwrap_or_else(Rgb::zeros)
    }
}
