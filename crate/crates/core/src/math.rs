//! Small vector helpers shared by every pass.

use nalgebra::{Matrix3, Vector2, Vector3};
use std::f64::consts::PI;

pub type Vec3 = Vector3<f64>;
pub type Vec2 = Vector2<f64>;
pub type Mat3 = Matrix3<f64>;
/// Linear RGB radiance or reflectance.
pub type Rgb = Vector3<f64>;

pub const INV_PI: f64 = 1.0 / PI;

pub fn luminance(c: &Rgb) -> f64 {
    0.2126 * c.x + 0.7152 * c.y + 0.0722 * c.z
}

pub fn black() -> Rgb {
    Rgb::zeros()
}

pub fn grey(v: f64) -> Rgb {
    Rgb::new(v, v, v)
}

/// Branchless orthonormal basis (Duff et al.); returns (tangent, bitangent).
pub fn orthonormal_basis(n: &Vec3) -> (Vec3, Vec3) {
    let sign = 1.0f64.copysign(n.z);
    let a = -1.0 / (sign + n.z);
    let b = n.x * n.y * a;
    let t = Vec3::new(1.0 + sign * n.x * n.x * a, sign * b, -sign * n.x);
    let bt = Vec3::new(b, sign + n.y * n.y * a, -n.y);
    (t, bt)
}

/// Local frame with `z` along a unit normal.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub t: Vec3,
    pub b: Vec3,
    pub n: Vec3,
}

impl Frame {
    pub fn from_normal(n: Vec3) -> Self {
        let (t, b) = orthonormal_basis(&n);
        Frame { t, b, n }
    }

    pub fn to_world(&self, v: &Vec3) -> Vec3 {
        self.t * v.x + self.b * v.y + self.n * v.z
    }

    pub fn to_local(&self, v: &Vec3) -> Vec3 {
        Vec3::new(v.dot(&self.t), v.dot(&self.b), v.dot(&self.n))
    }
}

/// Cosine-weighted hemisphere direction around +z; pdf = cos/pi.
pub fn cosine_hemisphere(u1: f64, u2: f64) -> Vec3 {
    let r = u1.sqrt();
    let phi = 2.0 * PI * u2;
    Vec3::new(r * phi.cos(), r * phi.sin(), (1.0 - u1).max(0.0).sqrt())
}

/// Uniform direction on the unit sphere.
pub fn uniform_sphere(u1: f64, u2: f64) -> Vec3 {
    let z = 1.0 - 2.0 * u1;
    let r = (1.0 - z * z).max(0.0).sqrt();
    let phi = 2.0 * PI * u2;
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}

pub fn reflect(v: &Vec3, n: &Vec3) -> Vec3 {
    v - n * (2.0 * v.dot(n))
}

pub fn smoothstep(e0: f64, e1: f64, x: f64) -> f64 {
    let t = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

pub fn is_finite_rgb(c: &Rgb) -> bool {
    c.iter().all(|v| v.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_is_orthonormal() {
        for n in [
            Vec3::z(),
            -Vec3::z(),
            Vec3::new(0.3, -0.5, 0.8).normalize(),
            Vec3::new(-1.0, 1e-9, -1e-9).normalize(),
        ] {
            let f = Frame::from_normal(n);
            assert!((f.t.norm() - 1.0).abs() < 1e-12);
            assert!((f.b.norm() - 1.0).abs() < 1e-12);
            assert!(f.t.dot(&f.b).abs() < 1e-12);
            assert!(f.t.dot(&n).abs() < 1e-12);
            assert!((f.t.cross(&f.b) - n).norm() < 1e-12);
            let v = Vec3::new(0.1, 0.2, 0.9);
            assert!((f.to_local(&f.to_world(&v)) - v).norm() < 1e-12);
        }
    }

    #[test]
    fn smoothstep_edges() {
        assert_eq!(smoothstep(0.25, 0.6, 0.1), 0.0);
        assert_eq!(smoothstep(0.25, 0.6, 0.9), 1.0);
        assert!((smoothstep(0.0, 1.0, 0.5) - 0.5).abs() < 1e-12);
    }
}
