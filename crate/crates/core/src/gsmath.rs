//! Closed-form response math for anisotropic 3D Gaussians.
//!
//! A Gaussian's response along a ray is its orthographic splat evaluated at
//! the ray footprint: `o * exp(-0.5 * d^T S^-1 d)` with `S` the 2D marginal
//! covariance in the plane orthogonal to the ray. By the Schur complement
//! this equals the peak of the unnormalized density along the ray line,
//! reached at the max-response depth.

use nalgebra::{Matrix2, UnitQuaternion};

use crate::camera::CameraModel;
use crate::error::{Error, Result};
use crate::math::{orthonormal_basis, Mat3, Rgb, Vec2, Vec3};

/// Response cutoff; hits below this are ignored everywhere.
pub const ALPHA_MIN: f64 = 1.0 / 255.0;
/// Eigenvalue floor applied before inverting any covariance (world units^2).
pub const COVARIANCE_FLOOR: f64 = 1e-7;
const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
    pub t_min: f64,
    pub t_max: f64,
}

impl Ray {
    pub fn new(origin: Vec3, direction: Vec3) -> Self {
        Ray {
            origin,
            direction,
            t_min: 0.0,
            t_max: f64::INFINITY,
        }
    }

    pub fn segment(origin: Vec3, direction: Vec3, t_min: f64, t_max: f64) -> Self {
        Ray {
            origin,
            direction,
            t_min,
            t_max,
        }
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }

    pub fn validate(&self) -> Result<()> {
        if (self.direction.norm() - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::invalid("ray", "direction is not unit length"));
        }
        if !(self.t_min >= 0.0 && self.t_min < self.t_max) {
            return Err(Error::invalid("ray", "require 0 <= t_min < t_max"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPrimitive {
    pub center: Vec3,
    /// Per-axis standard deviations in the rotated frame.
    pub scale: Vec3,
    pub rotation: UnitQuaternion<f64>,
    pub opacity: f64,
    pub albedo: Rgb,
    pub roughness: f64,
    pub normal: Vec3,
    pub emission: Rgb,
}

impl GaussianPrimitive {
    /// Gaussian with default material: grey albedo, rough, non-emissive,
    /// normal along the thinnest axis.
    pub fn new(center: Vec3, scale: Vec3, rotation: UnitQuaternion<f64>, opacity: f64) -> Self {
        let normal = default_normal(&scale, &rotation, None);
        GaussianPrimitive {
            center,
            scale,
            rotation,
            opacity,
            albedo: Rgb::new(0.5, 0.5, 0.5),
            roughness: 0.8,
            normal,
            emission: Rgb::zeros(),
        }
    }

    pub fn isotropic(center: Vec3, sigma: f64, opacity: f64) -> Self {
        Self::new(center, Vec3::repeat(sigma), UnitQuaternion::identity(), opacity)
    }

    pub fn with_albedo(mut self, albedo: Rgb) -> Self {
        self.albedo = albedo;
        self
    }

    pub fn with_emission(mut self, emission: Rgb) -> Self {
        self.emission = emission;
        self
    }

    pub fn with_roughness(mut self, roughness: f64) -> Self {
        self.roughness = roughness;
        self
    }

    pub fn with_normal(mut self, normal: Vec3) -> Self {
        self.normal = normal;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.scale.iter().all(|s| *s > 0.0 && s.is_finite()) {
            return Err(Error::invalid("gaussian", "scale components must be positive"));
        }
        if (self.rotation.as_ref().norm() - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::invalid("gaussian", "rotation quaternion not normalized"));
        }
        if !(self.opacity > 0.0 && self.opacity <= 1.0) {
            return Err(Error::invalid("gaussian", "opacity outside (0, 1]"));
        }
        if (self.normal.norm() - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::invalid("gaussian", "normal is not unit length"));
        }
        if !(0.0..=1.0).contains(&self.roughness) {
            return Err(Error::invalid("gaussian", "roughness outside [0, 1]"));
        }
        if self.emission.iter().any(|e| *e < 0.0) {
            return Err(Error::invalid("gaussian", "negative emission"));
        }
        Ok(())
    }

    pub fn rotation_matrix(&self) -> Mat3 {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn covariance(&self) -> Mat3 {
        covariance(self)
    }

    /// `Sigma^-1` with every eigenvalue floored at [`COVARIANCE_FLOOR`].
    pub fn inverse_covariance(&self) -> Mat3 {
        let r = self.rotation_matrix();
        let inv = self
            .scale
            .map(|s| 1.0 / (s * s).max(COVARIANCE_FLOOR));
        r * Mat3::from_diagonal(&inv) * r.transpose()
    }
}

/// Thinnest rotated axis, oriented toward `view` when given and toward +z otherwise.
pub fn default_normal(scale: &Vec3, rotation: &UnitQuaternion<f64>, view: Option<Vec3>) -> Vec3 {
    let axis = scale.imin();
    let r = rotation.to_rotation_matrix().into_inner();
    let n: Vec3 = r.column(axis).into_owned();
    let toward = view.unwrap_or_else(Vec3::z);
    if n.dot(&toward) < 0.0 {
        -n
    } else {
        n
    }
}

/// `R diag(s^2) R^T`.
pub fn covariance(g: &GaussianPrimitive) -> Mat3 {
    let r = g.rotation_matrix();
    let s2 = g.scale.component_mul(&g.scale);
    r * Mat3::from_diagonal(&s2) * r.transpose()
}

/// Effective opacity of `g` seen along `r`.
pub fn particle_response(g: &GaussianPrimitive, r: &Ray) -> f64 {
    response_from_covariance(&g.center, &covariance(g), g.opacity, r)
}

/// Orthographic splat of the covariance along the ray direction, evaluated
/// at the ray footprint.
pub fn response_from_covariance(center: &Vec3, cov: &Mat3, opacity: f64, r: &Ray) -> f64 {
    let (e1, e2) = orthonormal_basis(&r.direction);
    let d = center - r.origin;
    let off = Vec2::new(d.dot(&e1), d.dot(&e2));
    let ce1 = cov * e1;
    let ce2 = cov * e2;
    let s = Sym2 {
        a: e1.dot(&ce1),
        b: e1.dot(&ce2),
        c: e2.dot(&ce2),
    };
    let inv = s.inverse_floored(COVARIANCE_FLOOR);
    opacity * (-0.5 * inv.quadratic(&off)).exp()
}

/// Ray parameter where the Gaussian density along the ray peaks.
pub fn max_response_depth(g: &GaussianPrimitive, r: &Ray) -> f64 {
    max_response_depth_from_inverse(&g.center, &g.inverse_covariance(), r)
}

pub fn max_response_depth_from_inverse(center: &Vec3, inv_cov: &Mat3, r: &Ray) -> f64 {
    let w = inv_cov * r.direction;
    let denom = r.direction.dot(&w);
    (center - r.origin).dot(&w) / denom
}

/// Symmetric 2x2 matrix `[[a, b], [b, c]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Sym2 {
    pub fn from_matrix(m: &Matrix2<f64>) -> Self {
        Sym2 {
            a: m[(0, 0)],
            b: 0.5 * (m[(0, 1)] + m[(1, 0)]),
            c: m[(1, 1)],
        }
    }

    pub fn to_matrix(self) -> Matrix2<f64> {
        Matrix2::new(self.a, self.b, self.b, self.c)
    }

    /// Eigenvalues (descending) and the unit eigenvector of the larger one.
    pub fn eigen(&self) -> (f64, f64, Vec2) {
        let m = 0.5 * (self.a + self.c);
        let h = 0.5 * (self.a - self.c);
        let r = (h * h + self.b * self.b).sqrt();
        let l1 = m + r;
        let l2 = m - r;
        let v = if self.b.abs() > 1e-300 {
            Vec2::new(self.b, l1 - self.a).normalize()
        } else if self.a >= self.c {
            Vec2::new(1.0, 0.0)
        } else {
            Vec2::new(0.0, 1.0)
        };
        (l1, l2, v)
    }

    pub fn with_floor(&self, floor: f64) -> Sym2 {
        let (l1, l2, v) = self.eigen();
        if l2 >= floor {
            return *self;
        }
        let l1 = l1.max(floor);
        let l2 = l2.max(floor);
        let w = Vec2::new(-v.y, v.x);
        Sym2 {
            a: l1 * v.x * v.x + l2 * w.x * w.x,
            b: l1 * v.x * v.y + l2 * w.x * w.y,
            c: l1 * v.y * v.y + l2 * w.y * w.y,
        }
    }

    pub fn inverse_floored(&self, floor: f64) -> Sym2 {
        let s = self.with_floor(floor);
        let det = s.a * s.c - s.b * s.b;
        Sym2 {
            a: s.c / det,
            b: -s.b / det,
            c: s.a / det,
        }
    }

    pub fn quadratic(&self, v: &Vec2) -> f64 {
        self.a * v.x * v.x + 2.0 * self.b * v.x * v.y + self.c * v.y * v.y
    }
}

/// Screen-space footprint of a Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedGaussian {
    /// Pixel coordinates of the projected center.
    pub mean: Vec2,
    /// Pixel-space covariance after eigenvalue flooring.
    pub cov: Sym2,
    /// Linear view depth of the center.
    pub depth: f64,
}

/// EWA projection with the perspective Jacobian at the center.
/// Returns `None` (culled) when the center is not in front of the near plane.
pub fn project_covariance(g: &GaussianPrimitive, camera: &CameraModel) -> Option<ProjectedGaussian> {
    project_with_covariance(&g.center, &covariance(g), camera)
}

pub fn project_with_covariance(
    center: &Vec3,
    cov: &Mat3,
    camera: &CameraModel,
) -> Option<ProjectedGaussian> {
    let (mean, depth) = camera.project(center)?;
    let q = camera.to_camera(center);
    let f = camera.focal();
    let iz = 1.0 / q.z;
    // Jacobian rows expressed directly in world space (camera rotation folded in).
    let j0 = (camera.right - camera.forward * (q.x * iz)) * (f * iz);
    let j1 = (camera.down - camera.forward * (q.y * iz)) * (f * iz);
    let c0 = cov * j0;
    let c1 = cov * j1;
    let s = Sym2 {
        a: j0.dot(&c0),
        b: j0.dot(&c1),
        c: j1.dot(&c1),
    };
    Some(ProjectedGaussian {
        mean,
        cov: s.with_floor(COVARIANCE_FLOOR),
        depth,
    })
}
