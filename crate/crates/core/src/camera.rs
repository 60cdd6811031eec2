//! Pinhole camera. Image `x` grows to the right and `y` grows downward;
//! pixel `(i, j)` has its center at `(i + 0.5, j + 0.5)`.

use crate::error::{Error, Result};
use crate::gsmath::Ray;
use crate::math::{Vec2, Vec3};

pub const DEFAULT_NEAR: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub position: Vec3,
    pub forward: Vec3,
    pub right: Vec3,
    pub down: Vec3,
    pub fov_y_deg: f64,
    pub width: usize,
    pub height: usize,
    pub near: f64,
    focal: f64,
}

impl CameraModel {
    pub fn look_at(
        position: Vec3,
        target: Vec3,
        up: Vec3,
        fov_y_deg: f64,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("camera", "zero resolution"));
        }
        if !(fov_y_deg > 1.0 && fov_y_deg < 179.0) {
            return Err(Error::invalid(
                "camera",
                format!("vertical field of view {fov_y_deg} outside (1, 179) degrees"),
            ));
        }
        let forward = target - position;
        if forward.norm() < 1e-12 {
            return Err(Error::invalid("camera", "look-at target equals position"));
        }
        let forward = forward.normalize();
        let right = forward.cross(&up);
        if right.norm() < 1e-9 {
            return Err(Error::invalid("camera", "up vector parallel to view direction"));
        }
        let right = right.normalize();
        let down = forward.cross(&right);
        let focal = 0.5 * height as f64 / (0.5 * fov_y_deg.to_radians()).tan();
        Ok(CameraModel {
            position,
            forward,
            right,
            down,
            fov_y_deg,
            width,
            height,
            near: DEFAULT_NEAR,
            focal,
        })
    }

    /// Focal length in pixels.
    pub fn focal(&self) -> f64 {
        self.focal
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(0.5 * self.width as f64, 0.5 * self.height as f64)
    }

    pub fn with_resolution(&self, width: usize, height: usize) -> Result<Self> {
        let mut c = *self;
        if width == 0 || height == 0 {
            return Err(Error::invalid("camera", "zero resolution"));
        }
        c.width = width;
        c.height = height;
        c.focal = 0.5 * height as f64 / (0.5 * self.fov_y_deg.to_radians()).tan();
        Ok(c)
    }

    /// World-to-camera coordinates (x right, y down, z forward).
    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        let d = p - self.position;
        Vec3::new(d.dot(&self.right), d.dot(&self.down), d.dot(&self.forward))
    }

    /// Linear view depth of a world point.
    pub fn view_depth(&self, p: &Vec3) -> f64 {
        (p - self.position).dot(&self.forward)
    }

    /// Unit world direction through continuous pixel coordinates.
    pub fn direction(&self, px: f64, py: f64) -> Vec3 {
        let c = self.center();
        let x = (px - c.x) / self.focal;
        let y = (py - c.y) / self.focal;
        (self.right * x + self.down * y + self.forward).normalize()
    }

    pub fn pixel_ray(&self, x: usize, y: usize) -> Ray {
        self.ray_through(x as f64 + 0.5, y as f64 + 0.5)
    }

    pub fn ray_through(&self, px: f64, py: f64) -> Ray {
        Ray::new(self.position, self.direction(px, py))
    }

    /// Perspective projection; `None` when the point is in front of the near plane.
    pub fn project(&self, p: &Vec3) -> Option<(Vec2, f64)> {
        let q = self.to_camera(p);
        if q.z < self.near {
            return None;
        }
        let c = self.center();
        Some((
            Vec2::new(self.focal * q.x / q.z + c.x, self.focal * q.y / q.z + c.y),
            q.z,
        ))
    }

    /// World point on the pixel ray at linear view depth `z`.
    pub fn unproject(&self, px: f64, py: f64, z: f64) -> Vec3 {
        let c = self.center();
        let x = (px - c.x) / self.focal;
        let y = (py - c.y) / self.focal;
        self.position + (self.right * x + self.down * y + self.forward) * z
    }

    /// Angle subtended by one pixel near the optical axis.
    pub fn pixel_angle(&self) -> f64 {
        1.0 / self.focal
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam() -> CameraModel {
        CameraModel::look_at(
            Vec3::new(0.0, 1.0, -4.0),
            Vec3::new(0.2, 0.5, 0.0),
            Vec3::y(),
            50.0,
            64,
            48,
        )
        .unwrap()
    }

    #[test]
    fn project_unproject_round_trip() {
        let c = cam();
        let p = Vec3::new(0.4, 0.3, 1.0);
        let (uv, z) = c.project(&p).unwrap();
        let q = c.unproject(uv.x, uv.y, z);
        assert!((p - q).norm() < 1e-12);
        let r = c.ray_through(uv.x, uv.y);
        let t = (p - r.origin).norm();
        assert!((r.at(t) - p).norm() < 1e-9);
    }

    #[test]
    fn image_y_points_down() {
        let c = cam();
        let above = c.position + c.forward * 3.0 - c.down;
        let (uv, _) = c.project(&above).unwrap();
        assert!(uv.y < c.center().y);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(CameraModel::look_at(Vec3::zeros(), Vec3::z(), Vec3::y(), 45.0, 0, 4).is_err());
        assert!(CameraModel::look_at(Vec3::zeros(), Vec3::z(), Vec3::y(), 180.0, 4, 4).is_err());
        assert!(CameraModel::look_at(Vec3::zeros(), Vec3::z(), Vec3::z(), 45.0, 4, 4).is_err());
        let c = cam();
        assert!(c.project(&(c.position - c.forward)).is_none());
    }
}
