use crate::camera::CameraModel;
use crate::gsmath::{covariance, max_response_depth_from_inverse, project_with_covariance, GaussianPrimitive, Sym2, COVARIANCE_FLOOR};
use crate::math::{Mat3, Vec2};

/// How splat depth varies across the footprint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DepthMode {
    /// Plane through the max-response depths at the center and two axis probes.
    #[default]
    Gradient,
    /// Center depth everywhere.
    Constant,
}

/// Screen-space hexagon circumscribing the k-sigma ellipse of one Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HexagonSplat {
    pub id: u32,
    /// Counterclockwise in pixel coordinates.
    pub vertices: [Vec2; 6],
    /// Linear view depth at each vertex.
    pub depths: [f64; 6],
    pub center: Vec2,
    /// Max-response view depth of the center pixel ray.
    pub depth_center: f64,
    /// View depth change per pixel.
    pub depth_gradient: Vec2,
    /// Inverse pixel-space covariance.
    pub inv_cov: Sym2,
    pub opacity: f64,
    /// Ellipse axes scaled by k-sigma extents (major first).
    pub axes: [Vec2; 2],
    pub bbox_min: Vec2,
    pub bbox_max: Vec2,
}

impl HexagonSplat {
    pub fn depth_at(&self, p: &Vec2) -> f64 {
        self.depth_center + self.depth_gradient.dot(&(p - self.center))
    }

    /// Point-in-hexagon test in the ellipse's unit frame.
    pub fn contains(&self, p: &Vec2) -> bool {
        let d = p - self.center;
        let u = d.dot(&self.axes[0]) / self.axes[0].norm_squared();
        let v = d.dot(&self.axes[1]) / self.axes[1].norm_squared();
        let s = 0.5 * 3f64.sqrt();
        u.abs() <= 1.0 + 1e-12 && (0.5 * u + s * v).abs() <= 1.0 + 1e-12 && (-0.5 * u + s * v).abs() <= 1.0 + 1e-12
    }

    /// Projected 2D Gaussian response at a pixel position.
    pub fn response(&self, p: &Vec2) -> f64 {
        self.opacity * (-0.5 * self.inv_cov.quadratic(&(p - self.center))).exp()
    }
}

/// One hexagon per visible Gaussian, sorted far-to-near by center depth.
pub fn spawn_hexagons(
    gaussians: &[GaussianPrimitive],
    camera: &CameraModel,
    k_sigma: f64,
    min_extent_px: f64,
    mode: DepthMode,
) -> Vec<HexagonSplat> {
    let mut out: Vec<HexagonSplat> = gaussians
        .iter()
        .enumerate()
        .filter_map(|(i, g)| spawn_one(i as u32, g, camera, k_sigma, min_extent_px, mode))
        .collect();
    out.sort_by(|a, b| b.depth_center.total_cmp(&a.depth_center).then(a.id.cmp(&b.id)));
    out
}

fn spawn_one(
    id: u32,
    g: &GaussianPrimitive,
    camera: &CameraModel,
    k_sigma: f64,
    min_extent_px: f64,
    mode: DepthMode,
) -> Option<HexagonSplat> {
    let cov = covariance(g);
    let proj = project_with_covariance(&g.center, &cov, camera)?;
    let (l1, l2, e1) = proj.cov.eigen();
    let e2 = Vec2::new(-e1.y, e1.x);
    let a = k_sigma * l1.sqrt();
    let b = k_sigma * l2.sqrt();
    if a < min_extent_px {
        return None;
    }
    let c = proj.mean;
    let axes = [e1 * a, e2 * b];
    let r = 2.0 / 3f64.sqrt();
    let mut vertices = [Vec2::zeros(); 6];
    for (k, v) in vertices.iter_mut().enumerate() {
        let th = (30.0 + 60.0 * k as f64).to_radians();
        *v = c + axes[0] * (r * th.cos()) + axes[1] * (r * th.sin());
    }
    let mut bbox_min = vertices[0];
    let mut bbox_max = vertices[0];
    for v in &vertices[1..] {
        bbox_min = bbox_min.inf(v);
        bbox_max = bbox_max.sup(v);
    }
    if bbox_max.x < 0.0 || bbox_max.y < 0.0 || bbox_min.x > camera.width as f64 || bbox_min.y > camera.height as f64 {
        return None;
    }
    let inv3 = inverse_floored3(&cov);
    let probe = |p: Vec2| -> f64 {
        let ray = camera.ray_through(p.x, p.y);
        let t = max_response_depth_from_inverse(&g.center, &inv3, &ray);
        t * ray.direction.dot(&camera.forward)
    };
    let depth_center = proj.depth;
    let depth_gradient = match mode {
        DepthMode::Constant => Vec2::zeros(),
        DepthMode::Gradient => {
            let dx = probe(c + axes[0]) - depth_center;
            let dy = probe(c + axes[1]) - depth_center;
            let gb = if b > 1e-12 { e2 * (dy / b) } else { Vec2::zeros() };
            e1 * (dx / a) + gb
        }
    };
    let mut depths = [0.0; 6];
    for (d, v) in depths.iter_mut().zip(&vertices) {
        *d = depth_center + depth_gradient.dot(&(v - c));
    }
    Some(HexagonSplat {
        id,
        vertices,
        depths,
        center: c,
        depth_center,
        depth_gradient,
        inv_cov: proj.cov.inverse_floored(COVARIANCE_FLOOR),
        opacity: g.opacity,
        axes,
        bbox_min,
        bbox_max,
    })
}

fn inverse_floored3(cov: &Mat3) -> Mat3 {
    let eig = cov.symmetric_eigen();
    let vals = eig.eigenvalues.map(|l| 1.0 / l.max(COVARIANCE_FLOOR));
    eig.eigenvectors * Mat3::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gsmath::max_response_depth;
    use crate::math::Vec3;
    use crate::rng::seeded;
    use nalgebra::UnitQuaternion;
    use rand::Rng;

    fn camera() -> CameraModel {
        CameraModel::look_at(Vec3::zeros(), Vec3::z(), Vec3::y(), 60.0, 128, 128).unwrap()
    }

    fn signed_area(v: &[Vec2; 6]) -> f64 {
        (0..6).map(|i| v[i].perp(&v[(i + 1) % 6])).sum::<f64>() * 0.5
    }

    #[test]
    fn on_axis_gives_regular_hexagon() {
        let cam = camera();
        let g = GaussianPrimitive::isotropic(Vec3::new(0.0, 0.0, 3.0), 0.1, 1.0);
        let h = spawn_hexagons(&[g], &cam, 3.0, 0.3, DepthMode::Gradient)[0];
        let radii: Vec<f64> = h.vertices.iter().map(|v| (v - h.center).norm()).collect();
        let edges: Vec<f64> = (0..6).map(|i| (h.vertices[(i + 1) % 6] - h.vertices[i]).norm()).collect();
        for k in 1..6 {
            assert!((radii[k] - radii[0]).abs() < 1e-4);
            assert!((edges[k] - edges[0]).abs() < 1e-4);
        }
        assert!(signed_area(&h.vertices) > 0.0);
        assert!((h.depth_center - 3.0).abs() < 1e-12);
    }

    #[test]
    fn center_depth_is_center_ray_max_response() {
        let cam = camera();
        let mut rng = seeded(3);
        for _ in 0..50 {
            let g = GaussianPrimitive::new(
                Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(3.0..6.0)),
                Vec3::new(rng.random_range(0.05..0.3), rng.random_range(0.05..0.3), rng.random_range(0.01..0.3)),
                UnitQuaternion::from_euler_angles(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), 0.4),
                0.8,
            );
            let Some(h) = spawn_hexagons(&[g], &cam, 3.0, 0.3, DepthMode::Gradient).pop() else { continue };
            let ray = cam.ray_through(h.center.x, h.center.y);
            let z = max_response_depth(&g, &ray) * ray.direction.dot(&cam.forward);
            assert!((h.depth_center - z).abs() < 1e-9);
        }
    }

    #[test]
    fn ellipse_inside_hexagon_and_ccw() {
        let cam = camera();
        let mut rng = seeded(4);
        for _ in 0..50 {
            let g = GaussianPrimitive::new(
                Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(3.0..6.0)),
                Vec3::new(rng.random_range(0.05..0.3), rng.random_range(0.05..0.3), rng.random_range(0.01..0.3)),
                UnitQuaternion::from_euler_angles(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), 0.1),
                0.8,
            );
            let Some(h) = spawn_hexagons(&[g], &cam, 3.0, 0.3, DepthMode::Gradient).pop() else { continue };
            assert!(signed_area(&h.vertices) > 0.0);
            for k in 0..64 {
                let th = k as f64 / 64.0 * std::f64::consts::TAU;
                let p = h.center + h.axes[0] * th.cos() + h.axes[1] * th.sin();
                assert!(h.contains(&p));
            }
            for v in &h.vertices {
                assert!(h.contains(v));
                assert!(!h.contains(&(h.center + (v - h.center) * 1.01)));
            }
        }
    }

    #[test]
    fn oblique_flat_gaussian_depth_matches_pixel_rays() {
        let cam = camera();
        // Thin disc facing +z, tilted 50 degrees about x. The plane's depth is
        // hyperbolic in screen space, so the linear fit error grows with size.
        let g = GaussianPrimitive::new(
            Vec3::new(0.2, -0.1, 4.0),
            Vec3::new(0.08, 0.08, 0.004),
            UnitQuaternion::from_euler_angles(50f64.to_radians(), 0.0, 0.0),
            1.0,
        );
        let h = spawn_hexagons(&[g], &cam, 3.0, 0.3, DepthMode::Gradient)[0];
        let extent = h.depths.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - h.depths.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(extent > 0.3);
        let mut rng = seeded(5);
        let mut n = 0;
        while n < 100 {
            let p = Vec2::new(
                rng.random_range(h.bbox_min.x..h.bbox_max.x),
                rng.random_range(h.bbox_min.y..h.bbox_max.y),
            );
            if !h.contains(&p) {
                continue;
            }
            let ray = cam.ray_through(p.x, p.y);
            let z = max_response_depth(&g, &ray) * ray.direction.dot(&cam.forward);
            assert!((h.depth_at(&p) - z).abs() <= 0.05 * extent, "{} vs {}", h.depth_at(&p), z);
            n += 1;
        }
    }

    #[test]
    fn culls_behind_tiny_and_offscreen() {
        let cam = camera();
        let behind = GaussianPrimitive::isotropic(Vec3::new(0.0, 0.0, -3.0), 0.1, 1.0);
        let tiny = GaussianPrimitive::isotropic(Vec3::new(0.0, 0.0, 50.0), 0.0005, 1.0);
        let off = GaussianPrimitive::isotropic(Vec3::new(30.0, 0.0, 3.0), 0.1, 1.0);
        assert!(spawn_hexagons(&[behind, tiny, off], &cam, 3.0, 0.3, DepthMode::Gradient).is_empty());
    }

    #[test]
    fn sorted_far_to_near() {
        let cam = camera();
        let gs: Vec<_> = [2.0, 5.0, 3.0]
            .iter()
            .map(|&z| GaussianPrimitive::isotropic(Vec3::new(0.0, 0.0, z), 0.1, 1.0))
            .collect();
        let ids: Vec<u32> = spawn_hexagons(&gs, &cam, 3.0, 0.3, DepthMode::Gradient).iter().map(|h| h.id).collect();
        assert_eq!(ids, vec![1, 2, 0]);
    }
}
