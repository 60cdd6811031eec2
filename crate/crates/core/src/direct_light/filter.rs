use rayon::prelude::*;

use crate::camera::CameraModel;
use crate::image::Image;
use crate::math::{Rgb, Vec3};
use crate::raster::GBuffer;

pub const DIRECT_TEMPORAL_ALPHA: f64 = 0.1;
/// Relative depth change beyond which history is rejected.
pub const HISTORY_DEPTH_TOLERANCE: f64 = 0.05;
pub const HISTORY_NORMAL_DOT: f64 = 0.9;

/// Previous frame's filtered signal with the geometry it was computed on.
#[derive(Debug, Clone)]
pub struct History {
    pub values: Image<Rgb>,
    pub depth: Image<f64>,
    pub normal: Image<Vec3>,
    pub camera: CameraModel,
}

impl History {
    pub fn new(values: Image<Rgb>, gbuffer: &GBuffer, camera: &CameraModel) -> Self {
        History {
            values,
            depth: gbuffer.map(|p| if p.is_covered() { p.depth } else { f64::INFINITY }),
            normal: gbuffer.map(|p| p.normal),
            camera: *camera,
        }
    }

    /// Previous-frame pixel that `position` (with `normal`) reprojects to,
    /// if it passes the disocclusion tests.
    pub fn reproject(&self, position: &Vec3, normal: &Vec3) -> Option<(usize, usize)> {
        let (p, z) = self.camera.project(position)?;
        if p.x < 0.0 || p.y < 0.0 {
            return None;
        }
        let (x, y) = (p.x as usize, p.y as usize);
        if x >= self.depth.width || y >= self.depth.height {
            return None;
        }
        let d = *self.depth.get(x, y);
        if !d.is_finite() || (d - z).abs() > HISTORY_DEPTH_TOLERANCE * d {
            return None;
        }
        if self.normal.get(x, y).dot(normal) < HISTORY_NORMAL_DOT {
            return None;
        }
        Some((x, y))
    }
}

/// Edge-aware (2r+1)^2 blur with binomial spatial weights and depth/normal
/// similarity weights. Uncovered pixels pass through.
pub fn spatial_filter(buf: &Image<Rgb>, g: &GBuffer, radius: usize) -> Image<Rgb> {
    assert!(buf.same_size(g));
    let (w, h) = (buf.width, buf.height);
    let kernel: Vec<f64> = (0..=2 * radius).map(|k| binomial(2 * radius, k)).collect();
    let mut out = buf.clone();
    out.data.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, o) in row.iter_mut().enumerate() {
            let c = g.get(x, y);
            if !c.is_covered() {
                continue;
            }
            let mut sum = Rgb::zeros();
            let mut wsum = 0.0;
            for (ky, dy) in (-(radius as isize)..=radius as isize).enumerate() {
                let yy = y as isize + dy;
                if yy < 0 || yy >= h as isize {
                    continue;
                }
                for (kx, dx) in (-(radius as isize)..=radius as isize).enumerate() {
                    let xx = x as isize + dx;
                    if xx < 0 || xx >= w as isize {
                        continue;
                    }
                    let q = g.get(xx as usize, yy as usize);
                    if !q.is_covered() {
                        continue;
                    }
                    let dz = (q.depth - c.depth) / (0.05 * c.depth.max(1e-6));
                    let wn = c.normal.dot(&q.normal).max(0.0).powi(16);
                    let wgt = kernel[kx] * kernel[ky] * (-dz * dz).exp() * wn;
                    sum += buf.get(xx as usize, yy as usize) * wgt;
                    wsum += wgt;
                }
            }
            if wsum > 0.0 {
                *o = sum / wsum;
            }
        }
    });
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Exponential blend with reprojected history; rejected or missing history
/// keeps the current value.
pub fn temporal_blend(
    current: &Image<Rgb>,
    g: &GBuffer,
    camera: &CameraModel,
    history: Option<&History>,
    alpha: f64,
) -> (Image<Rgb>, History) {
    let mut out = current.clone();
    if let Some(hist) = history {
        out.data.par_iter_mut().enumerate().for_each(|(i, o)| {
            let p = &g.data[i];
            if !p.is_covered() {
                return;
            }
            if let Some((x, y)) = hist.reproject(&p.position, &p.normal) {
                *o = *o * alpha + hist.values.get(x, y) * (1.0 - alpha);
            }
        });
    }
    let hist = History::new(out.clone(), g, camera);
    (out, hist)
}

/// 5x5 edge-aware spatial pass followed by temporal accumulation.
pub fn filter_direct(
    current: &Image<Rgb>,
    history: Option<&History>,
    g: &GBuffer,
    camera: &CameraModel,
) -> (Image<Rgb>, History) {
    let spatial = spatial_filter(current, g, 2);
    temporal_blend(&spatial, g, camera, history, DIRECT_TEMPORAL_ALPHA)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::grey;
    use crate::raster::{render_gbuffer, RasterOptions};
    use crate::rng::seeded;
    use crate::scene::{quad, MeshMaterial, Scene};
    use rand::Rng;

    fn wall_scene() -> Scene {
        let mut s = Scene::new();
        s.triangles = quad(
            Vec3::new(-10.0, -10.0, 3.0),
            Vec3::new(20.0, 0.0, 0.0),
            Vec3::new(0.0, 20.0, 0.0),
            MeshMaterial::diffuse(grey(0.5)),
            0,
        )
        .unwrap()
        .to_vec();
        s
    }

    fn variance(img: &Image<Rgb>) -> f64 {
        let n = img.len() as f64;
        let m = img.data.iter().map(|c| c.x).sum::<f64>() / n;
        img.data.iter().map(|c| (c.x - m).powi(2)).sum::<f64>() / n
    }

    #[test]
    fn noise_variance_drops_over_frames() {
        let cam = CameraModel::look_at(Vec3::zeros(), Vec3::z(), Vec3::y(), 60.0, 32, 32).unwrap();
        let g = render_gbuffer(&wall_scene(), &cam, &RasterOptions::default());
        let mut rng = seeded(4);
        let mut hist = None;
        let mut input_var = 0.0;
        let mut out = None;
        for _ in 0..30 {
            let noisy = Image::from_vec(32, 32, (0..1024).map(|_| grey(1.0 + rng.random_range(-0.5..0.5))).collect());
            input_var = variance(&noisy);
            let (o, h) = filter_direct(&noisy, hist.as_ref(), &g, &cam);
            hist = Some(h);
            out = Some(o);
        }
        assert!(variance(&out.unwrap()) < 0.05 * input_var);
    }

    #[test]
    fn first_frame_is_spatial_only() {
        let cam = CameraModel::look_at(Vec3::zeros(), Vec3::z(), Vec3::y(), 60.0, 16, 16).unwrap();
        let g = render_gbuffer(&wall_scene(), &cam, &RasterOptions::default());
        let mut rng = seeded(5);
        let cur = Image::from_vec(16, 16, (0..256).map(|_| grey(rng.random())).collect());
        let (out, _) = filter_direct(&cur, None, &g, &cam);
        assert_eq!(out.data, spatial_filter(&cur, &g, 2).data);
    }

    #[test]
    fn teleport_rejects_history() {
        let cam = CameraModel::look_at(Vec3::zeros(), Vec3::z(), Vec3::y(), 60.0, 16, 16).unwrap();
        let g = render_gbuffer(&wall_scene(), &cam, &RasterOptions::default());
        let old = Image::new(16, 16, grey(100.0));
        let (_, hist) = temporal_blend(&old, &g, &cam, None, 0.1);
        // Turned around to face a different wall: nothing may be reused.
        let mut s2 = wall_scene();
        s2.triangles.extend(
            quad(
                Vec3::new(-10.0, -10.0, -3.0),
                Vec3::new(20.0, 0.0, 0.0),
                Vec3::new(0.0, 20.0, 0.0),
                MeshMaterial::diffuse(grey(0.5)),
                1,
            )
            .unwrap(),
        );
        let cam2 = CameraModel::look_at(Vec3::zeros(), -Vec3::z(), Vec3::y(), 60.0, 16, 16).unwrap();
        let g2 = render_gbuffer(&s2, &cam2, &RasterOptions::default());
        let cur = Image::new(16, 16, grey(1.0));
        let (out, _) = temporal_blend(&cur, &g2, &cam2, Some(&hist), 0.1);
        assert!(out.data.iter().all(|c| *c == grey(1.0)));

        // Moving closer to the same wall keeps valid history.
        let cam3 = CameraModel::look_at(Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, 3.0), Vec3::y(), 60.0, 16, 16).unwrap();
        let g3 = render_gbuffer(&wall_scene(), &cam3, &RasterOptions::default());
        let (out, _) = temporal_blend(&cur, &g3, &cam3, Some(&hist), 0.1);
        assert!(out.data.iter().all(|c| c.x > 1.0));
    }

    #[test]
    fn spatial_filter_respects_depth_edges() {
        let cam = CameraModel::look_at(Vec3::zeros(), Vec3::z(), Vec3::y(), 60.0, 16, 16).unwrap();
        let mut s = wall_scene();
        // Nearer half-wall covering the left half of the image.
        s.triangles.extend(
            quad(
                Vec3::new(-10.0, -10.0, 1.0),
                Vec3::new(10.0, 0.0, 0.0),
                Vec3::new(0.0, 20.0, 0.0),
                MeshMaterial::diffuse(grey(0.5)),
                1,
            )
            .unwrap(),
        );
        let g = render_gbuffer(&s, &cam, &RasterOptions::default());
        let cur = g.map(|p| if p.depth < 2.0 { grey(1.0) } else { grey(0.0) });
        let out = spatial_filter(&cur, &g, 2);
        for (a, b) in out.data.iter().zip(&cur.data) {
            assert!((a - b).norm() < 1e-6);
        }
    }
}
