use rayon::prelude::*;

use super::{GBuffer, GPixel, HexagonSplat, BAND_ROWS};
use crate::camera::CameraModel;
use crate::gsmath::{GaussianPrimitive, ALPHA_MIN};
use crate::image::Image;
use crate::math::{Rgb, Vec2, Vec3};
use crate::scene::DEFAULT_F0;

#[derive(Clone, Copy)]
struct Accum {
    a: f64,
    position: Vec3,
    normal: Vec3,
    albedo: Rgb,
    roughness: f64,
    emission: Rgb,
    depth: f64,
}

impl Accum {
    const ZERO: Accum = Accum {
        a: 0.0,
        position: Vec3::new(0.0, 0.0, 0.0),
        normal: Vec3::new(0.0, 0.0, 0.0),
        albedo: Rgb::new(0.0, 0.0, 0.0),
        roughness: 0.0,
        emission: Rgb::new(0.0, 0.0, 0.0),
        depth: 0.0,
    };

    /// Back-to-front "over": the new fragment lands in front of everything so far.
    fn over(&mut self, alpha: f64, f: &Fragment) {
        let k = 1.0 - alpha;
        self.a = alpha + k * self.a;
        self.position = f.position * alpha + self.position * k;
        self.normal = f.normal * alpha + self.normal * k;
        self.albedo = f.albedo * alpha + self.albedo * k;
        self.roughness = f.roughness * alpha + self.roughness * k;
        self.emission = f.emission * alpha + self.emission * k;
        self.depth = f.depth * alpha + self.depth * k;
    }

    fn resolve(&self) -> GPixel {
        if self.a <= 0.0 {
            return GPixel::empty();
        }
        let inv = 1.0 / self.a;
        let n = self.normal * inv;
        GPixel {
            opacity: self.a.min(1.0),
            position: self.position * inv,
            normal: if n.norm() > 1e-12 { n.normalize() } else { Vec3::zeros() },
            albedo: self.albedo * inv,
            roughness: self.roughness * inv,
            emission: self.emission * inv,
            f0: DEFAULT_F0,
            depth: self.depth * inv,
            mesh_weight: 0.0,
        }
    }
}

struct Fragment {
    position: Vec3,
    normal: Vec3,
    albedo: Rgb,
    roughness: f64,
    emission: Rgb,
    depth: f64,
}

/// Blends hexagons (already sorted far-to-near) into the Gaussian layer.
/// Fragments whose interpolated depth lies behind `mesh_depth` are dropped.
pub fn rasterize_gaussians(
    hexes: &[HexagonSplat],
    gaussians: &[GaussianPrimitive],
    mesh_depth: &Image<f64>,
    camera: &CameraModel,
) -> GBuffer {
    let (w, h) = (camera.width, camera.height);
    assert_eq!((mesh_depth.width, mesh_depth.height), (w, h), "mesh depth size mismatch");
    let bands = h.div_ceil(BAND_ROWS);
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); bands];
    for (i, hx) in hexes.iter().enumerate() {
        let Some((y0, y1)) = pixel_span(hx.bbox_min.y, hx.bbox_max.y, h) else { continue };
        for bin in &mut bins[y0 / BAND_ROWS..=y1 / BAND_ROWS] {
            bin.push(i as u32);
        }
    }
    let mut out = Image::new(w, h, GPixel::empty());
    out.data
        .par_chunks_mut(w * BAND_ROWS)
        .zip(bins.par_iter())
        .enumerate()
        .for_each(|(band, (chunk, bin))| {
            let row0 = band * BAND_ROWS;
            let rows = chunk.len() / w;
            let mut acc = vec![Accum::ZERO; chunk.len()];
            for &i in bin {
                let hx = &hexes[i as usize];
                let g = &gaussians[hx.id as usize];
                let Some((x0, x1)) = pixel_span(hx.bbox_min.x, hx.bbox_max.x, w) else { continue };
                let Some((y0, y1)) = pixel_span(hx.bbox_min.y, hx.bbox_max.y, h) else { continue };
                let normal = if g.normal.dot(&(camera.position - g.center)) < 0.0 {
                    -g.normal
                } else {
                    g.normal
                };
                for y in y0.max(row0)..=y1.min(row0 + rows - 1) {
                    for x in x0..=x1 {
                        let p = Vec2::new(x as f64 + 0.5, y as f64 + 0.5);
                        if !hx.contains(&p) {
                            continue;
                        }
                        let alpha = hx.response(&p);
                        if alpha < ALPHA_MIN {
                            continue;
                        }
                        let z = hx.depth_at(&p).max(camera.near);
                        if z > *mesh_depth.get(x, y) {
                            continue;
                        }
                        let f = Fragment {
                            position: camera.unproject(p.x, p.y, z),
                            normal,
                            albedo: g.albedo,
                            roughness: g.roughness,
                            emission: g.emission,
                            depth: z,
                        };
                        acc[(y - row0) * w + x].over(alpha, &f);
                    }
                }
            }
            for (o, a) in chunk.iter_mut().zip(&acc) {
                *o = a.resolve();
            }
        });
    out
}

/// Inclusive range of pixel indices whose centers fall in `[lo, hi]`.
pub(crate) fn pixel_span(lo: f64, hi: f64, n: usize) -> Option<(usize, usize)> {
    let a = (lo - 0.5).ceil().max(0.0);
    let b = (hi - 0.5).floor().min(n as f64 - 1.0);
    (a <= b).then_some((a as usize, b as usize))
}
