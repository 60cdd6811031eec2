use rayon::prelude::*;

use super::splat::pixel_span;
use super::{GBuffer, GPixel, BAND_ROWS};
use crate::camera::CameraModel;
use crate::image::Image;
use crate::scene::Triangle;

/// Z-buffered triangle rasterization by per-pixel ray intersection inside
/// each triangle's screen bounds. Returns the mesh layer and its depth.
pub fn rasterize_meshes(triangles: &[Triangle], camera: &CameraModel) -> (GBuffer, Image<f64>) {
    let (w, h) = (camera.width, camera.height);
    let bands = h.div_ceil(BAND_ROWS);
    let mut bins: Vec<Vec<(u32, [usize; 4])>> = vec![Vec::new(); bands];
    for (i, tri) in triangles.iter().enumerate() {
        let Some((x0, x1, y0, y1)) = screen_bounds(tri, camera) else { continue };
        for bin in &mut bins[y0 / BAND_ROWS..=y1 / BAND_ROWS] {
            bin.push((i as u32, [x0, x1, y0, y1]));
        }
    }
    let mut layer = Image::new(w, h, GPixel::empty());
    layer
        .data
        .par_chunks_mut(w * BAND_ROWS)
        .zip(bins.par_iter())
        .enumerate()
        .for_each(|(band, (chunk, bin))| {
            let row0 = band * BAND_ROWS;
            let rows = chunk.len() / w;
            let mut best_t = vec![f64::INFINITY; chunk.len()];
            let mut best_i = vec![u32::MAX; chunk.len()];
            for &(i, [x0, x1, y0, y1]) in bin {
                let tri = &triangles[i as usize];
                for y in y0.max(row0)..=y1.min(row0 + rows - 1) {
                    for x in x0..=x1 {
                        let k = (y - row0) * w + x;
                        let ray = camera.pixel_ray(x, y);
                        if let Some(t) = tri.intersect(&ray) {
                            if t < best_t[k] {
                                best_t[k] = t;
                                best_i[k] = i;
                            }
                        }
                    }
                }
            }
            for (k, out) in chunk.iter_mut().enumerate() {
                if best_i[k] == u32::MAX {
                    continue;
                }
                let (x, y) = (k % w, row0 + k / w);
                let ray = camera.pixel_ray(x, y);
                let tri = &triangles[best_i[k] as usize];
                let t = best_t[k];
                let normal = if tri.normal.dot(&ray.direction) > 0.0 { -tri.normal } else { tri.normal };
                *out = GPixel {
                    opacity: 1.0,
                    position: ray.at(t),
                    normal,
                    albedo: tri.material.albedo,
                    roughness: tri.material.roughness,
                    emission: tri.material.emission,
                    f0: tri.material.f0,
                    depth: t * ray.direction.dot(&camera.forward),
                    mesh_weight: 1.0,
                };
            }
        });
    let depth = layer.map(|p| p.depth);
    (layer, depth)
}

/// Inclusive pixel bounds; the whole screen when a vertex is not in front
/// of the near plane.
fn screen_bounds(tri: &Triangle, camera: &CameraModel) -> Option<(usize, usize, usize, usize)> {
    let (w, h) = (camera.width, camera.height);
    let mut lo = crate::math::Vec2::repeat(f64::INFINITY);
    let mut hi = crate::math::Vec2::repeat(f64::NEG_INFINITY);
    for v in &tri.vertices {
        match camera.project(v) {
            Some((p, _)) => {
                lo = lo.inf(&p);
                hi = hi.sup(&p);
            }
            None => {
                if tri.vertices.iter().all(|v| camera.view_depth(v) < camera.near) {
                    return None;
                }
                return Some((0, w - 1, 0, h - 1));
            }
        }
    }
    // Pad by a pixel so edge pixels are not lost to rounding.
    let (x0, x1) = pixel_span(lo.x - 1.0, hi.x + 1.0, w)?;
    let (y0, y1) = pixel_span(lo.y - 1.0, hi.y + 1.0, h)?;
    Some((x0, x1, y0, y1))
}
