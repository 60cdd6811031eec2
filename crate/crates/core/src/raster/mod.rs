//! Software rasterization into a G-buffer of weighted-mean surfaces.
//!
//! Meshes are rasterized first to produce a depth buffer, Gaussians are
//! splatted as hexagons far-to-near against that depth, and the two layers
//! are merged by opacity.

mod hexagon;
mod mesh;
mod splat;

pub use hexagon::{spawn_hexagons, DepthMode, HexagonSplat};
pub use mesh::rasterize_meshes;
pub use splat::rasterize_gaussians;

use crate::camera::CameraModel;
use crate::image::Image;
use crate::math::{black, Rgb, Vec3};
use crate::scene::{Scene, DEFAULT_F0};

/// Rows per parallel work band.
pub(crate) const BAND_ROWS: usize = 8;

/// One G-buffer texel. Attributes are normalized means; `opacity` carries
/// the coverage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GPixel {
    pub opacity: f64,
    pub position: Vec3,
    pub normal: Vec3,
    pub albedo: Rgb,
    pub roughness: f64,
    pub emission: Rgb,
    pub f0: f64,
    /// Linear view depth; infinite where nothing was drawn.
    pub depth: f64,
    /// Fraction of the pixel's weight that came from meshes.
    pub mesh_weight: f64,
}

impl GPixel {
    pub fn empty() -> Self {
        GPixel {
            opacity: 0.0,
            position: Vec3::zeros(),
            normal: Vec3::zeros(),
            albedo: black(),
            roughness: 1.0,
            emission: black(),
            f0: DEFAULT_F0,
            depth: f64::INFINITY,
            mesh_weight: 0.0,
        }
    }

    pub fn is_covered(&self) -> bool {
        self.opacity > 0.0
    }
}

pub type GBuffer = Image<GPixel>;

/// Linear depth channel of a G-buffer.
pub fn depth_image(g: &GBuffer) -> Image<f64> {
    g.map(|p| p.depth)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterOptions {
    pub k_sigma: f64,
    pub depth_mode: DepthMode,
    /// Splats whose projected k-sigma major radius is below this are culled.
    pub min_extent_px: f64,
    pub fallback_normals: bool,
}

impl Default for RasterOptions {
    fn default() -> Self {
        RasterOptions {
            k_sigma: 3.0,
            depth_mode: DepthMode::Gradient,
            min_extent_px: 0.3,
            fallback_normals: true,
        }
    }
}

/// Full G-buffer pass: meshes, Gaussians, merge, normal repair.
pub fn render_gbuffer(scene: &Scene, camera: &CameraModel, opts: &RasterOptions) -> GBuffer {
    let (mesh_layer, mesh_depth) = rasterize_meshes(&scene.triangles, camera);
    let hexes = spawn_hexagons(&scene.gaussians, camera, opts.k_sigma, opts.min_extent_px, opts.depth_mode);
    let gauss_layer = rasterize_gaussians(&hexes, &scene.gaussians, &mesh_depth, camera);
    let mut g = merge_gbuffers(&gauss_layer, &mesh_layer);
    if opts.fallback_normals {
        fallback_normals(&mut g, camera);
    }
    g
}

/// Gaussian layer composited over the mesh layer.
pub fn merge_gbuffers(gauss: &GBuffer, mesh: &GBuffer) -> GBuffer {
    assert!(gauss.same_size(mesh), "G-buffer layers differ in size");
    let data = gauss
        .data
        .iter()
        .zip(&mesh.data)
        .map(|(g, m)| merge_pixel(g, m))
        .collect();
    Image::from_vec(gauss.width, gauss.height, data)
}

fn merge_pixel(g: &GPixel, m: &GPixel) -> GPixel {
    let wg = g.opacity;
    let wm = (1.0 - g.opacity) * m.opacity;
    let a = wg + wm;
    if a <= 0.0 {
        return GPixel::empty();
    }
    if wm <= 0.0 {
        return *g;
    }
    if wg <= 0.0 {
        return *m;
    }
    let (wg, wm) = (wg / a, wm / a);
    let n = g.normal * wg + m.normal * wm;
    GPixel {
        opacity: a,
        position: g.position * wg + m.position * wm,
        normal: if n.norm() > 1e-12 { n.normalize() } else { m.normal },
        albedo: g.albedo * wg + m.albedo * wm,
        roughness: g.roughness * wg + m.roughness * wm,
        emission: g.emission * wg + m.emission * wm,
        f0: g.f0 * wg + m.f0 * wm,
        depth: g.depth * wg + m.depth * wm,
        mesh_weight: g.mesh_weight * wg + m.mesh_weight * wm,
    }
}

/// Normals reconstructed from neighbouring positions. At each axis the
/// one-sided difference with the smaller depth step is used, so depth edges
/// do not bleed in. `None` where a pixel or both neighbours are uncovered.
pub fn reconstruct_normals(g: &GBuffer, camera: &CameraModel) -> Image<Option<Vec3>> {
    let (w, h) = (g.width, g.height);
    let mut out = Image::new(w, h, None);
    let covered = |x: isize, y: isize| -> Option<&GPixel> {
        if x < 0 || y < 0 || x as usize >= w || y as usize >= h {
            return None;
        }
        let p = g.get(x as usize, y as usize);
        p.is_covered().then_some(p)
    };
    for y in 0..h as isize {
        for x in 0..w as isize {
            let Some(c) = covered(x, y) else { continue };
            let pick = |a: Option<&GPixel>, b: Option<&GPixel>| -> Option<Vec3> {
                // `a` is the negative neighbour, `b` the positive one.
                match (a, b) {
                    (Some(a), Some(b)) => {
                        if (b.depth - c.depth).abs() <= (c.depth - a.depth).abs() {
                            Some(b.position - c.position)
                        } else {
                            Some(c.position - a.position)
                        }
                    }
                    (Some(a), None) => Some(c.position - a.position),
                    (None, Some(b)) => Some(b.position - c.position),
                    (None, None) => None,
                }
            };
            let (Some(dx), Some(dy)) = (
                pick(covered(x - 1, y), covered(x + 1, y)),
                pick(covered(x, y - 1), covered(x, y + 1)),
            ) else {
                continue;
            };
            let n = dx.cross(&dy);
            if n.norm() < 1e-300 {
                continue;
            }
            let mut n = n.normalize();
            if n.dot(&(camera.position - c.position)) < 0.0 {
                n = -n;
            }
            *out.get_mut(x as usize, y as usize) = Some(n);
        }
    }
    out
}

/// Replaces stored normals that face away from the camera or deviate from
/// the reconstructed normal by more than 60 degrees. Returns the number of
/// replaced pixels.
pub fn fallback_normals(g: &mut GBuffer, camera: &CameraModel) -> usize {
    let recon = reconstruct_normals(g, camera);
    let cos_limit = 60f64.to_radians().cos();
    let mut replaced = 0;
    for (p, r) in g.data.iter_mut().zip(&recon.data) {
        let Some(r) = r else { continue };
        let to_cam = camera.position - p.position;
        let backfacing = p.normal.dot(&to_cam) <= 0.0;
        if backfacing || p.normal.dot(r) < cos_limit {
            p.normal = *r;
            replaced += 1;
        }
    }
    replaced
}
