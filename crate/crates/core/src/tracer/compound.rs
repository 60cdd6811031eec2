//! Screen-space march over a min-depth pyramid with world-trace fallback.

use rand::Rng;

use super::{trace_shading_stochastic_with_stats, HitRecord, PrimRef, ProxyAccel, TraceStats};
use crate::camera::CameraModel;
use crate::gsmath::Ray;
use crate::image::Image;
use crate::math::Vec3;
use crate::raster::GBuffer;

/// Min-depth pyramid plus per-pixel hit thickness.
#[derive(Debug, Clone)]
pub struct HiZ {
    levels: Vec<Image<f64>>,
    /// Per level: whether any pixel in the cell has Gaussian coverage.
    translucent: Vec<Image<bool>>,
    thickness: Image<f64>,
}

impl HiZ {
    pub fn build(gbuffer: &GBuffer, camera: &CameraModel) -> Self {
        let base = gbuffer.map(|p| if p.is_covered() { p.depth } else { f64::INFINITY });
        let thickness = thickness(&base, camera.pixel_angle());
        let mut translucent = vec![gbuffer.map(|p| p.is_covered() && p.mesh_weight < 1.0)];
        let mut levels = vec![base];
        while {
            let l = levels.last().unwrap();
            l.width > 1 || l.height > 1
        } {
            let prev = levels.last().unwrap();
            let (w, h) = (prev.width.div_ceil(2), prev.height.div_ceil(2));
            let prev_t = translucent.last().unwrap();
            let mut next = Image::new(w, h, f64::INFINITY);
            let mut next_t = Image::new(w, h, false);
            for y in 0..h {
                for x in 0..w {
                    let mut m = f64::INFINITY;
                    let mut any = false;
                    for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                        let (sx, sy) = (2 * x + dx, 2 * y + dy);
                        if sx < prev.width && sy < prev.height {
                            m = m.min(*prev.get(sx, sy));
                            any |= *prev_t.get(sx, sy);
                        }
                    }
                    *next.get_mut(x, y) = m;
                    *next_t.get_mut(x, y) = any;
                }
            }
            levels.push(next);
            translucent.push(next_t);
        }
        HiZ { levels, translucent, thickness }
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn min_depth(&self, level: usize, x: usize, y: usize) -> f64 {
        *self.levels[level].get(x, y)
    }

    /// Whether the cell holds any pixel with Gaussian coverage.
    pub fn is_translucent(&self, level: usize, x: usize, y: usize) -> bool {
        *self.translucent[level].get(x, y)
    }

    /// Hit thickness at a full-resolution pixel.
    pub fn thickness(&self, x: usize, y: usize) -> f64 {
        *self.thickness.get(x, y)
    }
}

/// Twice the larger of the local depth spacing (smaller one-sided step per
/// axis, so depth edges do not widen it) and the pixel's depth footprint.
fn thickness(depth: &Image<f64>, pixel_angle: f64) -> Image<f64> {
    let (w, h) = (depth.width, depth.height);
    let mut out = Image::new(w, h, 0.0);
    for y in 0..h {
        for x in 0..w {
            let d = *depth.get(x, y);
            if !d.is_finite() {
                continue;
            }
            let step = |nx: Option<usize>, ny: Option<usize>| -> Option<f64> {
                let (nx, ny) = (nx?, ny?);
                if nx >= w || ny >= h {
                    return None;
                }
                let n = *depth.get(nx, ny);
                n.is_finite().then_some((n - d).abs())
            };
            let one_axis = |a: Option<f64>, b: Option<f64>| match (a, b) {
                (Some(a), Some(b)) => a.min(b),
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => 0.0,
            };
            let sx = one_axis(step(x.checked_sub(1), Some(y)), step(Some(x + 1), Some(y)));
            let sy = one_axis(step(Some(x), y.checked_sub(1)), step(Some(x), Some(y + 1)));
            *out.get_mut(x, y) = 2.0 * sx.max(sy).max(d * pixel_angle);
        }
    }
    out
}

/// Everything the screen march reads.
#[derive(Debug, Clone, Copy)]
pub struct ScreenContext<'a> {
    pub camera: &'a CameraModel,
    pub gbuffer: &'a GBuffer,
    pub hiz: &'a HiZ,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HitSource {
    Screen,
    World,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompoundHit {
    pub hit: HitRecord,
    pub source: HitSource,
}

enum March {
    Hit(HitRecord),
    /// The ray ended on screen without touching anything.
    Miss,
    /// Continue in world space from this ray parameter.
    Handoff(f64),
}

pub fn trace_compound<R: Rng + ?Sized>(
    ctx: &ScreenContext,
    accel: &ProxyAccel,
    ray: &Ray,
    rng: &mut R,
    scale: f64,
) -> Option<CompoundHit> {
    trace_compound_with_stats(ctx, accel, ray, rng, scale, &mut TraceStats::default())
}

pub fn trace_compound_with_stats<R: Rng + ?Sized>(
    ctx: &ScreenContext,
    accel: &ProxyAccel,
    ray: &Ray,
    rng: &mut R,
    scale: f64,
    stats: &mut TraceStats,
) -> Option<CompoundHit> {
    match march(ctx, ray) {
        March::Hit(hit) => {
            stats.rays += 1;
            Some(CompoundHit { hit, source: HitSource::Screen })
        }
        March::Miss => {
            stats.rays += 1;
            None
        }
        March::Handoff(t) => {
            let rest = Ray { t_min: t, ..*ray };
            trace_shading_stochastic_with_stats(accel, &rest, rng, scale, stats)
                .map(|hit| CompoundHit { hit, source: HitSource::World })
        }
    }
}

/// Homogeneous screen coordinates along the ray: `h(t) = h0 + t hd`, with
/// pixel position `(h.x / h.z, h.y / h.z)` and `h.z` the view depth.
struct ScreenLine {
    h0: Vec3,
    hd: Vec3,
}

impl ScreenLine {
    fn new(camera: &CameraModel, ray: &Ray) -> Self {
        let f = camera.focal();
        let c = camera.center();
        let to_h = |q: Vec3| Vec3::new(f * q.x + c.x * q.z, f * q.y + c.y * q.z, q.z);
        let q0 = camera.to_camera(&ray.origin);
        let qd = Vec3::new(
            ray.direction.dot(&camera.right),
            ray.direction.dot(&camera.down),
            ray.direction.dot(&camera.forward),
        );
        ScreenLine { h0: to_h(q0), hd: to_h(qd) }
    }

    fn depth(&self, t: f64) -> f64 {
        self.h0.z + t * self.hd.z
    }

    fn pixel(&self, t: f64) -> (f64, f64) {
        let h = self.h0 + self.hd * t;
        (h.x / h.z, h.y / h.z)
    }

    /// Parameter where the screen coordinate on `axis` equals `v`.
    fn crossing(&self, axis: usize, v: f64) -> Option<f64> {
        let den = self.hd[axis] - v * self.hd.z;
        (den.abs() > 1e-300).then(|| -(self.h0[axis] - v * self.h0.z) / den)
    }

    /// Sign of screen motion along `axis` (constant along a line).
    fn motion(&self, axis: usize) -> f64 {
        self.hd[axis] * self.h0.z - self.h0[axis] * self.hd.z
    }

    /// Narrows `[lo, hi]` to parameters where `a + t b >= 0`.
    fn clip(lo: &mut f64, hi: &mut f64, a: f64, b: f64) {
        if b.abs() < 1e-300 {
            if a < 0.0 {
                *hi = f64::NEG_INFINITY;
            }
        } else if b > 0.0 {
            *lo = lo.max(-a / b);
        } else {
            *hi = hi.min(-a / b);
        }
    }
}

/// Screen hits are taken only on opaque mesh pixels reached without passing
/// over Gaussian coverage. A G-buffer pixel with Gaussian coverage stores a
/// mean depth with volume on both sides of it, so passing in front of one
/// proves nothing: the world trace then resumes from before the first such
/// cell.
fn march(ctx: &ScreenContext, ray: &Ray) -> March {
    let cam = ctx.camera;
    let (w, h) = (cam.width as f64, cam.height as f64);
    let line = ScreenLine::new(cam, ray);
    let (a, b) = (line.h0, line.hd);

    // Parameter range inside the frustum and the ray segment.
    let mut lo = ray.t_min;
    let mut hi = ray.t_max;
    ScreenLine::clip(&mut lo, &mut hi, a.z - cam.near, b.z);
    ScreenLine::clip(&mut lo, &mut hi, a.x, b.x);
    ScreenLine::clip(&mut lo, &mut hi, w * a.z - a.x, w * b.z - b.x);
    ScreenLine::clip(&mut lo, &mut hi, a.y, b.y);
    ScreenLine::clip(&mut lo, &mut hi, h * a.z - a.y, h * b.z - b.y);
    if !(lo < hi) || lo > ray.t_min + 1e-9 * (1.0 + ray.t_min.abs()) {
        // Starts off screen (or never enters): world tracing from the start.
        return March::Handoff(ray.t_min);
    }
    let ends_on_screen = hi >= ray.t_max;

    // Skip the origin's own surface.
    let z0 = line.depth(ray.t_min).max(cam.near);
    let skip = ray.t_min + 2.0 * z0 * cam.pixel_angle();

    let mx = line.motion(0);
    let my = line.motion(1);
    let top = ctx.hiz.level_count() - 1;
    let mut level = 0usize;
    let mut t = ray.t_min;
    let mut safe = ray.t_min;
    let mut frozen = false;
    let nudge = |t: f64| t + 1e-9 * (1.0 + t.abs());
    let budget = 16 * (cam.width + cam.height) * (top + 1);
    for _ in 0..budget {
        if t >= hi {
            break;
        }
        let (px, py) = line.pixel(nudge(t).min(hi));
        let size = (1usize << level) as f64;
        let cx = ((px / size).floor().max(0.0)) as usize;
        let cy = ((py / size).floor().max(0.0)) as usize;
        let lvl = &ctx.hiz.levels[level];
        let (cx, cy) = (cx.min(lvl.width - 1), cy.min(lvl.height - 1));
        // Exit parameter of this cell.
        let mut exit = hi;
        if mx.abs() > 1e-300 {
            let edge = if mx > 0.0 { (cx + 1) as f64 * size } else { cx as f64 * size };
            if let Some(te) = line.crossing(0, edge) {
                if te > t {
                    exit = exit.min(te);
                }
            }
        }
        if my.abs() > 1e-300 {
            let edge = if my > 0.0 { (cy + 1) as f64 * size } else { cy as f64 * size };
            if let Some(te) = line.crossing(1, edge) {
                if te > t {
                    exit = exit.min(te);
                }
            }
        }
        if exit <= t {
            exit = nudge(t);
        }
        let za = line.depth(t);
        let zb = line.depth(exit);
        let zmax = za.max(zb);
        let dmin = *lvl.get(cx, cy);
        if exit <= skip {
            t = exit;
            continue;
        }
        if zmax < dmin {
            // Entirely in front of every surface in the cell.
            frozen |= ctx.hiz.is_translucent(level, cx, cy);
            t = exit;
            if !frozen {
                safe = t;
            }
            level = (level + 1).min(top);
            continue;
        }
        if level > 0 {
            level -= 1;
            continue;
        }
        // Full-resolution pixel: compare against the pixel's surface plane,
        // which stays accurate at grazing angles where the center depth does not.
        let px = ctx.gbuffer.get(cx, cy);
        if !px.is_covered() {
            t = exit;
            if !frozen {
                safe = t;
            }
            continue;
        }
        let plane = |tt: f64| -> f64 {
            let (sx, sy) = line.pixel(tt);
            let c = cam.center();
            let dw = cam.right * ((sx - c.x) / cam.focal()) + cam.down * ((sy - c.y) / cam.focal()) + cam.forward;
            let den = px.normal.dot(&dw);
            if den.abs() < 1e-6 {
                dmin
            } else {
                px.normal.dot(&(px.position - cam.position)) / den
            }
        };
        let da = za - plane(t);
        let db = zb - plane(exit);
        let translucent = ctx.hiz.is_translucent(0, cx, cy);
        if da <= 0.0 && db <= 0.0 {
            // In front of this pixel's surface.
            frozen |= translucent;
            t = exit;
            if !frozen {
                safe = t;
            }
            continue;
        }
        let crossing = da <= 0.0 || db <= 0.0;
        if frozen || translucent || (!crossing && da.min(db) > ctx.hiz.thickness(cx, cy)) {
            return March::Handoff(safe);
        }
        let t_hit = if crossing { t + da / (da - db) * (exit - t) } else { t };
        let normal = if px.normal.dot(&ray.direction) > 0.0 { -px.normal } else { px.normal };
        return March::Hit(HitRecord {
            t: t_hit,
            prim: PrimRef::Pixel { x: cx as u32, y: cy as u32 },
            response: px.opacity,
            position: px.position,
            normal,
            albedo: px.albedo,
            roughness: px.roughness,
            emission: px.emission,
            f0: px.f0,
        });
    }
    if ends_on_screen && t >= hi && !frozen {
        March::Miss
    } else {
        March::Handoff(safe)
    }
}
