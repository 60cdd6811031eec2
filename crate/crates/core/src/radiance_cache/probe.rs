use rayon::prelude::*;
use std::f64::consts::PI;

use super::hash::CacheUpdate;
use super::octa::{decode, jacobian, texel_of, texel_solid_angle, texel_uv, TEXELS};
use super::sh::ShL1;
use crate::camera::CameraModel;
use crate::gsmath::Ray;
use crate::image::Image;
use crate::math::{luminance, Frame, Rgb, Vec3};
use crate::raster::{GBuffer, GPixel};
use crate::rng::{stream, Purpose, Rng};
use crate::tracer::spawn_ray;

/// Share of probe rays drawn from last frame's luminance; the rest are
/// uniform over the hemisphere.
pub const LUMINANCE_SHARE: f64 = 0.5;
/// Plane distance, relative to pixel depth, at which a probe stops
/// contributing.
pub const PLANE_TOLERANCE: f64 = 0.05;
const NORMAL_POWER: i32 = 8;
/// Relative position change and normal agreement for reusing a probe tile.
const REUSE_DISTANCE: f64 = 0.05;
const REUSE_NORMAL_DOT: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeParams {
    /// Pixels per probe block side.
    pub spacing: usize,
    pub rays_per_probe: usize,
    /// Texels average at most this many samples, then track a moving mean.
    pub max_samples: u32,
}

impl Default for ProbeParams {
    fn default() -> Self {
        ProbeParams { spacing: 16, rays_per_probe: 16, max_samples: 64 }
    }
}

/// Film-anchored hemisphere of incident radiance around a surface normal.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenProbe {
    pub anchor: (usize, usize),
    pub position: Vec3,
    pub normal: Vec3,
    pub depth: f64,
    pub valid: bool,
    /// Solid-angle-weighted mean radiance per texel, local frame.
    pub radiance: [Rgb; TEXELS],
    pub weight: [f64; TEXELS],
    pub count: [u32; TEXELS],
    pub sh: ShL1,
    /// Per-channel maximum over sampled texels.
    pub max_radiance: Rgb,
}

impl ScreenProbe {
    fn empty(anchor: (usize, usize)) -> Self {
        ScreenProbe {
            anchor,
            position: Vec3::zeros(),
            normal: Vec3::z(),
            depth: f64::INFINITY,
            valid: false,
            radiance: [Rgb::zeros(); TEXELS],
            weight: [0.0; TEXELS],
            count: [0; TEXELS],
            sh: ShL1::default(),
            max_radiance: Rgb::zeros(),
        }
    }

    pub fn frame(&self) -> Frame {
        Frame::from_normal(self.normal)
    }

    pub fn sampled_texels(&self) -> usize {
        self.count.iter().filter(|c| **c > 0).count()
    }

    /// Draws a texel from the luminance/uniform mixture and a direction
    /// uniformly in its `uv` cell. Returns the texel, the local direction and
    /// the solid angle per unit `uv` there.
    pub fn sample_direction<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> (usize, Vec3, f64) {
        // Unsampled texels borrow the mean so they are not starved.
        let sampled = self.sampled_texels();
        let fill = if sampled > 0 {
            (0..TEXELS).filter(|t| self.count[*t] > 0).map(|t| luminance(&self.radiance[t]).max(0.0)).sum::<f64>()
                / sampled as f64
        } else {
            0.0
        };
        let lum: Vec<f64> = (0..TEXELS)
            .map(|t| if self.count[t] > 0 { luminance(&self.radiance[t]).max(0.0) } else { fill })
            .collect();
        let total: f64 = lum.iter().sum();
        let share = if total > 0.0 { LUMINANCE_SHARE } else { 0.0 };
        let pmf = |t: usize| {
            let uni = texel_solid_angle(t) / (2.0 * PI);
            let imp = if total > 0.0 { lum[t] / total } else { 0.0 };
            share * imp + (1.0 - share) * uni
        };
        let mut u: f64 = rng.random();
        let mut texel = TEXELS - 1;
        for t in 0..TEXELS {
            let p = pmf(t);
            if u < p {
                texel = t;
                break;
            }
            u -= p;
        }
        let uv = texel_uv(texel, rng.random(), rng.random());
        (texel, decode(&uv), jacobian(&uv))
    }

    fn add_sample(&mut self, texel: usize, radiance: Rgb, weight: f64, max_samples: u32) {
        if self.count[texel] >= max_samples {
            self.weight[texel] *= (max_samples - 1) as f64 / max_samples as f64;
            self.count[texel] = max_samples - 1;
        }
        let w = self.weight[texel] + weight;
        self.radiance[texel] = (self.radiance[texel] * self.weight[texel] + radiance * weight) / w;
        self.weight[texel] = w;
        self.count[texel] += 1;
    }

    /// Refits the SH projection; unsampled texels take the mean of sampled ones.
    pub fn refit(&mut self) {
        let mut mean = Rgb::zeros();
        let mut area = 0.0;
        let mut max = Rgb::zeros();
        for t in 0..TEXELS {
            if self.count[t] > 0 {
                mean += self.radiance[t] * texel_solid_angle(t);
                area += texel_solid_angle(t);
                max = max.sup(&self.radiance[t]);
            }
        }
        if area > 0.0 {
            mean /= area;
        }
        let tile: [Rgb; TEXELS] = std::array::from_fn(|t| if self.count[t] > 0 { self.radiance[t] } else { mean });
        self.sh = ShL1::fit_tile(&tile, &self.frame());
        self.max_radiance = max;
    }

    /// Stored radiance arriving from world direction `dir`; directions below
    /// the horizon use the nearest horizon texel.
    pub fn radiance_toward(&self, dir: &Vec3) -> Option<Rgb> {
        if !self.valid {
            return None;
        }
        let mut local = self.frame().to_local(dir);
        local.z = local.z.max(0.0);
        let t = texel_of(&local);
        (self.count[t] > 0).then_some(self.radiance[t])
    }

    /// Irradiance at normal `n` from the SH fit, bounded by the largest
    /// stored radiance so the L1 extrapolation cannot amplify.
    pub fn irradiance(&self, n: &Vec3) -> Rgb {
        let e = self.sh.irradiance(n);
        Rgb::from_fn(|ch, _| e[ch].clamp(0.0, PI * self.max_radiance[ch]))
    }
}

/// Probes on a regular grid of film blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    pub spacing: usize,
    pub cols: usize,
    pub rows: usize,
    pub probes: Vec<ScreenProbe>,
}

impl ProbeSet {
    pub fn get(&self, bx: usize, by: usize) -> &ScreenProbe {
        &self.probes[by * self.cols + bx]
    }

    pub fn valid_count(&self) -> usize {
        self.probes.iter().filter(|p| p.valid).count()
    }

    /// Copies tiles from `prev` for probes whose surface point it also
    /// anchored. Returns the number of probes reused.
    pub fn inherit(&mut self, prev: &ProbeSet, prev_camera: &CameraModel) -> usize {
        if prev.spacing != self.spacing {
            return 0;
        }
        let mut reused = 0;
        for p in self.probes.iter_mut().filter(|p| p.valid) {
            let Some((px, _)) = prev_camera.project(&p.position) else { continue };
            if px.x < 0.0 || px.y < 0.0 {
                continue;
            }
            let (bx, by) = (px.x as usize / prev.spacing, px.y as usize / prev.spacing);
            if bx >= prev.cols || by >= prev.rows {
                continue;
            }
            let q = prev.get(bx, by);
            if !q.valid
                || (q.position - p.position).norm() > REUSE_DISTANCE * p.depth
                || q.normal.dot(&p.normal) < REUSE_NORMAL_DOT
            {
                continue;
            }
            p.radiance = q.radiance;
            p.weight = q.weight;
            p.count = q.count;
            p.sh = q.sh;
            p.max_radiance = q.max_radiance;
            reused += 1;
        }
        reused
    }

    /// Up to four probes around pixel `(x, y)` with bilinear weights scaled
    /// by plane-distance and normal similarity to `pixel`.
    pub fn neighbor_weights(&self, x: usize, y: usize, pixel: &GPixel) -> [(usize, f64); 4] {
        let s = self.spacing as f64;
        let gx = ((x as f64 + 0.5) / s - 0.5).clamp(0.0, (self.cols - 1) as f64);
        let gy = ((y as f64 + 0.5) / s - 0.5).clamp(0.0, (self.rows - 1) as f64);
        let (x0, y0) = (gx.floor() as usize, gy.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(self.cols - 1), (y0 + 1).min(self.rows - 1));
        let (fx, fy) = (gx - x0 as f64, gy - y0 as f64);
        let corners = [
            (x0, y0, (1.0 - fx) * (1.0 - fy)),
            (x1, y0, fx * (1.0 - fy)),
            (x0, y1, (1.0 - fx) * fy),
            (x1, y1, fx * fy),
        ];
        corners.map(|(bx, by, w)| {
            let i = by * self.cols + bx;
            (i, w * similarity(&self.probes[i], pixel))
        })
    }
}

fn similarity(probe: &ScreenProbe, pixel: &GPixel) -> f64 {
    if !probe.valid {
        return 0.0;
    }
    let rel = probe.normal.dot(&(pixel.position - probe.position)).abs() / (PLANE_TOLERANCE * pixel.depth);
    let plane = (1.0 - rel).max(0.0).powi(2);
    let normal = probe.normal.dot(&pixel.normal).max(0.0).powi(NORMAL_POWER);
    plane * normal
}

/// One probe per `spacing`-sized block, anchored at the block's most opaque
/// pixel (ties go to the pixel nearest the block center). Blocks with no
/// coverage give invalid probes.
pub fn place_probes(g: &GBuffer, spacing: usize) -> ProbeSet {
    assert!(spacing > 0);
    let cols = g.width.div_ceil(spacing);
    let rows = g.height.div_ceil(spacing);
    let probes = (0..cols * rows)
        .map(|i| {
            let (bx, by) = (i % cols, i / cols);
            let (x0, y0) = (bx * spacing, by * spacing);
            let (x1, y1) = ((x0 + spacing).min(g.width), (y0 + spacing).min(g.height));
            let cx = 0.5 * (x0 + x1) as f64;
            let cy = 0.5 * (y0 + y1) as f64;
            let mut best: Option<(usize, usize, f64, f64)> = None;
            for y in y0..y1 {
                for x in x0..x1 {
                    let p = g.get(x, y);
                    if !p.is_covered() {
                        continue;
                    }
                    let d2 = (x as f64 + 0.5 - cx).powi(2) + (y as f64 + 0.5 - cy).powi(2);
                    let better = match best {
                        None => true,
                        Some((_, _, o, bd)) => p.opacity > o || (p.opacity == o && d2 < bd),
                    };
                    if better {
                        best = Some((x, y, p.opacity, d2));
                    }
                }
            }
            match best {
                Some((x, y, _, _)) => {
                    let p = g.get(x, y);
                    ScreenProbe {
                        position: p.position,
                        normal: p.normal,
                        depth: p.depth,
                        valid: true,
                        ..ScreenProbe::empty((x, y))
                    }
                }
                None => ScreenProbe::empty((x0, y0)),
            }
        })
        .collect();
    ProbeSet { spacing, cols, rows, probes }
}

/// Radiance arriving along a probe ray plus any deferred cache write.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSample {
    pub radiance: Rgb,
    pub update: Option<CacheUpdate>,
}

/// Traces `rays_per_probe` rays from every valid probe, folds the results
/// into the texel means and refits SH. Returns the cache writes in probe
/// order for the caller to apply after the pass.
pub fn update_probes<F>(set: &mut ProbeSet, params: &ProbeParams, seed: u64, frame: u64, sample: F) -> Vec<CacheUpdate>
where
    F: Fn(&Ray, &mut Rng) -> ProbeSample + Sync,
{
    let updates: Vec<Vec<CacheUpdate>> = set
        .probes
        .par_iter_mut()
        .enumerate()
        .map(|(i, probe)| {
            let mut out = Vec::new();
            if !probe.valid {
                return out;
            }
            let mut rng = stream(seed, frame, i as u64, Purpose::ProbeRays);
            let frame_axes = probe.frame();
            // Draw every direction from last frame's distribution first.
            let draws: Vec<_> = (0..params.rays_per_probe).map(|_| probe.sample_direction(&mut rng)).collect();
            for (texel, local, jac) in draws {
                let dir = frame_axes.to_world(&local);
                let ray = spawn_ray(&probe.position, &probe.normal, &dir, f64::INFINITY);
                let s = sample(&ray, &mut rng);
                probe.add_sample(texel, s.radiance, jac, params.max_samples);
                out.extend(s.update);
            }
            probe.refit();
            out
        })
        .collect();
    updates.into_iter().flatten().collect()
}

/// Interpolated `E / pi` per pixel. Pixels with no similar probe copy the
/// nearest similar pixel that has one, within one probe spacing; otherwise
/// they stay zero.
pub fn interpolate_incident(g: &GBuffer, set: &ProbeSet) -> Image<Rgb> {
    let (w, h) = (g.width, g.height);
    let first: Vec<Option<Rgb>> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let p = &g.data[i];
            if !p.is_covered() {
                return Some(Rgb::zeros());
            }
            let mut sum = Rgb::zeros();
            let mut wsum = 0.0;
            for (k, wt) in set.neighbor_weights(i % w, i / w, p) {
                if wt > 0.0 {
                    sum += set.probes[k].irradiance(&p.normal) * wt;
                    wsum += wt;
                }
            }
            (wsum > 1e-9).then(|| sum / (wsum * PI))
        })
        .collect();
    let r = set.spacing as isize;
    let data = (0..w * h)
        .into_par_iter()
        .map(|i| {
            if let Some(v) = first[i] {
                return v;
            }
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            let p = &g.data[i];
            for ring in 1..=r {
                for dy in -ring..=ring {
                    for dx in -ring..=ring {
                        if dx.abs() != ring && dy.abs() != ring {
                            continue;
                        }
                        let (xx, yy) = (x + dx, y + dy);
                        if xx < 0 || yy < 0 || xx >= w as isize || yy >= h as isize {
                            continue;
                        }
                        let j = yy as usize * w + xx as usize;
                        let q = &g.data[j];
                        if let (Some(v), true) = (first[j], q.is_covered() && similar_pixels(p, q)) {
                            return v;
                        }
                    }
                }
            }
            Rgb::zeros()
        })
        .collect();
    Image::from_vec(w, h, data)
}

fn similar_pixels(a: &GPixel, b: &GPixel) -> bool {
    a.normal.dot(&(b.position - a.position)).abs() < PLANE_TOLERANCE * a.depth && a.normal.dot(&b.normal) > 0.9
}

/// Indirect diffuse radiance: `albedo * E / pi`.
pub fn interpolate_indirect(g: &GBuffer, set: &ProbeSet) -> Image<Rgb> {
    let inc = interpolate_incident(g, set);
    Image::from_vec(
        g.width,
        g.height,
        g.data.iter().zip(&inc.data).map(|(p, e)| p.albedo.component_mul(e)).collect(),
    )
}
