use rayon::prelude::*;

use super::brdf::{alpha, reflect_about, sample_vndf, SplitSumLut};
use crate::camera::CameraModel;
use crate::direct_light::{spatial_filter, EnvMap};
use crate::image::Image;
use crate::math::{smoothstep, Frame, Rgb, Vec3};
use crate::radiance_cache::{resolve_radiance, CacheUpdate, ProbeSet, ResolveContext};
use crate::raster::{GBuffer, GPixel};
use crate::rng::{stream, Purpose};
use crate::tracer::{spawn_ray, trace_compound, ProxyAccel, ScreenContext};

/// Lobe samples redrawn when the reflected direction lands below the surface.
pub const LOBE_RETRIES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlossyParams {
    /// Below this roughness the detailed trace is used alone.
    pub r_detail: f64,
    /// Above this roughness the coarse estimate is used alone.
    pub r_coarse: f64,
    pub temporal_alpha: f64,
}

impl Default for GlossyParams {
    fn default() -> Self {
        GlossyParams { r_detail: 0.25, r_coarse: 0.6, temporal_alpha: 0.2 }
    }
}

impl GlossyParams {
    /// Weight of the coarse estimate at `roughness`.
    pub fn coarse_weight(&self, roughness: f64) -> f64 {
        smoothstep(self.r_detail, self.r_coarse, roughness)
    }
}

/// Half-resolution reflection buffer. `gbuffer` holds the representative
/// pixel of each 2x2 block, or an empty pixel where nothing was traced.
#[derive(Debug, Clone)]
pub struct HalfResReflection {
    pub radiance: Image<Rgb>,
    pub gbuffer: GBuffer,
    pub updates: Vec<CacheUpdate>,
}

/// Inputs of the detailed reflection trace.
#[derive(Clone, Copy)]
pub struct GlossyTrace<'a> {
    pub screen: ScreenContext<'a>,
    pub accel: &'a ProxyAccel,
    pub resolve: ResolveContext<'a>,
    pub environment: Option<&'a EnvMap>,
    pub scale: f64,
    /// Pixels at or above this roughness are skipped.
    pub cutoff: f64,
    pub seed: u64,
    pub frame: u64,
}

/// Most opaque covered pixel of the 2x2 block at half-res `(hx, hy)`.
fn representative(g: &GBuffer, hx: usize, hy: usize) -> Option<&GPixel> {
    let mut best: Option<&GPixel> = None;
    for y in 2 * hy..(2 * hy + 2).min(g.height) {
        for x in 2 * hx..(2 * hx + 2).min(g.width) {
            let p = g.get(x, y);
            if p.is_covered() && best.is_none_or(|b| p.opacity > b.opacity) {
                best = Some(p);
            }
        }
    }
    best
}

/// One visible-normal lobe sample per half-res pixel, traced with the
/// compound tracer. Hits are resolved through the radiance cache (emission
/// included), misses return the environment. Followed by a 3x3 edge-aware
/// filter.
pub fn trace_glossy(t: &GlossyTrace) -> HalfResReflection {
    let g = t.screen.gbuffer;
    let camera = t.screen.camera;
    let (hw, hh) = (g.width.div_ceil(2), g.height.div_ceil(2));
    let results: Vec<(GPixel, Rgb, Option<CacheUpdate>)> = (0..hw * hh)
        .into_par_iter()
        .map(|i| {
            let Some(p) = representative(g, i % hw, i / hw).filter(|p| p.roughness < t.cutoff) else {
                return (GPixel::empty(), Rgb::zeros(), None);
            };
            let mut rng = stream(t.seed, t.frame, i as u64, Purpose::Glossy);
            let Some(dir) = sample_reflection(p, &camera.position, &mut rng) else {
                return (*p, Rgb::zeros(), None);
            };
            let ray = spawn_ray(&p.position, &p.normal, &dir, f64::INFINITY);
            match trace_compound(&t.screen, t.accel, &ray, &mut rng, t.scale) {
                Some(h) => {
                    let r = resolve_radiance(&t.resolve, &h.hit, &dir, &mut rng);
                    (*p, r.radiance, r.update)
                }
                None => (*p, t.environment.map_or(Rgb::zeros(), |e| e.radiance(&dir)), None),
            }
        })
        .collect();
    let mut updates = Vec::new();
    let mut gbuffer = Image::new(hw, hh, GPixel::empty());
    let mut raw = Image::new(hw, hh, Rgb::zeros());
    for (i, (p, l, u)) in results.into_iter().enumerate() {
        gbuffer.data[i] = p;
        raw.data[i] = l;
        updates.extend(u);
    }
    let radiance = spatial_filter(&raw, &gbuffer, 1);
    HalfResReflection { radiance, gbuffer, updates }
}

/// Reflected direction from the GGX lobe at `p` seen from `eye`, redrawn up
/// to [`LOBE_RETRIES`] times when it falls below the surface.
pub fn sample_reflection<R: rand::Rng + ?Sized>(p: &GPixel, eye: &Vec3, rng: &mut R) -> Option<Vec3> {
    let frame = Frame::from_normal(p.normal);
    let v = frame.to_local(&(eye - p.position).normalize());
    if v.z <= 0.0 {
        return None;
    }
    let al = alpha(p.roughness);
    for _ in 0..=LOBE_RETRIES {
        let h = sample_vndf(&v, al, rng.random(), rng.random());
        let l = reflect_about(&v, &h);
        if l.z > 0.0 {
            return Some(frame.to_world(&l));
        }
    }
    None
}

/// Full-resolution reflection from the half-res buffer using the 3x3
/// surrounding half-res pixels with tent and depth/normal weights. Pixels at
/// or above `cutoff` roughness stay zero.
pub fn upsample(half: &HalfResReflection, g: &GBuffer, cutoff: f64) -> Image<Rgb> {
    let (hw, hh) = (half.gbuffer.width as isize, half.gbuffer.height as isize);
    let data = g
        .data
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            if !p.is_covered() || p.roughness >= cutoff {
                return Rgb::zeros();
            }
            let (x, y) = (i % g.width, i / g.width);
            let (cx, cy) = ((x / 2) as isize, (y / 2) as isize);
            let mut sum = Rgb::zeros();
            let mut wsum = 0.0;
            for hy in cy - 1..=cy + 1 {
                for hx in cx - 1..=cx + 1 {
                    if hx < 0 || hy < 0 || hx >= hw || hy >= hh {
                        continue;
                    }
                    let q = half.gbuffer.get(hx as usize, hy as usize);
                    if !q.is_covered() {
                        continue;
                    }
                    let tx = (1.0 - ((x as f64 + 0.5) - (2 * hx + 1) as f64).abs() / 2.0).max(0.0);
                    let ty = (1.0 - ((y as f64 + 0.5) - (2 * hy + 1) as f64).abs() / 2.0).max(0.0);
                    let dz = (q.depth - p.depth) / (0.05 * p.depth.max(1e-6));
                    let wn = p.normal.dot(&q.normal).max(0.0).powi(16);
                    let w = (tx * ty).max(1e-3) * (-dz * dz).exp() * wn;
                    sum += half.radiance.get(hx as usize, hy as usize) * w;
                    wsum += w;
                }
            }
            if wsum > 1e-12 {
                sum / wsum
            } else {
                Rgb::zeros()
            }
        })
        .collect();
    Image::from_vec(g.width, g.height, data)
}

/// Coarse prefiltered reflection: probe texels nearest the mirror direction
/// fading into the probes' diffuse estimate as roughness rises, plus the
/// pixel's direct incident term. Pixels with no usable probe texel read the
/// environment along the mirror direction.
pub fn coarse_reflection(
    g: &GBuffer,
    camera: &CameraModel,
    probes: Option<&ProbeSet>,
    indirect_incident: &Image<Rgb>,
    direct_incident: &Image<Rgb>,
    environment: Option<&EnvMap>,
    params: &GlossyParams,
) -> Image<Rgb> {
    let data = g
        .data
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            if !p.is_covered() {
                return Rgb::zeros();
            }
            let v = (camera.position - p.position).normalize();
            let r = reflect_about(&v, &p.normal);
            let env = || environment.map_or(Rgb::zeros(), |e| e.radiance(&r));
            let Some(set) = probes else { return env() };
            let mut sum = Rgb::zeros();
            let mut wsum = 0.0;
            for (k, w) in set.neighbor_weights(i % g.width, i / g.width, p) {
                if w <= 0.0 {
                    continue;
                }
                if let Some(l) = set.probes[k].radiance_toward(&r) {
                    sum += l * w;
                    wsum += w;
                }
            }
            if wsum <= 1e-9 {
                return env();
            }
            let s = ((p.roughness - params.r_detail) / (1.0 - params.r_detail)).clamp(0.0, 1.0);
            (sum / wsum) * (1.0 - s) + indirect_incident.data[i] * s + direct_incident.data[i]
        })
        .collect();
    Image::from_vec(g.width, g.height, data)
}

/// Blends detailed and coarse prefiltered radiance by roughness and applies
/// the environment-BRDF term. Output is per-surface (not opacity weighted).
pub fn split_sum_shade(
    g: &GBuffer,
    camera: &CameraModel,
    detailed: &Image<Rgb>,
    coarse: &Image<Rgb>,
    params: &GlossyParams,
    lut: &SplitSumLut,
) -> Image<Rgb> {
    let data = g
        .data
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            if !p.is_covered() {
                return Rgb::zeros();
            }
            let nov = p.normal.dot(&(camera.position - p.position).normalize()).max(0.0);
            let t = params.coarse_weight(p.roughness);
            let pre = detailed.data[i] * (1.0 - t) + coarse.data[i] * t;
            pre * lut.specular_albedo(nov, p.roughness, p.f0)
        })
        .collect();
    Image::from_vec(g.width, g.height, data)
}
