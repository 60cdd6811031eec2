//! Ray tracing against Gaussian proxies and mesh triangles.
//!
//! [`trace_reference`] enumerates every hit and is the exhaustive oracle.
//! The stochastic tracers accept each candidate hit independently with
//! probability equal to its response (one fresh uniform per candidate,
//! scaled by the bias factor), which makes shadow results unbiased for
//! `1 - T` and shading results distributed as `A_i * T_{i-1}`.

mod bvh;
pub mod compound;
mod proxy;

use rand::Rng;

pub use bvh::{Aabb, Bvh, MAX_LEAF_SIZE};
pub use compound::{trace_compound, CompoundHit, HiZ, HitSource, ScreenContext};
pub use proxy::{iso_radius, Proxy};

use crate::gsmath::{
    max_response_depth_from_inverse, response_from_covariance, GaussianPrimitive, Ray, ALPHA_MIN,
};
use crate::math::{Mat3, Rgb, Vec3};
use crate::scene::{Scene, Triangle, DEFAULT_F0};

/// Transparency below which the reference tracer stops enumerating.
pub const TRANSPARENCY_CUTOFF: f64 = 1e-3;
/// Hits closer than this in `t` are ordered by primitive id.
pub const TIE_EPSILON: f64 = 1e-9;
/// Offset along the surface normal for secondary rays.
pub const RAY_OFFSET: f64 = 1e-3;

/// Secondary ray leaving a surface point, pushed off along the normal on the
/// side `direction` points to.
pub fn spawn_ray(position: &Vec3, normal: &Vec3, direction: &Vec3, t_max: f64) -> Ray {
    let side = if normal.dot(direction) >= 0.0 { 1.0 } else { -1.0 };
    Ray::segment(position + normal * (side * RAY_OFFSET), *direction, 0.0, t_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PrimRef {
    Gaussian(u32),
    Triangle(u32),
    /// A screen-space hit resolved from the G-buffer.
    Pixel { x: u32, y: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitRecord {
    pub t: f64,
    pub prim: PrimRef,
    /// `A` for Gaussians, exactly 1 for triangles.
    pub response: f64,
    pub position: Vec3,
    /// Shading normal facing the incoming ray.
    pub normal: Vec3,
    pub albedo: Rgb,
    pub roughness: f64,
    pub emission: Rgb,
    pub f0: f64,
}

impl HitRecord {
    pub fn is_opaque(&self) -> bool {
        matches!(self.prim, PrimRef::Triangle(_))
    }
}

fn hit_order(a: &HitRecord, b: &HitRecord) -> std::cmp::Ordering {
    if (a.t - b.t).abs() < TIE_EPSILON {
        a.prim.cmp(&b.prim)
    } else {
        a.t.total_cmp(&b.t)
    }
}

/// Hits sorted near to far with the transparency in front of each.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OrderedHitList {
    pub hits: Vec<HitRecord>,
    /// `T_{i-1}`: product of `(1 - response)` over hits before `i`.
    pub prefix: Vec<f64>,
    /// Transparency after the last listed hit.
    pub transparency: f64,
}

impl OrderedHitList {
    fn from_sorted(hits: Vec<HitRecord>, truncate: bool) -> Self {
        let mut prefix = Vec::with_capacity(hits.len());
        let mut t = 1.0;
        let mut kept = hits.len();
        for (i, h) in hits.iter().enumerate() {
            prefix.push(t);
            t *= 1.0 - h.response;
            if truncate && (h.is_opaque() || t < TRANSPARENCY_CUTOFF) {
                kept = i + 1;
                break;
            }
        }
        let mut hits = hits;
        hits.truncate(kept);
        OrderedHitList {
            hits,
            prefix,
            transparency: t,
        }
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }

    /// Probability that a stochastic shading trace returns hit `i`.
    pub fn hit_probability(&self, i: usize) -> f64 {
        self.hits[i].response * self.prefix[i]
    }

    /// `sum_i A_i T_{i-1} f_i`, the expected feature of a shading trace (misses contribute 0).
    pub fn expectation<F>(&self, feature: F) -> Rgb
    where
        F: Fn(&HitRecord) -> Rgb,
    {
        self.hits
            .iter()
            .enumerate()
            .map(|(i, h)| feature(h) * self.hit_probability(i))
            .sum()
    }

    /// Response-weighted mean position `sum w_i q_i / sum w_i`.
    pub fn weighted_mean_position(&self) -> Option<Vec3> {
        let w: f64 = (0..self.len()).map(|i| self.hit_probability(i)).sum();
        (w > 0.0).then(|| {
            self.hits
                .iter()
                .enumerate()
                .map(|(i, h)| h.position * self.hit_probability(i))
                .sum::<Vec3>()
                / w
        })
    }

    pub fn opacity(&self) -> f64 {
        1.0 - self.transparency
    }
}

/// Counts of per-candidate shader invocations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TraceStats {
    pub rays: u64,
    /// Candidates whose proxy (or triangle) the ray overlapped.
    pub anyhit: u64,
}

impl TraceStats {
    pub fn anyhit_per_ray(&self) -> f64 {
        self.anyhit as f64 / self.rays.max(1) as f64
    }
}

#[derive(Debug, Clone)]
struct PreparedGaussian {
    cov: Mat3,
    inv_cov: Mat3,
    proxy: Proxy,
}

/// Immutable acceleration structure over Gaussian proxies and triangles.
#[derive(Debug, Clone, Default)]
pub struct ProxyAccel {
    gaussians: Vec<GaussianPrimitive>,
    /// Indexed by Gaussian id; `None` for Gaussians below the cutoff.
    prepared: Vec<Option<PreparedGaussian>>,
    triangles: Vec<Triangle>,
    prims: Vec<PrimRef>,
    bvh: Bvh,
}

impl ProxyAccel {
    pub fn build(gaussians: &[GaussianPrimitive], triangles: &[Triangle]) -> Self {
        let mut prims = Vec::new();
        let mut bounds = Vec::new();
        let mut prepared = Vec::with_capacity(gaussians.len());
        for (i, g) in gaussians.iter().enumerate() {
            // Gaussians that never reach the cutoff cannot produce hits.
            let proxy = Proxy::for_gaussian(g);
            if let Some(proxy) = &proxy {
                bounds.push(Aabb {
                    min: proxy.bounds_min,
                    max: proxy.bounds_max,
                });
                prims.push(PrimRef::Gaussian(i as u32));
            }
            prepared.push(proxy.map(|proxy| PreparedGaussian {
                cov: g.covariance(),
                inv_cov: g.inverse_covariance(),
                proxy,
            }));
        }
        for (i, t) in triangles.iter().enumerate() {
            let (lo, hi) = t.bounds();
            let pad = Vec3::repeat(1e-9);
            bounds.push(Aabb {
                min: lo - pad,
                max: hi + pad,
            });
            prims.push(PrimRef::Triangle(i as u32));
        }
        let bvh = Bvh::build(&bounds);
        ProxyAccel {
            gaussians: gaussians.to_vec(),
            prepared,
            triangles: triangles.to_vec(),
            prims,
            bvh,
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.bvh.leaf_count()
    }

    pub fn primitive_count(&self) -> usize {
        self.prims.len()
    }

    pub fn gaussians(&self) -> &[GaussianPrimitive] {
        &self.gaussians
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn proxy(&self, gaussian: usize) -> Option<&Proxy> {
        self.prepared.get(gaussian)?.as_ref().map(|p| &p.proxy)
    }

    /// Runs the any-hit program for one candidate primitive. Counts an
    /// invocation when the ray overlaps the candidate's proxy or triangle.
    fn evaluate(&self, prim: u32, ray: &Ray, stats: &mut TraceStats) -> Option<HitRecord> {
        match self.prims[prim as usize] {
            PrimRef::Gaussian(id) => {
                let p = self.prepared[id as usize].as_ref()?;
                let (t0, t1) = p.proxy.intersect(&ray.origin, &ray.direction)?;
                if t1 < ray.t_min || t0 > ray.t_max {
                    return None;
                }
                stats.anyhit += 1;
                let g = &self.gaussians[id as usize];
                let response = response_from_covariance(&g.center, &p.cov, g.opacity, ray);
                if response < ALPHA_MIN {
                    return None;
                }
                let t = max_response_depth_from_inverse(&g.center, &p.inv_cov, ray);
                if t < ray.t_min || t > ray.t_max {
                    return None;
                }
                let normal = if g.normal.dot(&ray.direction) > 0.0 {
                    -g.normal
                } else {
                    g.normal
                };
                Some(HitRecord {
                    t,
                    prim: PrimRef::Gaussian(id),
                    response,
                    position: ray.at(t),
                    normal,
                    albedo: g.albedo,
                    roughness: g.roughness,
                    emission: g.emission,
                    f0: DEFAULT_F0,
                })
            }
            PrimRef::Triangle(id) => {
                let tri = &self.triangles[id as usize];
                let t = tri.intersect(ray)?;
                stats.anyhit += 1;
                let normal = if tri.normal.dot(&ray.direction) > 0.0 {
                    -tri.normal
                } else {
                    tri.normal
                };
                Some(HitRecord {
                    t,
                    prim: PrimRef::Triangle(id),
                    response: 1.0,
                    position: ray.at(t),
                    normal,
                    albedo: tri.material.albedo,
                    roughness: tri.material.roughness,
                    emission: tri.material.emission,
                    f0: tri.material.f0,
                })
            }
            PrimRef::Pixel { .. } => None,
        }
    }
}

pub fn build_accel(scene: &Scene) -> ProxyAccel {
    ProxyAccel::build(&scene.gaussians, &scene.triangles)
}

/// Every hit with response >= `ALPHA_MIN`, sorted, without truncation.
pub fn collect_hits(accel: &ProxyAccel, ray: &Ray, stats: &mut TraceStats) -> OrderedHitList {
    stats.rays += 1;
    let mut hits = Vec::new();
    accel
        .bvh
        .traverse(&ray.origin, &ray.direction, ray.t_min, ray.t_max, |p, _| {
            if let Some(h) = accel.evaluate(p, ray, stats) {
                hits.push(h);
            }
            false
        });
    hits.sort_by(hit_order);
    OrderedHitList::from_sorted(hits, false)
}

/// Exhaustive reference trace, truncated after an opaque triangle or once
/// the accumulated transparency drops below [`TRANSPARENCY_CUTOFF`].
pub fn trace_reference(accel: &ProxyAccel, ray: &Ray) -> OrderedHitList {
    trace_reference_with_stats(accel, ray, &mut TraceStats::default())
}

pub fn trace_reference_with_stats(accel: &ProxyAccel, ray: &Ray, stats: &mut TraceStats) -> OrderedHitList {
    let all = collect_hits(accel, ray, stats);
    OrderedHitList::from_sorted(all.hits, true)
}

/// Stochastic shadow ray: `true` when occluded. With `scale = 1`,
/// `E[b] = 1 - prod(1 - A_i)`.
pub fn trace_shadow_stochastic<R: Rng + ?Sized>(accel: &ProxyAccel, ray: &Ray, rng: &mut R, scale: f64) -> bool {
    trace_shadow_stochastic_with_stats(accel, ray, rng, scale, &mut TraceStats::default())
}

pub fn trace_shadow_stochastic_with_stats<R: Rng + ?Sized>(
    accel: &ProxyAccel,
    ray: &Ray,
    rng: &mut R,
    scale: f64,
    stats: &mut TraceStats,
) -> bool {
    stats.rays += 1;
    let mut occluded = false;
    accel
        .bvh
        .traverse(&ray.origin, &ray.direction, ray.t_min, ray.t_max, |p, _| {
            if let Some(h) = accel.evaluate(p, ray, stats) {
                if h.is_opaque() || h.response >= scale * rng.random::<f64>() {
                    occluded = true;
                    return true;
                }
            }
            false
        });
    occluded
}

/// Stochastic shading ray: the nearest accepted hit. With `scale = 1`, hit
/// `i` is returned with probability `A_i * T_{i-1}`.
pub fn trace_shading_stochastic<R: Rng + ?Sized>(
    accel: &ProxyAccel,
    ray: &Ray,
    rng: &mut R,
    scale: f64,
) -> Option<HitRecord> {
    trace_shading_stochastic_with_stats(accel, ray, rng, scale, &mut TraceStats::default())
}

pub fn trace_shading_stochastic_with_stats<R: Rng + ?Sized>(
    accel: &ProxyAccel,
    ray: &Ray,
    rng: &mut R,
    scale: f64,
    stats: &mut TraceStats,
) -> Option<HitRecord> {
    stats.rays += 1;
    let mut best: Option<HitRecord> = None;
    accel
        .bvh
        .traverse(&ray.origin, &ray.direction, ray.t_min, ray.t_max, |p, limit| {
            let Some(h) = accel.evaluate(p, ray, stats) else {
                return false;
            };
            // An accepted hit culls everything farther.
            if let Some(b) = &best {
                if hit_order(&h, b) != std::cmp::Ordering::Less {
                    return false;
                }
            }
            if h.is_opaque() || h.response >= scale * rng.random::<f64>() {
                *limit = h.t;
                best = Some(h);
            }
            false
        });
    best
}

/// Mean of `n_samples` stochastic shading traces: `shade(hit)` on a hit and
/// `env(direction)` on a miss. The hit probability cancels the
/// `T * A` weight, so the plain average is unbiased for the enumerated sum
/// plus the escaped environment term.
pub fn estimate_incoming_radiance<R, S, E>(
    accel: &ProxyAccel,
    ray: &Ray,
    mut shade: S,
    env: E,
    rng: &mut R,
    n_samples: usize,
) -> Rgb
where
    R: Rng + ?Sized,
    S: FnMut(&HitRecord, &mut R) -> Rgb,
    E: Fn(&Vec3) -> Rgb,
{
    assert!(n_samples >= 1);
    let mut sum = Rgb::zeros();
    for _ in 0..n_samples {
        sum += match trace_shading_stochastic(accel, ray, rng, 1.0) {
            Some(h) => shade(&h, rng),
            None => env(&ray.direction),
        };
    }
    sum / n_samples as f64
}

#[cfg(test)]
mod tests;
