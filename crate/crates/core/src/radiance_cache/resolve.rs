use rand::Rng;

use super::hash::{CacheUpdate, HashGrid};
use crate::camera::CameraModel;
use crate::direct_light::{incident_estimate, DirectContext};
use crate::image::Image;
use crate::math::{Rgb, Vec3};
use crate::raster::GBuffer;
use crate::tracer::HitRecord;

/// Relative depth agreement required to reuse the previous film.
pub const FILM_DEPTH_TOLERANCE: f64 = 0.05;
/// Warm cells below this many samples still queue a fresh estimate.
pub const CACHE_REFINE_COUNT: u32 = 16;

/// Previous frame's per-surface outgoing radiance (before opacity weighting
/// and tone mapping) with the depth it was computed at.
#[derive(Debug, Clone)]
pub struct PrevFilm {
    pub radiance: Image<Rgb>,
    pub depth: Image<f64>,
    pub camera: CameraModel,
}

impl PrevFilm {
    pub fn new(radiance: Image<Rgb>, gbuffer: &GBuffer, camera: &CameraModel) -> Self {
        assert!(radiance.same_size(gbuffer));
        PrevFilm {
            radiance,
            depth: gbuffer.map(|p| if p.is_covered() { p.depth } else { f64::INFINITY }),
            camera: *camera,
        }
    }

    /// Film value at the pixel `p` reprojects to, if that pixel saw `p`.
    pub fn lookup(&self, p: &Vec3) -> Option<Rgb> {
        let (px, z) = self.camera.project(p)?;
        if px.x < 0.0 || px.y < 0.0 {
            return None;
        }
        let (x, y) = (px.x as usize, px.y as usize);
        if x >= self.depth.width || y >= self.depth.height {
            return None;
        }
        let d = *self.depth.get(x, y);
        (d.is_finite() && (d - z).abs() <= FILM_DEPTH_TOLERANCE * d).then(|| *self.radiance.get(x, y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolveSource {
    Film,
    Cache,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolved {
    /// Outgoing radiance from the hit toward the ray origin, emission included.
    pub radiance: Rgb,
    pub source: ResolveSource,
    /// Cache write to apply at the frame barrier.
    pub update: Option<CacheUpdate>,
}

/// Read-only state for resolving secondary hits.
#[derive(Clone, Copy)]
pub struct ResolveContext<'a> {
    /// `None` disables film reuse.
    pub film: Option<&'a PrevFilm>,
    pub cache: &'a HashGrid,
    pub direct: DirectContext<'a>,
    pub camera_position: Vec3,
}

/// Previous film, then the hash grid, then one direct-lighting sample with a
/// Lambertian BRDF. Cached values exclude emission; it is added back here.
pub fn resolve_radiance<R: Rng + ?Sized>(
    ctx: &ResolveContext,
    hit: &HitRecord,
    ray_direction: &Vec3,
    rng: &mut R,
) -> Resolved {
    if let Some(l) = ctx.film.and_then(|f| f.lookup(&hit.position)) {
        return Resolved { radiance: l, source: ResolveSource::Film, update: None };
    }
    let key = ctx.cache.key(&hit.position, &-ray_direction, &ctx.camera_position);
    if let Some((mean, count)) = ctx.cache.lookup(key) {
        let fresh = (count < CACHE_REFINE_COUNT).then(|| reflected_direct(ctx, hit, rng));
        return Resolved {
            radiance: mean + hit.emission,
            source: ResolveSource::Cache,
            update: Some(CacheUpdate { key, radiance: fresh }),
        };
    }
    let l = reflected_direct(ctx, hit, rng);
    Resolved {
        radiance: l + hit.emission,
        source: ResolveSource::Direct,
        update: Some(CacheUpdate { key, radiance: Some(l) }),
    }
}

fn reflected_direct<R: Rng + ?Sized>(ctx: &ResolveContext, hit: &HitRecord, rng: &mut R) -> Rgb {
    hit.albedo.component_mul(&incident_estimate(&ctx.direct, &hit.position, &hit.normal, rng))
}
