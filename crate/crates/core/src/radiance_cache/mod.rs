//! Two-level radiance cache for indirect diffuse lighting.
//!
//! Screen probes anchored on the film store hemispheres of incident
//! radiance in hemi-octahedral tiles and are read back through an order-1
//! SH fit. Probe rays resolve their hits from the previous film when the hit
//! was visible last frame, else from a world-space hash grid, else from one
//! direct-lighting sample that is then cached.
//!
//! Probe updates run in parallel and only read the hash grid; writes are
//! returned as [`CacheUpdate`]s and applied in probe order after the pass.

mod hash;
mod octa;
mod probe;
mod resolve;
mod sh;

pub use hash::{direction_cell, CacheKey, CacheUpdate, HashCell, HashGrid, HashGridParams, FACE_CELLS};
pub use octa::{decode, encode, jacobian, texel_center, texel_of, texel_solid_angle, TEXELS, TILE};
pub use probe::{
    interpolate_incident, interpolate_indirect, place_probes, update_probes, ProbeParams, ProbeSample, ProbeSet,
    ScreenProbe, LUMINANCE_SHARE, PLANE_TOLERANCE,
};
pub use resolve::{
    resolve_radiance, PrevFilm, ResolveContext, ResolveSource, Resolved, CACHE_REFINE_COUNT, FILM_DEPTH_TOLERANCE,
};
pub use sh::ShL1;

use crate::camera::CameraModel;
use crate::math::Vec3;

/// Slot that `position` seen along `direction` maps to in `grid`.
pub fn hash_key(position: &Vec3, direction: &Vec3, camera: &CameraModel, grid: &HashGrid) -> usize {
    grid.slot(grid.key(position, direction, &camera.position))
}

/// Applies deferred writes in order and returns how many carried radiance.
pub fn apply_updates(grid: &mut HashGrid, updates: &[CacheUpdate], frame: u64) -> usize {
    for u in updates {
        grid.apply(u, frame);
    }
    updates.iter().filter(|u| u.radiance.is_some()).count()
}
