use rand::Rng;
use rayon::prelude::*;

use super::Light;
use crate::math::Vec3;
use crate::rng::{stream, Purpose};

/// Candidates below this grid weight are dropped.
pub const MIN_WEIGHT: f64 = 1e-9;
/// Near-field clamp for the area-light distance falloff.
pub const MIN_DISTANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    pub cascades: usize,
    pub base_cell: f64,
    /// Cells per axis in every cascade.
    pub cells: usize,
    /// Reservoir capacity R.
    pub reservoir: usize,
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams {
            cascades: 4,
            base_cell: 1.0,
            cells: 8,
            reservoir: 8,
        }
    }
}

/// Lights kept for one cell plus the total candidate weight.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Reservoir {
    pub lights: Vec<u32>,
    pub total_weight: f64,
}

/// Camera-centered cascades of uniform cells, each holding an A-Res reservoir.
#[derive(Debug, Clone)]
pub struct LightGrid {
    params: GridParams,
    /// Lower corner of each cascade.
    corners: Vec<Vec3>,
    cells: Vec<Reservoir>,
}

/// Grid weight of a light for a cell centered at `p`. Environment lights are
/// never grid candidates.
pub fn light_weight(light: &Light, p: &Vec3) -> f64 {
    match light {
        Light::Directional { .. } => light.radiance_luminance(),
        Light::Area { corner, edge_u, edge_v, .. } => {
            let c = corner + (edge_u + edge_v) * 0.5;
            let d2 = (c - p).norm_squared().max(MIN_DISTANCE * MIN_DISTANCE);
            light.radiance_luminance() * light.area() / d2
        }
        Light::Environment(_) => 0.0,
    }
}

/// A-Res over `(item, weight)` pairs: keeps the `capacity` largest keys
/// `ln(u) / w`, equivalent to `u^(1/w)` without underflow.
pub fn a_res<R: Rng + ?Sized>(items: impl IntoIterator<Item = (u32, f64)>, capacity: usize, rng: &mut R) -> Reservoir {
    let mut keyed: Vec<(f64, u32)> = Vec::new();
    let mut total = 0.0;
    for (id, w) in items {
        if !(w >= MIN_WEIGHT) {
            continue;
        }
        total += w;
        let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        keyed.push((u.ln() / w, id));
    }
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    keyed.truncate(capacity);
    Reservoir {
        lights: keyed.into_iter().map(|(_, id)| id).collect(),
        total_weight: total,
    }
}

impl LightGrid {
    pub fn build(lights: &[Light], center: &Vec3, params: GridParams, seed: u64, frame: u64) -> Self {
        let n = params.cells;
        let corners: Vec<Vec3> = (0..params.cascades)
            .map(|c| {
                let s = params.base_cell * (1u64 << c) as f64;
                center.map(|v| (v / s).floor() * s) - Vec3::repeat(s * (n / 2) as f64)
            })
            .collect();
        let per = n * n * n;
        let cells = (0..params.cascades * per)
            .into_par_iter()
            .map(|i| {
                let (c, local) = (i / per, i % per);
                let s = params.base_cell * (1u64 << c) as f64;
                let idx = Vec3::new((local % n) as f64, ((local / n) % n) as f64, (local / (n * n)) as f64);
                let mid = corners[c] + (idx + Vec3::repeat(0.5)) * s;
                let mut rng = stream(seed, frame, i as u64, Purpose::Grid);
                a_res(
                    lights.iter().enumerate().map(|(k, l)| (k as u32, light_weight(l, &mid))),
                    params.reservoir,
                    &mut rng,
                )
            })
            .collect();
        LightGrid { params, corners, cells }
    }

    pub fn params(&self) -> &GridParams {
        &self.params
    }

    /// Cell index within `cascade`, or `None` outside it.
    pub fn cell_in(&self, cascade: usize, p: &Vec3) -> Option<usize> {
        let n = self.params.cells;
        let s = self.params.base_cell * (1u64 << cascade) as f64;
        let local = (p - self.corners[cascade]) / s;
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let v = local[a].floor();
            if !(v >= 0.0 && v < n as f64) {
                return None;
            }
            idx[a] = v as usize;
        }
        Some(cascade * n * n * n + idx[0] + n * (idx[1] + n * idx[2]))
    }

    /// Finest cascade containing `p`; points beyond the coarsest cascade use
    /// its nearest cell.
    pub fn cell_index(&self, p: &Vec3) -> usize {
        for c in 0..self.params.cascades {
            if let Some(i) = self.cell_in(c, p) {
                return i;
            }
        }
        let c = self.params.cascades - 1;
        let n = self.params.cells;
        let s = self.params.base_cell * (1u64 << c) as f64;
        let local = (p - self.corners[c]) / s;
        let clamp = |v: f64| (v.floor().max(0.0) as usize).min(n - 1);
        c * n * n * n + clamp(local.x) + n * (clamp(local.y) + n * clamp(local.z))
    }

    pub fn reservoir(&self, p: &Vec3) -> &Reservoir {
        &self.cells[self.cell_index(p)]
    }

    pub fn reservoir_at(&self, index: usize) -> &Reservoir {
        &self.cells[index]
    }
}
