//! World-space radiance cache addressed by quantized position and direction.

use crate::math::{Rgb, Vec3};
use crate::rng::mix64;

/// Cells per face side for the direction part of the key.
pub const FACE_CELLS: usize = 4;
/// Empty-slot marker; packed keys use 63 bits so never collide with it.
const EMPTY: u64 = u64::MAX;
const POS_BITS: u32 = 17;
const MAX_CASCADE: i32 = 31;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HashGridParams {
    /// Table size; must be a power of two.
    pub capacity: usize,
    /// Voxel edge in the innermost distance band.
    pub base_voxel: f64,
    /// Outer radius of the innermost distance band around the camera.
    pub base_distance: f64,
    /// Longest linear-probing chain.
    pub max_probe: usize,
    /// Cells idle for more than this many frames are evicted.
    pub evict_after: u64,
    /// Cells average at most this many samples, then track a moving mean.
    pub max_samples: u32,
}

impl Default for HashGridParams {
    fn default() -> Self {
        HashGridParams {
            capacity: 1 << 20,
            base_voxel: 0.02,
            base_distance: 1.0,
            max_probe: 16,
            evict_after: 60,
            max_samples: 64,
        }
    }
}

/// Packed key vector: distance cascade, voxel coordinates at that cascade's
/// voxel size, and direction face plus face cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CacheKey(pub u64);

impl CacheKey {
    pub fn new(position: &Vec3, direction: &Vec3, camera_position: &Vec3, params: &HashGridParams) -> Self {
        let dist = (position - camera_position).norm();
        let cascade = ((dist / params.base_distance).max(1.0).log2().floor() as i32).clamp(0, MAX_CASCADE);
        let voxel = params.base_voxel * f64::powi(2.0, cascade);
        let mask = (1u64 << POS_BITS) - 1;
        let mut k = cascade as u64;
        for a in 0..3 {
            let q = (position[a] / voxel).floor() as i64;
            k = (k << POS_BITS) | (q as u64 & mask);
        }
        let (face, cu, cv) = direction_cell(direction);
        k = (k << 3) | face as u64;
        k = (k << 2) | cu as u64;
        k = (k << 2) | cv as u64;
        CacheKey(k)
    }

    pub fn cascade(&self) -> u32 {
        (self.0 >> (3 * POS_BITS + 7)) as u32
    }

    pub fn face(&self) -> u32 {
        ((self.0 >> 4) & 7) as u32
    }
}

/// Major axis (`2 * axis + negative`) and cell on that face.
pub fn direction_cell(d: &Vec3) -> (usize, usize, usize) {
    let a = d.abs();
    let axis = if a.x >= a.y && a.x >= a.z {
        0
    } else if a.y >= a.z {
        1
    } else {
        2
    };
    let m = a[axis].max(1e-300);
    let (i, j) = ((axis + 1) % 3, (axis + 2) % 3);
    let cell = |v: f64| (((v / m + 1.0) * 0.5 * FACE_CELLS as f64) as usize).min(FACE_CELLS - 1);
    (2 * axis + usize::from(d[axis] < 0.0), cell(d[i]), cell(d[j]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HashCell {
    key: u64,
    sum: [f32; 3],
    pub count: u32,
    pub last_frame: u64,
}

impl HashCell {
    const VACANT: HashCell = HashCell { key: EMPTY, sum: [0.0; 3], count: 0, last_frame: 0 };

    pub fn is_empty(&self) -> bool {
        self.key == EMPTY
    }

    pub fn key(&self) -> Option<CacheKey> {
        (!self.is_empty()).then_some(CacheKey(self.key))
    }

    pub fn mean(&self) -> Option<Rgb> {
        (self.count > 0).then(|| Rgb::new(self.sum[0] as f64, self.sum[1] as f64, self.sum[2] as f64) / self.count as f64)
    }
}

/// Cache write deferred to the frame barrier. `radiance: None` only marks
/// the cell as used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CacheUpdate {
    pub key: CacheKey,
    pub radiance: Option<Rgb>,
}

/// Open-addressing table with bounded linear probing.
#[derive(Debug, Clone)]
pub struct HashGrid {
    params: HashGridParams,
    cells: Vec<HashCell>,
    occupied: usize,
}

impl HashGrid {
    pub fn new(params: HashGridParams) -> Self {
        assert!(params.capacity.is_power_of_two(), "hash grid capacity must be a power of two");
        assert!(params.max_probe >= 1 && params.max_probe <= params.capacity);
        HashGrid { params, cells: vec![HashCell::VACANT; params.capacity], occupied: 0 }
    }

    pub fn params(&self) -> &HashGridParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.occupied
    }

    pub fn is_empty(&self) -> bool {
        self.occupied == 0
    }

    pub fn key(&self, position: &Vec3, direction: &Vec3, camera_position: &Vec3) -> CacheKey {
        CacheKey::new(position, direction, camera_position, &self.params)
    }

    fn home(&self, key: CacheKey) -> usize {
        (mix64(key.0) as usize) & (self.params.capacity - 1)
    }

    fn mask(&self) -> usize {
        self.params.capacity - 1
    }

    /// Slot holding `key`, if present.
    pub fn find(&self, key: CacheKey) -> Option<usize> {
        let h = self.home(key);
        for i in 0..self.params.max_probe {
            let s = (h + i) & self.mask();
            let c = &self.cells[s];
            if c.key == key.0 {
                return Some(s);
            }
            if c.is_empty() {
                return None;
            }
        }
        None
    }

    /// Slot `key` occupies or would be written to: its own slot, else the
    /// first vacancy in its chain, else the stalest slot of the chain.
    pub fn slot(&self, key: CacheKey) -> usize {
        let h = self.home(key);
        let mut stalest = h;
        for i in 0..self.params.max_probe {
            let s = (h + i) & self.mask();
            let c = &self.cells[s];
            if c.key == key.0 || c.is_empty() {
                return s;
            }
            if c.last_frame < self.cells[stalest].last_frame {
                stalest = s;
            }
        }
        stalest
    }

    pub fn cell(&self, slot: usize) -> &HashCell {
        &self.cells[slot]
    }

    /// Mean radiance and sample count for `key`.
    pub fn lookup(&self, key: CacheKey) -> Option<(Rgb, u32)> {
        let c = &self.cells[self.find(key)?];
        c.mean().map(|m| (m, c.count))
    }

    /// Adds one radiance sample (or just marks use) at `frame`.
    pub fn apply(&mut self, update: &CacheUpdate, frame: u64) {
        let s = self.slot(update.key);
        let max = self.params.max_samples;
        let c = &mut self.cells[s];
        if c.key != update.key.0 {
            if update.radiance.is_none() {
                return;
            }
            if c.is_empty() {
                self.occupied += 1;
            }
            *c = HashCell { key: update.key.0, ..HashCell::VACANT };
        }
        c.last_frame = frame;
        if let Some(l) = update.radiance {
            if c.count >= max {
                let keep = (max - 1) as f32 / max as f32;
                for ch in 0..3 {
                    c.sum[ch] *= keep;
                }
                c.count = max - 1;
            }
            for ch in 0..3 {
                c.sum[ch] += l[ch] as f32;
            }
            c.count += 1;
        }
    }

    pub fn insert(&mut self, key: CacheKey, radiance: Rgb, frame: u64) {
        self.apply(&CacheUpdate { key, radiance: Some(radiance) }, frame);
    }

    /// Evicts cells idle for more than `evict_after` frames and closes the
    /// gaps so every remaining chain stays reachable.
    pub fn maintain(&mut self, frame: u64) -> usize {
        let limit = self.params.evict_after;
        let mut evicted = 0;
        let mut s = 0;
        while s < self.cells.len() {
            let c = &self.cells[s];
            if !c.is_empty() && frame.saturating_sub(c.last_frame) > limit {
                self.remove(s);
                evicted += 1;
                // A live entry may have shifted into `s`; re-examine it.
                continue;
            }
            s += 1;
        }
        evicted
    }

    /// Backward-shift deletion for linear probing.
    fn remove(&mut self, slot: usize) {
        let mask = self.mask();
        let mut hole = slot;
        self.cells[hole] = HashCell::VACANT;
        self.occupied -= 1;
        let mut j = hole;
        loop {
            j = (j + 1) & mask;
            if self.cells[j].is_empty() || j == slot {
                break;
            }
            let home = self.home(CacheKey(self.cells[j].key));
            if (j.wrapping_sub(home) & mask) >= (j.wrapping_sub(hole) & mask) {
                self.cells[hole] = self.cells[j];
                self.cells[j] = HashCell::VACANT;
                hole = j;
            }
        }
    }

    pub fn clear(&mut self) {
        self.cells.fill(HashCell::VACANT);
        self.occupied = 0;
    }
}
