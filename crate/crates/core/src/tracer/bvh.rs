//! Binned surface-area-heuristic BVH over axis-aligned primitive bounds.

use crate::math::Vec3;

pub const MAX_LEAF_SIZE: usize = 4;
const BINS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn grow(&mut self, other: &Aabb) {
        self.min = self.min.inf(&other.min);
        self.max = self.max.sup(&other.max);
    }

    pub fn grow_point(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn is_empty(&self) -> bool {
        self.min.x > self.max.x
    }

    pub fn surface_area(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let d = self.max - self.min;
        2.0 * (d.x * d.y + d.y * d.z + d.z * d.x)
    }

    /// Slab test against `[t_min, t_max]`; returns the entry distance.
    #[inline]
    pub fn hit(&self, origin: &Vec3, inv_dir: &Vec3, t_min: f64, t_max: f64) -> Option<f64> {
        let mut t0 = t_min;
        let mut t1 = t_max;
        for a in 0..3 {
            let ta = (self.min[a] - origin[a]) * inv_dir[a];
            let tb = (self.max[a] - origin[a]) * inv_dir[a];
            let (lo, hi) = if ta < tb { (ta, tb) } else { (tb, ta) };
            // NaN from 0 * inf (origin on a slab plane) is ignored by max/min.
            t0 = t0.max(lo);
            t1 = t1.min(hi);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    bounds: Aabb,
    /// Leaf: first index into `order`; interior: index of the left child
    /// (the right child follows it).
    first: u32,
    count: u32,
}

#[derive(Debug, Clone, Default)]
pub struct Bvh {
    nodes: Vec<Node>,
    /// Primitive indices referenced by leaves.
    order: Vec<u32>,
}

impl Bvh {
    pub fn build(bounds: &[Aabb]) -> Self {
        if bounds.is_empty() {
            return Bvh::default();
        }
        let centroids: Vec<Vec3> = bounds.iter().map(|b| (b.min + b.max) * 0.5).collect();
        let mut order: Vec<u32> = (0..bounds.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * bounds.len());
        nodes.push(Node {
            bounds: Aabb::empty(),
            first: 0,
            count: bounds.len() as u32,
        });
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let first = nodes[ni].first as usize;
            let count = nodes[ni].count as usize;
            let slice = &mut order[first..first + count];
            let mut nb = Aabb::empty();
            let mut cb = Aabb::empty();
            for &i in slice.iter() {
                nb.grow(&bounds[i as usize]);
                cb.grow_point(&centroids[i as usize]);
            }
            nodes[ni].bounds = nb;
            if count <= MAX_LEAF_SIZE {
                continue;
            }
            let Some(mid) = split(slice, bounds, &centroids, &cb) else {
                continue;
            };
            let left = nodes.len();
            nodes.push(Node {
                bounds: Aabb::empty(),
                first: first as u32,
                count: mid as u32,
            });
            nodes.push(Node {
                bounds: Aabb::empty(),
                first: (first + mid) as u32,
                count: (count - mid) as u32,
            });
            nodes[ni].first = left as u32;
            nodes[ni].count = 0;
            stack.push(left + 1);
            stack.push(left);
        }
        Bvh { nodes, order }
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.count > 0).count()
    }

    /// Near-to-far traversal. `visit` receives a primitive index and the
    /// current far limit, which it may shrink; returning `true` stops.
    pub fn traverse(
        &self,
        origin: &Vec3,
        direction: &Vec3,
        t_min: f64,
        t_max: f64,
        mut visit: impl FnMut(u32, &mut f64) -> bool,
    ) {
        if self.nodes.is_empty() {
            return;
        }
        let inv = direction.map(|d| 1.0 / d);
        let mut limit = t_max;
        if self.nodes[0].bounds.hit(origin, &inv, t_min, limit).is_none() {
            return;
        }
        let mut stack: Vec<(usize, f64)> = Vec::with_capacity(64);
        stack.push((0, t_min));
        while let Some((ni, entry)) = stack.pop() {
            if entry > limit {
                continue;
            }
            let node = &self.nodes[ni];
            if node.count > 0 {
                let first = node.first as usize;
                for &p in &self.order[first..first + node.count as usize] {
                    if visit(p, &mut limit) {
                        return;
                    }
                }
                continue;
            }
            let l = node.first as usize;
            let hl = self.nodes[l].bounds.hit(origin, &inv, t_min, limit);
            let hr = self.nodes[l + 1].bounds.hit(origin, &inv, t_min, limit);
            match (hl, hr) {
                (Some(a), Some(b)) => {
                    if a <= b {
                        stack.push((l + 1, b));
                        stack.push((l, a));
                    } else {
                        stack.push((l, a));
                        stack.push((l + 1, b));
                    }
                }
                (Some(a), None) => stack.push((l, a)),
                (None, Some(b)) => stack.push((l + 1, b)),
                (None, None) => {}
            }
        }
    }
}

/// Partitions `slice` by the best binned SAH plane; returns the split point
/// or `None` to make a leaf.
fn split(slice: &mut [u32], bounds: &[Aabb], centroids: &[Vec3], cb: &Aabb) -> Option<usize> {
    let extent = cb.max - cb.min;
    let n = slice.len();
    let mut best: Option<(usize, usize, f64)> = None;
    for axis in 0..3 {
        if extent[axis] <= 1e-12 {
            continue;
        }
        let scale = BINS as f64 / extent[axis];
        let bin_of = |i: u32| (((centroids[i as usize][axis] - cb.min[axis]) * scale) as usize).min(BINS - 1);
        let mut bb = [Aabb::empty(); BINS];
        let mut cnt = [0usize; BINS];
        for &i in slice.iter() {
            let b = bin_of(i);
            bb[b].grow(&bounds[i as usize]);
            cnt[b] += 1;
        }
        let mut right_area = [0.0; BINS];
        let mut right_cnt = [0usize; BINS];
        let mut acc = Aabb::empty();
        let mut c = 0;
        for b in (1..BINS).rev() {
            acc.grow(&bb[b]);
            c += cnt[b];
            right_area[b] = acc.surface_area();
            right_cnt[b] = c;
        }
        let mut acc = Aabb::empty();
        let mut c = 0;
        for b in 0..BINS - 1 {
            acc.grow(&bb[b]);
            c += cnt[b];
            if c == 0 || right_cnt[b + 1] == 0 {
                continue;
            }
            let cost = acc.surface_area() * c as f64 + right_area[b + 1] * right_cnt[b + 1] as f64;
            if best.is_none_or(|(_, _, bc)| cost < bc) {
                best = Some((axis, b, cost));
            }
        }
    }
    let (axis, plane, _) = match best {
        Some(b) => b,
        None => {
            // All centroids coincide; split by count.
            return (n > MAX_LEAF_SIZE).then_some(n / 2);
        }
    };
    let scale = BINS as f64 / extent[axis];
    let mut i = 0;
    let mut j = n;
    while i < j {
        let b = (((centroids[slice[i] as usize][axis] - cb.min[axis]) * scale) as usize).min(BINS - 1);
        if b <= plane {
            i += 1;
        } else {
            j -= 1;
            slice.swap(i, j);
        }
    }
    (i > 0 && i < n).then_some(i)
}
