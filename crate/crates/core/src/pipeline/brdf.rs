//! GGX microfacet helpers and the split-sum environment-BRDF table.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::math::Vec3;

/// Smallest GGX alpha; keeps near-mirror lobes finite.
pub const MIN_ALPHA: f64 = 1e-4;
pub const LUT_SIZE: usize = 32;
pub const LUT_SAMPLES: usize = 1024;

/// Perceptual roughness to GGX alpha.
pub fn alpha(roughness: f64) -> f64 {
    (roughness * roughness).max(MIN_ALPHA)
}

/// GGX normal distribution for a local half vector.
pub fn ggx_d(h: &Vec3, alpha: f64) -> f64 {
    let a2 = alpha * alpha;
    let c = h.z.max(0.0);
    let d = c * c * (a2 - 1.0) + 1.0;
    a2 / (PI * d * d)
}

/// Smith masking for one direction (local, `z` = normal).
pub fn smith_g1(v: &Vec3, alpha: f64) -> f64 {
    let c = v.z;
    if c <= 0.0 {
        return 0.0;
    }
    let a2 = alpha * alpha;
    2.0 * c / (c + (a2 + (1.0 - a2) * c * c).sqrt())
}

/// Visible-normal sampling of the GGX lobe seen from local `v`.
pub fn sample_vndf(v: &Vec3, alpha: f64, u1: f64, u2: f64) -> Vec3 {
    let vh = Vec3::new(alpha * v.x, alpha * v.y, v.z).normalize();
    let len2 = vh.x * vh.x + vh.y * vh.y;
    let t1 = if len2 > 0.0 { Vec3::new(-vh.y, vh.x, 0.0) / len2.sqrt() } else { Vec3::x() };
    let t2 = vh.cross(&t1);
    let r = u1.sqrt();
    let phi = 2.0 * PI * u2;
    let p1 = r * phi.cos();
    let s = 0.5 * (1.0 + vh.z);
    let p2 = (1.0 - s) * (1.0 - p1 * p1).max(0.0).sqrt() + s * r * phi.sin();
    let nh = t1 * p1 + t2 * p2 + vh * (1.0 - p1 * p1 - p2 * p2).max(0.0).sqrt();
    Vec3::new(alpha * nh.x, alpha * nh.y, nh.z.max(0.0)).normalize()
}

/// Half vector distributed as `D(h) * cos(theta_h)`.
pub fn sample_ggx_h(alpha: f64, u1: f64, u2: f64) -> Vec3 {
    let a2 = alpha * alpha;
    let cos_t = ((1.0 - u1) / (1.0 + (a2 - 1.0) * u1)).sqrt();
    let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
    let phi = 2.0 * PI * u2;
    Vec3::new(sin_t * phi.cos(), sin_t * phi.sin(), cos_t)
}

pub fn reflect_about(v: &Vec3, h: &Vec3) -> Vec3 {
    h * (2.0 * v.dot(h)) - v
}

/// `i`-th of `n` Hammersley points.
pub fn hammersley(i: u32, n: u32) -> (f64, f64) {
    (i as f64 / n as f64, i.reverse_bits() as f64 / 4_294_967_296.0)
}

/// Scale `A` and bias `B` such that the GGX specular albedo is
/// `A * F0 + B`, tabulated over `(N.V, roughness)` at texel centers.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSumLut {
    pub size: usize,
    /// `(a, b)` per texel, row = roughness, column = N.V.
    pub texels: Vec<(f64, f64)>,
}

impl SplitSumLut {
    pub fn compute(size: usize, samples: u32) -> Self {
        let texels = (0..size * size)
            .map(|i| {
                let nov = ((i % size) as f64 + 0.5) / size as f64;
                let rough = ((i / size) as f64 + 0.5) / size as f64;
                integrate(nov, rough, samples)
            })
            .collect();
        SplitSumLut { size, texels }
    }

    /// The table used by the renderer, computed once.
    pub fn shared() -> &'static SplitSumLut {
        static LUT: OnceLock<SplitSumLut> = OnceLock::new();
        LUT.get_or_init(|| SplitSumLut::compute(LUT_SIZE, LUT_SAMPLES as u32))
    }

    pub fn texel(&self, x: usize, y: usize) -> (f64, f64) {
        self.texels[y * self.size + x]
    }

    /// Bilinear lookup between texel centers, clamped at the borders.
    pub fn lookup(&self, nov: f64, roughness: f64) -> (f64, f64) {
        let n = self.size as f64;
        let fx = (nov.clamp(0.0, 1.0) * n - 0.5).clamp(0.0, n - 1.0);
        let fy = (roughness.clamp(0.0, 1.0) * n - 0.5).clamp(0.0, n - 1.0);
        let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(self.size - 1), (y0 + 1).min(self.size - 1));
        let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
        let lerp = |a: (f64, f64), b: (f64, f64), t: f64| (a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t);
        let top = lerp(self.texel(x0, y0), self.texel(x1, y0), tx);
        let bottom = lerp(self.texel(x0, y1), self.texel(x1, y1), tx);
        lerp(top, bottom, ty)
    }

    /// Specular albedo `A * F0 + B`.
    pub fn specular_albedo(&self, nov: f64, roughness: f64, f0: f64) -> f64 {
        let (a, b) = self.lookup(nov, roughness);
        a * f0 + b
    }
}

fn integrate(nov: f64, roughness: f64, samples: u32) -> (f64, f64) {
    let al = alpha(roughness);
    let v = Vec3::new((1.0 - nov * nov).max(0.0).sqrt(), 0.0, nov);
    let (mut a, mut b) = (0.0, 0.0);
    for i in 0..samples {
        let (u1, u2) = hammersley(i, samples);
        let h = sample_ggx_h(al, u1, u2);
        let l = reflect_about(&v, &h);
        let (nol, noh, voh) = (l.z, h.z, v.dot(&h));
        if nol <= 0.0 || voh <= 0.0 {
            continue;
        }
        // f * cos / pdf with pdf = D * NoH / (4 VoH).
        let g_vis = smith_g1(&v, al) * smith_g1(&l, al) * voh / (noh * nov);
        let fc = (1.0 - voh).powi(5);
        a += (1.0 - fc) * g_vis;
        b += fc * g_vis;
    }
    (a / samples as f64, b / samples as f64)
}
