//! Hemi-octahedral parameterization of the upper (+z) hemisphere onto the
//! unit square, plus per-texel integration tables.

use std::sync::OnceLock;

use crate::math::{Vec2, Vec3};

/// Texels per tile side.
pub const TILE: usize = 8;
pub const TEXELS: usize = TILE * TILE;

/// Sub-samples per texel side for the integration tables.
const SUB: usize = 24;

/// Local direction with `z >= 0` to `[0, 1]^2`.
pub fn encode(d: &Vec3) -> Vec2 {
    let z = d.z.max(0.0);
    let s = d.x.abs() + d.y.abs() + z;
    let (x, y) = if s > 0.0 { (d.x / s, d.y / s) } else { (0.0, 0.0) };
    Vec2::new(0.5 * (x + y + 1.0), 0.5 * (x - y + 1.0))
}

pub fn decode(uv: &Vec2) -> Vec3 {
    let p = unnormalized(uv);
    p / p.norm()
}

fn unnormalized(uv: &Vec2) -> Vec3 {
    let u = 2.0 * uv.x - 1.0;
    let v = 2.0 * uv.y - 1.0;
    let x = 0.5 * (u + v);
    let y = 0.5 * (u - v);
    Vec3::new(x, y, (1.0 - x.abs() - y.abs()).max(0.0))
}

/// Solid angle per unit `uv` area at `uv`.
pub fn jacobian(uv: &Vec2) -> f64 {
    2.0 / unnormalized(uv).norm().powi(3)
}

pub fn texel_of(d: &Vec3) -> usize {
    let uv = encode(d);
    let x = ((uv.x * TILE as f64) as usize).min(TILE - 1);
    let y = ((uv.y * TILE as f64) as usize).min(TILE - 1);
    y * TILE + x
}

/// `uv` of a point inside texel `t`, with `(fx, fy)` in `[0, 1)^2`.
pub fn texel_uv(t: usize, fx: f64, fy: f64) -> Vec2 {
    Vec2::new(((t % TILE) as f64 + fx) / TILE as f64, ((t / TILE) as f64 + fy) / TILE as f64)
}

pub fn texel_center(t: usize) -> Vec3 {
    decode(&texel_uv(t, 0.5, 0.5))
}

/// Integrals over each texel: solid angle, and `cos * Y(d)` / `cos * Y Y^T`
/// moments used by the least-squares fit.
pub(crate) struct Tables {
    pub solid_angle: [f64; TEXELS],
    pub cos_basis: [[f64; 4]; TEXELS],
    pub cos_gram: nalgebra::Matrix4<f64>,
}

pub(crate) fn tables() -> &'static Tables {
    static T: OnceLock<Tables> = OnceLock::new();
    T.get_or_init(|| {
        let mut solid_angle = [0.0; TEXELS];
        let mut cos_basis = [[0.0; 4]; TEXELS];
        let mut cos_gram = nalgebra::Matrix4::zeros();
        let du = 1.0 / (TILE * SUB) as f64;
        for t in 0..TEXELS {
            for i in 0..SUB {
                for j in 0..SUB {
                    let uv = texel_uv(t, (i as f64 + 0.5) / SUB as f64, (j as f64 + 0.5) / SUB as f64);
                    let dw = jacobian(&uv) * du * du;
                    let d = decode(&uv);
                    let y = super::sh::basis(&d);
                    solid_angle[t] += dw;
                    for k in 0..4 {
                        cos_basis[t][k] += dw * d.z * y[k];
                    }
                    let yv = nalgebra::Vector4::from(y);
                    cos_gram += yv * yv.transpose() * (dw * d.z);
                }
            }
        }
        Tables { solid_angle, cos_basis, cos_gram }
    })
}

pub fn texel_solid_angle(t: usize) -> f64 {
    tables().solid_angle[t]
}
