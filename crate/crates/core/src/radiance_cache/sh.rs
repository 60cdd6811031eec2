//! Order-1 real spherical harmonics.

use std::f64::consts::PI;

use super::octa::{tables, TEXELS};
use crate::math::{Frame, Rgb, Vec3};

/// `1 / (2 sqrt(pi))`
pub const Y0: f64 = 0.282_094_791_773_878_14;
/// `sqrt(3 / (4 pi))`
pub const Y1: f64 = 0.488_602_511_902_919_9;

/// Basis in the order `Y00, Y1-1 (y), Y10 (z), Y11 (x)`.
pub fn basis(d: &Vec3) -> [f64; 4] {
    [Y0, Y1 * d.y, Y1 * d.z, Y1 * d.x]
}

/// Four RGB coefficients in world space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShL1 {
    pub coeffs: [Rgb; 4],
}

impl Default for ShL1 {
    fn default() -> Self {
        ShL1 { coeffs: [Rgb::zeros(); 4] }
    }
}

impl ShL1 {
    pub fn eval(&self, d: &Vec3) -> Rgb {
        let y = basis(d);
        (0..4).fold(Rgb::zeros(), |acc, k| acc + self.coeffs[k] * y[k])
    }

    /// Irradiance at normal `n`: convolution with the clamped cosine lobe,
    /// whose band-0 and band-1 weights are `pi` and `2 pi / 3`.
    pub fn irradiance(&self, n: &Vec3) -> Rgb {
        let c = &self.coeffs;
        c[0] * (PI * Y0) + (c[1] * n.y + c[2] * n.z + c[3] * n.x) * (2.0 * PI / 3.0 * Y1)
    }

    pub fn scaled(&self, s: f64) -> ShL1 {
        ShL1 { coeffs: self.coeffs.map(|c| c * s) }
    }

    pub fn add_scaled(&mut self, other: &ShL1, s: f64) {
        for k in 0..4 {
            self.coeffs[k] += other.coeffs[k] * s;
        }
    }

    /// Cosine-weighted least-squares fit to a piecewise-constant hemisphere
    /// tile given in the local frame of `frame`. The constant basis makes the
    /// fitted irradiance at `frame.n` equal the tile's exactly.
    pub fn fit_tile(tile: &[Rgb; TEXELS], frame: &Frame) -> ShL1 {
        let t = tables();
        let inv = t.cos_gram.try_inverse().expect("cosine Gram matrix is invertible");
        let mut rhs = [Rgb::zeros(); 4];
        for (i, l) in tile.iter().enumerate() {
            for (k, r) in rhs.iter_mut().enumerate() {
                *r += l * t.cos_basis[i][k];
            }
        }
        let mut local = [Rgb::zeros(); 4];
        for (k, out) in local.iter_mut().enumerate() {
            for (j, r) in rhs.iter().enumerate() {
                *out += r * inv[(k, j)];
            }
        }
        // The band-1 part is a vector in (x, y, z); rotate it to world space.
        let mut coeffs = [local[0], Rgb::zeros(), Rgb::zeros(), Rgb::zeros()];
        for ch in 0..3 {
            let v = Vec3::new(local[3][ch], local[1][ch], local[2][ch]);
            let w = frame.to_world(&v);
            coeffs[1][ch] = w.y;
            coeffs[2][ch] = w.z;
            coeffs[3][ch] = w.x;
        }
        ShL1 { coeffs }
    }
}
