//! Direct diffuse lighting: cascaded light grid with A-Res reservoirs,
//! per-pixel resampled light selection, stochastic shadow rays, and a
//! spatio-temporal filter.
//!
//! Shading works on incident terms (`E / pi`) so that filtering does not
//! blur albedo; Lambertian radiance is `albedo * incident`.

mod filter;
mod grid;
mod light;
mod sample;

pub use filter::{
    filter_direct, spatial_filter, temporal_blend, History, DIRECT_TEMPORAL_ALPHA, HISTORY_DEPTH_TOLERANCE,
    HISTORY_NORMAL_DOT,
};
pub use grid::{a_res, light_weight, GridParams, LightGrid, Reservoir, MIN_DISTANCE, MIN_WEIGHT};
pub use light::{EnvMap, Light};
pub use sample::{environment_irradiance, sample_irradiance, sample_light, shade_direct, LightSample};

use rand::Rng;
use rayon::prelude::*;

use crate::image::Image;
use crate::math::{Rgb, Vec3, INV_PI};
use crate::raster::{GBuffer, GPixel};
use crate::rng::{stream, Purpose};
use crate::tracer::ProxyAccel;

/// Read-only inputs shared by every direct-lighting evaluation in a frame.
#[derive(Clone, Copy)]
pub struct DirectContext<'a> {
    pub lights: &'a [Light],
    pub grid: &'a LightGrid,
    pub environment: Option<&'a EnvMap>,
    pub accel: &'a ProxyAccel,
    /// Bias scale for stochastic shadow rays.
    pub scale: f64,
}

/// `E / pi` at a surface point from one grid light sample plus one
/// environment sample.
pub fn incident_estimate<R: Rng + ?Sized>(ctx: &DirectContext, p: &Vec3, n: &Vec3, rng: &mut R) -> Rgb {
    let mut e = Rgb::zeros();
    if let Some(s) = sample_light(p, n, ctx.grid.reservoir(p), ctx.lights, rng) {
        e += sample_irradiance(p, n, &s, ctx.accel, rng, ctx.scale);
    }
    if let Some(env) = ctx.environment {
        if !env.is_black() {
            e += environment_irradiance(p, n, env, ctx.accel, rng, ctx.scale);
        }
    }
    e * INV_PI
}

/// Light sample for a G-buffer pixel from its grid cell.
pub fn sample_light_pixel<R: Rng + ?Sized>(
    pixel: &GPixel,
    grid: &LightGrid,
    lights: &[Light],
    rng: &mut R,
) -> Option<LightSample> {
    sample_light(&pixel.position, &pixel.normal, grid.reservoir(&pixel.position), lights, rng)
}

/// Unfiltered incident buffer for every covered pixel.
pub fn direct_incident_buffer(ctx: &DirectContext, g: &GBuffer, seed: u64, frame: u64) -> Image<Rgb> {
    let data = g
        .data
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            if !p.is_covered() {
                return Rgb::zeros();
            }
            let mut rng = stream(seed, frame, i as u64, Purpose::LightSample);
            incident_estimate(ctx, &p.position, &p.normal, &mut rng)
        })
        .collect();
    Image::from_vec(g.width, g.height, data)
}

#[cfg(test)]
mod tests;
