//! Real-time style global illumination for scenes that mix 3D Gaussian
//! primitives with triangle meshes.
//!
//! The crate is organised by frame phase:
//!
//! * [`gsmath`] closed-form Gaussian response math,
//! * [`tracer`] proxy BVH, exhaustive reference tracing and the stochastic
//!   shadow/shading/compound tracers,
//! * [`raster`] the hexagon splatting rasterizer and G-buffer,
//! * [`direct_light`] light grid, reservoir light sampling and filtering,
//! * [`radiance_cache`] screen probes and the world-space hash grid,
//! * [`pipeline`] per-frame orchestration, glossy reflections and tone mapping,
//! * [`io`] asset and scene loading plus image output,
//! * [`session`] a loaded scene with its render state,
//! * [`verify`] the tracer verification suite.

pub mod camera;
pub mod direct_light;
pub mod error;
pub mod gsmath;
pub mod image;
pub mod io;
pub mod math;
pub mod pipeline;
pub mod radiance_cache;
pub mod raster;
pub mod rng;
pub mod scene;
pub mod session;
pub mod tracer;
pub mod verify;

pub use camera::CameraModel;
pub use error::{Error, Result};
pub use gsmath::{GaussianPrimitive, Ray};
pub use math::{Rgb, Vec3};
pub use scene::Scene;
