//! Asset loading, scene description files and image output.

pub mod ply;
pub mod pnm;
pub mod scene;

pub use ply::{encode_gaussians, load_gaussians, parse_gaussians, save_gaussians};
pub use pnm::{
    decode_pfm, decode_ppm, encode_pfm, encode_ppm, frame_path, read_pfm, read_ppm, write_images, write_pfm,
    write_ppm,
};
pub use scene::{
    load_scene, parse_scene, transform_gaussian, AssetCache, CameraDesc, GaussianModelDesc, LightDesc, MaterialDesc,
    MaterialOverride, MeshDesc, PassToggles, RenderSettings, Scale, SceneDescription, ShapeDesc, Transform,
};
