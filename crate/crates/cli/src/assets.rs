//! Procedural generation of the bundled scenes.
//!
//! `micro` is a 64x64 scene used for golden-file tests. `desk` is a
//! 128x128 desk-top scene with 5000 Gaussians.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use gsgi_core::gsmath::GaussianPrimitive;
use gsgi_core::io::{
    save_gaussians, write_ppm, CameraDesc, GaussianModelDesc, LightDesc, MaterialDesc, MaterialOverride, MeshDesc,
    RenderSettings, SceneDescription, ShapeDesc, Transform,
};
use gsgi_core::math::{uniform_sphere, Rgb, Vec3};
use gsgi_core::rng::{seeded, Rng};
use gsgi_core::session::Session;
use nalgebra::{Unit, UnitQuaternion};
use rand::Rng as _;

pub const MICRO_SCENE: &str = "micro.toml";
pub const MICRO_GOLDEN: &str = "micro_golden.ppm";
pub const DESK_SCENE: &str = "desk.toml";
pub const DESK_GAUSSIANS: usize = 5000;

/// Surface-aligned Gaussian: the thin axis follows `normal`.
fn surfel(rng: &mut Rng, center: Vec3, normal: Vec3, size: f64, thickness: f64, opacity: f64) -> GaussianPrimitive {
    let align = UnitQuaternion::rotation_between(&Vec3::z(), &normal)
        .unwrap_or_else(|| UnitQuaternion::from_axis_angle(&Vec3::x_axis(), std::f64::consts::PI));
    let twist = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), rng.random_range(0.0..std::f64::consts::TAU));
    let s = size * rng.random_range(0.7..1.3);
    GaussianPrimitive::new(center, Vec3::new(s, s * rng.random_range(0.6..1.0), thickness), align * twist, opacity)
        .with_normal(normal)
}

fn jitter(rng: &mut Rng, c: Rgb, amount: f64) -> Rgb {
    c.map(|v| (v * (1.0 + rng.random_range(-amount..amount))).clamp(0.0, 1.0))
}

fn sphere_shell(rng: &mut Rng, n: usize, center: Vec3, radius: f64, size: f64, albedo: Rgb) -> Vec<GaussianPrimitive> {
    (0..n)
        .map(|_| {
            let d = uniform_sphere(rng.random(), rng.random());
            let opacity = rng.random_range(0.7..0.98);
            surfel(rng, center + d * radius, d, size, size * 0.25, opacity).with_albedo(jitter(rng, albedo, 0.1))
        })
        .collect()
}

/// Side wall of a vertical cylinder plus its top cap.
fn cylinder(rng: &mut Rng, n: usize, base: Vec3, radius: f64, height: f64, size: f64, albedo: Rgb) -> Vec<GaussianPrimitive> {
    let side = radius * std::f64::consts::TAU * height;
    let cap = std::f64::consts::PI * radius * radius;
    (0..n)
        .map(|_| {
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            let (c, normal) = if rng.random::<f64>() < side / (side + cap) {
                let n = Vec3::new(a.cos(), 0.0, a.sin());
                (base + n * radius + Vec3::y() * rng.random_range(0.0..height), n)
            } else {
                let r = radius * rng.random::<f64>().sqrt();
                (base + Vec3::new(a.cos() * r, height, a.sin() * r), Vec3::y())
            };
            let opacity = rng.random_range(0.8..0.99);
            surfel(rng, c, normal, size, size * 0.25, opacity).with_albedo(jitter(rng, albedo, 0.08))
        })
        .collect()
}

/// Surface of an axis-aligned box, sampled by area.
fn slab(rng: &mut Rng, n: usize, min: Vec3, max: Vec3, size: f64, albedo: Rgb) -> Vec<GaussianPrimitive> {
    let e = max - min;
    let faces = [
        (Vec3::y(), e.x * e.z),
        (-Vec3::y(), e.x * e.z),
        (Vec3::x(), e.y * e.z),
        (-Vec3::x(), e.y * e.z),
        (Vec3::z(), e.x * e.y),
        (-Vec3::z(), e.x * e.y),
    ];
    let total: f64 = faces.iter().map(|f| f.1).sum();
    (0..n)
        .map(|_| {
            let mut pick = rng.random::<f64>() * total;
            let mut normal = faces[0].0;
            for (nrm, area) in faces {
                normal = nrm;
                if pick < area {
                    break;
                }
                pick -= area;
            }
            let mut p = Vec3::from_fn(|k, _| min[k] + rng.random::<f64>() * e[k]);
            for k in 0..3 {
                if normal[k] != 0.0 {
                    p[k] = if normal[k] > 0.0 { max[k] } else { min[k] };
                }
            }
            let opacity = rng.random_range(0.85..0.99);
            surfel(rng, p, normal, size, size * 0.2, opacity).with_albedo(jitter(rng, albedo, 0.05))
        })
        .collect()
}

/// Leaf-like Gaussians scattered through a ball, facing outward.
fn foliage(rng: &mut Rng, n: usize, center: Vec3, radius: f64, size: f64) -> Vec<GaussianPrimitive> {
    (0..n)
        .map(|_| {
            let d = uniform_sphere(rng.random(), rng.random());
            let r = radius * rng.random::<f64>().cbrt();
            let tilt = Unit::new_normalize(uniform_sphere(rng.random(), rng.random()));
            let normal = (UnitQuaternion::from_axis_angle(&tilt, rng.random_range(-0.5..0.5)) * d).normalize();
            let green = Rgb::new(rng.random_range(0.05..0.2), rng.random_range(0.35..0.6), rng.random_range(0.05..0.15));
            let opacity = rng.random_range(0.55..0.95);
            surfel(rng, center + d * r, normal, size, size * 0.15, opacity).with_albedo(green).with_roughness(0.6)
        })
        .collect()
}

fn emissive_ball(rng: &mut Rng, n: usize, center: Vec3, radius: f64, emission: Rgb) -> Vec<GaussianPrimitive> {
    (0..n)
        .map(|_| {
            let d = uniform_sphere(rng.random(), rng.random());
            let p = center + d * radius * rng.random::<f64>().cbrt();
            GaussianPrimitive::isotropic(p, radius * 0.35, 0.9).with_albedo(Rgb::repeat(0.9)).with_emission(emission)
        })
        .collect()
}

fn quad_mesh(id: &str, corner: [f64; 3], u: [f64; 3], v: [f64; 3], material: MaterialDesc) -> MeshDesc {
    MeshDesc { id: id.into(), shape: ShapeDesc::Quad { corner, u, v }, material, transform: Transform::default() }
}

fn box_mesh(id: &str, min: [f64; 3], max: [f64; 3], material: MaterialDesc) -> MeshDesc {
    MeshDesc { id: id.into(), shape: ShapeDesc::Box { min, max }, material, transform: Transform::default() }
}

fn material(albedo: [f64; 3], roughness: f64, f0: f64) -> MaterialDesc {
    MaterialDesc { albedo, roughness, f0, ..Default::default() }
}

fn model(id: &str, path: &str) -> GaussianModelDesc {
    GaussianModelDesc {
        id: id.into(),
        path: PathBuf::from(path),
        transform: Transform::default(),
        material: MaterialOverride::default(),
    }
}

pub fn micro_gaussians() -> Vec<GaussianPrimitive> {
    let mut rng = seeded(0x5eed_0001);
    let mut g = sphere_shell(&mut rng, 260, Vec3::new(-0.4, 0.3, 0.0), 0.28, 0.07, Rgb::new(0.75, 0.2, 0.15));
    g.extend(emissive_ball(&mut rng, 24, Vec3::new(0.1, 0.75, 0.55), 0.08, Rgb::new(0.5, 4.0, 1.0)));
    g
}

pub fn micro_scene() -> SceneDescription {
    SceneDescription {
        camera: CameraDesc {
            position: [0.0, 0.9, -2.2],
            look_at: [0.0, 0.3, 0.2],
            up: [0.0, 1.0, 0.0],
            fov_y: 45.0,
            resolution: [64, 64],
        },
        render: RenderSettings { seed: 7, frames: 4, ..Default::default() },
        gaussians: vec![model("ball", "micro.ply")],
        meshes: vec![
            quad_mesh("floor", [-1.5, 0.0, -1.5], [0.0, 0.0, 3.0], [3.0, 0.0, 0.0], material([0.7, 0.7, 0.7], 0.9, 0.04)),
            quad_mesh("wall", [-1.5, 0.0, 1.2], [3.0, 0.0, 0.0], [0.0, 2.0, 0.0], material([0.6, 0.6, 0.7], 0.8, 0.04)),
            box_mesh("block", [0.3, 0.0, -0.2], [0.7, 0.4, 0.2], material([0.2, 0.3, 0.8], 0.15, 0.5)),
        ],
        lights: vec![
            LightDesc::Directional { id: "sun".into(), direction: [-0.4, -1.0, 0.5], radiance: [2.5, 2.4, 2.2] },
            LightDesc::Area {
                id: "panel".into(),
                corner: [-0.3, 1.4, -0.3],
                edge_u: [0.6, 0.0, 0.0],
                edge_v: [0.0, 0.0, 0.6],
                radiance: [3.0, 3.0, 3.0],
                two_sided: false,
            },
            LightDesc::Environment { id: "sky".into(), radiance: Some([0.15, 0.18, 0.25]), map: None, intensity: 1.0 },
        ],
        base_dir: PathBuf::new(),
    }
}

pub fn desk_gaussians() -> Vec<GaussianPrimitive> {
    let mut rng = seeded(0x5eed_0002);
    let mut g = Vec::with_capacity(DESK_GAUSSIANS);
    g.extend(cylinder(&mut rng, 1200, Vec3::new(-0.6, 0.0, 0.2), 0.15, 0.3, 0.03, Rgb::new(0.7, 0.35, 0.2)));
    g.extend(foliage(&mut rng, 1800, Vec3::new(-0.6, 0.58, 0.2), 0.27, 0.045));
    g.extend(slab(&mut rng, 1000, Vec3::new(0.05, 0.0, -0.35), Vec3::new(0.6, 0.08, 0.05), 0.03, Rgb::new(0.15, 0.25, 0.6)));
    g.extend(
        sphere_shell(&mut rng, 800, Vec3::new(0.45, 0.2, 0.35), 0.12, 0.025, Rgb::new(0.85, 0.85, 0.8))
            .into_iter()
            .map(|p| p.with_roughness(0.2)),
    );
    g.extend(emissive_ball(&mut rng, 200, Vec3::new(0.0, 0.9, 0.3), 0.06, Rgb::new(6.0, 5.0, 3.0)));
    debug_assert_eq!(g.len(), DESK_GAUSSIANS);
    g
}

pub fn desk_scene() -> SceneDescription {
    SceneDescription {
        camera: CameraDesc {
            position: [0.0, 0.9, -1.8],
            look_at: [0.0, 0.3, 0.2],
            up: [0.0, 1.0, 0.0],
            fov_y: 50.0,
            resolution: [128, 128],
        },
        render: RenderSettings { seed: 1, frames: 8, output: "out/desk".into(), ..Default::default() },
        gaussians: vec![model("props", "desk.ply")],
        meshes: vec![
            box_mesh("desk", [-1.2, -0.05, -0.7], [1.2, 0.0, 0.7], material([0.55, 0.4, 0.25], 0.6, 0.04)),
            quad_mesh("wall", [-2.0, -0.05, 0.8], [4.0, 0.0, 0.0], [0.0, 2.5, 0.0], material([0.8, 0.78, 0.72], 0.9, 0.04)),
        ],
        lights: vec![
            LightDesc::Area {
                id: "ceiling".into(),
                corner: [-0.5, 1.8, -0.5],
                edge_u: [1.0, 0.0, 0.0],
                edge_v: [0.0, 0.0, 1.0],
                radiance: [4.0, 3.9, 3.6],
                two_sided: false,
            },
            LightDesc::Directional { id: "window".into(), direction: [0.6, -0.7, 0.4], radiance: [1.5, 1.4, 1.2] },
            LightDesc::Environment { id: "sky".into(), radiance: Some([0.1, 0.12, 0.16]), map: None, intensity: 1.0 },
        ],
        base_dir: PathBuf::new(),
    }
}

fn write_scene(dir: &Path, name: &str, desc: &SceneDescription, header: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, format!("{header}\n{}", desc.to_toml())).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Writes both scenes, their Gaussian models and the micro-scene golden
/// image into `dir`. Returns the written paths.
pub fn make_assets(dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut out = Vec::new();
    let micro_ply = dir.join("micro.ply");
    save_gaussians(&micro_ply, &micro_gaussians())?;
    out.push(micro_ply);
    out.push(write_scene(dir, MICRO_SCENE, &micro_scene(), "# 64x64 golden-file scene. Generated by `gsgi make-assets`.")?);
    let desk_ply = dir.join("desk.ply");
    save_gaussians(&desk_ply, &desk_gaussians())?;
    out.push(desk_ply);
    out.push(write_scene(dir, DESK_SCENE, &desk_scene(), "# Desk-top scene with 5000 Gaussians. Generated by `gsgi make-assets`.")?);

    let golden = dir.join(MICRO_GOLDEN);
    write_ppm(&golden, &render_golden(&dir.join(MICRO_SCENE))?)?;
    out.push(golden);
    Ok(out)
}

/// LDR image of the scene after its configured number of frames.
pub fn render_golden(scene: &Path) -> Result<gsgi_core::image::Image<[u8; 3]>> {
    let mut session = Session::load(scene)?;
    let mut ldr = None;
    for _ in 0..session.description().render.frames {
        ldr = Some(session.render()?.ldr.clone());
    }
    Ok(ldr.expect("frames >= 1"))
}
