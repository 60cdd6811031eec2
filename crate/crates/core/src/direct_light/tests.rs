use super::*;
use crate::gsmath::GaussianPrimitive;
use crate::math::grey;
use crate::rng::seeded;
use crate::scene::{quad, MeshMaterial};
use std::f64::consts::PI;

fn sun(l: f64) -> Light {
    Light::Directional { direction: -Vec3::y(), radiance: grey(l) }
}

fn area(corner: Vec3, l: f64) -> Light {
    Light::Area {
        corner,
        edge_u: Vec3::new(0.5, 0.0, 0.0),
        edge_v: Vec3::new(0.0, 0.0, 0.5),
        radiance: grey(l),
        two_sided: true,
    }
}

fn grid(lights: &[Light]) -> LightGrid {
    LightGrid::build(lights, &Vec3::zeros(), GridParams::default(), 7, 0)
}

#[test]
fn directional_sample_has_unit_pdf() {
    let lights = [sun(2.0)];
    let g = grid(&lights);
    let s = sample_light(&Vec3::zeros(), &Vec3::y(), g.reservoir(&Vec3::zeros()), &lights, &mut seeded(1)).unwrap();
    assert_eq!(s.pdf, 1.0);
    assert_eq!(s.direction, Vec3::y());
}

#[test]
fn facing_away_gives_no_sample() {
    let lights = [sun(2.0)];
    let g = grid(&lights);
    assert!(sample_light(&Vec3::zeros(), &-Vec3::y(), g.reservoir(&Vec3::zeros()), &lights, &mut seeded(1)).is_none());
}

#[test]
fn equal_candidates_split_evenly() {
    let lights = [sun(1.0), Light::Directional { direction: -Vec3::y(), radiance: grey(1.0) }];
    let g = grid(&lights);
    let mut rng = seeded(2);
    let n = 100_000;
    let res = g.reservoir(&Vec3::zeros());
    assert_eq!(res.lights.len(), 2);
    for _ in 0..100 {
        let s = sample_light(&Vec3::zeros(), &Vec3::y(), res, &lights, &mut rng).unwrap();
        assert!((s.pdf - 0.5).abs() < 1e-12);
    }
    // Equal weights from different directions, so picks are distinguishable.
    let a = Vec3::new(1.0, 1.0, 0.0).normalize();
    let b = Vec3::new(-1.0, 1.0, 0.0).normalize();
    let lights = [
        Light::Directional { direction: -a, radiance: grey(1.0) },
        Light::Directional { direction: -b, radiance: grey(1.0) },
    ];
    let g = grid(&lights);
    let res = g.reservoir(&Vec3::zeros());
    let mut hits_a = 0;
    for _ in 0..n {
        let s = sample_light(&Vec3::zeros(), &Vec3::y(), res, &lights, &mut rng).unwrap();
        hits_a += usize::from((s.direction - a).norm() < 1e-12);
    }
    assert!((hits_a as f64 / n as f64 - 0.5).abs() < 0.01);
}

#[test]
fn unoccluded_directional_closed_form() {
    let lights = [sun(3.0)];
    let g = grid(&lights);
    let accel = ProxyAccel::build(&[], &[]);
    let mut rng = seeded(3);
    let s = sample_light(&Vec3::zeros(), &Vec3::y(), g.reservoir(&Vec3::zeros()), &lights, &mut rng).unwrap();
    let l = shade_direct(&Vec3::zeros(), &Vec3::y(), &grey(0.6), &s, &accel, &mut rng, 1.0);
    assert!((l.x - 0.6 / PI * 3.0).abs() < 1e-12);
}

fn roof(z: f64) -> Vec<crate::scene::Triangle> {
    quad(
        Vec3::new(-5.0, z, -5.0),
        Vec3::new(10.0, 0.0, 0.0),
        Vec3::new(0.0, 0.0, 10.0),
        MeshMaterial::default(),
        0,
    )
    .unwrap()
    .to_vec()
}

#[test]
fn opaque_blocker_gives_zero() {
    let lights = [sun(3.0)];
    let g = grid(&lights);
    let accel = ProxyAccel::build(&[], &roof(1.0));
    let mut rng = seeded(4);
    for _ in 0..100 {
        let s = sample_light(&Vec3::zeros(), &Vec3::y(), g.reservoir(&Vec3::zeros()), &lights, &mut rng).unwrap();
        assert_eq!(shade_direct(&Vec3::zeros(), &Vec3::y(), &grey(0.6), &s, &accel, &mut rng, 1.0), grey(0.0));
    }
}

#[test]
fn half_transparent_blocker_halves_light() {
    let lights = [sun(3.0)];
    let g = grid(&lights);
    let blob = GaussianPrimitive::isotropic(Vec3::new(0.0, 1.0, 0.0), 0.1, 0.5);
    let accel = ProxyAccel::build(&[blob], &[]);
    let mut rng = seeded(5);
    let n = 100_000;
    let mut sum = 0.0;
    for _ in 0..n {
        let s = sample_light(&Vec3::zeros(), &Vec3::y(), g.reservoir(&Vec3::zeros()), &lights, &mut rng).unwrap();
        sum += shade_direct(&Vec3::zeros(), &Vec3::y(), &grey(0.6), &s, &accel, &mut rng, 1.0).x;
    }
    let full = 0.6 / PI * 3.0;
    assert!((sum / n as f64 / (0.5 * full) - 1.0).abs() < 0.02);
}

/// Irradiance from a parallelogram emitter by midpoint quadrature.
fn quad_irradiance(p: &Vec3, n: &Vec3, corner: Vec3, u: Vec3, v: Vec3, l: f64) -> f64 {
    let k = 400;
    let area = u.cross(&v).norm();
    let ln = u.cross(&v) / area;
    let mut e = 0.0;
    for i in 0..k {
        for j in 0..k {
            let q = corner + u * ((i as f64 + 0.5) / k as f64) + v * ((j as f64 + 0.5) / k as f64);
            let d = q - p;
            let r2 = d.norm_squared();
            let w = d / r2.sqrt();
            let c = n.dot(&w).max(0.0);
            let cq = ln.dot(&w).abs();
            e += l * c * cq / r2;
        }
    }
    e * area / (k * k) as f64
}

#[test]
fn area_light_estimate_is_unbiased() {
    let lights = [area(Vec3::new(-0.1, 1.5, -0.3), 4.0), area(Vec3::new(0.8, 1.0, 0.2), 2.0)];
    let g = grid(&lights);
    let accel = ProxyAccel::build(&[], &[]);
    let ctx = DirectContext { lights: &lights, grid: &g, environment: None, accel: &accel, scale: 1.0 };
    let p = Vec3::new(0.1, 0.0, 0.05);
    let n = Vec3::new(0.2, 1.0, 0.1).normalize();
    let exact: f64 = lights
        .iter()
        .map(|l| match l {
            Light::Area { corner, edge_u, edge_v, .. } => quad_irradiance(&p, &n, *corner, *edge_u, *edge_v, l.radiance_luminance()),
            _ => 0.0,
        })
        .sum::<f64>()
        / PI;
    let mut rng = seeded(6);
    let frames = 10_000;
    let mean = (0..frames).map(|_| incident_estimate(&ctx, &p, &n, &mut rng).x).sum::<f64>() / frames as f64;
    assert!((mean / exact - 1.0).abs() < 0.02, "{mean} vs {exact}");
}

#[test]
fn environment_furnace_irradiance() {
    let accel = ProxyAccel::build(&[], &[]);
    let env = EnvMap::Constant(grey(1.0));
    let mut rng = seeded(7);
    for _ in 0..10 {
        let e = environment_irradiance(&Vec3::zeros(), &Vec3::y(), &env, &accel, &mut rng, 1.0);
        assert!((e.x - PI).abs() < 1e-12);
    }
}

#[test]
fn cascade_boundary_estimators_agree() {
    let lights = [area(Vec3::new(3.5, 2.0, 0.0), 5.0), sun(0.5), area(Vec3::new(-2.0, 3.0, 1.0), 1.0)];
    let g = grid(&lights);
    let accel = ProxyAccel::build(&[], &[]);
    // Cascade 0 spans [-4, 4); a point just inside its edge lies in both.
    let p = Vec3::new(3.9, 0.0, 0.0);
    let n = Vec3::y();
    let c0 = g.cell_in(0, &p).unwrap();
    let c1 = g.cell_in(1, &p).unwrap();
    let estimate = |cell: usize, seed: u64| {
        let mut rng = seeded(seed);
        let res = g.reservoir_at(cell);
        let xs: Vec<f64> = (0..20_000)
            .map(|_| {
                sample_light(&p, &n, res, &lights, &mut rng)
                    .map(|s| sample_irradiance(&p, &n, &s, &accel, &mut rng, 1.0).x)
                    .unwrap_or(0.0)
            })
            .collect();
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        (m, v / xs.len() as f64)
    };
    let (m0, v0) = estimate(c0, 8);
    let (m1, v1) = estimate(c1, 9);
    assert!((m0 - m1).abs() <= 3.0 * (v0 + v1).sqrt(), "{m0} vs {m1}");
}

#[test]
fn buffer_is_zero_on_uncovered_pixels() {
    use crate::camera::CameraModel;
    use crate::raster::{render_gbuffer, RasterOptions};
    let cam = CameraModel::look_at(Vec3::new(0.0, 2.0, -3.0), Vec3::zeros(), Vec3::y(), 60.0, 16, 16).unwrap();
    let mut scene = crate::scene::Scene::new();
    scene.triangles = quad(
        Vec3::new(-1.0, 0.0, -1.0),
        Vec3::new(0.0, 0.0, 2.0),
        Vec3::new(2.0, 0.0, 0.0),
        MeshMaterial::default(),
        0,
    )
    .unwrap()
    .to_vec();
    scene.lights = vec![sun(1.0)];
    let gb = render_gbuffer(&scene, &cam, &RasterOptions::default());
    let g = grid(&scene.lights);
    let accel = ProxyAccel::build(&[], &scene.triangles);
    let ctx = DirectContext { lights: &scene.lights, grid: &g, environment: None, accel: &accel, scale: 1.0 };
    let buf = direct_incident_buffer(&ctx, &gb, 1, 0);
    let mut lit = 0;
    for (p, e) in gb.data.iter().zip(&buf.data) {
        if p.is_covered() {
            assert!((e.x - 1.0 / PI).abs() < 1e-9);
            lit += 1;
        } else {
            assert_eq!(*e, grey(0.0));
        }
    }
    assert!(lit > 0);
}
