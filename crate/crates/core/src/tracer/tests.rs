use super::*;
use crate::math::grey;
use crate::rng::seeded;
use crate::scene::{quad, MeshMaterial};
use nalgebra::UnitQuaternion;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn blob(z: f64, opacity: f64, albedo: f64) -> GaussianPrimitive {
    GaussianPrimitive::isotropic(Vec3::new(0.0, 0.0, z), 0.1, opacity).with_albedo(grey(albedo))
}

fn axis_ray() -> Ray {
    Ray::new(Vec3::zeros(), Vec3::z())
}

fn wall(z: f64) -> Vec<Triangle> {
    quad(
        Vec3::new(-1.0, -1.0, z),
        Vec3::new(2.0, 0.0, 0.0),
        Vec3::new(0.0, 2.0, 0.0),
        MeshMaterial::diffuse(grey(0.7)),
        0,
    )
    .unwrap()
    .to_vec()
}

fn random_gaussians(n: usize, seed: u64) -> Vec<GaussianPrimitive> {
    let mut rng = seeded(seed);
    (0..n)
        .map(|_| {
            GaussianPrimitive::new(
                Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(1.0..5.0)),
                Vec3::new(rng.random_range(0.02..0.3), rng.random_range(0.02..0.3), rng.random_range(0.005..0.2)),
                UnitQuaternion::from_euler_angles(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)),
                rng.random_range(0.05..1.0),
            )
        })
        .collect()
}

/// Hits found by testing every Gaussian directly with the closed forms.
fn brute_force_hits(gs: &[GaussianPrimitive], ray: &Ray) -> Vec<(u32, f64)> {
    let mut out: Vec<(u32, f64)> = gs
        .iter()
        .enumerate()
        .filter_map(|(i, g)| {
            let a = crate::gsmath::particle_response(g, ray);
            let t = crate::gsmath::max_response_depth(g, ray);
            (a >= ALPHA_MIN && t >= ray.t_min && t <= ray.t_max).then_some((i as u32, t))
        })
        .collect();
    out.sort_by(|a, b| a.1.total_cmp(&b.1));
    out
}

#[test]
fn empty_scene_misses() {
    let accel = ProxyAccel::build(&[], &[]);
    assert_eq!(accel.leaf_count(), 0);
    let mut rng = seeded(1);
    assert!(trace_reference(&accel, &axis_ray()).is_empty());
    assert!(!trace_shadow_stochastic(&accel, &axis_ray(), &mut rng, 1.0));
    assert!(trace_shading_stochastic(&accel, &axis_ray(), &mut rng, 1.0).is_none());
}

#[test]
fn traversal_matches_brute_force_on_random_gaussians() {
    let gs = random_gaussians(1000, 5);
    let accel = ProxyAccel::build(&gs, &[]);
    let mut rng = seeded(6);
    let mut nonempty = 0;
    for _ in 0..300 {
        let o = Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), -1.0);
        let target = Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), 6.0);
        let ray = Ray::new(o, (target - o).normalize());
        let expect = brute_force_hits(&gs, &ray);
        let got = collect_hits(&accel, &ray, &mut TraceStats::default());
        let got: Vec<(u32, f64)> = got
            .hits
            .iter()
            .map(|h| match h.prim {
                PrimRef::Gaussian(i) => (i, h.t),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(expect.len(), got.len());
        for (a, b) in expect.iter().zip(&got) {
            assert_eq!(a.0, b.0);
            assert!((a.1 - b.1).abs() < 1e-9);
        }
        nonempty += usize::from(!got.is_empty());
    }
    assert!(nonempty > 50);
}

#[test]
fn reference_examples() {
    let accel = ProxyAccel::build(&[blob(2.0, 0.8, 0.5)], &[]);
    let list = trace_reference(&accel, &axis_ray());
    assert_eq!(list.len(), 1);
    assert!((list.hits[0].response - 0.8).abs() < 1e-12);
    assert!((list.transparency - 0.2).abs() < 1e-12);

    let accel = ProxyAccel::build(&[blob(1.0, 0.5, 0.5), blob(2.0, 0.5, 0.5)], &[]);
    let list = trace_reference(&accel, &axis_ray());
    assert_eq!(list.len(), 2);
    assert!((list.transparency - 0.25).abs() < 1e-12);
    assert_eq!(list.prefix, vec![1.0, 0.5]);

    let accel = ProxyAccel::build(&[blob(1.0, 0.5, 0.5), blob(2.0, 0.5, 0.5)], &wall(1.5));
    let list = trace_reference(&accel, &axis_ray());
    assert_eq!(list.len(), 2);
    assert_eq!(list.hits[0].prim, PrimRef::Gaussian(0));
    assert!(matches!(list.hits[1].prim, PrimRef::Triangle(_)));
    assert!((list.hits[1].t - 1.5).abs() < 1e-12);
    assert_eq!(list.transparency, 0.0);
}

#[test]
fn reference_stops_below_transparency_cutoff() {
    let gs: Vec<_> = (0..10).map(|i| blob(1.0 + i as f64 * 0.5, 0.75, 0.5)).collect();
    let list = trace_reference(&ProxyAccel::build(&gs, &[]), &axis_ray());
    // 0.25^4 is above the cutoff; 0.25^5 is below it.
    assert_eq!(list.len(), 5);
}

fn shadow_mean(accel: &ProxyAccel, ray: &Ray, scale: f64, n: usize, seed: u64) -> f64 {
    let mut rng = seeded(seed);
    (0..n)
        .filter(|_| trace_shadow_stochastic(accel, ray, &mut rng, scale))
        .count() as f64
        / n as f64
}

#[test]
fn shadow_examples() {
    let one = ProxyAccel::build(&[blob(2.0, 0.4, 0.5)], &[]);
    assert!((shadow_mean(&one, &axis_ray(), 1.0, 100_000, 1) - 0.4).abs() < 0.01);

    let none = ProxyAccel::build(&[blob(2.0, 0.4, 0.5)], &[]);
    let away = Ray::new(Vec3::zeros(), -Vec3::z());
    assert_eq!(shadow_mean(&none, &away, 1.0, 1000, 2), 0.0);

    let two = ProxyAccel::build(&[blob(1.0, 0.5, 0.5), blob(2.0, 0.5, 0.5)], &[]);
    assert!((shadow_mean(&two, &axis_ray(), 1.0, 100_000, 3) - 0.75).abs() < 0.01);
}

#[test]
fn opaque_triangle_gives_binary_visibility() {
    // A Gaussian replaced by an opaque triangle at the same depth always occludes.
    let accel = ProxyAccel::build(&[], &wall(2.0));
    assert_eq!(shadow_mean(&accel, &axis_ray(), 1.0, 1000, 4), 1.0);
    assert_eq!(shadow_mean(&accel, &axis_ray(), 0.3, 1000, 4), 1.0);
    let short = Ray::segment(Vec3::zeros(), Vec3::z(), 0.0, 1.9);
    assert_eq!(shadow_mean(&accel, &short, 1.0, 1000, 4), 0.0);
}

#[test]
fn shadow_unbiased_on_random_micro_scenes() {
    let mut rng = seeded(77);
    for s in 0..20 {
        let n = rng.random_range(1..=8);
        let gs: Vec<_> = (0..n)
            .map(|_| {
                GaussianPrimitive::isotropic(
                    Vec3::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), rng.random_range(1.0..4.0)),
                    rng.random_range(0.05..0.3),
                    rng.random_range(0.05..1.0),
                )
            })
            .collect();
        let accel = ProxyAccel::build(&gs, &[]);
        let ray = axis_ray();
        let expect = collect_hits(&accel, &ray, &mut TraceStats::default()).opacity();
        let trials = 20_000;
        let got = shadow_mean(&accel, &ray, 1.0, trials, 1000 + s);
        let sigma = (expect * (1.0 - expect) / trials as f64).sqrt();
        assert!((got - expect).abs() <= 4.0 * sigma + 1e-12, "scene {s}: {got} vs {expect}");
    }
}

#[test]
fn shading_examples_and_hit_law() {
    let accel = ProxyAccel::build(&[blob(1.0, 0.6, 1.0), blob(2.0, 0.5, 2.0)], &[]);
    let mut rng = seeded(9);
    let n = 100_000;
    let mut counts = [0usize; 3];
    let mut feature = 0.0;
    for _ in 0..n {
        match trace_shading_stochastic(&accel, &axis_ray(), &mut rng, 1.0) {
            Some(h) => {
                feature += h.albedo.x;
                counts[if h.prim == PrimRef::Gaussian(0) { 0 } else { 1 }] += 1;
            }
            None => counts[2] += 1,
        }
    }
    assert!((feature / n as f64 - 1.0).abs() < 0.02);
    assert!((counts[2] as f64 / n as f64 - 0.2).abs() < 0.01);
    let expect = [0.6, 0.2, 0.2];
    let chi2: f64 = counts
        .iter()
        .zip(expect)
        .map(|(&c, p)| {
            let e = p * n as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let critical = ChiSquared::new(2.0).unwrap().inverse_cdf(1.0 - 1e-3);
    assert!(chi2 < critical, "chi2 {chi2} >= {critical}");

    // Reference closed form agrees.
    let list = trace_reference(&accel, &axis_ray());
    let e = list.expectation(|h| h.albedo);
    assert!((e.x - 1.0).abs() < 1e-12);
}

#[test]
fn shading_trivial_cases() {
    let mut rng = seeded(10);
    let tri = ProxyAccel::build(&[], &wall(3.0));
    for _ in 0..100 {
        let h = trace_shading_stochastic(&tri, &axis_ray(), &mut rng, 1.0).unwrap();
        assert_eq!(h.response, 1.0);
        assert!((h.t - 3.0).abs() < 1e-12);
        assert!(h.normal.dot(&Vec3::z()) < 0.0);
    }
    let empty = ProxyAccel::build(&[], &[]);
    assert!(trace_shading_stochastic(&empty, &axis_ray(), &mut rng, 1.0).is_none());
}

#[test]
fn incoming_radiance_examples() {
    let mut rng = seeded(12);
    let empty = ProxyAccel::build(&[], &[]);
    let l = estimate_incoming_radiance(&empty, &axis_ray(), |_, _| grey(5.0), |_| grey(1.0), &mut rng, 16);
    assert_eq!(l, grey(1.0));

    let solid = ProxyAccel::build(&[blob(2.0, 1.0, 0.5)], &[]);
    let l = estimate_incoming_radiance(&solid, &axis_ray(), |_, _| grey(3.0), |_| grey(1.0), &mut rng, 16);
    assert_eq!(l, grey(3.0));

    let half = ProxyAccel::build(&[blob(2.0, 0.5, 0.5)], &[]);
    let l = estimate_incoming_radiance(&half, &axis_ray(), |_, _| grey(2.0), |_| grey(1.0), &mut rng, 100_000);
    assert!((l.x - 1.5).abs() < 0.02);
}

#[test]
fn bias_scale_trades_bias_for_fewer_evaluations() {
    let gs: Vec<_> = (0..12).map(|i| blob(1.0 + 0.25 * i as f64, 0.3, i as f64)).collect();
    let accel = ProxyAccel::build(&gs, &[]);
    let n = 20_000;
    let mut prev_shadow = -1.0;
    let mut prev_t = f64::INFINITY;
    let mut prev_evals = f64::INFINITY;
    for scale in [1.0, 0.6, 0.2] {
        let mut rng = seeded(13);
        let mut stats = TraceStats::default();
        let mut t_sum = 0.0;
        let mut t_n = 0;
        for _ in 0..n {
            if let Some(h) = trace_shading_stochastic_with_stats(&accel, &axis_ray(), &mut rng, scale, &mut stats) {
                t_sum += h.t;
                t_n += 1;
            }
        }
        let shadow = shadow_mean(&accel, &axis_ray(), scale, n, 14);
        let mean_t = t_sum / t_n as f64;
        assert!(shadow >= prev_shadow - 0.01);
        assert!(mean_t <= prev_t + 0.01);
        assert!(stats.anyhit_per_ray() < prev_evals);
        prev_shadow = shadow;
        prev_t = mean_t;
        prev_evals = stats.anyhit_per_ray();
    }
}

#[test]
fn stochastic_shading_evaluates_fewer_candidates_than_reference() {
    let gs = random_gaussians(2000, 21);
    let accel = ProxyAccel::build(&gs, &wall(5.5));
    let mut rng = seeded(22);
    let mut reference = TraceStats::default();
    let mut stochastic = TraceStats::default();
    for _ in 0..2000 {
        let o = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), -1.0);
        let ray = Ray::new(o, Vec3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), 1.0).normalize());
        trace_reference_with_stats(&accel, &ray, &mut reference);
        trace_shading_stochastic_with_stats(&accel, &ray, &mut rng, 1.0, &mut stochastic);
    }
    assert!(stochastic.anyhit_per_ray() < reference.anyhit_per_ray());
}
