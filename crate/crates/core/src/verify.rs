//! Tracer verification suite.
//!
//! Compares the stochastic tracers against the exhaustive reference on rays
//! through a scene and reports one pass/fail line per invariant.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng as _;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::camera::CameraModel;
use crate::gsmath::{max_response_depth, particle_response, Ray, ALPHA_MIN};
use crate::math::{luminance, orthonormal_basis, uniform_sphere};
use crate::rng::{stream, Purpose};
use crate::scene::{quad, MeshMaterial, Scene};
use crate::tracer::{
    build_accel, collect_hits, iso_radius, trace_reference_with_stats, trace_shading_stochastic,
    trace_shading_stochastic_with_stats, trace_shadow_stochastic, PrimRef, ProxyAccel, TraceStats,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Camera rays that hit at least one primitive.
    pub rays: usize,
    /// Stochastic traces per ray and per estimate.
    pub trials: usize,
    pub seed: u64,
    /// Gaussians sampled for the containment check.
    pub proxies: usize,
    /// Surface points per sampled Gaussian.
    pub points: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { rays: 32, trials: 50_000, seed: 0, proxies: 100, points: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OracleReport {
    pub checks: Vec<Check>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &self.checks {
            writeln!(f, "{:<width$}  {}  {}", c.name, if c.passed { "PASS" } else { "FAIL" }, c.detail)?;
        }
        let n = self.checks.iter().filter(|c| c.passed).count();
        write!(f, "{n}/{} checks passed", self.checks.len())
    }
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

/// Camera rays through random pixels whose exhaustive hit list is not empty.
fn sample_rays(accel: &ProxyAccel, camera: &CameraModel, n: usize, seed: u64) -> Vec<Ray> {
    let mut rng = stream(seed, 0, 0, Purpose::Oracle);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n * 200 {
        if out.len() == n {
            break;
        }
        let ray = camera.ray_through(
            rng.random::<f64>() * camera.width as f64,
            rng.random::<f64>() * camera.height as f64,
        );
        if !collect_hits(accel, &ray, &mut TraceStats::default()).is_empty() {
            out.push(ray);
        }
    }
    out
}

fn containment(scene: &Scene, accel: &ProxyAccel, opts: &OracleOptions) -> Check {
    let eligible: Vec<usize> = (0..scene.gaussians.len()).filter(|&i| accel.proxy(i).is_some()).collect();
    let stride = (eligible.len() / opts.proxies.max(1)).max(1);
    let picked: Vec<usize> = eligible.iter().step_by(stride).take(opts.proxies).copied().collect();
    let outside: usize = picked
        .par_iter()
        .map(|&i| {
            let g = &scene.gaussians[i];
            let proxy = accel.proxy(i).expect("eligible");
            let m = iso_radius(g.opacity).expect("eligible");
            let r = g.rotation_matrix();
            let mut rng = stream(opts.seed, 1, i as u64, Purpose::Oracle);
            (0..opts.points)
                .filter(|_| {
                    let u = uniform_sphere(rng.random(), rng.random());
                    let p = g.center + r * g.scale.component_mul(&u) * (m * (1.0 - 1e-9));
                    !proxy.contains(&p)
                })
                .count()
        })
        .sum();
    check(
        "proxy containment",
        outside == 0,
        format!("{outside} of {} iso-surface points outside", picked.len() * opts.points),
    )
}

/// Primitives with a hit on `ray`, found by testing every primitive.
fn brute_force(scene: &Scene, ray: &Ray) -> (BTreeSet<PrimRef>, BTreeSet<PrimRef>) {
    let mut sure = BTreeSet::new();
    let mut borderline = BTreeSet::new();
    for (i, g) in scene.gaussians.iter().enumerate() {
        let t = max_response_depth(g, ray);
        if t < ray.t_min || t > ray.t_max {
            continue;
        }
        let a = particle_response(g, ray);
        let id = PrimRef::Gaussian(i as u32);
        if (a - ALPHA_MIN).abs() <= 1e-9 {
            borderline.insert(id);
        } else if a >= ALPHA_MIN {
            sure.insert(id);
        }
    }
    for (i, tri) in scene.triangles.iter().enumerate() {
        if tri.intersect(ray).is_some() {
            sure.insert(PrimRef::Triangle(i as u32));
        }
    }
    (sure, borderline)
}

fn traversal(scene: &Scene, accel: &ProxyAccel, rays: &[Ray]) -> Check {
    let bad = rays
        .par_iter()
        .filter(|ray| {
            let found: BTreeSet<PrimRef> =
                collect_hits(accel, ray, &mut TraceStats::default()).hits.iter().map(|h| h.prim).collect();
            let (sure, borderline) = brute_force(scene, ray);
            !sure.is_subset(&found) || found.iter().any(|p| !sure.contains(p) && !borderline.contains(p))
        })
        .count();
    check("traversal equals brute force", bad == 0, format!("{bad} of {} rays differ", rays.len()))
}

struct RayStats {
    expected_shadow: f64,
    shadow: f64,
    shadow_scaled: f64,
    chi2: f64,
    dof: usize,
    feature: Option<(f64, f64)>,
    t_full: (f64, usize),
    t_scaled: (f64, usize),
    stochastic: TraceStats,
    reference: TraceStats,
}

fn trace_ray(accel: &ProxyAccel, ray: &Ray, index: usize, opts: &OracleOptions) -> RayStats {
    let n = opts.trials;
    let mut rng = stream(opts.seed, 2, index as u64, Purpose::Oracle);
    let all = collect_hits(accel, ray, &mut TraceStats::default());
    let expected_shadow = all.opacity();

    let shadow_mean = |scale: f64, rng: &mut crate::rng::Rng| {
        (0..n).filter(|_| trace_shadow_stochastic(accel, ray, rng, scale)).count() as f64 / n as f64
    };
    let shadow = shadow_mean(1.0, &mut rng);
    let shadow_scaled = shadow_mean(0.2, &mut rng);

    let mut counts = vec![0usize; all.len() + 1];
    let mut feature = 0.0;
    let mut t_full = (0.0, 0);
    let mut stochastic = TraceStats::default();
    for _ in 0..n {
        match trace_shading_stochastic_with_stats(accel, ray, &mut rng, 1.0, &mut stochastic) {
            Some(h) => {
                let k = all.hits.iter().position(|x| x.prim == h.prim).unwrap_or(all.len());
                counts[k] += 1;
                feature += luminance(&h.albedo);
                t_full.0 += h.t;
                t_full.1 += 1;
            }
            None => counts[all.len()] += 1,
        }
    }
    let mut t_scaled = (0.0, 0);
    for _ in 0..n {
        if let Some(h) = trace_shading_stochastic(accel, ray, &mut rng, 0.2) {
            t_scaled.0 += h.t;
            t_scaled.1 += 1;
        }
    }
    let mut reference = TraceStats::default();
    for _ in 0..n.min(1000) {
        trace_reference_with_stats(accel, ray, &mut reference);
    }
    // Scale stochastic counts to the same number of rays.
    stochastic.anyhit = (stochastic.anyhit as f64 * reference.rays as f64 / stochastic.rays as f64).round() as u64;
    stochastic.rays = reference.rays;

    // Categories with small expected counts are pooled with the miss.
    let mut probs: Vec<f64> = (0..all.len()).map(|i| all.hit_probability(i)).collect();
    probs.push(all.transparency);
    let (mut chi2, mut dof) = (0.0, 0usize);
    let (mut pool_e, mut pool_c) = (0.0, 0usize);
    let mut cats = 0usize;
    for (p, c) in probs.iter().zip(&counts) {
        let e = p * n as f64;
        if e >= 5.0 {
            chi2 += (*c as f64 - e).powi(2) / e;
            cats += 1;
        } else {
            pool_e += e;
            pool_c += c;
        }
    }
    if pool_e > 0.0 {
        if pool_e >= 5.0 {
            chi2 += (pool_c as f64 - pool_e).powi(2) / pool_e;
            cats += 1;
        } else if pool_c as f64 > 5.0 * pool_e + 10.0 {
            // Too rare to test by chi-square but grossly over-represented.
            chi2 = f64::INFINITY;
        }
    }
    dof += cats.saturating_sub(1);

    let expect = luminance(&all.expectation(|h| h.albedo));
    let feature = (expected_shadow >= 0.5 && expect > 0.0).then_some((feature / n as f64, expect));
    RayStats {
        expected_shadow,
        shadow,
        shadow_scaled,
        chi2,
        dof,
        feature,
        t_full,
        t_scaled,
        stochastic,
        reference,
    }
}

fn statistical(stats: &[RayStats], n: usize) -> Vec<Check> {
    let nf = n as f64;
    let bad_shadow = stats
        .iter()
        .filter(|s| {
            let p = s.expected_shadow;
            (s.shadow - p).abs() > 4.0 * (p * (1.0 - p) / nf).sqrt() + 1e-12
        })
        .count();
    let worst = stats.iter().map(|s| (s.shadow - s.expected_shadow).abs()).fold(0.0, f64::max);

    let (chi2, dof) = stats.iter().fold((0.0, 0), |(c, d), s| (c + s.chi2, d + s.dof));
    let critical = if dof > 0 { ChiSquared::new(dof as f64).unwrap().inverse_cdf(1.0 - 1e-3) } else { 0.0 };

    let features: Vec<(f64, f64)> = stats.iter().filter_map(|s| s.feature).collect();
    let worst_feature = features.iter().map(|(g, e)| (g - e).abs() / e).fold(0.0, f64::max);

    let mean = |f: &dyn Fn(&RayStats) -> f64| stats.iter().map(f).sum::<f64>() / stats.len().max(1) as f64;
    let s_full = mean(&|s| s.shadow);
    let s_scaled = mean(&|s| s.shadow_scaled);
    let var = mean(&|s| s.shadow * (1.0 - s.shadow) + s.shadow_scaled * (1.0 - s.shadow_scaled));
    let sigma = (var / (nf * stats.len().max(1) as f64)).sqrt();
    let mean_t = |f: &dyn Fn(&RayStats) -> (f64, usize)| {
        let (sum, k) = stats.iter().map(f).fold((0.0, 0), |(a, b), (c, d)| (a + c, b + d));
        sum / k.max(1) as f64
    };
    let (t_full, t_scaled) = (mean_t(&|s| s.t_full), mean_t(&|s| s.t_scaled));
    let t_tol = stats
        .iter()
        .map(|s| s.t_full.0 / s.t_full.1.max(1) as f64)
        .fold(0.0, f64::max)
        * 3.0
        / (nf * stats.len().max(1) as f64).sqrt();

    let (sto, refr) = stats.iter().fold((0u64, 0u64), |(a, b), s| (a + s.stochastic.anyhit, b + s.reference.anyhit));
    let rays: u64 = stats.iter().map(|s| s.reference.rays).sum();
    let per = |x: u64| x as f64 / rays.max(1) as f64;

    vec![
        check(
            "shadow unbiasedness",
            bad_shadow == 0,
            format!("{bad_shadow} of {} rays beyond 4 sigma, max |error| {worst:.4}", stats.len()),
        ),
        check(
            "shading hit law",
            chi2 <= critical,
            format!("chi-square {chi2:.1} on {dof} dof, critical {critical:.1} at 1e-3"),
        ),
        check(
            "feature expectation",
            worst_feature <= 0.02,
            format!("max relative error {worst_feature:.4} over {} rays with opacity >= 0.5", features.len()),
        ),
        check(
            "bias monotonicity",
            s_scaled >= s_full - 3.0 * sigma && t_scaled <= t_full + t_tol,
            format!("shadow {s_full:.4} -> {s_scaled:.4}, hit depth {t_full:.4} -> {t_scaled:.4} (scale 1 -> 0.2)"),
        ),
        check(
            "throughput",
            stats.is_empty() || sto < refr,
            format!("anyhit per ray {:.2} stochastic vs {:.2} reference", per(sto), per(refr)),
        ),
    ]
}

/// Replaces the first Gaussian hit on each ray with an opaque square at the
/// same depth; shadow rays through it must always be occluded.
fn mesh_opacity(scene: &Scene, rays: &[Ray], opts: &OracleOptions) -> Check {
    let accel = build_accel(scene);
    let bad = rays
        .par_iter()
        .enumerate()
        .filter(|(i, ray)| {
            let list = collect_hits(&accel, ray, &mut TraceStats::default());
            let Some(h) = list.hits.iter().find(|h| matches!(h.prim, PrimRef::Gaussian(_))) else {
                return false;
            };
            let PrimRef::Gaussian(id) = h.prim else { unreachable!() };
            let g = &scene.gaussians[id as usize];
            let size = g.scale.max() * 8.0;
            let (u, v) = orthonormal_basis(&ray.direction);
            let corner = h.position - (u + v) * (size / 2.0);
            let Ok(square) = quad(corner, u * size, v * size, MeshMaterial::default(), 0) else {
                return true;
            };
            let mut gaussians = scene.gaussians.clone();
            gaussians.remove(id as usize);
            let mut triangles = scene.triangles.clone();
            triangles.extend(square);
            let swapped = ProxyAccel::build(&gaussians, &triangles);
            let mut rng = stream(opts.seed, 3, *i as u64, Purpose::Oracle);
            !(0..256).all(|_| trace_shadow_stochastic(&swapped, ray, &mut rng, 1.0))
        })
        .count();
    check("mesh opacity rule", bad == 0, format!("{bad} of {} rays not fully occluded", rays.len()))
}

/// Runs every check on rays from `camera` into `scene`.
pub fn run_oracle_suite(scene: &Scene, camera: &CameraModel, opts: &OracleOptions) -> OracleReport {
    let accel = build_accel(scene);
    let rays = sample_rays(&accel, camera, opts.rays, opts.seed);
    let mut checks = vec![
        check(
            "sampled rays",
            !rays.is_empty() || scene.gaussians.is_empty() && scene.triangles.is_empty(),
            format!("{} of {} requested rays hit the scene", rays.len(), opts.rays),
        ),
        containment(scene, &accel, opts),
        traversal(scene, &accel, &rays),
    ];
    let stats: Vec<RayStats> = rays.par_iter().enumerate().map(|(i, r)| trace_ray(&accel, r, i, opts)).collect();
    checks.extend(statistical(&stats, opts.trials));
    checks.push(mesh_opacity(scene, &rays, opts));
    OracleReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gsmath::GaussianPrimitive;
    use crate::math::{grey, Vec3};
    use crate::rng::seeded;

    fn scene() -> (Scene, CameraModel) {
        let mut rng = seeded(5);
        let mut s = Scene::new();
        for _ in 0..40 {
            s.gaussians.push(
                GaussianPrimitive::isotropic(
                    Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)),
                    rng.random_range(0.05..0.2),
                    rng.random_range(0.1..0.95),
                )
                .with_albedo(grey(rng.random_range(0.2..0.9))),
            );
        }
        s.triangles.extend(
            quad(Vec3::new(-2.0, -2.0, 1.5), Vec3::new(0.0, 4.0, 0.0), Vec3::new(4.0, 0.0, 0.0), MeshMaterial::default(), 0)
                .unwrap(),
        );
        let cam = CameraModel::look_at(Vec3::new(0.0, 0.0, -3.0), Vec3::zeros(), Vec3::y(), 30.0, 32, 32).unwrap();
        (s, cam)
    }

    #[test]
    fn suite_passes_on_a_correct_tracer() {
        let (s, cam) = scene();
        let opts = OracleOptions { rays: 12, trials: 20_000, proxies: 20, points: 200, ..Default::default() };
        let report = run_oracle_suite(&s, &cam, &opts);
        assert!(report.passed(), "{report}");
        assert_eq!(report.checks.len(), 9);
        let table = report.to_string();
        assert!(table.contains("shading hit law") && table.ends_with("9/9 checks passed"));
    }

    #[test]
    fn empty_scene_passes_trivially() {
        let (_, cam) = scene();
        let report = run_oracle_suite(&Scene::new(), &cam, &OracleOptions { trials: 100, ..Default::default() });
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn failures_are_reported() {
        let mut report = OracleReport::default();
        report.checks.push(check("a", true, String::new()));
        report.checks.push(check("b", false, "off".into()));
        assert!(!report.passed());
        assert!(report.to_string().contains("b  FAIL  off"));
    }
}
