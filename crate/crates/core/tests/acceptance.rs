//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line
//! before asserting.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;

use num_complex::Complex64;

use idd_decay::besov::{self, BesovParams, DyadicPartition};
use idd_decay::catalog::{self, CatalogEntry};
use idd_decay::decay::{self, ClassifyConfig, FitConfig};
use idd_decay::deconv::{self, FlatTop, GridSpec, MiseConfig};
use idd_decay::grid::{self, GridFunction, Spectrum};
use idd_decay::inversion::{self, Probe};
use idd_decay::levy::{best_evaluator, CharFn, ClosedFormCf, LevyTriplet, QuadratureCf};
use idd_decay::QuadConfig;

fn report(id: u32, ok: bool, detail: &str) {
    println!("{} criterion {id}: {detail}", if ok { "PASS" } else { "FAIL" });
}

#[test]
fn criterion_1_gamma_cf_oracle() {
    let mut worst: f64 = 0.0;
    for a in [0.5, 2.0, 3.5] {
        for lambda in [1.0, 3.0] {
            let q = QuadratureCf::new(LevyTriplet::gamma(a, lambda).unwrap());
            for i in 0..500 {
                let u = -1e3 + 2e3 * i as f64 / 499.0;
                let oracle = Complex64::new(1.0, -u / lambda).powf(-a);
                let rel = (q.cf(u).unwrap() - oracle).norm() / oracle.norm();
                worst = worst.max(rel);
            }
        }
    }
    let ok = worst <= 1e-8;
    report(1, ok, &format!("max relative CF error over Gamma grid {worst:.3e} (tolerance 1e-8)"));
    assert!(ok);
}

fn sharp_constant(cf: &dyn CharFn, a: f64, u_max: f64) -> f64 {
    decay::geometric_grid(1e2, u_max, 50).iter().map(|&u| (cf.log_abs(u).unwrap() + a * (1.0 + u).ln()).exp()).fold(f64::INFINITY, f64::min)
}

#[test]
fn criterion_2_exponent_recovery() {
    let mut ok = true;
    let mut lines = Vec::new();
    for e in [CatalogEntry::gamma(2.0, 1.0), CatalogEntry::gamma(3.5, 1.0), CatalogEntry::gamma(0.5, 3.0)] {
        let a = e.alpha.unwrap();
        let cf = best_evaluator(&e.triplet, QuadConfig::default());
        let fit = decay::estimate_decay_exponent(cf.as_ref(), 1e2, 1e5, &FitConfig::default()).unwrap();
        let c1 = sharp_constant(cf.as_ref(), a, 1e5);
        let c2 = sharp_constant(cf.as_ref(), a, 2e5);
        let k = decay::k_of(&e.triplet).unwrap();
        let rep = decay::verify_bounds(&k, cf.as_ref(), 0.05, &decay::geometric_grid(1e2, 1e5, 50)).unwrap();
        let this = (fit.alpha_hat - a).abs() <= 0.05 && c1 > 0.0 && (c2 / c1 - 1.0).abs() <= 0.1 && rep.sharp_constant.is_some_and(|c| c > 0.0);
        ok &= this;
        lines.push(format!("{}: alpha_hat {:.4} c {:.4e} -> {:.4e}", e.name, fit.alpha_hat, c1, c2));
    }
    report(2, ok, &lines.join("; "));
    assert!(ok);
}

#[test]
fn criterion_3_equivalence_sweep() {
    let entries = catalog::standard();
    assert_eq!(entries.len(), 12);
    let mut ok = true;
    let mut lines = Vec::new();
    for e in &entries {
        let k = decay::k_of(&e.triplet).unwrap();
        let cf = best_evaluator(&e.triplet, QuadConfig::default());
        let v = decay::classify(&e.triplet, &k, cf.as_ref(), &ClassifyConfig::default());
        ok &= v.consistent;
        lines.push(format!("{}={:?}/{:?}/{:?}", e.name, v.condition_i.state, v.condition_ii.state, v.condition_iii.state));
    }
    report(3, ok, &format!("all determined verdicts consistent: {}", lines.join(" ")));
    assert!(ok);
}

#[test]
fn criterion_4_smoothness_probes() {
    let mut ok = true;
    let mut lines = Vec::new();
    for (e, center, bounded, divergent) in [
        (CatalogEntry::gamma(3.5, 1.0), 3.5, vec![0u32, 1, 2], 3u32),
        (CatalogEntry::gamma(2.0, 1.0), 2.0, vec![0], 1),
    ] {
        let cf = best_evaluator(&e.triplet, QuadConfig::default());
        let n = 1 << 15;
        let width = 64.0;
        let coarse = inversion::invert_cf(cf.as_ref(), PI * n as f64 / width, n, center).unwrap();
        let fine = inversion::invert_cf(cf.as_ref(), 2.0 * PI * n as f64 / width, 2 * n, center).unwrap();
        for m in bounded {
            let p = inversion::spatial_smoothness_probe(&coarse.density, &fine.density, m).unwrap();
            ok &= p.verdict == Probe::Bounded;
            lines.push(format!("{} n={m} {:?} ({:.3})", e.name, p.verdict, p.contraction));
        }
        let p = inversion::spatial_smoothness_probe(&coarse.density, &fine.density, divergent).unwrap();
        ok &= p.divergent;
        lines.push(format!("{} n={divergent} {:?} ({:.3})", e.name, p.verdict, p.contraction));
    }
    report(4, ok, &lines.join("; "));
    assert!(ok);
}

#[test]
fn criterion_5_inverse_series_certificate() {
    let e = CatalogEntry::compound_poisson(2.0, 1.0);
    let split = deconv::split_cf(&e.triplet, 0.5).unwrap();
    assert_eq!(split.tail_mass, 1.0);
    let template = GridFunction::from_fn(0.0, 128.0, 256, |_| 0.0).unwrap();
    let mut ok = true;
    let mut worst_ratio: f64 = 0.0;
    for k in 1..=25 {
        let s = deconv::cp_inverse_measure(&split, k, &template).unwrap();
        let bound = 1f64.exp() * (1..=k + 1).fold(1.0, |acc, j| acc / j as f64);
        assert!((s.bound - bound).abs() <= 1e-15 * bound);
        let defect = (0..2048).map(|i| s.atomic_defect(-100.0 + 200.0 * i as f64 / 2047.0).unwrap()).fold(0.0, f64::max);
        ok &= defect <= bound;
        worst_ratio = worst_ratio.max(defect / bound);
    }
    report(5, ok, &format!("max defect/bound over K = 1..25 is {worst_ratio:.6}"));
    assert!(ok);
}

/// Band-limited targets built from their spectra.
fn band_limited_targets(template: &GridFunction) -> Vec<GridFunction> {
    let mut out = Vec::new();
    for (i, band) in [2.0, 3.0, 4.0, 6.0, 8.0].into_iter().enumerate() {
        for shift in [0.0, 1.5] {
            let s = Spectrum::from_fn(template, |u| {
                let w = 1.0 - deconv::smooth_step((u.abs() / band - 0.5) * 2.0);
                w * (1.0 + 0.3 * (u * (i as f64 + 0.5)).cos()) * Complex64::from_polar(1.0, u * shift)
            });
            let mut g = grid::inverse(&s);
            for v in g.values.iter_mut() {
                v.im = 0.0;
            }
            out.push(g);
        }
    }
    out
}

#[test]
fn criterion_6_operator_route_agreement() {
    let template = GridFunction::from_fn(0.0, 128.0, 4096, |_| 0.0).unwrap();
    let targets = band_limited_targets(&template);
    assert_eq!(targets.len(), 10);
    let noises = [
        CatalogEntry::gamma(2.0, 1.0),
        CatalogEntry::bilateral_gamma(1.0, 2.0, 0.5, 1.0),
        CatalogEntry::compound_poisson(2.0, 1.0),
        CatalogEntry::k_step(1.5, 0.5, 0.3, 1.0),
    ];
    let mut ok = true;
    let mut lines = Vec::new();
    for e in &noises {
        let split = deconv::split_cf(&e.triplet, 0.5).unwrap();
        let direct_cf = best_evaluator(&e.triplet, QuadConfig::default());
        let mut worst: f64 = 0.0;
        for t in &targets {
            let composed = deconv::deconvolution_operator(&split, t, deconv::CONV_TOL).unwrap();
            let direct = deconv::deconvolve_direct(direct_cf.as_ref(), t).unwrap();
            let d = composed.values.iter().zip(&direct.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            worst = worst.max(d);
        }
        ok &= worst < deconv::CONV_TOL;
        lines.push(format!("{} {worst:.2e}", e.name));
    }
    report(6, ok, &format!("sup |composed - direct| per noise: {}", lines.join(", ")));
    assert!(ok);
}

#[test]
fn criterion_7_multiplier_dichotomy() {
    let params = BesovParams::standard_grid();
    let ladder = besov::test_ladder(14, 16.0, 1 << 18).unwrap();
    let part = DyadicPartition::for_grid(&ladder[0]);
    assert!(part.j_max >= 15);
    let alpha = 2.0;
    let gamma = ClosedFormCf::new(CatalogEntry::gamma(2.0, 1.0).triplet).unwrap();
    let r = besov::multiplier_ratio(&gamma, alpha + besov::LOSS_SLACK, &ladder, &params, &part).unwrap();
    let mut worst_change: f64 = 0.0;
    let mut bounded = true;
    for p in &params {
        let (a, b) = (r.log_sup(p, 12), r.log_sup(p, 14));
        bounded &= a.is_finite() && b.is_finite();
        worst_change = worst_change.max(((b - a).exp() - 1.0).abs());
    }
    let gauss = ClosedFormCf::new(LevyTriplet::gaussian(1.0)).unwrap();
    let g = besov::multiplier_ratio(&gauss, alpha + besov::LOSS_SLACK, &ladder[..=12], &params, &part).unwrap();
    let shortest = params.iter().map(|p| g.longest_growth_run(p, 2.0)).min().unwrap();
    let ok = bounded && worst_change < 0.1 && shortest >= 4;
    report(7, ok, &format!("Gamma(2,1) sup change adding two levels {worst_change:.2e}; Gaussian shortest doubling run {shortest} levels"));
    assert!(ok);
}

fn normal_density(x: f64) -> f64 {
    (-(x * x) / 2.0).exp() / (2.0 * PI).sqrt()
}

#[test]
fn criterion_8_deconvolution_consistency() {
    let noise_law = CatalogEntry::gamma(2.0, 1.0).triplet;
    let sampler = idd_decay::sample::Sampler::new(&noise_law, &Default::default()).unwrap();
    let y = deconv::draw_observations(1.0, &sampler, 50_000, 2024);
    let spec = GridSpec { center: 0.0, width: 40.0, n: 1024 };
    let kernel = FlatTop::default();
    let identity = ClosedFormCf::new(LevyTriplet::zero()).unwrap();
    let reduced = deconv::deconv_estimate(&y, &identity, &kernel, 0.3, &spec).unwrap();
    let kde = deconv::kde(&y, &kernel, 0.3, &spec).unwrap();
    let exact = reduced == kde;
    let noise = ClosedFormCf::new(noise_law.clone()).unwrap();
    let mut best = (f64::INFINITY, 0.0);
    for h in [0.2, 0.25, 0.3, 0.35, 0.4, 0.5] {
        let f = deconv::deconv_estimate(&y, &noise, &kernel, h, &spec).unwrap();
        let l2 = (f.values.iter().enumerate().map(|(k, v)| (v.re - normal_density(f.x(k))).powi(2)).sum::<f64>() * f.step).sqrt();
        if l2 < best.0 {
            best = (l2, h);
        }
    }
    let cfg = MiseConfig {
        target_sd: 1.0,
        n_ladder: vec![500, 5000, 50_000],
        h_grid: vec![0.25, 0.3, 0.4, 0.5, 0.6, 0.8, 1.0],
        replications: 10,
        seed: 77,
        grid: spec,
    };
    let table = deconv::mise_experiment(&noise_law, &cfg, &kernel).unwrap();
    let b = table.best();
    let decreasing = b.windows(2).all(|w| w[1].2 < w[0].2);
    let ok = exact && best.0 < 0.05 && decreasing;
    let mise: Vec<String> = b.iter().map(|(n, h, m)| format!("n={n} h={h} {m:.3e}")).collect();
    report(8, ok, &format!("KDE reduction exact: {exact}; L2 error {:.4} at h={}; best-h MISE {}", best.0, best.1, mise.join(", ")));
    assert!(ok);
}

fn run_cli(dir: &Path, cmd: &str, config: &str) {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_idd")).args([cmd, "--config"]).arg(&cfg).arg("--out").arg(dir).args(["--seed", "5"]).status().unwrap();
    assert!(status.success(), "{cmd}");
}

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "config.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn criterion_9_determinism() {
    let runs = [
        ("deconvolve", r#"{"law": {"catalog": "gamma_2_1"}, "deconvolve": {"n": 5000, "n_ladder": [500, 5000], "h_grid": [0.3, 0.5], "replications": 4, "grid": {"center": 0.0, "width": 40.0, "n": 512}}}"#),
        ("invert", r#"{"law": {"catalog": "gamma_3.5_1"}, "invert": {"n_points": 4096, "width": 64.0, "center": 3.5}}"#),
        ("multiplier", r#"{"law": {"catalog": "gamma_2_1"}, "multiplier": {"j_max": 6, "width": 16.0, "n": 4096}}"#),
        ("classify", r#"{"law": {"catalog": "bilateral_gamma"}}"#),
        ("cf", r#"{"law": {"catalog": "k_step"}}"#),
    ];
    let mut ok = true;
    let mut files = 0;
    for (cmd, cfg) in runs {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_cli(a.path(), cmd, cfg);
        run_cli(b.path(), cmd, cfg);
        let (x, y) = (artifacts(a.path()), artifacts(b.path()));
        files += x.len();
        ok &= !x.is_empty() && x == y;
    }
    // the Monte-Carlo table does not depend on the thread count
    let cfg = MiseConfig { target_sd: 1.0, n_ladder: vec![300], h_grid: vec![0.4], replications: 6, seed: 9, grid: GridSpec { center: 0.0, width: 40.0, n: 512 } };
    let law = CatalogEntry::gamma(2.0, 1.0).triplet;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let serial = pool.install(|| deconv::mise_experiment(&law, &cfg, &FlatTop::default()).unwrap().to_csv());
    let parallel = deconv::mise_experiment(&law, &cfg, &FlatTop::default()).unwrap().to_csv();
    ok &= serial == parallel;
    report(9, ok, &format!("{files} artifacts byte-identical across repeated runs; thread count does not change the MISE table"));
    assert!(ok);
}
