use idd_decay::catalog::CatalogEntry;
use idd_decay::deconv::{self, FlatTop, GridSpec, MiseConfig};
use idd_decay::grid::GridFunction;
use idd_decay::levy::{ClosedFormCf, LevyTriplet};

#[test]
fn product_identity_across_catalog_splits() {
    let grid = GridFunction::from_fn(0.0, 128.0, 2048, |_| 0.0).unwrap();
    for e in [
        CatalogEntry::gamma(2.0, 1.0),
        CatalogEntry::gamma(0.5, 3.0),
        CatalogEntry::bilateral_gamma(1.0, 2.0, 0.5, 1.0),
        CatalogEntry::tempered_stable(-0.5, 1.0, 1.0),
        CatalogEntry::compound_poisson(2.0, 1.0),
        CatalogEntry::k_step(1.5, 0.5, 0.3, 1.0),
    ] {
        let split = deconv::split_cf(&e.triplet, 0.5).unwrap();
        for k in [1, 3, 8, 25] {
            let s = deconv::cp_inverse_measure(&split, k, &grid).unwrap();
            let e2 = (2.0 * split.tail_mass).exp();
            assert!(s.tv_bound <= e2 * (1.0 + 1e-12));
            // sampled densities ring at the jump of ν at ±δ, which inflates the grid TV
            let slack = if s.measure.density.is_some() { 0.02 } else { 1e-12 };
            assert!(s.measure.total_variation() <= e2 * (1.0 + slack), "{} K={k}", e.name);
            let spec = s.measure.spectrum_on(&grid).unwrap();
            let worst = (1..grid.len())
                .step_by(16)
                .map(|j| (spec.values[j] * split.phi_p(spec.u(j)).unwrap() - 1.0).norm())
                .fold(0.0, f64::max);
            // f64 evaluation floor on top of the analytic bound
            assert!(worst <= s.bound + 1e-9, "{} K={k}: {worst:e} vs {:e}", e.name, s.bound);
        }
    }
}

#[test]
fn single_point_functional_is_a_smoothed_test_function() {
    let zeta = GridFunction::from_fn(0.0, 40.0, 1024, |x| (-(x - 0.7).powi(2)).exp()).unwrap();
    let id = ClosedFormCf::new(LevyTriplet::zero()).unwrap();
    let kernel = FlatTop::default();
    let h = 0.5;
    let r = deconv::linear_functional(&zeta, &[0.0], &id, &kernel, h).unwrap();
    // (K_h ∗ ζ)(0) through the kde of the point mass
    let spec = GridSpec { center: 0.0, width: 40.0, n: 1024 };
    let kh = deconv::kde(&[0.0], &kernel, h, &spec).unwrap();
    let direct: f64 = (0..kh.len()).map(|k| kh.values[k].re * zeta.values[k].re).sum::<f64>() * kh.step;
    assert!((r.on_grid - direct).abs() < 1e-12);
    assert!(r.gap() < deconv::FUNC_TOL, "{r:?}");
}

fn best_mise(noise: &LevyTriplet, h_grid: Vec<f64>) -> Vec<f64> {
    let cfg = MiseConfig {
        target_sd: 1.0,
        n_ladder: vec![500, 5000, 50_000],
        h_grid,
        replications: 6,
        seed: 31,
        grid: GridSpec { center: 0.0, width: 40.0, n: 1024 },
    };
    deconv::mise_experiment(noise, &cfg, &FlatTop::default()).unwrap().best().into_iter().map(|b| b.2).collect()
}

#[test]
fn gaussian_noise_rates_lag_gamma_noise() {
    let hs = vec![0.3, 0.35, 0.4, 0.5, 0.6, 0.8, 1.0];
    let gamma = best_mise(&CatalogEntry::gamma(2.0, 1.0).triplet, hs.clone());
    let gauss = best_mise(&LevyTriplet::gaussian(1.0), hs);
    assert!(gamma.windows(2).all(|w| w[1] < w[0]));
    let gain = |v: &[f64]| v[0] / v[2];
    assert!(gain(&gauss) < gain(&gamma), "gaussian {gauss:?} gamma {gamma:?}");
}

#[test]
fn zero_noise_mise_is_plain_kde_mise() {
    let cfg = MiseConfig {
        target_sd: 1.0,
        n_ladder: vec![400],
        h_grid: vec![0.4, 0.6],
        replications: 4,
        seed: 8,
        grid: GridSpec { center: 0.0, width: 40.0, n: 512 },
    };
    let table = deconv::mise_experiment(&LevyTriplet::zero(), &cfg, &FlatTop::default()).unwrap();
    // re-derive one replication set by hand with the kde
    let sampler = idd_decay::sample::Sampler::new(&LevyTriplet::zero(), &Default::default()).unwrap();
    let mut ise = [0.0; 2];
    for r in 0..4u64 {
        let seed = deconv::splitmix(8 ^ deconv::splitmix(r));
        let y = deconv::draw_observations(1.0, &sampler, 400, seed);
        for (i, h) in [0.4, 0.6].into_iter().enumerate() {
            let f = deconv::kde(&y, &FlatTop::default(), h, &cfg.grid).unwrap();
            let truth = |x: f64| (-(x * x) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
            ise[i] += (0..f.len()).map(|k| (f.values[k].re - truth(f.x(k))).powi(2)).sum::<f64>() * f.step / 4.0;
        }
    }
    for (row, want) in table.rows.iter().zip(ise) {
        assert!((row.mise - want).abs() <= 1e-12 * want, "{} vs {want}", row.mise);
    }
}
