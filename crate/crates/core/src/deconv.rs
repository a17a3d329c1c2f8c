//! Deconvolution by `1/φ`: the small-jump / compound-Poisson split, the
//! signed-measure inverse of the compound-Poisson factor, the kernel
//! estimator, plug-in functionals and a Monte-Carlo error harness.

use num_complex::{Complex, Complex64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;
use twofloat::TwoFloat;

use crate::error::{IddError, Result};
use crate::grid::{self, GridFunction, Spectrum};
use crate::levy::{self, best_evaluator, CharFn, JumpMeasure, LevyTriplet, QuadConfig};
use crate::measure::{merge_atoms, SignedMeasure};
use crate::sample::{Sampler, SamplerConfig};

pub const CONV_TOL: f64 = 1e-6;
pub const FUNC_TOL: f64 = 1e-6;
/// Smallest `|φ|` we divide by inside a frequency band.
pub const UNDERFLOW_GUARD: f64 = 1e-12;
/// Spectral values below this fraction of the peak count as outside the band.
const BAND_CUT: f64 = 1e-13;
const MAX_SERIES_TERMS: usize = 200_000;

/// `φ = φ_c · φ_p` with jumps split at `δ`.
#[derive(Debug, Clone)]
pub struct CFSplit {
    pub full: LevyTriplet,
    /// `ψ_c(u) = ∫_{|x| ≤ δ} (e^{iux} - 1) ν(dx)`.
    pub small: LevyTriplet,
    /// `ψ_p(u) = iγ₀u + ∫_{|x| > δ} (e^{iux} - 1) ν(dx)`.
    pub tail: LevyTriplet,
    pub gamma0: f64,
    /// `Λ = ν(ℝ ∖ [-δ, δ])`.
    pub tail_mass: f64,
    pub delta: f64,
    pub cfg: QuadConfig,
}

pub fn split_cf(t: &LevyTriplet, delta: f64) -> Result<CFSplit> {
    if t.sigma2 > 0.0 {
        return Err(IddError::DiffusionPresent(t.sigma2));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(IddError::Config(format!("delta = {delta} outside (0, 1)")));
    }
    let cfg = QuadConfig::default();
    let tol = quad_tol();
    let gamma0 = t.gamma - t.measure.compensator(tol)?;
    let small = LevyTriplet::compensated(0.0, 0.0, t.measure.restrict(0.0, delta))?;
    let tail_m = t.measure.restrict(delta, f64::INFINITY);
    let tail_mass = tail_m.mass_outside(delta, tol)?;
    let tail = LevyTriplet::compensated(0.0, gamma0, tail_m)?;
    Ok(CFSplit { full: t.clone(), small, tail, gamma0, tail_mass, delta, cfg })
}

fn quad_tol() -> crate::quad::QuadTol {
    crate::quad::QuadTol { abs: 1e-14, rel: 1e-13, max_subdivisions: 4000 }
}

impl CFSplit {
    pub fn phi_c(&self, u: f64) -> Result<Complex64> {
        levy::cf(&self.small, u, &self.cfg)
    }

    pub fn phi_p(&self, u: f64) -> Result<Complex64> {
        levy::cf(&self.tail, u, &self.cfg)
    }

    pub fn tail_atoms(&self) -> &[(f64, f64)] {
        &self.tail.measure.atoms
    }

    fn tail_has_density(&self) -> bool {
        !self.tail.measure.ac.is_empty()
    }

    /// `∫ e^{iux} ν_ac(dx)` over `|x| > δ`.
    fn tail_density_transform(&self, u: f64, ac_mass: f64, comp: f64) -> Result<Complex64> {
        let t = LevyTriplet { sigma2: 0.0, gamma: comp, measure: JumpMeasure { atoms: vec![], ..self.tail.measure.clone() } };
        Ok(levy::characteristic_exponent(&t, u, &self.cfg)? + ac_mass)
    }
}

/// Truncated `δ_{-γ₀} ∗ e^Λ Σ_{k ≤ K} (-1)^k/k! (ν_tail)^{∗k}`.
#[derive(Debug, Clone)]
pub struct InverseSeries {
    pub k: usize,
    pub measure: SignedMeasure,
    /// `e^Λ Λ^{K+1} / (K+1)!`.
    pub bound: f64,
    /// `e^Λ Σ_{k ≤ K} Λ^k / k! ≤ e^{2Λ}`, the total variation of the exact
    /// truncated series.
    pub tv_bound: f64,
    pub tail_mass: f64,
    pub gamma0: f64,
    base: Vec<(f64, f64)>,
    /// Atom-power terms: counts per tail atom and their coefficient.
    terms: Vec<(Vec<u32>, TwoFloat)>,
}

pub fn truncation_bound(lambda: f64, k: usize) -> f64 {
    let mut t = lambda.exp();
    for j in 1..=k + 1 {
        t *= lambda / j as f64;
    }
    t
}

/// Smallest `K ≥ 1` whose truncation bound is at most `tol`.
pub fn choose_k(lambda: f64, tol: f64) -> usize {
    (1..400).find(|&k| truncation_bound(lambda, k) <= tol).unwrap_or(400)
}

fn compositions(m: usize, k: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if prefix.len() == m - 1 {
        let used: u32 = prefix.iter().sum();
        let mut c = prefix.clone();
        c.push(k - used);
        out.push(c);
        return;
    }
    let used: u32 = prefix.iter().sum();
    for n in 0..=k - used {
        prefix.push(n);
        compositions(m, k, prefix, out);
        prefix.pop();
    }
}

fn tf(x: f64) -> TwoFloat {
    TwoFloat::from(x)
}

pub fn cp_inverse_measure(split: &CFSplit, k: usize, grid: &GridFunction) -> Result<InverseSeries> {
    if k < 1 {
        return Err(IddError::Config("series order K must be at least 1".into()));
    }
    let lambda = split.tail_mass;
    let base: Vec<(f64, f64)> = split.tail_atoms().to_vec();
    let scale = exp_dd(c2(lambda)).re;
    // atom powers, coefficients e^Λ (-1)^k Π m_i^{n_i} / n_i!
    let mut terms: Vec<(Vec<u32>, TwoFloat)> = vec![(vec![0; base.len()], scale)];
    if !base.is_empty() {
        for order in 1..=k as u32 {
            let mut cs = Vec::new();
            compositions(base.len(), order, &mut Vec::new(), &mut cs);
            for c in cs {
                let mut coef = if order % 2 == 0 { scale } else { -scale };
                for (&n, &(_, m)) in c.iter().zip(&base) {
                    for j in 1..=n {
                        coef = coef * m / j as f64;
                    }
                }
                terms.push((c, coef));
            }
            if terms.len() > MAX_SERIES_TERMS {
                return Err(IddError::Config(format!("inverse series has more than {MAX_SERIES_TERMS} atoms")));
            }
        }
    }
    let loc = |c: &[u32]| c.iter().zip(&base).map(|(&n, &(x, _))| n as f64 * x).sum::<f64>() - split.gamma0;
    let atoms = merge_atoms(terms.iter().map(|(c, coef)| (loc(c), coef.hi() + coef.lo())).collect());
    let half_width = 0.5 * grid.width();
    let tv: f64 = atoms.iter().map(|a| a.1.abs()).sum();
    if let Some(a) = atoms.iter().find(|a| a.0.abs() > half_width && a.1.abs() > 1e-16 * tv) {
        return Err(IddError::GridOverflow(format!("atom at {} (mass {:e}) beyond half-width {half_width}", a.0, a.1)));
    }
    let density = if split.tail_has_density() {
        // Chernoff: mass beyond r is at most e^{Λ + M(θ) - θr}, M(θ) = ∫ e^{θ|x|} ν_tail
        let r = half_width - split.gamma0.abs();
        let mut outside = f64::INFINITY;
        for theta in [0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.8, 0.9, 0.95, 1.5, 2.0, 3.0, 5.0, 10.0] {
            let m = split.tail.measure.exp_moment_outside(theta, split.delta, quad_tol())?;
            outside = outside.min((lambda + m - theta * r).exp());
        }
        if r <= 0.0 || outside > 1e-10 {
            return Err(IddError::GridOverflow(format!("series mass up to {outside:e} beyond half-width {half_width}")));
        }
        Some(series_density(split, k, grid)?)
    } else {
        None
    };
    Ok(InverseSeries {
        k,
        measure: SignedMeasure { atoms, density },
        bound: truncation_bound(lambda, k),
        tv_bound: (0..=k).scan(lambda.exp(), |t, j| {
            if j > 0 {
                *t *= lambda / j as f64;
            }
            Some(*t)
        }).sum(),
        tail_mass: lambda,
        gamma0: split.gamma0,
        base,
        terms,
    })
}

// absolutely continuous part: e^Λ Σ (-1)^k/k! [(Â + D̂)^k - Â^k], shifted by -γ₀
fn series_density(split: &CFSplit, k: usize, grid: &GridFunction) -> Result<GridFunction> {
    let tol = quad_tol();
    let ac_only = JumpMeasure { atoms: vec![], ..split.tail.measure.clone() };
    let ac_mass = ac_only.mass_outside(split.delta, tol)?;
    let comp = ac_only.compensator(tol)?;
    let n = grid.len();
    let du = grid::dual_step(grid.step, n);
    let half = n / 2;
    let lambda = split.tail_mass;
    let atoms = split.tail_atoms();
    let pos: Vec<Complex64> = (0..=half)
        .into_par_iter()
        .map(|j| {
            let u = j as f64 * du;
            let d = split.tail_density_transform(u, ac_mass, comp)?;
            let a: Complex64 = atoms.iter().map(|&(x, m)| Complex64::from_polar(m, u * x)).sum();
            let (mut p, mut q) = (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
            let mut acc = Complex64::new(0.0, 0.0);
            let mut fact = 1.0;
            for order in 1..=k {
                p *= a + d;
                q *= a;
                fact *= order as f64;
                let sgn = if order % 2 == 0 { 1.0 } else { -1.0 };
                acc += (p - q) * (sgn / fact);
            }
            Ok(acc * lambda.exp() * Complex64::from_polar(1.0, -u * split.gamma0))
        })
        .collect::<Result<_>>()?;
    let mut values = vec![Complex64::new(0.0, 0.0); n];
    for (j, v) in values.iter_mut().enumerate() {
        let m = j as isize - half as isize;
        *v = if m >= 0 { pos[m as usize] } else { pos[(-m) as usize].conj() };
    }
    let mut d = grid::inverse(&Spectrum { origin: grid.origin, du, values });
    for v in d.values.iter_mut() {
        v.im = 0.0;
    }
    Ok(d)
}

type C2 = Complex<TwoFloat>;

fn c2(re: f64) -> C2 {
    C2::new(tf(re), tf(0.0))
}

// twofloat's TwoFloat / TwoFloat drops the low word; TwoFloat / f64 is exact
fn div_f64(z: C2, d: f64) -> C2 {
    C2::new(z.re / d, z.im / d)
}

// one Newton step from the f64 reciprocal
fn recip_dd(z: C2) -> C2 {
    let n = z.re * z.re + z.im * z.im;
    let r0 = 1.0 / n.hi();
    let r = tf(r0) + tf(r0) * (tf(1.0) - n * r0);
    C2::new(z.re * r, -(z.im * r))
}

// exp by scaling and squaring on a Taylor polynomial; only field operations,
// which are exact to double-double precision
fn exp_dd(w: C2) -> C2 {
    let mag = (w.re.hi() * w.re.hi() + w.im.hi() * w.im.hi()).sqrt();
    let mut s = 0;
    while mag / f64::powi(2.0, s) > 1e-2 {
        s += 1;
    }
    let r = div_f64(w, f64::powi(2.0, s));
    let mut term = c2(1.0);
    let mut acc = c2(1.0);
    for j in 1..=12 {
        term = div_f64(term * r, j as f64);
        acc += term;
    }
    for _ in 0..s {
        acc = acc * acc;
    }
    acc
}

// any |z| ≤ 1 keeps the identity polynomial, so the f64 character suffices
fn unit_dd(theta: f64) -> C2 {
    C2::new(tf(theta.cos()), tf(theta.sin()))
}

impl InverseSeries {
    /// `F[series](u)` from the stored measure.
    pub fn transform(&self, u: f64) -> Complex64 {
        self.measure.fourier(u)
    }

    /// `|F[series](u) φ_p(u) - 1|` in double-double arithmetic; only for
    /// purely atomic tails, where both factors are polynomials in the
    /// characters `e^{iux_i}`.
    pub fn atomic_defect(&self, u: f64) -> Option<f64> {
        if self.measure.density.is_some() {
            return None;
        }
        let w = unit_dd(u * self.gamma0);
        let z: Vec<C2> = self.base.iter().map(|&(x, _)| unit_dd(u * x)).collect();
        let mut series = C2::new(tf(0.0), tf(0.0));
        for (c, coef) in &self.terms {
            let mut t = C2::new(*coef, tf(0.0));
            for (&n, zi) in c.iter().zip(&z) {
                for _ in 0..n {
                    t *= *zi;
                }
            }
            series += t;
        }
        series *= recip_dd(w);
        let mut e = C2::new(tf(0.0), tf(0.0));
        for (zi, &(_, m)) in z.iter().zip(&self.base) {
            e += (*zi - C2::new(tf(1.0), tf(0.0))) * tf(m);
        }
        let phi_p = exp_dd(e) * w;
        let d = series * phi_p - C2::new(tf(1.0), tf(0.0));
        let n = (d.re * d.re + d.im * d.im).sqrt();
        Some(n.hi() + n.lo())
    }
}

fn band_of(s: &Spectrum) -> Vec<bool> {
    let peak = s.values.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    s.values.iter().map(|v| v.norm() > BAND_CUT * peak).collect()
}

fn divide_in_band<F: Fn(f64) -> Result<Complex64> + Sync>(s: &Spectrum, band: &[bool], phi: F) -> Result<Spectrum> {
    let values: Vec<Complex64> = (0..s.len())
        .into_par_iter()
        .map(|j| {
            if !band[j] {
                return Ok(Complex64::new(0.0, 0.0));
            }
            let u = s.u(j);
            let p = phi(u)?;
            if p.norm() < UNDERFLOW_GUARD {
                return Err(IddError::UnderflowGuard(u));
            }
            Ok(s.values[j] / p)
        })
        .collect::<Result<_>>()?;
    Ok(Spectrum { origin: s.origin, du: s.du, values })
}

/// `F^{-1}[F target / φ]` by direct spectral division.
pub fn deconvolve_direct(phi: &dyn CharFn, target: &GridFunction) -> Result<GridFunction> {
    let s = grid::forward(target);
    let band = band_of(&s);
    Ok(grid::inverse(&divide_in_band(&s, &band, |u| phi.cf(u))?))
}

/// `F^{-1}[1/φ_c]` followed by convolution with the inverse series of `φ_p`.
pub fn deconvolution_operator(split: &CFSplit, target: &GridFunction, tol: f64) -> Result<GridFunction> {
    let s = grid::forward(target);
    let band = band_of(&s);
    let small = grid::inverse(&divide_in_band(&s, &band, |u| split.phi_c(u))?);
    let series = cp_inverse_measure(split, choose_k(split.tail_mass, 1e-3 * tol), target)?;
    series.measure.convolve_grid(&small)
}

/// Something with a Fourier transform supported in `[-1, 1]`.
pub trait Kernel: Sync {
    fn ft(&self, t: f64) -> f64;
}

/// `F K = 1` on `|t| ≤ inner`, smooth decay to 0 at `|t| = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlatTop {
    pub inner: f64,
}

impl Default for FlatTop {
    fn default() -> Self {
        Self { inner: 0.8 }
    }
}

/// `C^∞` step from 0 at `s ≤ 0` to 1 at `s ≥ 1`.
pub fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / s).exp();
    let b = (-1.0 / (1.0 - s)).exp();
    a / (a + b)
}

impl Kernel for FlatTop {
    fn ft(&self, t: f64) -> f64 {
        1.0 - smooth_step((t.abs() - self.inner) / (1.0 - self.inner))
    }
}

/// Where estimates live: `n` points over `[center - width/2, center + width/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct GridSpec {
    pub center: f64,
    pub width: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn template(&self) -> Result<GridFunction> {
        GridFunction::from_fn(self.center, self.width, self.n, |_| 0.0)
    }
}

pub fn empirical_cf(sample: &[f64], u: f64) -> Complex64 {
    crate::sample::empirical_cf(sample, u)
}

fn band_indices(s: &Spectrum, h: f64) -> Result<Vec<usize>> {
    if !(h > 0.0) {
        return Err(IddError::Config(format!("bandwidth {h}")));
    }
    if 1.0 / h >= s.u_max() {
        return Err(IddError::Config(format!("band 1/h = {} exceeds grid frequency limit {}", 1.0 / h, s.u_max())));
    }
    Ok((0..s.len()).filter(|&j| s.u(j).abs() * h < 1.0).collect())
}

/// Empirical CF on every grid frequency with `|u| < 1/h` (zero elsewhere).
fn ecf_on(template: &GridFunction, sample: &[f64], h: f64) -> Result<Spectrum> {
    let mut s = Spectrum::from_fn(template, |_| Complex64::new(0.0, 0.0));
    let idx = band_indices(&s, h)?;
    let vals: Vec<Complex64> = idx.par_iter().map(|&j| empirical_cf(sample, s.u(j))).collect();
    for (&j, v) in idx.iter().zip(vals) {
        s.values[j] = v;
    }
    Ok(s)
}

fn estimate_from_ecf(ecf: &Spectrum, noise: Option<&dyn CharFn>, kernel: &dyn Kernel, h: f64) -> Result<GridFunction> {
    let idx = band_indices(ecf, h)?;
    let mut s = Spectrum { origin: ecf.origin, du: ecf.du, values: vec![Complex64::new(0.0, 0.0); ecf.len()] };
    for j in idx {
        let u = ecf.u(j);
        let mut v = ecf.values[j] * kernel.ft(h * u);
        if let Some(phi) = noise {
            let p = phi.cf(u)?;
            if p.norm() < UNDERFLOW_GUARD {
                return Err(IddError::BandwidthTooSmall(u));
            }
            v /= p;
        }
        s.values[j] = v;
    }
    let mut f = grid::inverse(&s);
    for v in f.values.iter_mut() {
        v.im = 0.0;
    }
    Ok(f)
}

/// `f̂_h = F^{-1}[F K(h·) φ_n / φ_ε]` on `grid`.
pub fn deconv_estimate(sample: &[f64], noise: &dyn CharFn, kernel: &dyn Kernel, h: f64, grid: &GridSpec) -> Result<GridFunction> {
    let ecf = ecf_on(&grid.template()?, sample, h)?;
    estimate_from_ecf(&ecf, Some(noise), kernel, h)
}

/// The same estimator without noise: `K_h ∗ μ_n`.
pub fn kde(sample: &[f64], kernel: &dyn Kernel, h: f64, grid: &GridSpec) -> Result<GridFunction> {
    let ecf = ecf_on(&grid.template()?, sample, h)?;
    estimate_from_ecf(&ecf, None, kernel, h)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FunctionalRoutes {
    /// `∫ ζ f̂_h` on the grid.
    pub on_grid: f64,
    /// `(1/n) Σ_j w(Y_j)` with `w = F^{-1}[F K(-h·)/φ_ε(-·) · F ζ]`.
    pub plug_in: f64,
}

impl FunctionalRoutes {
    pub fn gap(&self) -> f64 {
        (self.on_grid - self.plug_in).abs()
    }
}

pub fn linear_functional(zeta: &GridFunction, sample: &[f64], noise: &dyn CharFn, kernel: &dyn Kernel, h: f64) -> Result<FunctionalRoutes> {
    let ecf = ecf_on(zeta, sample, h)?;
    let est = estimate_from_ecf(&ecf, Some(noise), kernel, h)?;
    let on_grid = zeta.values.iter().zip(&est.values).map(|(z, f)| z.re * f.re).sum::<f64>() * zeta.step;
    let fz = grid::forward(zeta);
    let idx = band_indices(&fz, h)?;
    // w at the sample points, summed over the band frequencies
    let weights: Vec<(f64, Complex64)> = idx
        .iter()
        .map(|&j| {
            let u = fz.u(j);
            let p = noise.cf(-u)?;
            if p.norm() < UNDERFLOW_GUARD {
                return Err(IddError::BandwidthTooSmall(u));
            }
            Ok((u, fz.values[j] * kernel.ft(-h * u) / p))
        })
        .collect::<Result<_>>()?;
    let scale = fz.du / (2.0 * std::f64::consts::PI);
    let total: f64 = sample
        .par_iter()
        .map(|&y| weights.iter().map(|&(u, c)| (c * Complex64::from_polar(1.0, -u * y)).re).sum::<f64>())
        .collect::<Vec<_>>()
        .iter()
        .sum();
    Ok(FunctionalRoutes { on_grid, plug_in: scale * total / sample.len() as f64 })
}

#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct MiseConfig {
    /// Standard deviation of the normal target.
    pub target_sd: f64,
    pub n_ladder: Vec<usize>,
    pub h_grid: Vec<f64>,
    pub replications: usize,
    pub seed: u64,
    pub grid: GridSpec,
}

#[derive(Debug, Clone, Serialize)]
pub struct MiseRow {
    pub n: usize,
    pub h: f64,
    pub mise: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MiseTable {
    pub rows: Vec<MiseRow>,
}

impl MiseTable {
    /// `(n, h, mise)` minimising over `h` for each `n`.
    pub fn best(&self) -> Vec<(usize, f64, f64)> {
        let mut out: Vec<(usize, f64, f64)> = Vec::new();
        for r in &self.rows {
            match out.iter_mut().find(|b| b.0 == r.n) {
                Some(b) if r.mise < b.2 => *b = (r.n, r.h, r.mise),
                Some(_) => {}
                None => out.push((r.n, r.h, r.mise)),
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,h,mise,se\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{:.12e},{:.12e}\n", r.n, r.h, r.mise, r.se));
        }
        s
    }
}

/// Seed mixing for independent replication streams.
pub fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `Y = X + ε` with `X ~ N(0, sd²)` and `ε` from `noise`.
pub fn draw_observations(sd: f64, noise: &Sampler, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed));
    let normal = Normal::new(0.0, sd).expect("positive sd");
    let eps = noise.draw_n(n, splitmix(seed ^ 0x5EED));
    eps.into_iter().map(|e| normal.sample(&mut rng) + e).collect()
}

pub fn mise_experiment(noise: &LevyTriplet, cfg: &MiseConfig, kernel: &dyn Kernel) -> Result<MiseTable> {
    if cfg.h_grid.is_empty() || cfg.n_ladder.is_empty() || cfg.replications == 0 {
        return Err(IddError::Config("empty n ladder, h grid or replication count".into()));
    }
    let sampler = Sampler::new(noise, &SamplerConfig::default())?;
    let phi = best_evaluator(noise, QuadConfig::default());
    let template = cfg.grid.template()?;
    let h_min = cfg.h_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let sd = cfg.target_sd;
    let truth: Vec<f64> = (0..template.len())
        .map(|k| {
            let x = template.x(k) / sd;
            (-0.5 * x * x).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
        })
        .collect();
    let mut rows = Vec::new();
    for (ni, &n) in cfg.n_ladder.iter().enumerate() {
        let ise: Vec<Vec<f64>> = (0..cfg.replications)
            .map(|r| {
                let seed = splitmix(cfg.seed ^ splitmix(((ni as u64) << 32) | r as u64));
                let y = draw_observations(sd, &sampler, n, seed);
                let ecf = ecf_on(&template, &y, h_min)?;
                cfg.h_grid
                    .iter()
                    .map(|&h| {
                        let f = estimate_from_ecf(&ecf, Some(phi.as_ref()), kernel, h)?;
                        Ok(f.values.iter().zip(&truth).map(|(a, b)| (a.re - b).powi(2)).sum::<f64>() * f.step)
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        for (hi, &h) in cfg.h_grid.iter().enumerate() {
            let v: Vec<f64> = ise.iter().map(|r| r[hi]).collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len().max(2) - 1) as f64;
            rows.push(MiseRow { n, h, mise: mean, se: (var / v.len() as f64).sqrt() });
        }
    }
    Ok(MiseTable { rows })
}
