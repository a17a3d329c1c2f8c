//! The k-function near zero and the decay of `|φ|`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{IddError, Result};
use crate::levy::{CharFn, LevyTriplet};

/// Writes non-finite reals as strings so JSON stays valid.
pub(crate) fn ser_ext<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else if x.is_nan() {
        s.serialize_str("nan")
    } else if *x > 0.0 {
        s.serialize_str("+inf")
    } else {
        s.serialize_str("-inf")
    }
}

pub(crate) fn ser_ext_vec<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    struct E(f64);
    impl Serialize for E {
        fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
            ser_ext(&self.0, s)
        }
    }
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for &x in v {
        seq.serialize_element(&E(x))?;
    }
    seq.end()
}

pub const DEFAULT_DELTA: f64 = 0.5;

/// `k_s(x) = x · dν_s/dx` on `(0, δ]`.
#[derive(Clone)]
pub struct KFunction {
    pub delta: f64,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// `(location, signed size)`.
    pub declared_jumps: Vec<(f64, f64)>,
}

impl fmt::Debug for KFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KFunction").field("delta", &self.delta).field("declared_jumps", &self.declared_jumps).finish()
    }
}

impl KFunction {
    pub fn new<F: Fn(f64) -> f64 + Send + Sync + 'static>(delta: f64, eval: F, declared_jumps: Vec<(f64, f64)>) -> Self {
        Self { delta, eval: Arc::new(eval), declared_jumps }
    }

    pub fn from_triplet(t: &LevyTriplet, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(IddError::Config(format!("delta = {delta} outside (0, 1)")));
        }
        let sym = t.symmetrize();
        if let Some(a) = sym.atoms.iter().find(|a| a.0 <= delta) {
            return Err(IddError::InvalidMeasure(format!("atom at {} inside (0, delta]: no k-density", a.0)));
        }
        let jumps = sym
            .breakpoints()
            .into_iter()
            .filter(|&y| y > 0.0 && y < delta)
            .map(|y| (y, sym.k(y) - sym.k(y * (1.0 - 1e-13))))
            .filter(|j| j.1 != 0.0)
            .collect();
        Ok(Self::new(delta, move |x| sym.k(x), jumps))
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }
}

const LADDER_DEPTH: usize = 40;
const DIVERGENCE_CEILING: f64 = 1e6;

/// `k_s(0+)` from the ladder `δ 2^{-j}`; `+∞` on monotone divergence.
pub fn k_right_limit(k: &KFunction) -> Result<f64> {
    let v: Vec<f64> = (0..=LADDER_DEPTH).map(|j| k.eval(k.delta * 0.5f64.powi(j as i32))).collect();
    let d: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).collect();
    let tail = &d[d.len() - 12..];
    let rising = tail.iter().all(|&x| x > 0.0);
    if let Some(j) = v.iter().position(|x| !x.is_finite() || x.abs() > DIVERGENCE_CEILING) {
        if d[j.saturating_sub(1).min(d.len() - 1)..].iter().all(|&x| x > 0.0 || !x.is_finite()) || rising {
            return Ok(f64::INFINITY);
        }
        return Err(IddError::Oscillatory(format!("|k| exceeds ceiling non-monotonically at x = {:e}", k.delta * 0.5f64.powi(j as i32))));
    }
    let last = *v.last().unwrap();
    let dl = *d.last().unwrap();
    if dl.abs() <= 1e-10 * last.abs().max(1.0) {
        return Ok(last);
    }
    let n = tail.len();
    let r = (dl.abs() / tail[0].abs()).powf(1.0 / (n - 1) as f64);
    let same_sign = tail.iter().all(|&x| x.signum() == dl.signum());
    if r < 0.95 && same_sign {
        // geometric Richardson tail
        return Ok(last + dl * r / (1.0 - r));
    }
    if rising {
        return Ok(f64::INFINITY);
    }
    Err(IddError::Oscillatory(format!("ladder differences do not contract (ratio {r:.3})")))
}

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    total: f64,
    positive: f64,
    log_positive: f64,
}

impl std::ops::AddAssign for Sums {
    fn add_assign(&mut self, o: Self) {
        self.total += o.total;
        self.positive += o.positive;
        self.log_positive += o.log_positive;
    }
}

// average of log(1/y) over [x1, x2]
fn mean_log_inv(x1: f64, x2: f64) -> f64 {
    if (x2 - x1) <= 1e-6 * x2 {
        return -(0.5 * (x1 + x2)).ln();
    }
    let p = |x: f64| x * (1.0 - x.ln());
    (p(x2) - p(x1)) / (x2 - x1)
}

// peak of `sign·k` on [a, b] by golden-section search
fn peak(k: &KFunction, a: f64, b: f64, sign: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (a, b);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (sign * k.eval(c), sign * k.eval(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = sign * k.eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = sign * k.eval(d);
        }
        if b - a <= 1e-15 * b {
            break;
        }
    }
    if fc > fd { (c, fc * sign) } else { (d, fd * sign) }
}

fn partition_sums(k: &KFunction, l: f64, r: f64, n: usize) -> Sums {
    let q = (r / l).powf(1.0 / n as f64);
    let x: Vec<f64> = (0..=n).map(|i| if i == n { r } else { l * q.powi(i as i32) }).collect();
    let v: Vec<f64> = x.iter().map(|&t| k.eval(t)).collect();
    // increments at rounding level are noise, not variation
    let step = |i: usize| {
        let d = v[i + 1] - v[i];
        if d.abs() <= 1e-14 * v[i].abs().max(v[i + 1].abs()) { 0.0 } else { d }
    };
    let mut s = Sums::default();
    for i in 0..n {
        let dk = step(i);
        s.total += dk.abs();
        if dk > 0.0 {
            s.positive += dk;
            s.log_positive += dk * mean_log_inv(x[i], x[i + 1]);
        }
        // an interior extremum near x[i+1]: add the overshoot missed by the nodes
        if i + 1 < n {
            let dn = step(i + 1);
            if dk * dn < 0.0 {
                let sign = dk.signum();
                let (xm, km) = peak(k, x[i], x[i + 2], sign);
                let over = sign * (km - v[i + 1]);
                if over > 0.0 {
                    s.total += 2.0 * over;
                    s.positive += over;
                    let (lo, hi) = (x[i + 1].min(xm), x[i + 1].max(xm));
                    s.log_positive += over * mean_log_inv(lo, hi.max(lo * (1.0 + 1e-12)));
                }
            }
        }
    }
    s
}

const MAX_NODES: usize = 1 << 20;
const FLOOR_OCTAVES: i32 = 45;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Wanted {
    Total,
    Positive,
    LogPositive,
}

fn pick(s: &Sums, w: Wanted) -> f64 {
    match w {
        Wanted::Total => s.total,
        Wanted::Positive => s.positive,
        Wanted::LogPositive => s.log_positive,
    }
}

// refine one continuous segment until the requested sum stabilises twice
fn segment_sums(k: &KFunction, l: f64, r: f64, w: Wanted, rel: f64) -> Result<Sums> {
    let mut n = 1024;
    let mut prev = partition_sums(k, l, r, n);
    let mut stable = 0;
    loop {
        n *= 2;
        let cur = partition_sums(k, l, r, n);
        let (a, b) = (pick(&prev, w), pick(&cur, w));
        if !b.is_finite() {
            return Err(IddError::NonConvergent(format!("non-finite variation on [{l:e}, {r:e}]")));
        }
        if (b - a).abs() <= rel * b.abs() + 1e-15 {
            stable += 1;
            if stable == 2 {
                return Ok(cur);
            }
        } else {
            stable = 0;
        }
        if n >= MAX_NODES {
            return Err(IddError::NonConvergent(format!(
                "variation on [{l:e}, {r:e}] still changing at {n} nodes ({a:e} -> {b:e})"
            )));
        }
        prev = cur;
    }
}

fn interval_sums(k: &KFunction, a: f64, b: f64, w: Wanted, rel: f64) -> Result<Sums> {
    if !(a >= 0.0 && a < b && b <= k.delta * (1.0 + 1e-15)) {
        return Err(IddError::Config(format!("need 0 <= a < b <= delta, got [{a}, {b}]")));
    }
    let jumps: Vec<(f64, f64)> = k.declared_jumps.iter().copied().filter(|j| j.0 > a && j.0 < b).collect();
    let mut s = Sums::default();
    let mut left = a;
    let mut edges: Vec<(f64, f64)> = Vec::new();
    for &(y, _) in &jumps {
        edges.push((left, y * (1.0 - 1e-13)));
        left = y;
    }
    edges.push((left, b));
    for (l, r) in edges {
        if l == 0.0 {
            let k0 = k_right_limit(k)?;
            if !k0.is_finite() {
                return Err(IddError::NonConvergent("k unbounded at 0: infinite variation".into()));
            }
            let lo = r * 2f64.powi(-FLOOR_OCTAVES);
            s += segment_sums(k, lo, r, w, rel)?;
            let mut dk = k.eval(lo) - k0;
            if dk.abs() <= 1e-10 * k0.abs().max(1.0) {
                dk = 0.0;
            }
            s.total += dk.abs();
            if dk > 0.0 {
                s.positive += dk;
                s.log_positive += dk * mean_log_inv(0.0f64.max(lo * 1e-3), lo);
            }
        } else {
            s += segment_sums(k, l, r, w, rel)?;
        }
    }
    for (y, h) in jumps {
        s.total += h.abs();
        if h > 0.0 {
            s.positive += h;
            s.log_positive += h * (1.0 / y).ln();
        }
    }
    Ok(s)
}

/// Total variation of `k_s` on `[a, b]`, declared jumps included.
pub fn bv_norm(k: &KFunction, a: f64, b: f64) -> Result<f64> {
    interval_sums(k, a, b, Wanted::Total, 1e-9).map(|s| s.total)
}

/// `‖(Dk_s)^+‖_TV` on `[a, b]`.
pub fn positive_variation(k: &KFunction, a: f64, b: f64) -> Result<f64> {
    interval_sums(k, a, b, Wanted::Positive, 1e-9).map(|s| s.positive)
}

/// `∫_0^δ log(1/y) (Dk_s)^+(dy)`.
pub fn log_condition(k: &KFunction) -> Result<f64> {
    interval_sums(k, 0.0, k.delta, Wanted::LogPositive, 1e-8).map(|s| s.log_positive)
}

/// Where `log|φ|` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// The symmetrised-measure identity; never underflows.
    LogModulus,
    /// `ln |φ(u)|` from the complex value.
    Modulus,
}

#[derive(Debug, Clone, Copy)]
pub struct FitConfig {
    pub points_per_decade: usize,
    pub curvature_threshold: f64,
    pub route: Route,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { points_per_decade: 50, curvature_threshold: 0.02, route: Route::LogModulus }
    }
}

/// Least-squares decay fit of `log|φ|` against `log u`.
#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub alpha_hat: f64,
    pub slope: f64,
    pub intercept: f64,
    pub quadratic: f64,
    pub curvature: bool,
    pub residual_rms: f64,
    pub residual_max: f64,
    /// Largest minus smallest residual: large for oscillating `|φ|`.
    pub residual_spread: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub points: usize,
}

pub fn geometric_grid(a: f64, b: f64, per_decade: usize) -> Vec<f64> {
    let n = ((b / a).log10() * per_decade as f64).ceil().max(1.0) as usize;
    (0..=n).map(|i| if i == n { b } else { a * (b / a).powf(i as f64 / n as f64) }).collect()
}

pub(crate) fn log_abs_on(cf: &dyn CharFn, grid: &[f64], route: Route) -> Result<Vec<f64>> {
    grid.par_iter()
        .map(|&u| match route {
            Route::LogModulus => cf.log_abs(u),
            Route::Modulus => {
                let m = cf.cf(u)?.norm();
                if m < f64::MIN_POSITIVE {
                    Err(IddError::CfUnderflow(u))
                } else {
                    Ok(m.ln())
                }
            }
        })
        .collect()
}

fn least_squares(t: &[f64], y: &[f64], degree: usize) -> Vec<f64> {
    // normal equations on centred abscissae, solved by Gaussian elimination
    let m = degree + 1;
    let tc = t.iter().sum::<f64>() / t.len() as f64;
    let mut a = vec![vec![0.0; m + 1]; m];
    for (&ti, &yi) in t.iter().zip(y) {
        let s = ti - tc;
        let pw: Vec<f64> = (0..m).map(|k| s.powi(k as i32)).collect();
        for r in 0..m {
            for c in 0..m {
                a[r][c] += pw[r] * pw[c];
            }
            a[r][m] += pw[r] * yi;
        }
    }
    for c in 0..m {
        let p = (c..m).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        for r in 0..m {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..=m {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    let centred: Vec<f64> = (0..m).map(|r| a[r][m] / a[r][r]).collect();
    // back to powers of t
    let mut out = vec![0.0; m];
    for (k, &ck) in centred.iter().enumerate() {
        for j in 0..=k {
            let binom = (1..=j).fold(1.0, |acc, i| acc * (k + 1 - i) as f64 / i as f64);
            out[k - j] += ck * binom * (-tc).powi(j as i32);
        }
    }
    out
}

pub fn estimate_decay_exponent(cf: &dyn CharFn, u_min: f64, u_max: f64, cfg: &FitConfig) -> Result<DecayFit> {
    if !(u_min >= 10.0 && u_max / u_min >= 100.0) {
        return Err(IddError::Config(format!("fit window [{u_min}, {u_max}] needs u_min >= 10 and two decades")));
    }
    if cfg.points_per_decade < 50 {
        return Err(IddError::Config("at least 50 points per decade".into()));
    }
    let grid = geometric_grid(u_min, u_max, cfg.points_per_decade);
    let y = log_abs_on(cf, &grid, cfg.route)?;
    let t: Vec<f64> = grid.iter().map(|u| u.ln()).collect();
    let lin = least_squares(&t, &y, 1);
    let quad = least_squares(&t, &y, 2);
    let res: Vec<f64> = t.iter().zip(&y).map(|(ti, yi)| yi - lin[0] - lin[1] * ti).collect();
    let rms = (res.iter().map(|r| r * r).sum::<f64>() / res.len() as f64).sqrt();
    let rmax = res.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let spread = res.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - res.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(DecayFit {
        alpha_hat: -lin[1],
        slope: lin[1],
        intercept: lin[0],
        quadratic: quad[2],
        curvature: quad[2].abs() > cfg.curvature_threshold,
        residual_rms: rms,
        residual_max: rmax,
        residual_spread: spread,
        u_min,
        u_max,
        points: grid.len(),
    })
}

/// One grid point of a bound check, all in log scale.
#[derive(Debug, Clone, Serialize)]
pub struct BoundRow {
    pub u: f64,
    #[serde(serialize_with = "ser_ext")]
    pub log_abs_phi: f64,
    #[serde(serialize_with = "ser_ext")]
    pub lower_bound: f64,
    #[serde(serialize_with = "ser_ext")]
    pub upper_bound: f64,
    #[serde(serialize_with = "ser_ext")]
    pub sharp_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    #[serde(serialize_with = "ser_ext")]
    pub alpha_analytic: f64,
    #[serde(serialize_with = "ser_ext")]
    pub alpha_fitted: f64,
    pub epsilon_used: f64,
    pub lower_ok: bool,
    #[serde(serialize_with = "ser_ext")]
    pub lower_margin: f64,
    pub upper_ok: bool,
    #[serde(serialize_with = "ser_ext")]
    pub upper_margin: f64,
    #[serde(serialize_with = "ser_ext")]
    pub log_condition_value: f64,
    /// `ln C₁`, `ln C₂`.
    #[serde(serialize_with = "ser_ext_vec")]
    pub log_constants: Vec<f64>,
    /// `c` in `|φ(u)| ≥ c(1+u)^{-α}`, when the sharp bound applies.
    pub sharp_constant: Option<f64>,
    pub skipped: Option<String>,
    pub rows: Vec<BoundRow>,
}

const MARGIN_TOL: f64 = 1e-9;

/// Two-sided `ε`-bounds with constants fitted on the lower half of `grid`.
pub fn verify_bounds(k: &KFunction, cf: &dyn CharFn, epsilon: f64, grid: &[f64]) -> Result<DecayReport> {
    let la = log_abs_on(cf, grid, Route::LogModulus)?;
    let lc = log_condition(k).unwrap_or(f64::INFINITY);
    let t: Vec<f64> = grid.iter().map(|u| u.ln()).collect();
    let slope = least_squares(&t, &la, 1)[1];
    let base_rows = |lower: f64, upper: f64, sharp: f64| -> Vec<BoundRow> {
        grid.iter()
            .zip(&la)
            .map(|(&u, &l)| BoundRow { u, log_abs_phi: l, lower_bound: lower, upper_bound: upper, sharp_bound: sharp })
            .collect()
    };
    let alpha = match k_right_limit(k) {
        Ok(a) if a.is_finite() => a,
        other => {
            let (alpha, why) = match other {
                Ok(a) => (a, "alpha is infinite".to_string()),
                Err(e) => (f64::NAN, e.to_string()),
            };
            return Ok(DecayReport {
                alpha_analytic: alpha,
                alpha_fitted: -slope,
                epsilon_used: epsilon,
                lower_ok: false,
                lower_margin: f64::NAN,
                upper_ok: false,
                upper_margin: f64::NAN,
                log_condition_value: lc,
                log_constants: vec![],
                sharp_constant: None,
                skipped: Some(why),
                rows: base_rows(f64::NAN, f64::NAN, f64::NAN),
            });
        }
    };
    let half = grid.len() / 2;
    let w: Vec<f64> = grid.iter().map(|u| (1.0 + u).ln()).collect();
    let lo_shift: Vec<f64> = la.iter().zip(&w).map(|(l, w)| l + (alpha + epsilon) * w).collect();
    let up_shift: Vec<f64> = la.iter().zip(&w).map(|(l, w)| l + (alpha - epsilon) * w).collect();
    let min = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ln_c1 = min(&lo_shift[..half]);
    let ln_c2 = max(&up_shift[..half]);
    let lower_margin = min(&lo_shift[half..]) - ln_c1;
    let upper_margin = ln_c2 - max(&up_shift[half..]);
    let sharp = lc.is_finite().then(|| min(&la.iter().zip(&w).map(|(l, w)| l + alpha * w).collect::<Vec<_>>()));
    let rows = grid
        .iter()
        .enumerate()
        .map(|(i, &u)| BoundRow {
            u,
            log_abs_phi: la[i],
            lower_bound: ln_c1 - (alpha + epsilon) * w[i],
            upper_bound: ln_c2 - (alpha - epsilon) * w[i],
            sharp_bound: sharp.map_or(f64::NAN, |c| c - alpha * w[i]),
        })
        .collect();
    Ok(DecayReport {
        alpha_analytic: alpha,
        alpha_fitted: -slope,
        epsilon_used: epsilon,
        lower_ok: lower_margin >= -MARGIN_TOL,
        lower_margin,
        upper_ok: upper_margin >= -MARGIN_TOL,
        upper_margin,
        log_condition_value: lc,
        log_constants: vec![ln_c1, ln_c2],
        sharp_constant: sharp.map(f64::exp),
        skipped: None,
        rows,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditStep {
    pub eps: f64,
    pub bv: Option<f64>,
    pub positive_tv: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionAudit {
    pub ladder: Vec<AuditStep>,
    /// Monotone limit of the positive-part variation, `None` if unbounded.
    pub positive_tv_limit: Option<f64>,
    pub oscillation: bool,
    pub passes: bool,
    pub note: String,
}

const AUDIT_STEPS: i32 = 20;

/// BV on `[ε_j, δ]` with `ε_j = δ 4^{-j}` and the positive-part limit.
pub fn audit_assumption(k: &KFunction) -> AssumptionAudit {
    let mut ladder = Vec::new();
    let mut failure = None;
    for j in 1..=AUDIT_STEPS {
        let eps = k.delta * 0.25f64.powi(j);
        let res = interval_sums(k, eps, k.delta, Wanted::Total, 1e-9)
            .and_then(|s| interval_sums(k, eps, k.delta, Wanted::Positive, 1e-9).map(|p| (s.total, p.positive)));
        match res {
            Ok((bv, pos)) => ladder.push(AuditStep { eps, bv: Some(bv), positive_tv: Some(pos) }),
            Err(e) => {
                ladder.push(AuditStep { eps, bv: None, positive_tv: None });
                failure = Some(format!("eps = {eps:e}: {e}"));
                break;
            }
        }
    }
    let limit_osc = matches!(k_right_limit(k), Err(IddError::Oscillatory(_)));
    let pos: Vec<f64> = ladder.iter().filter_map(|s| s.positive_tv).collect();
    let contracting = failure.is_none() && {
        let n = pos.len();
        let d1 = pos[n - 1] - pos[n - 2];
        let d0 = pos[n - 2] - pos[n - 3];
        d1 <= 1e-8 * pos[n - 1].max(1.0) || d1 <= 0.9 * d0
    };
    let limit = contracting.then(|| *pos.last().unwrap());
    let oscillation = limit_osc || failure.is_some() || !contracting;
    let note = match (&failure, limit_osc) {
        (Some(f), _) => format!("variation unresolved at {f}"),
        (None, true) => "k oscillates at 0".into(),
        (None, false) if !contracting => "positive-part variation growing along the ladder".into(),
        _ => "ok".into(),
    };
    AssumptionAudit { ladder, positive_tv_limit: limit, oscillation, passes: limit.is_some() && !oscillation, note }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Tri {
    Holds,
    Fails,
    Undetermined,
}

#[derive(Debug, Clone, Serialize)]
pub struct Condition {
    pub state: Tri,
    pub evidence: String,
}

impl Condition {
    fn new(state: Tri, evidence: impl Into<String>) -> Self {
        Self { state, evidence: evidence.into() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassificationVerdict {
    pub condition_i: Condition,
    pub condition_ii: Condition,
    pub condition_iii: Condition,
    pub consistent: bool,
    pub audit: AssumptionAudit,
}

/// Knobs for the polynomial-floor test of `classify`.
#[derive(Debug, Clone, Copy)]
pub struct ClassifyConfig {
    pub fit_u_min: f64,
    pub fit_u_max: f64,
    pub slack: f64,
    pub stability: f64,
    pub fit: FitConfig,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self { fit_u_min: 1e2, fit_u_max: 1e5, slack: 0.05, stability: 0.1, fit: FitConfig::default() }
    }
}

fn floor_test(cf: &dyn CharFn, cfg: &ClassifyConfig) -> Result<Condition> {
    let fit = estimate_decay_exponent(cf, cfg.fit_u_min, cfg.fit_u_max, &cfg.fit)?;
    if fit.curvature {
        return Ok(Condition::new(
            Tri::Fails,
            format!("log|phi| curved in log u (quadratic coefficient {:.3e}): faster than any polynomial", fit.quadratic),
        ));
    }
    let a = fit.alpha_hat.max(0.0) + cfg.slack;
    let c_at = |u_max: f64| -> Result<f64> {
        let grid = geometric_grid(1.0, u_max, cfg.fit.points_per_decade);
        let la = log_abs_on(cf, &grid, Route::LogModulus)?;
        Ok(grid.iter().zip(&la).map(|(u, l)| l + a * (1.0 + u).ln()).fold(f64::INFINITY, f64::min))
    };
    let c1 = c_at(cfg.fit_u_max)?;
    let c2 = c_at(2.0 * cfg.fit_u_max)?;
    let change = (c2 - c1).exp() - 1.0;
    if c1 > -700.0 && change.abs() <= cfg.stability {
        Ok(Condition::new(Tri::Holds, format!("alpha_hat = {:.4}; c = {:.4e} at exponent {a:.4}, change {change:+.2e} on doubling", fit.alpha_hat, c1.exp())))
    } else {
        Ok(Condition::new(Tri::Undetermined, format!("floor constant unstable: ln c {c1:.3} -> {c2:.3}")))
    }
}

/// Three-way check of `σ² = 0 ∧ BV`, `σ² = 0 ∧ k(0+) < ∞`, and a polynomial floor.
pub fn classify(t: &LevyTriplet, k: &KFunction, cf: &dyn CharFn, cfg: &ClassifyConfig) -> ClassificationVerdict {
    let audit = audit_assumption(k);
    if !audit.passes {
        let why = format!("assumption audit failed: {}", audit.note);
        let u = || Condition::new(Tri::Undetermined, why.clone());
        return ClassificationVerdict { condition_i: u(), condition_ii: u(), condition_iii: u(), consistent: true, audit };
    }
    let limit = k_right_limit(k);
    let diffusion = t.sigma2 > 0.0;
    let condition_i = if diffusion {
        Condition::new(Tri::Fails, format!("sigma2 = {}", t.sigma2))
    } else {
        match bv_norm(k, 0.0, k.delta) {
            Ok(v) => Condition::new(Tri::Holds, format!("BV norm on [0, delta] = {v:.6}")),
            Err(e) if matches!(limit, Ok(a) if a.is_infinite()) => Condition::new(Tri::Fails, format!("k unbounded at 0: {e}")),
            Err(e) => Condition::new(Tri::Undetermined, e.to_string()),
        }
    };
    let condition_ii = if diffusion {
        Condition::new(Tri::Fails, format!("sigma2 = {}", t.sigma2))
    } else {
        match limit {
            Ok(a) if a.is_finite() => Condition::new(Tri::Holds, format!("k(0+) = {a:.6}")),
            Ok(_) => Condition::new(Tri::Fails, "k(0+) = +inf"),
            Err(e) => Condition::new(Tri::Undetermined, e.to_string()),
        }
    };
    let condition_iii = floor_test(cf, cfg).unwrap_or_else(|e| Condition::new(Tri::Undetermined, e.to_string()));
    let states: Vec<Tri> = [condition_i.state, condition_ii.state, condition_iii.state]
        .into_iter()
        .filter(|s| *s != Tri::Undetermined)
        .collect();
    let consistent = states.windows(2).all(|w| w[0] == w[1]);
    ClassificationVerdict { condition_i, condition_ii, condition_iii, consistent, audit }
}

/// Default decay analysis of a triplet: its k-function at `δ` and evaluator.
pub fn k_of(t: &LevyTriplet) -> Result<KFunction> {
    KFunction::from_triplet(t, DEFAULT_DELTA)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{self, CatalogEntry};
    use crate::levy::{best_evaluator, QuadConfig};
    use std::f64::consts::PI;

    fn kf<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> KFunction {
        KFunction::new(0.5, f, vec![])
    }

    #[test]
    fn right_limits() {
        let k = KFunction::new(0.999, |x| 2.0 * (-x).exp(), vec![]);
        assert!((k_right_limit(&k).unwrap() - 2.0).abs() < 1e-10);
        assert_eq!(k_right_limit(&kf(|x| 2.0 / (PI * x))).unwrap(), f64::INFINITY);
        assert_eq!(k_right_limit(&kf(|_| 0.0)).unwrap(), 0.0);
        assert!(matches!(k_right_limit(&kf(|x| 1.0 + (1.0 / x).sin())), Err(IddError::Oscillatory(_))));
        // sqrt approach to 0 still extrapolates
        assert!(k_right_limit(&kf(|x| x.sqrt())).unwrap().abs() < 1e-6);
    }

    #[test]
    fn bv_examples() {
        let k = KFunction::new(0.999_999_999, |x| 2.0 * (-x).exp(), vec![]);
        let oracle = 2.0 * (1.0 - (-0.999_999_999f64).exp());
        assert!((bv_norm(&k, 0.0, 0.999_999_999).unwrap() - oracle).abs() < 1e-9);
        assert_eq!(bv_norm(&kf(|_| 3.0), 0.0, 0.5).unwrap(), 0.0);
        let step = KFunction::new(0.5, |x| if x >= 0.3 { 3.5 } else { 3.0 }, vec![(0.3, 0.5)]);
        assert!((bv_norm(&step, 0.0, 0.5).unwrap() - 0.5).abs() < 1e-12);
        // non-monotone smooth k: variation 2·max - ends
        let bump = kf(|x| (-(x - 0.25).powi(2) * 40.0).exp());
        let oracle = 2.0 - (-0.0625f64 * 40.0).exp() * 2.0;
        let v = bv_norm(&bump, 0.0, 0.5).unwrap();
        assert!((v - oracle).abs() < 1e-8, "{v} {oracle}");
        assert!(matches!(bv_norm(&kf(|x| 1.0 / x), 0.0, 0.5), Err(IddError::NonConvergent(_))));
    }

    #[test]
    fn log_condition_examples() {
        assert_eq!(log_condition(&kf(|x| 2.0 * (-x).exp())).unwrap(), 0.0);
        let step = KFunction::new(0.5, |x| if x >= 0.1 { 1.5 } else { 1.0 }, vec![(0.1, 0.5)]);
        assert!((log_condition(&step).unwrap() - 0.5 * 10f64.ln()).abs() < 1e-12);
        let lin = log_condition(&kf(|x| x)).unwrap();
        assert!((lin - 0.5 * (1.0 + 2f64.ln())).abs() < 1e-8, "{lin}");
    }

    #[test]
    fn audits() {
        let a = audit_assumption(&kf(|x| 2.0 * (-x).exp()));
        assert!(a.passes && a.positive_tv_limit == Some(0.0));
        let c = audit_assumption(&kf(|x| 2.0 / (PI * x)));
        assert!(c.passes && !c.oscillation && c.positive_tv_limit == Some(0.0));
        let o = audit_assumption(&kf(|x| 1.0 + (1.0 / x).sin()));
        assert!(o.oscillation && !o.passes);
        let bvs: Vec<f64> = o.ladder.iter().filter_map(|s| s.bv).collect();
        assert!(bvs.windows(2).all(|w| w[1] > w[0]));
        assert!(bvs.last().unwrap() / bvs[0] > 10.0);
    }

    #[test]
    fn gamma_fit_and_bounds() {
        let e = CatalogEntry::gamma(2.0, 1.0);
        let cf = best_evaluator(&e.triplet, QuadConfig::default());
        let fit = estimate_decay_exponent(cf.as_ref(), 1e2, 1e4, &FitConfig::default()).unwrap();
        assert!((fit.alpha_hat - 2.0).abs() < 0.01 && !fit.curvature);
        let k = k_of(&e.triplet).unwrap();
        let r = verify_bounds(&k, cf.as_ref(), 0.1, &geometric_grid(1.0, 1e5, 50)).unwrap();
        assert!(r.lower_ok && r.upper_ok, "{r:?}");
        assert_eq!(r.log_condition_value, 0.0);
        assert!(r.sharp_constant.unwrap() > 0.0);
    }

    #[test]
    fn gaussian_and_cauchy() {
        let g = CatalogEntry::gaussian(1.0);
        let cf = best_evaluator(&g.triplet, QuadConfig::default());
        let fit = estimate_decay_exponent(cf.as_ref(), 10.0, 1e3, &FitConfig::default()).unwrap();
        assert!(fit.curvature);
        let r = verify_bounds(&k_of(&g.triplet).unwrap(), cf.as_ref(), 0.1, &geometric_grid(1.0, 1e3, 50)).unwrap();
        assert!(!r.lower_ok && r.lower_margin < -1e3);
        let c = CatalogEntry::cauchy();
        let cf = best_evaluator(&c.triplet, QuadConfig::default());
        let r = verify_bounds(&k_of(&c.triplet).unwrap(), cf.as_ref(), 0.1, &geometric_grid(1.0, 1e3, 50)).unwrap();
        assert_eq!(r.alpha_analytic, f64::INFINITY);
        assert!(r.skipped.is_some());
    }

    #[test]
    fn compound_poisson_slope() {
        let e = CatalogEntry::compound_poisson(2.0, 1.0);
        let cf = best_evaluator(&e.triplet, QuadConfig::default());
        let cfg = FitConfig { points_per_decade: 1000, ..FitConfig::default() };
        let fit = estimate_decay_exponent(cf.as_ref(), 1e2, 1e4, &cfg).unwrap();
        assert!(fit.alpha_hat.abs() < 0.01, "{fit:?}");
        assert!(fit.residual_spread > 1.5);
    }

    #[test]
    fn modulus_route_underflows() {
        let g = CatalogEntry::gaussian(1.0);
        let cf = best_evaluator(&g.triplet, QuadConfig::default());
        let cfg = FitConfig { route: Route::Modulus, ..FitConfig::default() };
        assert!(matches!(estimate_decay_exponent(cf.as_ref(), 10.0, 1e4, &cfg), Err(IddError::CfUnderflow(_))));
    }

    #[test]
    fn classify_examples() {
        let cfg = ClassifyConfig::default();
        for (e, want) in [
            (CatalogEntry::gamma(2.0, 1.0), Tri::Holds),
            (CatalogEntry::gaussian(1.0), Tri::Fails),
        ] {
            let cf = best_evaluator(&e.triplet, QuadConfig::default());
            let v = classify(&e.triplet, &k_of(&e.triplet).unwrap(), cf.as_ref(), &cfg);
            assert!(v.consistent);
            for c in [&v.condition_i, &v.condition_ii, &v.condition_iii] {
                assert_eq!(c.state, want, "{}: {c:?}", e.name);
            }
        }
        let c = CatalogEntry::cauchy();
        let cf = best_evaluator(&c.triplet, QuadConfig::default());
        let v = classify(&c.triplet, &k_of(&c.triplet).unwrap(), cf.as_ref(), &cfg);
        assert_eq!(v.condition_ii.state, Tri::Fails);
        assert_eq!(v.condition_iii.state, Tri::Fails);
        assert!(v.consistent);
    }

    #[test]
    fn k_from_triplet_declares_step() {
        let e = catalog::by_name("k_step").unwrap();
        let k = k_of(&e.triplet).unwrap();
        assert_eq!(k.declared_jumps.len(), 1);
        let (y, h) = k.declared_jumps[0];
        assert_eq!(y, 0.3);
        assert!((h - 0.5 * (-0.3f64).exp()).abs() < 1e-9);
        assert!((k_right_limit(&k).unwrap() - 1.5).abs() < 1e-9);
    }
}
