//! Densities from characteristic functions and their smoothness.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::decay::{self, DecayFit, FitConfig};
use crate::error::{IddError, Result};
use crate::grid::{self, GridFunction, Spectrum};
use crate::levy::CharFn;

pub const INV_TOL: f64 = 1e-6;
pub const TAIL_TOL: f64 = 1e-8;
/// Decay exponents within this distance of an integer boundary are not decided.
pub const GUARD_BAND: f64 = 0.1;
pub const ORDER_CAP: u32 = 16;

#[derive(Debug, Clone)]
pub struct Inversion {
    pub density: GridFunction,
    pub spectrum: Spectrum,
    pub fit: DecayFit,
    /// Estimated sup-norm contribution of `|u| > u_max`.
    pub tail_estimate: f64,
    pub mass: f64,
    pub min_value: f64,
}

impl Inversion {
    pub fn tail_ok(&self) -> bool {
        self.tail_estimate <= TAIL_TOL
    }

    pub fn negativity_ok(&self) -> bool {
        self.min_value >= -INV_TOL
    }

    /// Negative values clipped to zero; the raw density is left untouched.
    pub fn sanitized(&self) -> Vec<f64> {
        self.density.values.iter().map(|v| v.re.max(0.0)).collect()
    }
}

fn integrability_fit(cf: &dyn CharFn) -> Result<DecayFit> {
    decay::estimate_decay_exponent(cf, 10.0, 1e4, &FitConfig::default())
}

/// Trapezoid/FFT inversion on `n_points` samples of `[-u_max, u_max)`,
/// giving a density grid of width `π n_points / u_max` around `center`.
pub fn invert_cf(cf: &dyn CharFn, u_max: f64, n_points: usize, center: f64) -> Result<Inversion> {
    if !n_points.is_power_of_two() || n_points < 2 {
        return Err(IddError::Config(format!("n_points = {n_points} is not a power of two")));
    }
    let fit = integrability_fit(cf)?;
    if !fit.curvature && fit.alpha_hat <= 1.0 + 0.5 * GUARD_BAND {
        return Err(IddError::NonIntegrableCf(format!(
            "|phi| decays like u^-{:.3}: integral of |phi| diverges",
            fit.alpha_hat
        )));
    }
    let width = std::f64::consts::PI * n_points as f64 / u_max;
    let step = width / n_points as f64;
    let origin = center - 0.5 * width;
    let du = grid::dual_step(step, n_points);
    let half = n_points / 2;
    // u_j ≥ 0 and u = -u_max; the rest by Hermitian symmetry
    let pos: Vec<Complex64> = (0..=half)
        .into_par_iter()
        .map(|j| cf.cf(j as f64 * du))
        .collect::<Result<_>>()?;
    let mut values = vec![Complex64::new(0.0, 0.0); n_points];
    for j in 0..n_points {
        let m = j as isize - half as isize;
        values[j] = if m >= 0 { pos[m as usize] } else if m == -(half as isize) { pos[half].conj() } else { pos[(-m) as usize].conj() };
    }
    let spectrum = Spectrum { origin, du, values };
    let mut density = grid::inverse(&spectrum);
    let mass = density.integral().re;
    for v in density.values.iter_mut() {
        v.im = 0.0;
    }
    let min_value = density.values.iter().fold(f64::INFINITY, |m, v| m.min(v.re));
    let phi_edge = cf.log_abs(u_max)?.exp();
    let tail_estimate = if fit.curvature {
        phi_edge * u_max / std::f64::consts::PI
    } else {
        phi_edge * u_max / (std::f64::consts::PI * (fit.alpha_hat - 1.0))
    };
    Ok(Inversion { density, spectrum, fit, tail_estimate, mass, min_value })
}

/// Per-order decision for `∫ |φ(u)| |u|^n du < ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Moment {
    Finite,
    Infinite,
    Undetermined,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralOrder {
    pub alpha_hat: f64,
    /// Largest `n` certified finite; `None` if even `n = 0` is not.
    pub n_max: Option<u32>,
    /// Every order up to the cap is finite (super-polynomial decay).
    pub all_tested: bool,
    pub orders: Vec<(u32, Moment)>,
}

/// Decides finiteness of `∫ |φ| |u|^n` from the tail exponent, `n < α - 1`.
pub fn spectral_smoothness_order(cf: &dyn CharFn, alpha_hint: Option<f64>) -> Result<SpectralOrder> {
    let (alpha, curved) = match alpha_hint {
        Some(a) => (a, a.is_infinite()),
        None => {
            let fit = decay::estimate_decay_exponent(cf, 1e2, 1e5, &FitConfig::default())?;
            (fit.alpha_hat, fit.curvature)
        }
    };
    let mut orders = Vec::new();
    for n in 0..=ORDER_CAP {
        let m = if curved {
            Moment::Finite
        } else {
            let edge = alpha - 1.0;
            if (n as f64) < edge - GUARD_BAND {
                Moment::Finite
            } else if (n as f64) > edge + GUARD_BAND {
                Moment::Infinite
            } else {
                Moment::Undetermined
            }
        };
        orders.push((n, m));
    }
    let n_max = orders.iter().take_while(|o| o.1 == Moment::Finite).last().map(|o| o.0);
    Ok(SpectralOrder { alpha_hat: if curved { f64::INFINITY } else { alpha }, n_max, all_tested: curved, orders })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Probe {
    Bounded,
    Divergent,
    Undetermined,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeRecord {
    pub n: u32,
    /// Difference steps, coarsest first.
    pub steps: Vec<f64>,
    /// `sup |δ_h^n f| / h^n` at each step.
    pub sup_norms: Vec<f64>,
    /// `sup |D_{2h} - D_h|` for consecutive steps.
    pub discrepancies: Vec<f64>,
    pub contraction: f64,
    /// Where the finest discrepancy peaks.
    pub worst_x: f64,
    pub verdict: Probe,
    pub divergent: bool,
}

fn binomial(n: u32, k: u32) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * (n + 1 - i) as f64 / i as f64)
}

// centred n-th difference quotient with step m·step at index i
fn difference(v: &[f64], i: usize, n: u32, m: usize, step: f64) -> f64 {
    let h = m as f64 * step;
    let mut acc = 0.0;
    for k in 0..=n {
        // offset (n/2 - k)·m samples; m is even so this is integral
        let off = (n as isize * m as isize) / 2 - k as isize * m as isize;
        let c = binomial(n, k) * if k % 2 == 0 { 1.0 } else { -1.0 };
        acc += c * v[(i as isize + off) as usize];
    }
    acc / h.powi(n as i32)
}

/// `n`-th difference quotients at steps `8·dx`, `4·dx` on `coarse` and
/// `4·dx/2` on `fine` (same origin, half the step), compared at the coarse
/// nodes. Discrepancies between consecutive steps contract for `f ∈ Cⁿ`
/// and stall or grow when the `n`-th derivative jumps or blows up.
pub fn spatial_smoothness_probe(coarse: &GridFunction, fine: &GridFunction, n: u32) -> Result<ProbeRecord> {
    if fine.len() != 2 * coarse.len() || (fine.origin - coarse.origin).abs() > 1e-12 * coarse.step || (2.0 * fine.step - coarse.step).abs() > 1e-12 * coarse.step {
        return Err(IddError::Config("fine grid must halve the coarse step on the same origin".into()));
    }
    let vc = coarse.real();
    let vf = fine.real();
    let reach = (n as usize * 8).div_ceil(2) + 1;
    let idx: Vec<usize> = (reach..coarse.len() - reach).collect();
    let d0: Vec<f64> = idx.iter().map(|&i| difference(&vc, i, n, 8, coarse.step)).collect();
    let d1: Vec<f64> = idx.iter().map(|&i| difference(&vc, i, n, 4, coarse.step)).collect();
    let d2: Vec<f64> = idx.iter().map(|&i| difference(&vf, 2 * i, n, 4, fine.step)).collect();
    let sup = |d: &[f64]| d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let gap = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0f64, f64::max);
    let e1 = gap(&d0, &d1);
    let e2 = gap(&d1, &d2);
    let worst = d1.iter().zip(&d2).enumerate().max_by(|a, b| (a.1 .0 - a.1 .1).abs().total_cmp(&(b.1 .0 - b.1 .1).abs())).map(|(k, _)| k).unwrap_or(0);
    let scale = sup(&d2).max(1e-300);
    let floor = 1e-9 * (1.0 + scale);
    let contraction = if e1 > 0.0 { e2 / e1 } else { 0.0 };
    let verdict = if e2 <= floor || contraction <= 0.85 {
        Probe::Bounded
    } else if contraction >= 0.95 {
        Probe::Divergent
    } else {
        Probe::Undetermined
    };
    Ok(ProbeRecord {
        n,
        steps: vec![8.0 * coarse.step, 4.0 * coarse.step, 4.0 * fine.step],
        sup_norms: vec![sup(&d0), sup(&d1), scale],
        discrepancies: vec![e1, e2],
        contraction,
        worst_x: coarse.x(idx[worst]),
        verdict,
        divergent: verdict == Probe::Divergent,
    })
}
