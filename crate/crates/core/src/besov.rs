//! Littlewood–Paley blocks, discrete Besov norms and multiplier ratios for
//! `f ↦ F^{-1}[F f / φ]`.
//!
//! Block norms are carried as logarithms so that exponentially growing
//! multipliers can be compared without overflow.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::deconv::smooth_step;
use crate::error::{IddError, Result};
use crate::grid::{self, GridFunction, Spectrum};
use crate::levy::CharFn;

pub const PARTITION_TOL: f64 = 1e-10;
/// Default loss added to the decay exponent in multiplier ratios.
pub const LOSS_SLACK: f64 = 0.05;
const BAND_CUT: f64 = 1e-13;

/// `χ = 1` on `|u| ≤ 1`, `0` on `|u| ≥ 3/2`.
fn chi(u: f64) -> f64 {
    1.0 - smooth_step(2.0 * (u.abs() - 1.0))
}

/// `ψ_0 = χ`, `ψ_j = χ(·/2^j) - χ(·/2^{j-1})` supported in `2^{j-1} ≤ |u| ≤ 3·2^{j-1}`
/// and equal to 1 on `3·2^{j-2} ≤ |u| ≤ 2^j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DyadicPartition {
    pub j_max: usize,
}

impl DyadicPartition {
    pub fn new(j_max: usize) -> Self {
        Self { j_max }
    }

    /// Largest partition whose ceiling `2^{j_max}` the grid resolves.
    pub fn for_grid(f: &GridFunction) -> Self {
        let u_max = grid::dual_step(f.step, f.len()) * (f.len() / 2) as f64;
        Self { j_max: u_max.log2().floor().max(0.0) as usize }
    }

    pub fn ceiling(&self) -> f64 {
        f64::powi(2.0, self.j_max as i32)
    }

    pub fn psi(&self, j: usize, u: f64) -> f64 {
        if j == 0 {
            return chi(u);
        }
        let s = f64::powi(2.0, j as i32);
        chi(u / s) - chi(2.0 * u / s)
    }

    /// Symbol values of `ψ_j` on the frequencies of `s`.
    pub fn symbol(&self, j: usize, s: &Spectrum) -> Vec<f64> {
        (0..s.len()).map(|i| self.psi(j, s.u(i))).collect()
    }

    fn check(&self, s: &Spectrum) -> Result<()> {
        if s.u_max() < self.ceiling() {
            return Err(IddError::Config(format!("grid frequency limit {} below partition ceiling {}", s.u_max(), self.ceiling())));
        }
        let total: f64 = s.values.iter().map(|v| v.norm_sqr()).sum();
        let outside: f64 = (0..s.len()).filter(|&i| s.u(i).abs() > self.ceiling()).map(|i| s.values[i].norm_sqr()).sum();
        if total > 0.0 && outside > PARTITION_TOL * PARTITION_TOL * total {
            return Err(IddError::SpectrumClipped((outside / total).sqrt()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BesovParams {
    pub s: f64,
    pub p: f64,
    pub q: f64,
}

impl BesovParams {
    pub fn new(s: f64, p: f64, q: f64) -> Result<Self> {
        if !(p >= 1.0 && q >= 1.0) {
            return Err(IddError::Config(format!("Besov p = {p}, q = {q} must be at least 1")));
        }
        Ok(Self { s, p, q })
    }

    /// `{-1, 0, 1} × {1, 2, ∞} × {1, 2, ∞}`.
    pub fn standard_grid() -> Vec<Self> {
        let mut out = Vec::new();
        for s in [-1.0, 0.0, 1.0] {
            for p in [1.0, 2.0, f64::INFINITY] {
                for q in [1.0, 2.0, f64::INFINITY] {
                    out.push(Self { s, p, q });
                }
            }
        }
        out
    }
}

/// `Δ_j f = F^{-1}[ψ_j F f]` for `j = 0..=j_max`.
pub fn lp_blocks(f: &GridFunction, part: &DyadicPartition) -> Result<Vec<GridFunction>> {
    let s = grid::forward(f);
    part.check(&s)?;
    Ok((0..=part.j_max)
        .into_par_iter()
        .map(|j| {
            let psi = part.symbol(j, &s);
            let values = s.values.iter().zip(&psi).map(|(v, w)| v * w).collect();
            grid::inverse(&Spectrum { origin: s.origin, du: s.du, values })
        })
        .collect())
}

fn log_lp(f: &GridFunction, p: f64) -> f64 {
    let n = f.lp_norm(p);
    if n > 0.0 { n.ln() } else { f64::NEG_INFINITY }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `log ‖(2^{js} ‖Δ_j f‖_p)_j‖_{ℓ^q}` from per-block `log ‖Δ_j f‖_p`.
pub fn combine_log(block_logs: &[f64], s: f64, q: f64) -> f64 {
    let w: Vec<f64> = block_logs.iter().enumerate().map(|(j, b)| b + j as f64 * s * std::f64::consts::LN_2).collect();
    if q.is_infinite() {
        return w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    }
    let scaled: Vec<f64> = w.iter().map(|x| q * x).collect();
    log_sum_exp(&scaled) / q
}

const PS: [f64; 3] = [1.0, 2.0, f64::INFINITY];

fn p_index(p: f64) -> Option<usize> {
    PS.iter().position(|&x| x == p)
}

/// Per-block `log ‖Δ_j (F^{-1}[m · F f])‖_p` for `p ∈ {1, 2, ∞}`, with the
/// multiplier given by its logarithm `log m(u)`.
fn block_log_norms(s: &Spectrum, part: &DyadicPartition, log_mult: Option<&(dyn Fn(f64) -> Result<Complex64> + Sync)>) -> Result<Vec<[f64; 3]>> {
    part.check(s)?;
    let lm: Vec<Complex64> = match log_mult {
        None => vec![Complex64::new(0.0, 0.0); s.len()],
        Some(g) => (0..s.len())
            .into_par_iter()
            .map(|i| {
                let u = s.u(i);
                if s.values[i] == Complex64::new(0.0, 0.0) || u.abs() > 2.0 * part.ceiling() {
                    return Ok(Complex64::new(0.0, 0.0));
                }
                let v = g(u)?;
                if !v.re.is_finite() {
                    return Err(IddError::UnderflowGuard(u));
                }
                Ok(v)
            })
            .collect::<Result<_>>()?,
    };
    (0..=part.j_max)
        .into_par_iter()
        .map(|j| {
            let psi = part.symbol(j, s);
            // log of each spectral value, shifted so the largest is 0
            let logs: Vec<Option<Complex64>> = (0..s.len())
                .map(|i| {
                    let v = s.values[i] * psi[i];
                    if v == Complex64::new(0.0, 0.0) { None } else { Some(v.ln() + lm[i]) }
                })
                .collect();
            let shift = logs.iter().flatten().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
            if shift == f64::NEG_INFINITY {
                return Ok([f64::NEG_INFINITY; 3]);
            }
            let values = logs.iter().map(|l| l.map_or(Complex64::new(0.0, 0.0), |l| (l - shift).exp())).collect();
            let b = grid::inverse(&Spectrum { origin: s.origin, du: s.du, values });
            Ok([log_lp(&b, 1.0) + shift, log_lp(&b, 2.0) + shift, log_lp(&b, f64::INFINITY) + shift])
        })
        .collect()
}

pub fn besov_log_norm(f: &GridFunction, params: &BesovParams, part: &DyadicPartition) -> Result<f64> {
    let s = grid::forward(f);
    let logs: Vec<f64> = match p_index(params.p) {
        Some(k) => block_log_norms(&s, part, None)?.iter().map(|b| b[k]).collect(),
        None => lp_blocks(f, part)?.iter().map(|b| log_lp(b, params.p)).collect(),
    };
    Ok(combine_log(&logs, params.s, params.q))
}

pub fn besov_norm(f: &GridFunction, params: &BesovParams, part: &DyadicPartition) -> Result<f64> {
    besov_log_norm(f, params, part).map(f64::exp)
}

/// `g_j(x) = cos(2^j x) e^{-x²/2}` with its spectrum cut to `|u ∓ 2^j| ≤ 8`
/// (smooth taper from 6), so every multiplier acts on a band-limited input.
pub fn test_ladder(j_max: usize, width: f64, n: usize) -> Result<Vec<GridFunction>> {
    let template = GridFunction::from_fn(0.0, width, n, |_| 0.0)?;
    Ok((0..=j_max)
        .map(|j| {
            let c = f64::powi(2.0, j as i32);
            let bump = |t: f64| (-(t * t) / 2.0).exp() * (1.0 - smooth_step((t.abs() - 6.0) / 2.0));
            let amp = 0.5 * (2.0 * std::f64::consts::PI).sqrt();
            let s = Spectrum::from_fn(&template, |u| Complex64::new(amp * (bump(u - c) + bump(u + c)), 0.0));
            let mut g = grid::inverse(&s);
            for v in g.values.iter_mut() {
                v.im = 0.0;
            }
            g
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioRow {
    pub s: f64,
    pub p: f64,
    pub q: f64,
    /// Ladder level of the test function.
    pub j: usize,
    #[serde(serialize_with = "crate::decay::ser_ext")]
    pub ratio: f64,
    pub log_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiplierReport {
    /// Loss exponent used: `‖T f‖_{B^s} / ‖f‖_{B^{s + loss}}`.
    pub loss: f64,
    pub rows: Vec<RatioRow>,
}

impl MultiplierReport {
    fn rows_for<'a>(&'a self, p: &'a BesovParams) -> impl Iterator<Item = &'a RatioRow> + 'a {
        self.rows.iter().filter(move |r| r.s == p.s && r.p == p.p && r.q == p.q)
    }

    /// `log sup_{j ≤ j_top} ratio` for one parameter triple.
    pub fn log_sup(&self, params: &BesovParams, j_top: usize) -> f64 {
        self.rows_for(params).filter(|r| r.j <= j_top).map(|r| r.log_ratio).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `log ratio_j` along the ladder.
    pub fn log_trend(&self, params: &BesovParams) -> Vec<(usize, f64)> {
        self.rows_for(params).map(|r| (r.j, r.log_ratio)).collect()
    }

    /// Longest run of consecutive levels where the ratio grows by at least `factor`.
    pub fn longest_growth_run(&self, params: &BesovParams, factor: f64) -> usize {
        let t = self.log_trend(params);
        let (mut best, mut run) = (0, 0);
        for w in t.windows(2) {
            if w[1].1 - w[0].1 >= factor.ln() {
                run += 1;
                best = best.max(run);
            } else {
                run = 0;
            }
        }
        best
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,p,q,j,ratio,log_ratio\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{},{:.12e},{:.12e}\n", r.s, fmt_pq(r.p), fmt_pq(r.q), r.j, r.ratio, r.log_ratio));
        }
        out
    }
}

fn fmt_pq(p: f64) -> String {
    if p.is_infinite() { "inf".into() } else { format!("{p}") }
}

/// Drops spectral roundoff below `BAND_CUT` of the peak, which a growing
/// multiplier would otherwise amplify.
fn band_limited(mut s: Spectrum) -> Spectrum {
    let peak = s.values.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    for v in s.values.iter_mut() {
        if v.norm() <= BAND_CUT * peak {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    s
}

/// Ratios `‖F^{-1}[F f/φ]‖_{B^s_{p,q}} / ‖f‖_{B^{s+loss}_{p,q}}` for every
/// test function and parameter triple; `p` must be one of `1, 2, ∞`.
pub fn multiplier_ratio(noise: &dyn CharFn, loss: f64, testset: &[GridFunction], params_grid: &[BesovParams], part: &DyadicPartition) -> Result<MultiplierReport> {
    if let Some(p) = params_grid.iter().find(|p| p_index(p.p).is_none()) {
        return Err(IddError::Config(format!("multiplier ratios support p in {{1, 2, inf}}, got {}", p.p)));
    }
    let neg_exponent = |u: f64| noise.exponent(u).map(|e| -e);
    let mut rows = Vec::new();
    for (j, f) in testset.iter().enumerate() {
        let s = band_limited(grid::forward(f));
        let plain = block_log_norms(&s, part, None)?;
        let mapped = block_log_norms(&s, part, Some(&neg_exponent))?;
        for pr in params_grid {
            let k = p_index(pr.p).expect("checked");
            let num = combine_log(&mapped.iter().map(|b| b[k]).collect::<Vec<_>>(), pr.s, pr.q);
            let den = combine_log(&plain.iter().map(|b| b[k]).collect::<Vec<_>>(), pr.s + loss, pr.q);
            let lr = num - den;
            rows.push(RatioRow { s: pr.s, p: pr.p, q: pr.q, j, ratio: lr.exp(), log_ratio: lr });
        }
    }
    Ok(MultiplierReport { loss, rows })
}
