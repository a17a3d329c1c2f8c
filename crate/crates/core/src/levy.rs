//! Lévy triplets and their characteristic functions.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma as gamma_fn;

use crate::error::{IddError, Result};
use crate::quad::{self, Oscillatory, QuadTol};

/// Absolutely continuous jump families, parametrised by their densities on
/// the positive and negative half-lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum Family {
    /// `a e^{-λx}/x` on `(0, ∞)`.
    Gamma { a: f64, lambda: f64 },
    /// Gamma densities on both half-lines.
    BilateralGamma { a_plus: f64, lambda_plus: f64, a_minus: f64, lambda_minus: f64 },
    /// Symmetric `c |x|^{-1-β}`, `0 < β < 2`.
    Stable { beta: f64, c: f64 },
    /// One-sided `c e^{-λx} x^{-1-β}`, `-1 < β < 1`, `β ≠ 0`.
    TemperedStable { beta: f64, c: f64, lambda: f64 },
    /// One-sided `(a + h·1{x ≥ y0}) e^{-λx}/x`: a k-function with a jump.
    KStep { a: f64, h: f64, y0: f64, lambda: f64 },
    /// One-sided `(1 + amp·sin(1/x)) e^{-λx}/x`: oscillates at zero.
    KOscillating { amp: f64, lambda: f64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Gamma { .. } => "gamma",
            Family::BilateralGamma { .. } => "bilateral_gamma",
            Family::Stable { .. } => "stable",
            Family::TemperedStable { .. } => "tempered_stable",
            Family::KStep { .. } => "k_step",
            Family::KOscillating { .. } => "k_oscillating",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(IddError::InvalidMeasure(format!("{}: {m}", self.name())));
        match *self {
            Family::Gamma { a, lambda } if !(a > 0.0 && lambda > 0.0) => bad("need a > 0, lambda > 0"),
            Family::BilateralGamma { a_plus, lambda_plus, a_minus, lambda_minus }
                if !(a_plus >= 0.0 && a_minus >= 0.0 && lambda_plus > 0.0 && lambda_minus > 0.0) =>
            {
                bad("need a± ≥ 0, λ± > 0")
            }
            Family::Stable { beta, c } if !(beta > 0.0 && beta < 2.0 && c > 0.0) => bad("need 0 < beta < 2, c > 0"),
            Family::TemperedStable { beta, c, lambda }
                if !(beta > -1.0 && beta < 1.0 && beta != 0.0 && c > 0.0 && lambda > 0.0) =>
            {
                bad("need -1 < beta < 1, beta != 0, c > 0, lambda > 0")
            }
            Family::KStep { a, h, y0, lambda } if !(a >= 0.0 && a + h >= 0.0 && y0 > 0.0 && lambda > 0.0) => {
                bad("need a ≥ 0, a + h ≥ 0, y0 > 0, lambda > 0")
            }
            Family::KOscillating { amp, lambda } if !((0.0..=1.0).contains(&amp) && lambda > 0.0) => {
                bad("need 0 ≤ amp ≤ 1, lambda > 0")
            }
            _ => Ok(()),
        }
    }

    /// Density of `ν` at `x > 0`.
    pub fn pos(&self, x: f64) -> f64 {
        match *self {
            Family::Gamma { a, lambda } => a * (-lambda * x).exp() / x,
            Family::BilateralGamma { a_plus, lambda_plus, .. } => a_plus * (-lambda_plus * x).exp() / x,
            Family::Stable { beta, c } => c * x.powf(-1.0 - beta),
            Family::TemperedStable { beta, c, lambda } => c * (-lambda * x).exp() * x.powf(-1.0 - beta),
            Family::KStep { a, h, y0, lambda } => {
                let k = if x >= y0 { a + h } else { a };
                k * (-lambda * x).exp() / x
            }
            Family::KOscillating { amp, lambda } => (1.0 + amp * (1.0 / x).sin()) * (-lambda * x).exp() / x,
        }
    }

    /// Density of `ν` at `-x` for `x > 0`.
    pub fn neg(&self, x: f64) -> f64 {
        match *self {
            Family::BilateralGamma { a_minus, lambda_minus, .. } => a_minus * (-lambda_minus * x).exp() / x,
            Family::Stable { beta, c } => c * x.powf(-1.0 - beta),
            _ => 0.0,
        }
    }

    pub fn has_neg(&self) -> bool {
        matches!(self, Family::BilateralGamma { .. } | Family::Stable { .. })
    }

    pub fn is_symmetric(&self) -> bool {
        matches!(self, Family::Stable { .. })
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Family::KStep { y0, .. } => vec![y0],
            _ => vec![],
        }
    }

    /// Upper bound for `ν_s((x, ∞))`.
    pub fn tail_bound(&self, x: f64) -> f64 {
        match *self {
            Family::Gamma { a, lambda } => a * (-lambda * x).exp() / (lambda * x),
            Family::BilateralGamma { a_plus, lambda_plus, a_minus, lambda_minus } => {
                a_plus * (-lambda_plus * x).exp() / (lambda_plus * x) + a_minus * (-lambda_minus * x).exp() / (lambda_minus * x)
            }
            Family::Stable { beta, c } => 2.0 * c * x.powf(-beta) / beta,
            Family::TemperedStable { beta, c, lambda } => c * (-lambda * x).exp() * x.powf(-1.0 - beta) / lambda,
            Family::KStep { a, h, lambda, .. } => (a + h.max(0.0)) * (-lambda * x).exp() / (lambda * x),
            Family::KOscillating { amp, lambda } => (1.0 + amp) * (-lambda * x).exp() / (lambda * x),
        }
    }

    /// `∫(e^{iux} - 1) ν(du)` in closed form where the family has one and
    /// the integral converges; symmetric stable returns the real part only
    /// (its compensated imaginary part vanishes).
    pub fn closed_form_fv(&self, u: f64) -> Option<Complex64> {
        let iu = Complex64::new(0.0, u);
        match *self {
            Family::Gamma { a, lambda } => Some(-a * (Complex64::new(1.0, 0.0) - iu / lambda).ln()),
            Family::BilateralGamma { a_plus, lambda_plus, a_minus, lambda_minus } => Some(
                -a_plus * (Complex64::new(1.0, 0.0) - iu / lambda_plus).ln()
                    - a_minus * (Complex64::new(1.0, 0.0) + iu / lambda_minus).ln(),
            ),
            Family::Stable { beta, c } => {
                let k = if (beta - 1.0).abs() < 1e-15 {
                    PI / 2.0
                } else {
                    gamma_fn(1.0 - beta) * (PI * beta / 2.0).cos() / beta
                };
                Some(Complex64::new(-2.0 * c * k * u.abs().powf(beta), 0.0))
            }
            Family::TemperedStable { beta, c, lambda } => {
                let z = Complex64::new(lambda, -u);
                Some(c * gamma_fn(-beta) * (z.powf(beta) - lambda.powf(beta)))
            }
            Family::KStep { .. } | Family::KOscillating { .. } => None,
        }
    }

    /// `∫_{(0,1]} x (ν(dx) - ν(-dx))`, analytic where cheap.
    fn compensator_moment(&self) -> Option<f64> {
        match *self {
            Family::Gamma { a, lambda } => Some(a * (1.0 - (-lambda).exp()) / lambda),
            Family::BilateralGamma { a_plus, lambda_plus, a_minus, lambda_minus } => Some(
                a_plus * (1.0 - (-lambda_plus).exp()) / lambda_plus - a_minus * (1.0 - (-lambda_minus).exp()) / lambda_minus,
            ),
            Family::Stable { .. } => Some(0.0),
            _ => None,
        }
    }

    pub fn params(&self) -> BTreeMap<String, f64> {
        let v = serde_json::to_value(self).expect("family serialises");
        v.get("params")
            .and_then(|p| p.as_object())
            .map(|m| m.iter().filter_map(|(k, x)| x.as_f64().map(|f| (k.clone(), f))).collect())
            .unwrap_or_default()
    }
}

/// A family restricted to `lo < |x| ≤ hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcPart {
    pub family: Family,
    pub window: Option<(f64, f64)>,
}

impl AcPart {
    pub fn new(family: Family) -> Self {
        Self { family, window: None }
    }

    fn inside(&self, x: f64) -> bool {
        match self.window {
            Some((lo, hi)) => x > lo && x <= hi,
            None => true,
        }
    }

    pub fn pos(&self, x: f64) -> f64 {
        if self.inside(x) {
            self.family.pos(x)
        } else {
            0.0
        }
    }

    pub fn neg(&self, x: f64) -> f64 {
        if self.inside(x) {
            self.family.neg(x)
        } else {
            0.0
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.family.breakpoints();
        if let Some((lo, hi)) = self.window {
            if lo > 0.0 {
                b.push(lo);
            }
            if hi.is_finite() {
                b.push(hi);
            }
        }
        b
    }

    /// Integration range `(lo, hi]` on the half-line, with `hi` finite.
    fn range(&self, tail_tol: f64) -> Result<(f64, f64)> {
        let (lo, hi) = self.window.unwrap_or((0.0, f64::INFINITY));
        if hi.is_finite() {
            return Ok((lo, hi));
        }
        let mut x = lo.max(1.0);
        for _ in 0..400 {
            if self.family.tail_bound(x) < tail_tol {
                return Ok((lo, x));
            }
            x *= 2.0;
        }
        Err(IddError::InvalidMeasure(format!("{}: tail mass does not vanish", self.family.name())))
    }

    /// `∫_{(a,b]} x ν(dx)` signed over both half-lines.
    pub fn signed_moment(&self, a: f64, b: f64, tol: QuadTol) -> Result<f64> {
        let (lo, hi) = self.window.unwrap_or((0.0, f64::INFINITY));
        let (a, b) = (a.max(lo), b.min(hi));
        if a >= b {
            return Ok(0.0);
        }
        if self.window.is_none() && a == 0.0 && b == 1.0 {
            if let Some(m) = self.family.compensator_moment() {
                return Ok(m);
            }
        }
        if self.family.is_symmetric() {
            return Ok(0.0);
        }
        if let Family::KOscillating { amp, lambda } = self.family {
            // ∫ amp·sin(1/x) e^{-λx} dx in t = 1/x is absolutely convergent
            let smooth = ((-lambda * a).exp() - (-lambda * b).exp()) / lambda;
            let t_hi = if a == 0.0 { 1e12 } else { 1.0 / a };
            let g = |t: f64| (-lambda / t).exp() / (t * t);
            let osc = Oscillatory::default().run(&g, 1.0 / b, t_hi, 1.0, &[])?;
            return Ok(smooth + amp * osc.osc.im);
        }
        let f = |x: f64| x * (self.pos(x) - self.neg(x));
        let a_eff = if a == 0.0 { b * 1e-40 } else { a };
        quad::integrate_log(f, a_eff, b, &self.breakpoints(), tol)
    }

    /// `∫_{|x| > a} ν(dx)`.
    pub fn mass_above(&self, a: f64, tol: QuadTol) -> Result<f64> {
        let (lo, hi) = self.window.unwrap_or((0.0, f64::INFINITY));
        let a = a.max(lo);
        if a >= hi {
            return Ok(0.0);
        }
        if a == 0.0 {
            return Err(IddError::InvalidMeasure("mass above 0 requested".into()));
        }
        let f = |x: f64| self.pos(x) + self.neg(x);
        quad::integrate_log(f, a, hi, &self.breakpoints(), tol)
    }

    /// `∫_{|x| > a} e^{θ|x|} ν(dx)`, infinite when it diverges.
    pub fn exp_moment_above(&self, theta: f64, a: f64, tol: QuadTol) -> Result<f64> {
        let (lo, hi) = self.window.unwrap_or((0.0, f64::INFINITY));
        let a = a.max(lo);
        if a >= hi {
            return Ok(0.0);
        }
        if a == 0.0 {
            return Err(IddError::InvalidMeasure("moment above 0 requested".into()));
        }
        let f = |x: f64| (theta * x).exp() * (self.pos(x) + self.neg(x));
        Ok(quad::integrate_log(f, a, hi, &self.breakpoints(), tol).unwrap_or(f64::INFINITY))
    }
}

/// Lévy measure: finitely many atoms plus absolutely continuous parts.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct JumpMeasure {
    pub atoms: Vec<(f64, f64)>,
    pub ac: Vec<AcPart>,
    /// Declared `p` with `∫ |x|^p ∧ 1 ν(dx) < ∞`.
    pub integrability_order: f64,
}

impl JumpMeasure {
    pub fn validate(&self) -> Result<()> {
        for &(x, m) in &self.atoms {
            if x == 0.0 || !x.is_finite() {
                return Err(IddError::InvalidMeasure(format!("atom at {x}")));
            }
            if !(m > 0.0 && m.is_finite()) {
                return Err(IddError::InvalidMeasure(format!("atom mass {m} at {x}")));
            }
        }
        for p in &self.ac {
            p.family.validate()?;
        }
        if self.integrability_order > 2.0 {
            return Err(IddError::InvalidMeasure(format!(
                "declared integrability order {} exceeds 2",
                self.integrability_order
            )));
        }
        Ok(())
    }

    pub fn symmetrize(&self) -> SymmetrizedMeasure {
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        for &(x, m) in &self.atoms {
            let ax = x.abs();
            match atoms.iter_mut().find(|a| a.0 == ax) {
                Some(a) => a.1 += m,
                None => atoms.push((ax, m)),
            }
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        SymmetrizedMeasure { atoms, parts: self.ac.clone() }
    }

    /// Restriction to `lo < |x| ≤ hi`.
    pub fn restrict(&self, lo: f64, hi: f64) -> JumpMeasure {
        let atoms = self.atoms.iter().copied().filter(|&(x, _)| x.abs() > lo && x.abs() <= hi).collect();
        let ac = self
            .ac
            .iter()
            .filter_map(|p| {
                let (plo, phi) = p.window.unwrap_or((0.0, f64::INFINITY));
                let (nlo, nhi) = (plo.max(lo), phi.min(hi));
                (nlo < nhi).then(|| AcPart { family: p.family.clone(), window: Some((nlo, nhi)) })
            })
            .collect();
        JumpMeasure { atoms, ac, integrability_order: self.integrability_order }
    }

    /// `∫_{[-1,1]} x ν(dx)`.
    pub fn compensator(&self, tol: QuadTol) -> Result<f64> {
        let mut m: f64 = self.atoms.iter().filter(|a| a.0.abs() <= 1.0).map(|a| a.0 * a.1).sum();
        for p in &self.ac {
            m += p.signed_moment(0.0, 1.0, tol)?;
        }
        Ok(m)
    }

    /// `ν(ℝ ∖ [-δ, δ])`.
    pub fn mass_outside(&self, delta: f64, tol: QuadTol) -> Result<f64> {
        let mut m: f64 = self.atoms.iter().filter(|a| a.0.abs() > delta).map(|a| a.1).sum();
        for p in &self.ac {
            m += p.mass_above(delta, tol)?;
        }
        Ok(m)
    }

    pub fn exp_moment_outside(&self, theta: f64, delta: f64, tol: QuadTol) -> Result<f64> {
        let mut m: f64 = self.atoms.iter().filter(|a| a.0.abs() > delta).map(|a| (theta * a.0.abs()).exp() * a.1).sum();
        for p in &self.ac {
            m += p.exp_moment_above(theta, delta, tol)?;
        }
        Ok(m)
    }
}

/// `ν_s(A) = ν(A) + ν(-A)` on `(0, ∞)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetrizedMeasure {
    pub atoms: Vec<(f64, f64)>,
    parts: Vec<AcPart>,
}

impl SymmetrizedMeasure {
    pub fn density(&self, x: f64) -> f64 {
        self.parts.iter().map(|p| p.pos(x) + p.neg(x)).sum()
    }

    /// `k_s(x) = x · dν_s/dx`.
    pub fn k(&self, x: f64) -> f64 {
        x * self.density(x)
    }

    pub fn has_density(&self) -> bool {
        !self.parts.is_empty()
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.parts.iter().flat_map(|p| p.breakpoints()).collect();
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// `ν_s((a, b])`.
    pub fn mass(&self, a: f64, b: f64, tol: QuadTol) -> Result<f64> {
        let mut m: f64 = self.atoms.iter().filter(|x| x.0 > a && x.0 <= b).map(|x| x.1).sum();
        if self.has_density() {
            m += quad::integrate_log(|x| self.density(x), a, b, &self.breakpoints(), tol)?;
        }
        Ok(m)
    }

    fn range(&self, tail_tol: f64) -> Result<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for p in &self.parts {
            let (a, b) = p.range(tail_tol / self.parts.len() as f64)?;
            lo = lo.min(a);
            hi = hi.max(b);
        }
        Ok((lo, hi))
    }
}

/// Characteristic triplet `(σ², γ, ν)` under the closed `1_{[-1,1]}` truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyTriplet {
    pub sigma2: f64,
    pub gamma: f64,
    pub measure: JumpMeasure,
}

/// Tolerances of the characteristic-function quadrature.
#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    /// Target absolute accuracy on `log |φ|`.
    pub tol: f64,
    pub tail_tol: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { tol: 1e-9, tail_tol: 1e-14 }
    }
}

impl QuadConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    fn gk(&self) -> QuadTol {
        QuadTol { abs: (self.tol * 1e-4).max(1e-15), rel: 1e-12, max_subdivisions: 2000 }
    }

    fn filon(&self) -> Oscillatory {
        Oscillatory { abs_tol: (self.tol * 1e-5).max(1e-16), rel_tol: 1e-14, max_panels: 20_000 }
    }
}

// -2 sin²(y/2), accurate for small y
fn cos_minus_one(y: f64) -> f64 {
    let s = (0.5 * y).sin();
    -2.0 * s * s
}

fn sin_minus_id(y: f64) -> f64 {
    if y.abs() < 1e-2 {
        let y2 = y * y;
        -y * y2 / 6.0 * (1.0 - y2 / 20.0 * (1.0 - y2 / 42.0))
    } else {
        y.sin() - y
    }
}

/// `∫_{(lo,hi]} (e^{iux} - 1 - iux·1{x ≤ 1}) g(x) dx` for `u > 0` on the half-line.
#[allow(clippy::too_many_arguments)]
fn half_line_integral<G: Fn(f64) -> f64>(
    g: &G,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    u: f64,
    real_only: bool,
    cfg: &QuadConfig,
) -> Result<Complex64> {
    let split = (1.0 / u).min(1.0);
    let mut acc = Complex64::new(0.0, 0.0);
    if lo < split {
        let top = split.min(hi);
        // near piece in y = u x
        let mut edges = vec![u * lo];
        edges.extend(breaks.iter().filter(|&&b| b > lo && b < top).map(|b| u * b));
        edges.push(u * top);
        edges.sort_by(f64::total_cmp);
        for w in edges.windows(2) {
            let re = quad::adaptive(|y| cos_minus_one(y) * g(y / u) / u, w[0], w[1], cfg.gk())?;
            let im = if real_only {
                0.0
            } else {
                quad::adaptive(|y| sin_minus_id(y) * g(y / u) / u, w[0], w[1], cfg.gk())?
            };
            acc += Complex64::new(re, im);
        }
    }
    let start = lo.max(split);
    if start < hi {
        let s = cfg.filon().run(g, start, hi, u, breaks)?;
        acc += Complex64::new(s.osc.re - s.mass, if real_only { 0.0 } else { s.osc.im - u * s.moment_to_one });
    }
    Ok(acc)
}

impl LevyTriplet {
    pub fn new(sigma2: f64, gamma: f64, measure: JumpMeasure) -> Result<Self> {
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(IddError::InvalidMeasure(format!("sigma2 = {sigma2}")));
        }
        measure.validate()?;
        Ok(Self { sigma2, gamma, measure })
    }

    /// Triplet whose drift makes `ψ(u) = -σ²u²/2 + ∫(e^{iux}-1)ν(dx)` (plus `shift·iu`).
    pub fn compensated(sigma2: f64, shift: f64, measure: JumpMeasure) -> Result<Self> {
        measure.validate()?;
        let g = measure.compensator(QuadConfig::default().gk())?;
        Self::new(sigma2, g + shift, measure)
    }

    pub fn zero() -> Self {
        Self { sigma2: 0.0, gamma: 0.0, measure: JumpMeasure::default() }
    }

    pub fn gaussian(sigma2: f64) -> Self {
        Self { sigma2, gamma: 0.0, measure: JumpMeasure::default() }
    }

    pub fn from_family(family: Family) -> Result<Self> {
        let m = JumpMeasure { atoms: vec![], ac: vec![AcPart::new(family)], integrability_order: 0.0 };
        Self::compensated(0.0, 0.0, m)
    }

    pub fn gamma(a: f64, lambda: f64) -> Result<Self> {
        Self::from_family(Family::Gamma { a, lambda })
    }

    pub fn compound_poisson(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let m = JumpMeasure { atoms, ac: vec![], integrability_order: 0.0 };
        Self::compensated(0.0, 0.0, m)
    }

    pub fn symmetrize(&self) -> SymmetrizedMeasure {
        self.measure.symmetrize()
    }

    /// Closed-form exponent when every component admits one.
    pub fn closed_form_exponent(&self, u: f64) -> Option<Complex64> {
        let mut psi = Complex64::new(-0.5 * self.sigma2 * u * u, 0.0);
        let mut comp = 0.0;
        for &(x, m) in &self.measure.atoms {
            psi += m * (Complex64::new(0.0, u * x).exp() - 1.0);
            if x.abs() <= 1.0 {
                comp += m * x;
            }
        }
        for p in &self.measure.ac {
            if p.window.is_some() {
                return None;
            }
            psi += p.family.closed_form_fv(u)?;
            comp += p.signed_moment(0.0, 1.0, QuadConfig::default().gk()).ok()?;
        }
        psi += Complex64::new(0.0, u * (self.gamma - comp));
        Some(psi)
    }

    pub fn has_closed_form(&self) -> bool {
        self.closed_form_exponent(1.0).is_some()
    }
}

/// `ψ(u) = -σ²u²/2 + iγu + ∫(e^{iux} - 1 - iux 1_{[-1,1]}(x)) ν(dx)` by quadrature.
pub fn characteristic_exponent(t: &LevyTriplet, u: f64, cfg: &QuadConfig) -> Result<Complex64> {
    if u == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let au = u.abs();
    let mut psi = Complex64::new(-0.5 * t.sigma2 * au * au, t.gamma * au);
    for &(x, m) in &t.measure.atoms {
        let y = au * x;
        let comp = if x.abs() <= 1.0 { y } else { 0.0 };
        psi += m * Complex64::new(cos_minus_one(y), y.sin() - comp);
    }
    for part in &t.measure.ac {
        let (lo, hi) = part.range(cfg.tail_tol)?;
        let breaks = part.breakpoints();
        let pos = |x: f64| part.pos(x);
        let neg = |x: f64| part.neg(x);
        if part.family.is_symmetric() {
            let v = half_line_integral(&pos, lo, hi, &breaks, au, true, cfg)?;
            psi += 2.0 * v.re;
        } else {
            psi += half_line_integral(&pos, lo, hi, &breaks, au, false, cfg)?;
            if part.family.has_neg() {
                psi += half_line_integral(&neg, lo, hi, &breaks, au, false, cfg)?.conj();
            }
        }
    }
    if !(psi.re.is_finite() && psi.im.is_finite()) {
        return Err(IddError::QuadratureNonconvergent(format!("non-finite exponent at u = {u}")));
    }
    Ok(if u < 0.0 { psi.conj() } else { psi })
}

pub fn cf(t: &LevyTriplet, u: f64, cfg: &QuadConfig) -> Result<Complex64> {
    characteristic_exponent(t, u, cfg).map(|p| p.exp())
}

/// `log|φ(u)| = -σ²u²/2 + ∫_0^∞ (cos(ux) - 1) ν_s(dx)`.
pub fn cf_abs_log(t: &LevyTriplet, u: f64, cfg: &QuadConfig) -> Result<f64> {
    if u == 0.0 {
        return Ok(0.0);
    }
    let au = u.abs();
    let sym = t.symmetrize();
    let mut v = -0.5 * t.sigma2 * au * au;
    for &(x, m) in &sym.atoms {
        v += m * cos_minus_one(au * x);
    }
    if sym.has_density() {
        let (lo, hi) = sym.range(cfg.tail_tol)?;
        let breaks = sym.breakpoints();
        let g = |x: f64| sym.density(x);
        v += half_line_integral(&g, lo, hi, &breaks, au, true, cfg)?.re;
    }
    if !v.is_finite() {
        return Err(IddError::QuadratureNonconvergent(format!("non-finite log|phi| at u = {u}")));
    }
    Ok(v.min(0.0))
}

/// Anything that can evaluate a characteristic function.
pub trait CharFn: Sync {
    fn exponent(&self, u: f64) -> Result<Complex64>;

    fn cf(&self, u: f64) -> Result<Complex64> {
        self.exponent(u).map(|p| p.exp())
    }

    fn log_abs(&self, u: f64) -> Result<f64> {
        self.exponent(u).map(|p| p.re)
    }
}

/// Quadrature evaluator owning its triplet.
#[derive(Debug, Clone)]
pub struct QuadratureCf {
    pub triplet: LevyTriplet,
    pub cfg: QuadConfig,
}

impl QuadratureCf {
    pub fn new(triplet: LevyTriplet) -> Self {
        Self { triplet, cfg: QuadConfig::default() }
    }
}

impl CharFn for QuadratureCf {
    fn exponent(&self, u: f64) -> Result<Complex64> {
        characteristic_exponent(&self.triplet, u, &self.cfg)
    }

    fn log_abs(&self, u: f64) -> Result<f64> {
        cf_abs_log(&self.triplet, u, &self.cfg)
    }
}

/// Closed-form evaluator; construction fails if any component lacks one.
#[derive(Debug, Clone)]
pub struct ClosedFormCf {
    pub triplet: LevyTriplet,
}

impl ClosedFormCf {
    pub fn new(triplet: LevyTriplet) -> Option<Self> {
        triplet.has_closed_form().then_some(Self { triplet })
    }
}

impl CharFn for ClosedFormCf {
    fn exponent(&self, u: f64) -> Result<Complex64> {
        Ok(self.triplet.closed_form_exponent(u).expect("checked at construction"))
    }
}

/// Closed form when available, quadrature otherwise.
pub fn best_evaluator(t: &LevyTriplet, cfg: QuadConfig) -> Box<dyn CharFn> {
    match ClosedFormCf::new(t.clone()) {
        Some(c) => Box::new(c),
        None => Box::new(QuadratureCf { triplet: t.clone(), cfg }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> QuadConfig {
        QuadConfig::default()
    }

    #[test]
    fn gaussian_exponent() {
        let t = LevyTriplet::gaussian(1.0);
        let psi = characteristic_exponent(&t, 2.0, &cfg()).unwrap();
        assert_eq!(psi, Complex64::new(-2.0, 0.0));
        let phi = cf(&t, 1.0, &cfg()).unwrap();
        assert!((phi.re - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn single_atom_outside_window() {
        let t = LevyTriplet::new(0.0, 0.0, JumpMeasure { atoms: vec![(2.0, 1.0)], ..Default::default() }).unwrap();
        for &u in &[0.3, 1.0, -2.5, 17.0] {
            let psi = characteristic_exponent(&t, u, &cfg()).unwrap();
            let want = Complex64::new(0.0, 2.0 * u).exp() - 1.0;
            assert!((psi - want).norm() < 1e-15, "u={u}");
        }
        let l = cf_abs_log(&t, PI / 2.0, &cfg()).unwrap();
        assert!((l + 2.0).abs() < 1e-15);
    }

    #[test]
    fn atom_on_boundary_is_compensated() {
        let t = LevyTriplet::new(0.0, 0.0, JumpMeasure { atoms: vec![(1.0, 1.0)], ..Default::default() }).unwrap();
        let psi = characteristic_exponent(&t, 0.7, &cfg()).unwrap();
        assert!((psi.im - (0.7f64.sin() - 0.7)).abs() < 1e-15);
    }

    #[test]
    fn gamma_exponent_by_quadrature() {
        let t = LevyTriplet::gamma(2.0, 1.0).unwrap();
        let psi = characteristic_exponent(&t, 1.0, &cfg()).unwrap();
        let want = Complex64::new(-(2.0f64).ln(), PI / 2.0);
        assert!((psi - want).norm() < 1e-10, "{psi}");
        let phi = cf(&t, 1.0, &cfg()).unwrap();
        assert!((phi - Complex64::new(0.0, 0.5)).norm() < 1e-10);
        let l = cf_abs_log(&t, 10.0, &cfg()).unwrap();
        assert!((l + 101f64.ln()).abs() < 1e-9, "{l}");
    }

    #[test]
    fn symmetrize_adds_mirrored_mass() {
        let m = JumpMeasure { atoms: vec![(2.0, 1.0), (-2.0, 3.0)], ..Default::default() };
        assert_eq!(m.symmetrize().atoms, vec![(2.0, 4.0)]);
        let st = JumpMeasure { ac: vec![AcPart::new(Family::Stable { beta: 1.0, c: 0.7 })], ..Default::default() };
        let s = st.symmetrize();
        assert!((s.density(0.3) - 2.0 * 0.7 / 0.09).abs() < 1e-12);
        let g = JumpMeasure { ac: vec![AcPart::new(Family::Gamma { a: 2.0, lambda: 1.0 })], ..Default::default() };
        let s = g.symmetrize();
        assert!((s.density(0.4) - 2.0 * (-0.4f64).exp() / 0.4).abs() < 1e-15);
    }

    #[test]
    fn symmetrized_mass_on_intervals() {
        let m = JumpMeasure {
            atoms: vec![(0.5, 1.0), (-0.7, 2.0)],
            ac: vec![AcPart::new(Family::BilateralGamma { a_plus: 1.0, lambda_plus: 1.0, a_minus: 2.0, lambda_minus: 3.0 })],
            integrability_order: 0.0,
        };
        let s = m.symmetrize();
        let tol = QuadTol::default();
        let got = s.mass(0.2, 1.5, tol).unwrap();
        let pos = quad::adaptive(|x: f64| (-x).exp() / x, 0.2, 1.5, tol).unwrap();
        let neg = quad::adaptive(|x: f64| 2.0 * (-3.0 * x).exp() / x, 0.2, 1.5, tol).unwrap();
        assert!((got - (3.0 + pos + neg)).abs() < 1e-12);
    }

    #[test]
    fn hermitian_and_bounded() {
        let t = LevyTriplet::from_family(Family::BilateralGamma { a_plus: 1.0, lambda_plus: 2.0, a_minus: 0.5, lambda_minus: 1.0 }).unwrap();
        for &u in &[0.1, 3.0, 250.0] {
            let a = cf(&t, u, &cfg()).unwrap();
            let b = cf(&t, -u, &cfg()).unwrap();
            assert_eq!(a, b.conj());
            assert!(a.norm() <= 1.0);
        }
        assert_eq!(cf(&t, 0.0, &cfg()).unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn closed_forms_agree_with_quadrature() {
        let cases = [
            Family::Gamma { a: 0.5, lambda: 3.0 },
            Family::BilateralGamma { a_plus: 1.0, lambda_plus: 2.0, a_minus: 0.5, lambda_minus: 1.0 },
            Family::Stable { beta: 0.5, c: 1.0 },
            Family::Stable { beta: 1.0, c: 1.0 / PI },
            Family::Stable { beta: 1.5, c: 0.3 },
            Family::TemperedStable { beta: -0.5, c: 1.0, lambda: 1.0 },
            Family::TemperedStable { beta: 0.5, c: 1.0, lambda: 2.0 },
        ];
        for fam in cases {
            let t = LevyTriplet::from_family(fam.clone()).unwrap();
            for &u in &[0.01, 0.9, 7.0, 333.0, 1000.0] {
                let q = characteristic_exponent(&t, u, &cfg()).unwrap();
                let c = t.closed_form_exponent(u).unwrap();
                assert!((q - c).norm() < 1e-9 * (1.0 + c.norm()), "{fam:?} u={u}: {q} vs {c}");
                let l = cf_abs_log(&t, u, &cfg()).unwrap();
                assert!((l - c.re).abs() < 1e-9 * (1.0 + c.re.abs()), "{fam:?} u={u}: {l} vs {}", c.re);
            }
        }
    }

    #[test]
    fn cauchy_modulus() {
        let t = LevyTriplet::from_family(Family::Stable { beta: 1.0, c: 1.0 / PI }).unwrap();
        let l = cf_abs_log(&t, 12.5, &cfg()).unwrap();
        assert!((l + 12.5).abs() < 1e-9);
    }

    #[test]
    fn restrict_partitions_the_measure() {
        let t = LevyTriplet::gamma(2.0, 1.0).unwrap();
        let tol = QuadTol::default();
        let inner = t.measure.restrict(0.0, 0.5);
        let outer = t.measure.restrict(0.5, f64::INFINITY);
        let tail = outer.mass_outside(0.5, tol).unwrap();
        // 2 E1(0.5)
        assert!((tail - 2.0 * 0.559_773_594_776_160_8).abs() < 1e-12, "{tail}");
        assert_eq!(inner.mass_outside(0.5, tol).unwrap(), 0.0);
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(LevyTriplet::new(-1.0, 0.0, JumpMeasure::default()).is_err());
        assert!(JumpMeasure { atoms: vec![(0.0, 1.0)], ..Default::default() }.validate().is_err());
        assert!(Family::Stable { beta: 2.5, c: 1.0 }.validate().is_err());
    }
}
