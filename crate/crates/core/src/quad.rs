//! Quadrature kernels.
//!
//! Two engines live here. [`adaptive`] is a globally adaptive 15-point
//! Gauss–Kronrod integrator used for smooth or weakly singular pieces.
//! [`Oscillatory`] integrates `g(x) e^{iux}` over long ranges: `g` is
//! interpolated on each panel by a Legendre expansion whose Fourier moments
//! are spherical Bessel functions, so the cost is independent of `u`.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{IddError, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Tolerances shared by the integrators.
#[derive(Debug, Clone, Copy)]
pub struct QuadTol {
    pub abs: f64,
    pub rel: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadTol {
    fn default() -> Self {
        Self { abs: 1e-13, rel: 1e-12, max_subdivisions: 4000 }
    }
}

/// Globally adaptive Gauss–Kronrod integration of `f` over the finite `[a, b]`.
pub fn adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: QuadTol) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (r, e) = gk15(&f, a, b);
    let mut segs = vec![(a, b, r, e)];
    let mut total = r;
    let mut err = e;
    while err > tol.abs.max(tol.rel * total.abs()) {
        if segs.len() >= tol.max_subdivisions {
            return Err(IddError::QuadratureNonconvergent(format!(
                "adaptive GK15 on [{a:e}, {b:e}]: error {err:e} after {} subdivisions",
                segs.len()
            )));
        }
        let (idx, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (lo, hi, r0, e0) = segs.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(IddError::QuadratureNonconvergent(format!(
                "interval collapsed near {lo:e}"
            )));
        }
        let (r1, e1) = gk15(&f, lo, mid);
        let (r2, e2) = gk15(&f, mid, hi);
        total += r1 + r2 - r0;
        err += e1 + e2 - e0;
        segs.push((lo, mid, r1, e1));
        segs.push((mid, hi, r2, e2));
    }
    // re-sum to shed accumulated update rounding
    Ok(segs.iter().map(|s| s.2).sum())
}

/// `∫_a^b f(x) dx` with `0 < a < b ≤ ∞`, integrated in `y = ln x`.
///
/// `breaks` are points in `(a, b)` where `f` may be discontinuous.
pub fn integrate_log<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64], tol: QuadTol) -> Result<f64> {
    debug_assert!(a > 0.0 && b > a);
    let mut pts: Vec<f64> = vec![a.ln()];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).map(f64::ln).collect();
    inner.sort_by(f64::total_cmp);
    pts.extend(inner);
    let g = |y: f64| {
        let x = y.exp();
        if !x.is_finite() {
            return 0.0;
        }
        let v = f(x) * x;
        if v.is_nan() {
            0.0
        } else {
            v
        }
    };
    let mut total = 0.0;
    if b.is_finite() {
        pts.push(b.ln());
        for w in pts.windows(2) {
            total += adaptive(g, w[0], w[1], tol)?;
        }
    } else {
        for w in pts.windows(2) {
            total += adaptive(g, w[0], w[1], tol)?;
        }
        let y0 = *pts.last().expect("nonempty");
        // y = y0 + t / (1 - t)
        let h = |t: f64| {
            if t >= 1.0 {
                return 0.0;
            }
            let s = 1.0 - t;
            let v = g(y0 + t / s);
            if v == 0.0 {
                0.0
            } else {
                v / (s * s)
            }
        };
        total += adaptive(h, 0.0, 1.0, tol)?;
    }
    Ok(total)
}

pub(crate) const ORDER: usize = 24;

struct LegendreTable {
    nodes: [f64; ORDER],
    weights: [f64; ORDER],
    // poly[n][i] = P_n(nodes[i])
    poly: Vec<[f64; ORDER]>,
}

fn legendre_table() -> &'static LegendreTable {
    static TABLE: OnceLock<LegendreTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = ORDER;
        let mut nodes = [0.0; ORDER];
        let mut weights = [0.0; ORDER];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_with_derivative(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(n, x);
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        let mut poly = vec![[0.0; ORDER]; ORDER];
        for i in 0..n {
            let t = nodes[i];
            let (mut p0, mut p1) = (1.0, t);
            poly[0][i] = 1.0;
            poly[1][i] = t;
            for k in 1..n - 1 {
                let p2 = ((2 * k + 1) as f64 * t * p1 - k as f64 * p0) / (k + 1) as f64;
                poly[k + 1][i] = p2;
                p0 = p1;
                p1 = p2;
            }
        }
        LegendreTable { nodes, weights, poly }
    })
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 1..n {
        let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` of the panel order.
pub fn gauss_legendre() -> (&'static [f64; ORDER], &'static [f64; ORDER]) {
    let t = legendre_table();
    (&t.nodes, &t.weights)
}

/// Spherical Bessel functions `j_0(w) .. j_{n-1}(w)` for `w ≥ 0`.
pub fn spherical_bessel(n: usize, w: f64, out: &mut [f64]) {
    debug_assert!(out.len() >= n && n >= 2);
    if w < 1e-12 {
        out[..n].fill(0.0);
        out[0] = 1.0;
        return;
    }
    let (s, c) = w.sin_cos();
    let j0 = s / w;
    let j1 = s / (w * w) - c / w;
    if w > n as f64 {
        out[0] = j0;
        out[1] = j1;
        for k in 1..n - 1 {
            out[k + 1] = (2 * k + 1) as f64 / w * out[k] - out[k - 1];
        }
        return;
    }
    // Miller's downward recurrence, normalised by the larger of j0 and j1.
    let start = n + 20 + (w as usize);
    let mut next = 0.0f64;
    let mut cur = 1e-30f64;
    let mut vals = vec![0.0; start + 1];
    vals[start] = cur;
    for k in (1..=start).rev() {
        let prev = (2 * k + 1) as f64 / w * cur - next;
        next = cur;
        cur = prev;
        vals[k - 1] = cur;
        if cur.abs() > 1e250 {
            for v in vals[k - 1..].iter_mut() {
                *v *= 1e-250;
            }
            cur *= 1e-250;
            next *= 1e-250;
        }
    }
    let scale = if j0.abs() >= j1.abs() { j0 / vals[0] } else { j1 / vals[1] };
    for k in 0..n {
        out[k] = vals[k] * scale;
    }
}

/// Result of an oscillatory pass over `[a, b]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PanelSums {
    /// `∫ g(x) e^{iux} dx`
    pub osc: Complex64,
    /// `∫ g(x) dx`
    pub mass: f64,
    /// `∫ x g(x) dx` restricted to `x ≤ 1`
    pub moment_to_one: f64,
}

/// Filon-type integrator over panels of a real integrand.
#[derive(Debug, Clone, Copy)]
pub struct Oscillatory {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for Oscillatory {
    fn default() -> Self {
        Self { abs_tol: 1e-14, rel_tol: 1e-14, max_panels: 20_000 }
    }
}

impl Oscillatory {
    /// Integrate over `[a, b]`, `0 < a < b < ∞`; panels start geometric
    /// (ratio 2) and are bisected until the Legendre tail is negligible.
    /// `breaks` must contain every discontinuity; `1.0` is always added.
    pub fn run<G: Fn(f64) -> f64>(&self, g: &G, a: f64, b: f64, u: f64, breaks: &[f64]) -> Result<PanelSums> {
        let mut edges = vec![a];
        let mut x = a;
        while x * 2.0 < b {
            x *= 2.0;
            edges.push(x);
        }
        edges.push(b);
        edges.extend(breaks.iter().copied().filter(|&p| p > a && p < b));
        if a < 1.0 && b > 1.0 {
            edges.push(1.0);
        }
        edges.sort_by(f64::total_cmp);
        edges.dedup();

        let tab = legendre_table();
        let mut bessel = [0.0; ORDER];
        let mut vals = [0.0; ORDER];
        let mut coef = [0.0; ORDER];
        let mut sums = PanelSums::default();
        let mut panels = 0usize;
        let mut stack: Vec<(f64, f64)> = edges.windows(2).rev().map(|w| (w[0], w[1])).collect();
        while let Some((lo, hi)) = stack.pop() {
            panels += 1;
            if panels > self.max_panels {
                return Err(IddError::QuadratureNonconvergent(format!(
                    "oscillatory integral exceeded {} panels near x = {lo:e}",
                    self.max_panels
                )));
            }
            let c = 0.5 * (lo + hi);
            let r = 0.5 * (hi - lo);
            let mut gmax = 0.0f64;
            for i in 0..ORDER {
                let v = g(c + r * tab.nodes[i]);
                if !v.is_finite() {
                    return Err(IddError::QuadratureNonconvergent(format!("non-finite integrand at {:e}", c + r * tab.nodes[i])));
                }
                vals[i] = v;
                gmax = gmax.max(v.abs());
            }
            for (n, cn) in coef.iter_mut().enumerate() {
                let mut acc = 0.0;
                for i in 0..ORDER {
                    acc += tab.weights[i] * tab.poly[n][i] * vals[i];
                }
                *cn = acc * (2 * n + 1) as f64 * 0.5;
            }
            let tail = (coef[ORDER - 1].abs() + coef[ORDER - 2].abs() + coef[ORDER - 3].abs()) * 2.0 * r;
            let allowed = self.abs_tol.max(self.rel_tol * gmax * r);
            if tail > allowed && r > 1e-13 * c.abs().max(1e-300) {
                let mid = c;
                stack.push((mid, hi));
                stack.push((lo, mid));
                continue;
            }
            let w = u * r;
            let osc_local = if w == 0.0 {
                Complex64::new(2.0 * coef[0], 0.0)
            } else {
                spherical_bessel(ORDER, w, &mut bessel);
                // ∫ P_n(t) e^{iwt} dt = 2 i^n j_n(w)
                let mut re = 0.0;
                let mut im = 0.0;
                for n in 0..ORDER {
                    let term = 2.0 * coef[n] * bessel[n];
                    match n % 4 {
                        0 => re += term,
                        1 => im += term,
                        2 => re -= term,
                        _ => im -= term,
                    }
                }
                Complex64::new(re, im)
            };
            let phase = Complex64::from_polar(1.0, u * c);
            sums.osc += phase * osc_local * r;
            let mass = 2.0 * coef[0] * r;
            sums.mass += mass;
            if hi <= 1.0 {
                let mut m = 0.0;
                for i in 0..ORDER {
                    m += tab.weights[i] * vals[i] * (c + r * tab.nodes[i]);
                }
                sums.moment_to_one += m * r;
            }
        }
        Ok(sums)
    }
}
