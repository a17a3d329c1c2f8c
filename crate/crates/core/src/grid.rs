//! Uniform grids and their discrete Fourier transforms.
//!
//! Conventions: `F f(u) = ∫ e^{iux} f(x) dx`, samples `x_k = origin + k·step`,
//! frequencies `u_j = (j - N/2)·du` with `du = 2π / (N·step)`.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{IddError, Result};

/// A function sampled at `origin + k·step`, `k < 2^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub origin: f64,
    pub step: f64,
    pub values: Vec<Complex64>,
}

fn check_len(n: usize) -> Result<()> {
    if n < 2 || !n.is_power_of_two() {
        return Err(IddError::Config(format!("grid length {n} is not a power of two")));
    }
    Ok(())
}

impl GridFunction {
    pub fn new(origin: f64, step: f64, values: Vec<Complex64>) -> Result<Self> {
        check_len(values.len())?;
        if !(step > 0.0 && step.is_finite()) {
            return Err(IddError::Config(format!("grid step {step}")));
        }
        Ok(Self { origin, step, values })
    }

    /// `n` points covering `[center - width/2, center + width/2)`.
    pub fn from_fn<F: Fn(f64) -> f64>(center: f64, width: f64, n: usize, f: F) -> Result<Self> {
        check_len(n)?;
        let step = width / n as f64;
        let origin = center - 0.5 * width;
        let values = (0..n).map(|k| Complex64::new(f(origin + k as f64 * step), 0.0)).collect();
        Self::new(origin, step, values)
    }

    pub fn zeros_like(&self) -> Self {
        Self { origin: self.origin, step: self.step, values: vec![Complex64::new(0.0, 0.0); self.len()] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, k: usize) -> f64 {
        self.origin + k as f64 * self.step
    }

    pub fn width(&self) -> f64 {
        self.step * self.len() as f64
    }

    pub fn real(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn integral(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() * self.step
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.step).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.sup_norm();
        }
        (self.values.iter().map(|v| v.norm().powf(p)).sum::<f64>() * self.step).powf(1.0 / p)
    }

    /// Same sampling points.
    pub fn same_grid(&self, o: &Self) -> bool {
        self.len() == o.len() && self.origin == o.origin && self.step == o.step
    }

    /// Linear interpolation of the real part; 0 outside the grid.
    pub fn interp(&self, x: f64) -> f64 {
        let t = (x - self.origin) / self.step;
        if !(t >= 0.0 && t <= (self.len() - 1) as f64) {
            return 0.0;
        }
        let i = (t.floor() as usize).min(self.len() - 2);
        let w = t - i as f64;
        (1.0 - w) * self.values[i].re + w * self.values[i + 1].re
    }
}

/// Values at `u_j = (j - N/2)·du` of the transform of a function on a
/// spatial grid starting at `origin`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub origin: f64,
    pub du: f64,
    pub values: Vec<Complex64>,
}

impl Spectrum {
    /// Frequencies dual to `grid`, filled from `f(u)`.
    pub fn from_fn<F: Fn(f64) -> Complex64>(grid: &GridFunction, f: F) -> Self {
        let du = dual_step(grid.step, grid.len());
        let n = grid.len();
        let values = (0..n).map(|j| f((j as f64 - (n / 2) as f64) * du)).collect();
        Self { origin: grid.origin, du, values }
    }

    pub fn u(&self, j: usize) -> f64 {
        (j as f64 - (self.values.len() / 2) as f64) * self.du
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn u_max(&self) -> f64 {
        self.du * (self.len() / 2) as f64
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.du).sqrt()
    }

    pub fn map<F: Fn(f64, Complex64) -> Complex64>(&self, f: F) -> Self {
        let values = self.values.iter().enumerate().map(|(j, &v)| f(self.u(j), v)).collect();
        Self { origin: self.origin, du: self.du, values }
    }
}

pub fn dual_step(step: f64, n: usize) -> f64 {
    2.0 * std::f64::consts::PI / (n as f64 * step)
}

fn sign(k: usize) -> f64 {
    if k.is_multiple_of(2) { 1.0 } else { -1.0 }
}

/// Trapezoid approximation of `∫ e^{iu_j x} f(x) dx`.
pub fn forward(f: &GridFunction) -> Spectrum {
    let n = f.len();
    let du = dual_step(f.step, n);
    let mut buf: Vec<Complex64> = f.values.iter().enumerate().map(|(k, &v)| v * sign(k)).collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let half = (n / 2) as f64;
    let values = buf
        .into_iter()
        .enumerate()
        .map(|(j, v)| {
            let u = (j as f64 - half) * du;
            v * Complex64::from_polar(f.step, u * f.origin)
        })
        .collect();
    Spectrum { origin: f.origin, du, values }
}

/// `(2π)^{-1} Σ_j e^{-iu_j x_k} F_j du`, the exact inverse of [`forward`].
pub fn inverse(s: &Spectrum) -> GridFunction {
    let n = s.len();
    let half = (n / 2) as f64;
    let mut buf: Vec<Complex64> = s
        .values
        .iter()
        .enumerate()
        .map(|(j, &v)| v * Complex64::from_polar(1.0, -(j as f64 - half) * s.du * s.origin))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = s.du / (2.0 * std::f64::consts::PI);
    let step = dual_step(s.du, n);
    let values = buf.into_iter().enumerate().map(|(k, v)| v * (scale * sign(k))).collect();
    GridFunction { origin: s.origin, step, values }
}

/// Circular convolution `∫ f(x - y) g(y) dy` sampled on `f`'s grid.
pub fn convolve(f: &GridFunction, g: &GridFunction) -> Result<GridFunction> {
    if f.len() != g.len() || f.step != g.step {
        return Err(IddError::Config("convolution needs equal grid shape".into()));
    }
    let (a, b) = (forward(f), forward(g));
    let values = a.values.iter().zip(&b.values).map(|(x, y)| x * y).collect();
    Ok(inverse(&Spectrum { origin: f.origin, du: a.du, values }))
}
