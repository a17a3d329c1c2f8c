//! Finite signed measures: atoms plus a density sampled on a grid.

use num_complex::Complex64;

use crate::error::{IddError, Result};
use crate::grid::{self, GridFunction, Spectrum};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SignedMeasure {
    /// `(location, signed mass)`.
    pub atoms: Vec<(f64, f64)>,
    pub density: Option<GridFunction>,
}

impl SignedMeasure {
    pub fn dirac(x: f64) -> Self {
        Self { atoms: vec![(x, 1.0)], density: None }
    }

    pub fn atomic(atoms: Vec<(f64, f64)>) -> Self {
        Self { atoms, density: None }
    }

    fn density_sum<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.density.as_ref().map_or(0.0, |d| d.values.iter().map(|v| f(v.re)).sum::<f64>() * d.step)
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum::<f64>() + self.density_sum(|v| v)
    }

    /// `‖μ‖_TV = μ⁺(ℝ) + μ⁻(ℝ)`.
    pub fn total_variation(&self) -> f64 {
        self.atoms.iter().map(|a| a.1.abs()).sum::<f64>() + self.density_sum(f64::abs)
    }

    fn part(&self, sign: f64) -> Self {
        let atoms = self.atoms.iter().filter(|a| sign * a.1 > 0.0).map(|&(x, m)| (x, sign * m)).collect();
        let density = self.density.as_ref().map(|d| GridFunction {
            origin: d.origin,
            step: d.step,
            values: d.values.iter().map(|v| Complex64::new((sign * v.re).max(0.0), 0.0)).collect(),
        });
        Self { atoms, density }
    }

    /// Positive Jordan part.
    pub fn jordan_plus(&self) -> Self {
        self.part(1.0)
    }

    /// Negative Jordan part, as a nonnegative measure.
    pub fn jordan_minus(&self) -> Self {
        self.part(-1.0)
    }

    /// `∫ e^{iux} μ(dx)`, the density by its trapezoid sum.
    pub fn fourier(&self, u: f64) -> Complex64 {
        let mut s: Complex64 = self.atoms.iter().map(|&(x, m)| Complex64::from_polar(m, u * x)).sum();
        if let Some(d) = &self.density {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, v) in d.values.iter().enumerate() {
                acc += v.re * Complex64::from_polar(1.0, u * d.x(k));
            }
            s += acc * d.step;
        }
        s
    }

    /// Transform at the frequencies dual to `grid` (FFT for the density part).
    pub fn spectrum_on(&self, grid: &GridFunction) -> Result<Spectrum> {
        let mut s = Spectrum::from_fn(grid, |u| self.atoms.iter().map(|&(x, m)| Complex64::from_polar(m, u * x)).sum());
        if let Some(d) = &self.density {
            if d.len() != grid.len() || (d.step - grid.step).abs() > 1e-12 * grid.step {
                return Err(IddError::Config("density grid differs from the target grid".into()));
            }
            let fd = grid::forward(d);
            for (a, b) in s.values.iter_mut().zip(&fd.values) {
                *a += b;
            }
        }
        Ok(s)
    }

    /// `∫ f(x - y) μ(dy)` on `f`'s grid.
    pub fn convolve_grid(&self, f: &GridFunction) -> Result<GridFunction> {
        let m = self.spectrum_on(f)?;
        let ff = grid::forward(f);
        let values = ff.values.iter().zip(&m.values).map(|(a, b)| a * b).collect();
        Ok(grid::inverse(&Spectrum { origin: f.origin, du: ff.du, values }))
    }

    pub fn shift(&self, by: f64) -> Self {
        let atoms = self.atoms.iter().map(|&(x, m)| (x + by, m)).collect();
        let density = self.density.as_ref().map(|d| GridFunction { origin: d.origin + by, ..d.clone() });
        Self { atoms, density }
    }

    /// Exact convolution of the atomic parts; densities are not supported here.
    pub fn convolve_atoms(&self, o: &Self) -> Result<Self> {
        if self.density.is_some() || o.density.is_some() {
            return Err(IddError::Config("atomic convolution of measures with densities".into()));
        }
        let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(self.atoms.len() * o.atoms.len());
        for &(x, m) in &self.atoms {
            for &(y, n) in &o.atoms {
                atoms.push((x + y, m * n));
            }
        }
        Ok(Self::atomic(merge_atoms(atoms)))
    }
}

/// Sorts atoms and merges those at the same location.
pub fn merge_atoms(mut atoms: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
    for (x, m) in atoms {
        match out.last_mut() {
            Some(last) if (last.0 - x).abs() <= 1e-12 * x.abs().max(1.0) => last.1 += m,
            _ => out.push((x, m)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mixed() -> SignedMeasure {
        let d = GridFunction::from_fn(0.0, 20.0, 512, |x| (x * 1.3).sin() * (-(x * x) / 2.0).exp()).unwrap();
        SignedMeasure { atoms: vec![(1.0, 0.5), (-2.0, -0.25)], density: Some(d) }
    }

    #[test]
    fn jordan_consistency() {
        let m = mixed();
        let (p, n) = (m.jordan_plus(), m.jordan_minus());
        assert!((m.total_variation() - p.total_mass() - n.total_mass()).abs() < 1e-14);
        assert!((m.total_mass() - (p.total_mass() - n.total_mass())).abs() < 1e-14);
    }

    #[test]
    fn convolution_theorem_on_grid() {
        let m = mixed();
        let f = GridFunction::from_fn(0.0, 20.0, 512, |x| (-(x - 0.5).powi(2)).exp()).unwrap();
        let c = m.convolve_grid(&f).unwrap();
        let fc = grid::forward(&c);
        let ff = grid::forward(&f);
        let fm = m.spectrum_on(&f).unwrap();
        for j in (0..512).step_by(17) {
            assert!((fc.values[j] - ff.values[j] * fm.values[j]).norm() < 1e-12);
        }
        // the trapezoid transform agrees with the FFT one on grid frequencies
        let j = 300;
        assert!((m.fourier(fm.u(j)) - fm.values[j]).norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn atomic_convolution_multiplies_transforms(
            xs in proptest::collection::vec((-5.0f64..5.0, -2.0f64..2.0), 1..5),
            ys in proptest::collection::vec((-5.0f64..5.0, -2.0f64..2.0), 1..5),
            u in -10.0f64..10.0,
        ) {
            let a = SignedMeasure::atomic(xs);
            let b = SignedMeasure::atomic(ys);
            let c = a.convolve_atoms(&b).unwrap();
            prop_assert!((c.fourier(u) - a.fourier(u) * b.fourier(u)).norm() < 1e-12);
            prop_assert!(c.total_variation() <= a.total_variation() * b.total_variation() + 1e-12);
        }
    }
}
