//! Exact and truncated samplers for Lévy triplets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};

use crate::error::{IddError, Result};
use crate::levy::{AcPart, Family, LevyTriplet};
use crate::quad::{self, QuadTol};

#[derive(Debug, Clone, Copy)]
pub struct SamplerConfig {
    /// Jumps with `|x| ≤ trunc` are replaced by their mean; `None` disables
    /// the truncated route.
    pub trunc: Option<f64>,
    /// Small-jump variance above which a Gaussian surrogate is added.
    pub gaussian_threshold: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { trunc: None, gaussian_threshold: 1e-4 }
    }
}

/// Tabulated jump law on one half-line, `ε < x ≤ x_max`.
#[derive(Debug, Clone)]
struct JumpTable {
    edges: Vec<f64>,
    cdf: Vec<f64>,
    sign: f64,
}

impl JumpTable {
    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        let total = *self.cdf.last().expect("nonempty");
        let v = rng.random::<f64>() * total;
        let i = self.cdf.partition_point(|&c| c < v).clamp(1, self.cdf.len() - 1);
        let (lo, hi) = (self.edges[i - 1].ln(), self.edges[i].ln());
        self.sign * (lo + rng.random::<f64>() * (hi - lo)).exp()
    }
}

#[derive(Debug, Clone)]
enum Component {
    Gamma { shape: f64, rate: f64, sign: f64 },
    Truncated { tables: Vec<JumpTable>, rate: f64, small_mean: f64, small_sd: f64 },
}

/// A ready-to-draw sampler; cheap to clone and reuse with fresh seeds.
#[derive(Debug, Clone)]
pub struct Sampler {
    drift: f64,
    sd: f64,
    atoms: Vec<(f64, f64)>,
    atom_rate: f64,
    components: Vec<Component>,
}

fn table_for(part: &AcPart, eps: f64, neg: bool, tol: QuadTol) -> Result<Option<JumpTable>> {
    let dens = |x: f64| if neg { part.neg(x) } else { part.pos(x) };
    let (wlo, whi) = part.window.unwrap_or((0.0, f64::INFINITY));
    let lo = eps.max(wlo);
    let mut hi = whi;
    if !hi.is_finite() {
        hi = lo.max(1.0);
        while part.family.tail_bound(hi) > 1e-13 {
            hi *= 2.0;
            if hi > 1e300 {
                return Err(IddError::NoSampler("jump tail does not vanish".into()));
            }
        }
    }
    if hi <= lo {
        return Ok(None);
    }
    let cells = 2048usize;
    let ratio = (hi / lo).ln() / cells as f64;
    let mut edges = Vec::with_capacity(cells + 1);
    let mut cdf = Vec::with_capacity(cells + 1);
    edges.push(lo);
    cdf.push(0.0);
    let mut acc = 0.0;
    for i in 1..=cells {
        let b = if i == cells { hi } else { lo * (ratio * i as f64).exp() };
        let a = *edges.last().expect("nonempty");
        acc += quad::integrate_log(dens, a, b, &part.breakpoints(), tol)?;
        edges.push(b);
        cdf.push(acc);
    }
    if acc <= 0.0 {
        return Ok(None);
    }
    Ok(Some(JumpTable { edges, cdf, sign: if neg { -1.0 } else { 1.0 } }))
}

impl Sampler {
    pub fn new(t: &LevyTriplet, cfg: &SamplerConfig) -> Result<Self> {
        let tol = QuadTol::default();
        let mut drift = t.gamma;
        let atoms: Vec<(f64, f64)> = t.measure.atoms.clone();
        for &(x, m) in &atoms {
            if x.abs() <= 1.0 {
                drift -= m * x;
            }
        }
        let atom_rate = atoms.iter().map(|a| a.1).sum();
        let mut components = Vec::new();
        for part in &t.measure.ac {
            drift -= part.signed_moment(0.0, 1.0, tol)?;
            match (&part.family, part.window) {
                (Family::Gamma { a, lambda }, None) => components.push(Component::Gamma { shape: *a, rate: *lambda, sign: 1.0 }),
                (Family::BilateralGamma { a_plus, lambda_plus, a_minus, lambda_minus }, None) => {
                    if *a_plus > 0.0 {
                        components.push(Component::Gamma { shape: *a_plus, rate: *lambda_plus, sign: 1.0 });
                    }
                    if *a_minus > 0.0 {
                        components.push(Component::Gamma { shape: *a_minus, rate: *lambda_minus, sign: -1.0 });
                    }
                }
                _ => {
                    let eps = cfg.trunc.ok_or_else(|| {
                        IddError::NoSampler(format!("{} needs a truncation level", part.family.name()))
                    })?;
                    let mut tables = Vec::new();
                    for neg in [false, true] {
                        if neg && !part.family.has_neg() {
                            continue;
                        }
                        if let Some(tb) = table_for(part, eps, neg, tol)? {
                            tables.push(tb);
                        }
                    }
                    let rate = tables.iter().map(|tb| *tb.cdf.last().expect("nonempty")).sum();
                    let small_mean = part.signed_moment(0.0, eps, tol)?;
                    let var = {
                        let f = |x: f64| x * x * (part.pos(x) + part.neg(x));
                        let (wlo, _) = part.window.unwrap_or((0.0, f64::INFINITY));
                        if wlo >= eps {
                            0.0
                        } else {
                            quad::integrate_log(f, (eps * 1e-40).max(wlo), eps, &part.breakpoints(), tol)?
                        }
                    };
                    let small_sd = if var > cfg.gaussian_threshold { var.sqrt() } else { 0.0 };
                    components.push(Component::Truncated { tables, rate, small_mean, small_sd });
                }
            }
        }
        Ok(Self { drift, sd: t.sigma2.sqrt(), atoms, atom_rate, components })
    }

    pub fn is_exact(&self) -> bool {
        self.components.iter().all(|c| matches!(c, Component::Gamma { .. }))
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        let mut x = self.drift;
        if self.sd > 0.0 {
            x += self.sd * rng.sample::<f64, _>(rand_distr::StandardNormal);
        }
        if self.atom_rate > 0.0 {
            let n = Poisson::new(self.atom_rate).expect("positive rate").sample(rng) as u64;
            for _ in 0..n {
                let mut v = rng.random::<f64>() * self.atom_rate;
                let mut loc = self.atoms[self.atoms.len() - 1].0;
                for &(ax, m) in &self.atoms {
                    if v < m {
                        loc = ax;
                        break;
                    }
                    v -= m;
                }
                x += loc;
            }
        }
        for c in &self.components {
            match c {
                Component::Gamma { shape, rate, sign } => {
                    x += sign * Gamma::new(*shape, 1.0 / rate).expect("valid gamma").sample(rng);
                }
                Component::Truncated { tables, rate, small_mean, small_sd } => {
                    x += small_mean;
                    if *small_sd > 0.0 {
                        x += Normal::new(0.0, *small_sd).expect("valid sd").sample(rng);
                    }
                    if *rate > 0.0 {
                        let n = Poisson::new(*rate).expect("positive rate").sample(rng) as u64;
                        for _ in 0..n {
                            let mut v = rng.random::<f64>() * rate;
                            for tb in tables {
                                let m = *tb.cdf.last().expect("nonempty");
                                if v < m || std::ptr::eq(tb, tables.last().expect("nonempty")) {
                                    x += tb.draw(rng);
                                    break;
                                }
                                v -= m;
                            }
                        }
                    }
                }
            }
        }
        x
    }

    pub fn draw_n(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.draw(&mut rng)).collect()
    }
}

/// `n` i.i.d. draws of the law with triplet `t`, deterministic in `seed`.
pub fn sample(t: &LevyTriplet, n: usize, seed: u64, cfg: &SamplerConfig) -> Result<Vec<f64>> {
    Ok(Sampler::new(t, cfg)?.draw_n(n, seed))
}

/// Empirical characteristic function `(1/n) Σ e^{iuY_j}`, summed directly.
pub fn empirical_cf(sample: &[f64], u: f64) -> num_complex::Complex64 {
    let (mut re, mut im) = (0.0, 0.0);
    for &y in sample {
        let (s, c) = (u * y).sin_cos();
        re += c;
        im += s;
    }
    let n = sample.len() as f64;
    num_complex::Complex64::new(re / n, im / n)
}
