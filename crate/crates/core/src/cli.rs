//! Command-line runner: JSON config in, JSON/CSV artifacts out.
//!
//! Exit codes: 0 success, 2 inconsistent classification verdict,
//! 3 numerical nonconvergence, 4 configuration error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::besov::{self, BesovParams, DyadicPartition};
use crate::catalog;
use crate::decay::{self, ClassifyConfig, FitConfig};
use crate::deconv::{self, FlatTop, GridSpec, MiseConfig};
use crate::error::{IddError, Result};
use crate::inversion;
use crate::levy::{self, best_evaluator, Family, LevyTriplet, QuadConfig};
use crate::sample::{Sampler, SamplerConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INCONSISTENT: i32 = 2;
pub const EXIT_NONCONVERGENT: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "idd", version, about = "Decay, inversion and deconvolution for infinitely divisible laws")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Characteristic function on a uniform grid
    Cf(Common),
    /// Tri-state verdicts for the decay conditions
    Classify(Common),
    /// Decay fit and two-sided bound check
    Decay(Common),
    /// Density by Fourier inversion, with smoothness probes
    Invert(Common),
    /// Deconvolution estimate and Monte-Carlo error table
    Deconvolve(Common),
    /// Besov multiplier ratios of 1/phi
    Multiplier(Common),
    /// Classification, decay and smoothness summary
    Report(Common),
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Quadrature accuracy on log|phi|
    #[arg(long)]
    tol: Option<f64>,
}

impl Cmd {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Cmd::Cf(c) => ("cf", c),
            Cmd::Classify(c) => ("classify", c),
            Cmd::Decay(c) => ("decay", c),
            Cmd::Invert(c) => ("invert", c),
            Cmd::Deconvolve(c) => ("deconvolve", c),
            Cmd::Multiplier(c) => ("multiplier", c),
            Cmd::Report(c) => ("report", c),
        }
    }
}

/// Which law to use.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LawSpec {
    /// A named catalog entry, e.g. `gamma_2_1`.
    Catalog(String),
    /// A single Lévy density family with its natural drift.
    Family(Family),
    Triplet(LevyTriplet),
}

impl LawSpec {
    pub fn resolve(&self) -> Result<LevyTriplet> {
        match self {
            LawSpec::Catalog(name) => catalog::by_name(name).map(|e| e.triplet).ok_or_else(|| {
                let names: Vec<String> = catalog::standard().into_iter().map(|e| e.name).collect();
                IddError::Config(format!("unknown catalog entry {name:?}; known: {}", names.join(", ")))
            }),
            LawSpec::Family(f) => LevyTriplet::from_family(f.clone()),
            LawSpec::Triplet(t) => LevyTriplet::new(t.sigma2, t.gamma, t.measure.clone()),
        }
    }
}

/// A real that may be written as `"inf"` in JSON.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ExtReal {
    Num(f64),
    Word(InfWord),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum InfWord {
    Inf,
}

impl ExtReal {
    pub fn value(self) -> f64 {
        match self {
            ExtReal::Num(x) => x,
            ExtReal::Word(_) => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CfSection {
    pub u_min: f64,
    pub u_max: f64,
    pub points: usize,
}

impl Default for CfSection {
    fn default() -> Self {
        Self { u_min: -1e3, u_max: 1e3, points: 500 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecaySection {
    pub u_min: f64,
    pub u_max: f64,
    pub points_per_decade: usize,
    /// Margin added to the exponent in the upper-bound check.
    pub epsilon: f64,
}

impl Default for DecaySection {
    fn default() -> Self {
        Self { u_min: 1e2, u_max: 1e5, points_per_decade: 50, epsilon: 0.05 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvertSection {
    pub n_points: usize,
    pub width: f64,
    pub center: f64,
    /// Derivative orders to probe; empty means `0..=n_max + 1`.
    pub probe_orders: Vec<u32>,
}

impl Default for InvertSection {
    fn default() -> Self {
        Self { n_points: 1 << 15, width: 64.0, center: 0.0, probe_orders: vec![] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeconvolveSection {
    /// Standard deviation of the normal target.
    pub target_sd: f64,
    /// Observations for the single estimate; simulated when absent.
    pub sample_path: Option<PathBuf>,
    pub n: usize,
    pub h: f64,
    pub kernel_inner: f64,
    pub grid: GridSpec,
    pub n_ladder: Vec<usize>,
    pub h_grid: Vec<f64>,
    pub replications: usize,
}

impl Default for DeconvolveSection {
    fn default() -> Self {
        Self {
            target_sd: 1.0,
            sample_path: None,
            n: 50_000,
            h: 0.3,
            kernel_inner: 0.8,
            grid: GridSpec { center: 0.0, width: 40.0, n: 1024 },
            n_ladder: vec![500, 5000, 50_000],
            h_grid: vec![0.2, 0.25, 0.3, 0.4, 0.5, 0.6, 0.8],
            replications: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    pub s: f64,
    pub p: ExtReal,
    pub q: ExtReal,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiplierSection {
    pub j_max: usize,
    pub width: f64,
    pub n: usize,
    /// Decay exponent; fitted from the law when absent.
    pub alpha: Option<f64>,
    pub slack: f64,
    /// Empty means `{-1,0,1} × {1,2,∞}²`.
    pub params: Vec<ParamSpec>,
}

impl Default for MultiplierSection {
    fn default() -> Self {
        Self { j_max: 12, width: 32.0, n: 1 << 18, alpha: None, slack: besov::LOSS_SLACK, params: vec![] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub law: LawSpec,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub cf: CfSection,
    #[serde(default)]
    pub decay: DecaySection,
    #[serde(default)]
    pub invert: InvertSection,
    #[serde(default)]
    pub deconvolve: DeconvolveSection,
    #[serde(default)]
    pub multiplier: MultiplierSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| IddError::Config(format!("config line {} column {}: {e}", e.line(), e.column())))
    }

    fn quad(&self) -> Result<QuadConfig> {
        let mut q = QuadConfig::default();
        if let Some(t) = self.tol {
            if !(t > 0.0 && t < 1.0) {
                return Err(IddError::Config(format!("tol = {t} outside (0, 1)")));
            }
            q.tol = t;
        }
        Ok(q)
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a RunConfig,
    result: T,
}

struct Outputs<'a> {
    dir: &'a Path,
    command: &'a str,
    config: &'a RunConfig,
}

impl Outputs<'_> {
    fn json<T: Serialize>(&self, name: &str, result: T) -> Result<()> {
        let env = Envelope { tool: "idd", version: env!("CARGO_PKG_VERSION"), command: self.command, config: self.config, result };
        let text = serde_json::to_string_pretty(&env).map_err(|e| IddError::Config(e.to_string()))?;
        self.write(name, text + "\n")
    }

    fn csv(&self, name: &str, body: &str) -> Result<()> {
        let cfg = serde_json::to_string(self.config).map_err(|e| IddError::Config(e.to_string()))?;
        let head = format!("# idd {} {}\n# config: {cfg}\n", env!("CARGO_PKG_VERSION"), self.command);
        self.write(name, head + body)
    }

    fn write(&self, name: &str, text: String) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|e| IddError::Config(format!("cannot write {}: {e}", path.display())))
    }
}

fn exit_code(e: &IddError) -> i32 {
    match e {
        IddError::Config(_) | IddError::InvalidMeasure(_) | IddError::DiffusionPresent(_) | IddError::NoSampler(_) => EXIT_CONFIG,
        _ => EXIT_NONCONVERGENT,
    }
}

/// Parses arguments, runs one command and returns the exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let (command, common) = cli.cmd.parts();
    match run(command, common) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("idd {command}: {e}");
            exit_code(&e)
        }
    }
}

fn run(command: &str, common: &Common) -> Result<i32> {
    let text = fs::read_to_string(&common.config).map_err(|e| IddError::Config(format!("cannot read {}: {e}", common.config.display())))?;
    let mut config = RunConfig::parse(&text)?;
    if common.seed.is_some() {
        config.seed = common.seed;
    }
    if common.tol.is_some() {
        config.tol = common.tol;
    }
    fs::create_dir_all(&common.out).map_err(|e| IddError::Config(format!("cannot create {}: {e}", common.out.display())))?;
    let out = Outputs { dir: &common.out, command, config: &config };
    let triplet = config.law.resolve()?;
    let quad = config.quad()?;
    match command {
        "cf" => cmd_cf(&config, &triplet, quad, &out),
        "classify" => cmd_classify(&triplet, quad, &out),
        "decay" => cmd_decay(&config, &triplet, quad, &out),
        "invert" => cmd_invert(&config, &triplet, quad, &out),
        "deconvolve" => cmd_deconvolve(&config, &triplet, &out),
        "multiplier" => cmd_multiplier(&config, &triplet, quad, &out),
        "report" => cmd_report(&config, &triplet, quad, &out),
        _ => unreachable!("clap restricts subcommands"),
    }
}

fn cmd_cf(config: &RunConfig, t: &LevyTriplet, quad: QuadConfig, out: &Outputs) -> Result<i32> {
    let c = &config.cf;
    if c.points < 2 || !(c.u_max > c.u_min) {
        return Err(IddError::Config("cf needs points >= 2 and u_max > u_min".into()));
    }
    let mut body = String::from("u,re,im,log_abs\n");
    for i in 0..c.points {
        let u = c.u_min + (c.u_max - c.u_min) * i as f64 / (c.points - 1) as f64;
        let psi = levy::characteristic_exponent(t, u, &quad)?;
        let phi = psi.exp();
        writeln!(body, "{u:.12e},{:.12e},{:.12e},{:.12e}", phi.re, phi.im, psi.re).expect("string write");
    }
    out.csv("cf.csv", &body)?;
    out.json("cf.json", serde_json::json!({ "closed_form": t.has_closed_form(), "points": c.points }))?;
    Ok(EXIT_OK)
}

fn classify(t: &LevyTriplet, quad: QuadConfig) -> Result<decay::ClassificationVerdict> {
    let k = decay::k_of(t)?;
    let cf = best_evaluator(t, quad);
    Ok(decay::classify(t, &k, cf.as_ref(), &ClassifyConfig::default()))
}

fn cmd_classify(t: &LevyTriplet, quad: QuadConfig, out: &Outputs) -> Result<i32> {
    let v = classify(t, quad)?;
    out.json("classify.json", &v)?;
    Ok(if v.consistent { EXIT_OK } else { EXIT_INCONSISTENT })
}

#[derive(Serialize)]
struct DecayArtifact {
    fit: decay::DecayFit,
    bounds: decay::DecayReport,
}

fn decay_run(config: &RunConfig, t: &LevyTriplet, quad: QuadConfig) -> Result<DecayArtifact> {
    let d = &config.decay;
    let cf = best_evaluator(t, quad);
    let fit_cfg = FitConfig { points_per_decade: d.points_per_decade, ..FitConfig::default() };
    let fit = decay::estimate_decay_exponent(cf.as_ref(), d.u_min, d.u_max, &fit_cfg)?;
    let k = decay::k_of(t)?;
    let grid = decay::geometric_grid(d.u_min, d.u_max, d.points_per_decade);
    let bounds = decay::verify_bounds(&k, cf.as_ref(), d.epsilon, &grid)?;
    Ok(DecayArtifact { fit, bounds })
}

fn cmd_decay(config: &RunConfig, t: &LevyTriplet, quad: QuadConfig, out: &Outputs) -> Result<i32> {
    let a = decay_run(config, t, quad)?;
    let mut body = String::from("u,log_abs_phi,lower_bound,upper_bound,sharp_bound\n");
    for r in &a.bounds.rows {
        writeln!(body, "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}", r.u, r.log_abs_phi, r.lower_bound, r.upper_bound, r.sharp_bound).expect("string write");
    }
    out.csv("decay.csv", &body)?;
    out.json("decay.json", &a)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct InvertArtifact {
    mass: f64,
    min_value: f64,
    tail_estimate: f64,
    tail_ok: bool,
    negativity_ok: bool,
    spectral_order: inversion::SpectralOrder,
    probes: Vec<inversion::ProbeRecord>,
}

fn cmd_invert(config: &RunConfig, t: &LevyTriplet, quad: QuadConfig, out: &Outputs) -> Result<i32> {
    let c = &config.invert;
    let cf = best_evaluator(t, quad);
    let u_max = std::f64::consts::PI * c.n_points as f64 / c.width;
    let coarse = inversion::invert_cf(cf.as_ref(), u_max, c.n_points, c.center)?;
    let fine = inversion::invert_cf(cf.as_ref(), 2.0 * u_max, 2 * c.n_points, c.center)?;
    let order = inversion::spectral_smoothness_order(cf.as_ref(), None)?;
    let orders: Vec<u32> = if c.probe_orders.is_empty() {
        (0..=order.n_max.map_or(0, |n| n + 1).min(inversion::ORDER_CAP)).collect()
    } else {
        c.probe_orders.clone()
    };
    let probes = orders.iter().map(|&n| inversion::spatial_smoothness_probe(&coarse.density, &fine.density, n)).collect::<Result<Vec<_>>>()?;
    let sanitized = coarse.sanitized();
    let mut body = String::from("x,f,f_sanitized\n");
    for (k, v) in coarse.density.values.iter().enumerate() {
        writeln!(body, "{:.12e},{:.12e},{:.12e}", coarse.density.x(k), v.re, sanitized[k]).expect("string write");
    }
    out.csv("density.csv", &body)?;
    out.json(
        "invert.json",
        InvertArtifact {
            mass: coarse.mass,
            min_value: coarse.min_value,
            tail_estimate: coarse.tail_estimate,
            tail_ok: coarse.tail_ok(),
            negativity_ok: coarse.negativity_ok(),
            spectral_order: order,
            probes,
        },
    )?;
    Ok(EXIT_OK)
}

pub fn read_sample(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| IddError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let s = line.trim();
        if s.is_empty() {
            continue;
        }
        let v: f64 = s.parse().map_err(|_| IddError::Config(format!("{} line {}: not a number: {s:?}", path.display(), i + 1)))?;
        out.push(v);
    }
    if out.is_empty() {
        return Err(IddError::Config(format!("{} holds no observations", path.display())));
    }
    Ok(out)
}

#[derive(Serialize)]
struct DeconvolveArtifact {
    n: usize,
    h: f64,
    l2_error: f64,
    best: Vec<(usize, f64, f64)>,
    mise: deconv::MiseTable,
}

fn cmd_deconvolve(config: &RunConfig, t: &LevyTriplet, out: &Outputs) -> Result<i32> {
    let seed = config.seed.ok_or_else(|| IddError::Config("deconvolve is stochastic: set `seed` in the config or pass --seed".into()))?;
    let c = &config.deconvolve;
    let kernel = FlatTop { inner: c.kernel_inner };
    if !(kernel.inner > 0.0 && kernel.inner < 1.0) {
        return Err(IddError::Config(format!("kernel_inner = {} outside (0, 1)", kernel.inner)));
    }
    let noise = best_evaluator(t, QuadConfig::default());
    let y = match &c.sample_path {
        Some(p) => read_sample(p)?,
        None => {
            let sampler = Sampler::new(t, &SamplerConfig::default())?;
            deconv::draw_observations(c.target_sd, &sampler, c.n, seed)
        }
    };
    let est = deconv::deconv_estimate(&y, noise.as_ref(), &kernel, c.h, &c.grid)?;
    let truth = |x: f64| (-(x / c.target_sd).powi(2) / 2.0).exp() / (c.target_sd * (2.0 * std::f64::consts::PI).sqrt());
    let l2 = (est.values.iter().enumerate().map(|(k, v)| (v.re - truth(est.x(k))).powi(2)).sum::<f64>() * est.step).sqrt();
    let mise_cfg = MiseConfig {
        target_sd: c.target_sd,
        n_ladder: c.n_ladder.clone(),
        h_grid: c.h_grid.clone(),
        replications: c.replications,
        seed,
        grid: c.grid,
    };
    let table = deconv::mise_experiment(t, &mise_cfg, &kernel)?;
    let mut body = String::from("x,f_hat\n");
    for (k, v) in est.values.iter().enumerate() {
        writeln!(body, "{:.12e},{:.12e}", est.x(k), v.re).expect("string write");
    }
    out.csv("estimate.csv", &body)?;
    out.csv("mise.csv", &table.to_csv())?;
    out.json("deconvolve.json", DeconvolveArtifact { n: y.len(), h: c.h, l2_error: l2, best: table.best(), mise: table })?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SupRow {
    s: f64,
    p: f64,
    q: f64,
    log_sup: f64,
    log_sup_without_top_two: f64,
    longest_doubling_run: usize,
}

#[derive(Serialize)]
struct MultiplierArtifact {
    alpha: f64,
    loss: f64,
    summary: Vec<SupRow>,
}

fn cmd_multiplier(config: &RunConfig, t: &LevyTriplet, quad: QuadConfig, out: &Outputs) -> Result<i32> {
    let c = &config.multiplier;
    let noise = best_evaluator(t, quad);
    let alpha = match c.alpha {
        Some(a) => a,
        None => decay::estimate_decay_exponent(noise.as_ref(), 1e2, 1e5, &FitConfig::default())?.alpha_hat.max(0.0),
    };
    let params: Vec<BesovParams> = if c.params.is_empty() {
        BesovParams::standard_grid()
    } else {
        c.params.iter().map(|p| BesovParams::new(p.s, p.p.value(), p.q.value())).collect::<Result<_>>()?
    };
    let ladder = besov::test_ladder(c.j_max, c.width, c.n)?;
    let part = DyadicPartition::for_grid(&ladder[0]);
    let report = besov::multiplier_ratio(noise.as_ref(), alpha + c.slack, &ladder, &params, &part)?;
    let summary = params
        .iter()
        .map(|p| SupRow {
            s: p.s,
            p: p.p,
            q: p.q,
            log_sup: report.log_sup(p, c.j_max),
            log_sup_without_top_two: report.log_sup(p, c.j_max.saturating_sub(2)),
            longest_doubling_run: report.longest_growth_run(p, 2.0),
        })
        .collect();
    out.csv("multiplier.csv", &report.to_csv())?;
    out.json("multiplier.json", MultiplierArtifact { alpha, loss: report.loss, summary })?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ReportArtifact {
    verdict: decay::ClassificationVerdict,
    decay: Option<DecayArtifact>,
    decay_skipped: Option<String>,
    spectral_order: Option<inversion::SpectralOrder>,
}

fn cmd_report(config: &RunConfig, t: &LevyTriplet, quad: QuadConfig, out: &Outputs) -> Result<i32> {
    let verdict = classify(t, quad)?;
    let (decay, decay_skipped) = match decay_run(config, t, quad) {
        Ok(a) => (Some(a), None),
        Err(e @ (IddError::Config(_) | IddError::InvalidMeasure(_))) => return Err(e),
        Err(e) => (None, Some(e.to_string())),
    };
    let cf = best_evaluator(t, quad);
    let spectral_order = inversion::spectral_smoothness_order(cf.as_ref(), None).ok();
    let consistent = verdict.consistent;
    out.json("report.json", ReportArtifact { verdict, decay, decay_skipped, spectral_order })?;
    Ok(if consistent { EXIT_OK } else { EXIT_INCONSISTENT })
}
