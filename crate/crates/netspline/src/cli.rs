//! Command-line interface.
//!
//! Settings come from flags, then from the `--config` JSON file, then from
//! built-in defaults. The knot distance and the bin width have no defaults.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use netspline_core::builtin::simple_network;
use netspline_core::sim::{CoordinateFunction, StudyConfig, TargetIntensity};
use netspline_core::{
    fit_intensity, FitConfig, IntensityRatio, IntensitySpec, Network, NetworkPoint, PenaltyOrder, PenaltySet,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{AppError, Result};
use crate::io;
use crate::study::{self, StudyPaths};

/// Name accepted in place of a network path for the built-in test network.
pub const BUILTIN_NETWORK: &str = "builtin";

#[derive(Debug, Parser)]
#[command(name = "netspline", version, about = "Penalized spline intensity estimation on networks")]
pub struct Cli {
    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    /// JSON file with settings; explicit flags take precedence.
    #[arg(long, global = true, value_name = "JSON")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the intensity of a point pattern.
    Fit(FitCmd),
    /// Evaluate a stored fit.
    Eval(EvalCmd),
    /// Simulate a point pattern.
    Simulate(SimulateCmd),
    /// Run a replicated simulation study.
    Study(StudyCmd),
    /// Mean ISE over a grid of knot distances and bin widths.
    Sensitivity(SensitivityCmd),
    /// Ratio of two fitted intensities.
    Ratio(RatioCmd),
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// Overall knot distance.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Overall bin width (must not exceed delta).
    #[arg(long)]
    pub h: Option<f64>,
    /// Penalty order (1 or 2).
    #[arg(long)]
    pub order: Option<u8>,
    /// Initial smoothing parameter.
    #[arg(long)]
    pub rho_init: Option<f64>,
    /// Use this smoothing parameter instead of selecting one.
    #[arg(long)]
    pub fixed_rho: Option<f64>,
    #[arg(long)]
    pub rho_cap: Option<f64>,
    #[arg(long)]
    pub max_outer: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitCmd {
    /// Network JSON file, or `builtin`.
    #[arg(long)]
    pub network: String,
    /// Point pattern CSV.
    #[arg(long)]
    pub points: PathBuf,
    /// Output fit JSON.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Also write an intensity dump CSV.
    #[arg(long)]
    pub dump: Option<PathBuf>,
    /// Sample spacing of the dump (default: bin midpoints).
    #[arg(long)]
    pub step: Option<f64>,
    /// Snapping tolerance for planar points.
    #[arg(long)]
    pub snap_tolerance: Option<f64>,
    /// Write the basis description CSV.
    #[arg(long)]
    pub basis_out: Option<PathBuf>,
    /// Write adjacency, difference and penalty matrices as triplets.
    #[arg(long)]
    pub penalty_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalCmd {
    /// Fit JSON written by `fit`.
    #[arg(long)]
    pub fit: PathBuf,
    /// Evaluate at these points instead of a regular grid.
    #[arg(long, conflicts_with = "step")]
    pub points: Option<PathBuf>,
    /// Sample spacing along edges (default: bin midpoints).
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub snap_tolerance: Option<f64>,
    /// Output CSV (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateCmd {
    #[arg(long)]
    pub network: String,
    /// `uniform`, `exp-decay`, or an intensity JSON file.
    #[arg(long)]
    pub spec: Option<String>,
    /// Number of points.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Quadrature width for non-uniform intensities.
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StudyCmd {
    #[arg(long)]
    pub network: String,
    #[arg(long)]
    pub spec: Option<String>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    /// Replicates per sample size.
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Continue from the replicate log in the output directory.
    #[arg(long)]
    pub resume: bool,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SensitivityCmd {
    #[arg(long)]
    pub network: String,
    #[arg(long)]
    pub spec: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated knot distances (table rows).
    #[arg(long, value_delimiter = ',')]
    pub deltas: Option<Vec<f64>>,
    /// Comma-separated bin widths (table columns).
    #[arg(long, value_delimiter = ',')]
    pub hs: Option<Vec<f64>>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub order: Option<u8>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RatioCmd {
    /// Numerator fit JSON.
    #[arg(long)]
    pub num: PathBuf,
    /// Denominator fit JSON.
    #[arg(long)]
    pub den: PathBuf,
    /// Minimum denominator intensity for a defined ratio.
    #[arg(long)]
    pub floor: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Intensity given by name or inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpecSetting {
    Name(String),
    Spec(IntensitySpec),
}

/// Contents of a `--config` file; every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub delta: Option<f64>,
    pub h: Option<f64>,
    pub order: Option<u8>,
    pub rho_init: Option<f64>,
    pub fixed_rho: Option<f64>,
    pub rho_tol: Option<f64>,
    pub rho_cap: Option<f64>,
    pub max_outer: Option<usize>,
    pub max_newton: Option<usize>,
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub n_list: Option<Vec<usize>>,
    pub replicates: Option<usize>,
    pub deltas: Option<Vec<f64>>,
    pub hs: Option<Vec<f64>>,
    pub floor: Option<f64>,
    pub step: Option<f64>,
    pub snap_tolerance: Option<f64>,
    pub spec: Option<SpecSetting>,
    pub threads: Option<usize>,
}

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_REPLICATES: usize = 100;
pub const DEFAULT_SNAP_TOLERANCE: f64 = 1e-6;

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = io::read_text(path)?;
        serde_json::from_str(&text).map_err(|e| AppError::format(path, Some(e.line() as u64), e.to_string()))
    }

    fn apply_model(&mut self, m: &ModelArgs) {
        override_with(&mut self.delta, m.delta);
        override_with(&mut self.h, m.h);
        override_with(&mut self.order, m.order);
        override_with(&mut self.rho_init, m.rho_init);
        override_with(&mut self.fixed_rho, m.fixed_rho);
        override_with(&mut self.rho_cap, m.rho_cap);
        override_with(&mut self.max_outer, m.max_outer);
    }

    /// Fit configuration; δ and h must be set.
    pub fn fit_config(&self) -> Result<FitConfig> {
        let delta = self.delta.ok_or_else(|| AppError::Usage("--delta is required".into()))?;
        let h = self.h.ok_or_else(|| AppError::Usage("--h is required".into()))?;
        let mut cfg = FitConfig::new(delta, h);
        if let Some(order) = self.order {
            cfg.order = PenaltyOrder::try_from(order).map_err(|e| AppError::Usage(e.to_string()))?;
        }
        if let Some(v) = self.rho_init {
            cfg.rho_init = v;
        }
        if let Some(v) = self.fixed_rho {
            cfg = cfg.with_fixed_rho(v);
        }
        if let Some(v) = self.rho_tol {
            cfg.rho_tol = v;
        }
        if let Some(v) = self.rho_cap {
            cfg.rho_cap = v;
        }
        if let Some(v) = self.max_outer {
            cfg.max_outer = v;
        }
        if let Some(v) = self.max_newton {
            cfg.max_newton = v;
        }
        cfg.validate().map_err(|e| AppError::Usage(e.to_string()))?;
        Ok(cfg)
    }

    pub fn spec(&self) -> Result<IntensitySpec> {
        match &self.spec {
            None => Ok(IntensitySpec::Uniform),
            Some(SpecSetting::Spec(s)) => Ok(s.clone()),
            Some(SpecSetting::Name(name)) => parse_spec(name),
        }
    }

    fn snap_tolerance(&self) -> f64 {
        self.snap_tolerance.unwrap_or(DEFAULT_SNAP_TOLERANCE)
    }
}

fn override_with<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

/// `uniform`, a registered function name, or a path to an intensity JSON.
pub fn parse_spec(s: &str) -> Result<IntensitySpec> {
    if s == "uniform" {
        return Ok(IntensitySpec::Uniform);
    }
    if let Some(function) = CoordinateFunction::from_name(s) {
        return Ok(IntensitySpec::CoordinateFunction { function });
    }
    let path = Path::new(s);
    if !path.exists() {
        return Err(AppError::Usage(format!(
            "unknown intensity `{s}`: expected `uniform`, `exp-decay` or a JSON file"
        )));
    }
    let text = io::read_text(path)?;
    serde_json::from_str(&text).map_err(|e| AppError::format(path, Some(e.line() as u64), e.to_string()))
}

pub fn load_network(arg: &str) -> Result<Network> {
    if arg == BUILTIN_NETWORK {
        Ok(simple_network())
    } else {
        io::read_network(Path::new(arg))
    }
}

fn log_settings(command: &str, settings: &impl Serialize) {
    log::info!(
        "{command}: resolved settings {}",
        serde_json::to_string(settings).unwrap_or_default()
    );
}

fn emit(value: serde_json::Value) {
    println!("{value}");
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => io::write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(AppError::Usage("--threads must be positive".into()));
        }
        b = b.num_threads(t);
    }
    b.build().map_err(|e| AppError::Usage(e.to_string()))
}

pub fn run(cli: Cli) -> Result<()> {
    let mut settings = Settings::load(cli.config.as_deref())?;
    match cli.command {
        Command::Fit(cmd) => cmd_fit(cmd, settings),
        Command::Eval(cmd) => {
            override_with(&mut settings.step, cmd.step);
            override_with(&mut settings.snap_tolerance, cmd.snap_tolerance);
            cmd_eval(cmd, settings)
        }
        Command::Simulate(cmd) => cmd_simulate(cmd, settings),
        Command::Study(cmd) => cmd_study(cmd, settings),
        Command::Sensitivity(cmd) => cmd_sensitivity(cmd, settings),
        Command::Ratio(cmd) => cmd_ratio(cmd, settings),
    }
}

fn cmd_fit(cmd: FitCmd, mut s: Settings) -> Result<()> {
    s.apply_model(&cmd.model);
    override_with(&mut s.step, cmd.step);
    override_with(&mut s.snap_tolerance, cmd.snap_tolerance);
    let cfg = s.fit_config()?;
    log_settings("fit", &cfg);
    let net = load_network(&cmd.network)?;
    let points = io::read_points(&cmd.points, &net, s.snap_tolerance())?;
    let fit = fit_intensity(&net, &points, &cfg)?;
    io::write_fit(&cmd.out, &net, &fit)?;
    if let Some(dump) = &cmd.dump {
        let locations = match s.step {
            Some(step) => io::sample_locations(&net, step)?,
            None => io::bin_midpoints(&net, cfg.h),
        };
        io::write_text(dump, &io::intensity_csv(&net, &fit, &locations)?)?;
    }
    if let Some(p) = &cmd.basis_out {
        io::write_text(p, &io::basis_csv(&fit.basis))?;
    }
    if let Some(p) = &cmd.penalty_out {
        io::write_text(p, &io::penalty_triplets(&PenaltySet::new(&fit.basis)))?;
    }
    if fit.report.rho_capped {
        log::info!("smoothing parameter reached the cap: the fit is effectively constant along the penalty");
    } else if !fit.report.outer_converged {
        log::warn!("smoothing parameter iteration stopped after {} steps", fit.report.outer_iterations);
    }
    emit(json!({
        "n": fit.n,
        "dim": fit.basis.dim(),
        "rho": fit.rho,
        "edf": fit.edf,
        "rho_capped": fit.report.rho_capped,
        "converged": fit.report.outer_converged,
        "outer_iterations": fit.report.outer_iterations,
        "newton_iterations": fit.report.newton_iterations,
        "fitted_mass": fit.fitted_mass,
    }));
    Ok(())
}

fn cmd_eval(cmd: EvalCmd, s: Settings) -> Result<()> {
    let (net, fit) = io::read_fit(&cmd.fit)?;
    let locations: Vec<NetworkPoint> = match (&cmd.points, s.step) {
        (Some(p), _) => io::read_points(p, &net, s.snap_tolerance())?,
        (None, Some(step)) => io::sample_locations(&net, step)?,
        (None, None) => io::bin_midpoints(&net, fit.config.h),
    };
    write_or_print(cmd.out.as_deref(), &io::intensity_csv(&net, &fit, &locations)?)
}

fn cmd_simulate(cmd: SimulateCmd, mut s: Settings) -> Result<()> {
    override_with(&mut s.n, cmd.n);
    override_with(&mut s.seed, cmd.seed);
    override_with(&mut s.h, cmd.h);
    if let Some(spec) = cmd.spec {
        s.spec = Some(SpecSetting::Name(spec));
    }
    let n = s.n.ok_or_else(|| AppError::Usage("--n is required".into()))?;
    let seed = s.seed.unwrap_or(DEFAULT_SEED);
    let spec = s.spec()?;
    let net = load_network(&cmd.network)?;
    let h = s.h.unwrap_or(net.total_length() / 2000.0);
    log_settings("simulate", &json!({ "spec": spec, "n": n, "seed": seed, "quadrature_h": h }));
    let target = TargetIntensity::new(&net, &spec, h)?;
    let points = target.sample(n, seed);
    io::write_points(&cmd.out, &points)?;
    emit(json!({ "n": n, "seed": seed, "normalizer": target.normalizer() }));
    Ok(())
}

fn cmd_study(cmd: StudyCmd, mut s: Settings) -> Result<()> {
    s.apply_model(&cmd.model);
    override_with(&mut s.n_list, cmd.n_list);
    override_with(&mut s.replicates, cmd.replicates);
    override_with(&mut s.seed, cmd.seed);
    override_with(&mut s.threads, cmd.threads);
    if let Some(spec) = cmd.spec {
        s.spec = Some(SpecSetting::Name(spec));
    }
    let config = StudyConfig {
        network_id: cmd.network.clone(),
        spec: s.spec()?,
        fit: s.fit_config()?,
        n_values: s.n_list.clone().ok_or_else(|| AppError::Usage("--n-list is required".into()))?,
        replicates: s.replicates.unwrap_or(DEFAULT_REPLICATES),
        seed: s.seed.unwrap_or(DEFAULT_SEED),
    };
    config.validate().map_err(|e| AppError::Usage(e.to_string()))?;
    log_settings("study", &config);
    let net = load_network(&cmd.network)?;
    let paths = StudyPaths::in_dir(&cmd.out);
    let pool = thread_pool(s.threads)?;
    let report = pool.install(|| study::run_study(&net, &config, Some(&paths), cmd.resume))?;
    for row in &report.summary {
        emit(json!({
            "n": row.n,
            "mean_ise": row.mean,
            "sd_ise": row.sd,
            "completed": row.completed,
            "failed": row.failed,
        }));
    }
    Ok(())
}

fn cmd_sensitivity(cmd: SensitivityCmd, mut s: Settings) -> Result<()> {
    override_with(&mut s.n, cmd.n);
    override_with(&mut s.deltas, cmd.deltas);
    override_with(&mut s.hs, cmd.hs);
    override_with(&mut s.replicates, cmd.replicates);
    override_with(&mut s.seed, cmd.seed);
    override_with(&mut s.order, cmd.order);
    override_with(&mut s.threads, cmd.threads);
    if let Some(spec) = cmd.spec {
        s.spec = Some(SpecSetting::Name(spec));
    }
    let n = s.n.ok_or_else(|| AppError::Usage("--n is required".into()))?;
    let deltas = s.deltas.clone().ok_or_else(|| AppError::Usage("--deltas is required".into()))?;
    let hs = s.hs.clone().ok_or_else(|| AppError::Usage("--hs is required".into()))?;
    if deltas.is_empty() || hs.is_empty() {
        return Err(AppError::Usage("--deltas and --hs must not be empty".into()));
    }
    let smallest = deltas.iter().chain(&hs).cloned().fold(f64::INFINITY, f64::min);
    // Cell settings are validated per cell; δ = h = smallest checks the rest.
    let base = Settings {
        delta: Some(smallest),
        h: Some(smallest),
        ..s.clone()
    }
    .fit_config()?;
    let spec = s.spec()?;
    let replicates = s.replicates.unwrap_or(DEFAULT_REPLICATES);
    let seed = s.seed.unwrap_or(DEFAULT_SEED);
    log_settings(
        "sensitivity",
        &json!({ "spec": spec, "n": n, "deltas": deltas, "hs": hs, "replicates": replicates, "seed": seed, "fit": base }),
    );
    let net = load_network(&cmd.network)?;
    let pool = thread_pool(s.threads)?;
    let table = pool.install(|| {
        study::sensitivity_grid(&net, &spec, &cmd.network, n, &deltas, &hs, replicates, seed, &base)
    })?;
    io::write_text(&cmd.out.join("sensitivity.csv"), &study::sensitivity_csv(&table))?;
    io::write_text(&cmd.out.join("sensitivity.json"), &study::sensitivity_json(&table))?;
    for (delta, row) in table.deltas.iter().zip(&table.cells) {
        for (h, cell) in table.hs.iter().zip(row) {
            if let Some(c) = cell {
                emit(json!({ "delta": delta, "h": h, "mean_ise": c.mean, "sd_ise": c.sd }));
            }
        }
    }
    Ok(())
}

fn cmd_ratio(cmd: RatioCmd, mut s: Settings) -> Result<()> {
    override_with(&mut s.floor, cmd.floor);
    override_with(&mut s.step, cmd.step);
    let floor = s.floor.ok_or_else(|| AppError::Usage("--floor is required".into()))?;
    let (net_num, num) = io::read_fit(&cmd.num)?;
    let (net_den, den) = io::read_fit(&cmd.den)?;
    if net_num != net_den {
        return Err(AppError::Usage(
            "numerator and denominator fits were computed on different networks".into(),
        ));
    }
    let ratio = IntensityRatio::new(&num, &den, floor).map_err(|e| AppError::Usage(e.to_string()))?;
    let locations = match s.step {
        Some(step) => io::sample_locations(&net_num, step)?,
        None => io::bin_midpoints(&net_num, num.config.h.min(den.config.h)),
    };
    let supported = ratio.supported_fraction(&locations);
    if supported == 0.0 {
        log::warn!("the ratio is undefined everywhere: the denominator never reaches the floor {floor}");
    }
    write_or_print(cmd.out.as_deref(), &io::ratio_csv(&net_num, &ratio, &locations)?)?;
    if cmd.out.is_some() {
        emit(json!({ "floor": floor, "supported_fraction": supported }));
    }
    Ok(())
}
