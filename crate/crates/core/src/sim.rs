//! Point pattern simulation, integrated squared error and replicated
//! studies.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::model::{fit_intensity, BinLayout, FitConfig, FitResult};
use crate::network::{Network, NetworkPoint};

/// Registered functions of the embedded plane coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoordinateFunction {
    /// `√y · exp(−x·y)`.
    #[serde(rename = "exp-decay")]
    ExpDecay,
}

impl CoordinateFunction {
    pub fn name(self) -> &'static str {
        match self {
            CoordinateFunction::ExpDecay => "exp-decay",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "exp-decay" => Some(CoordinateFunction::ExpDecay),
            _ => None,
        }
    }

    pub fn eval(self, x: f64, y: f64) -> f64 {
        match self {
            CoordinateFunction::ExpDecay => math::sqrt(y.max(0.0)) * math::exp(-x * y),
        }
    }
}

/// Shape of a target intensity; the scale is supplied separately as the
/// expected number of points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum IntensitySpec {
    Uniform,
    CoordinateFunction { function: CoordinateFunction },
    /// Constant relative rate per edge.
    PerEdge { rates: Vec<f64> },
}

impl IntensitySpec {
    pub fn exp_decay() -> Self {
        IntensitySpec::CoordinateFunction {
            function: CoordinateFunction::ExpDecay,
        }
    }

    pub fn label(&self) -> String {
        match self {
            IntensitySpec::Uniform => "uniform".into(),
            IntensitySpec::CoordinateFunction { function } => function.name().into(),
            IntensitySpec::PerEdge { .. } => "per-edge".into(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    edge: usize,
    start: f64,
    width: f64,
}

/// An [`IntensitySpec`] resolved on a network: `φ_n(z) = n·f(z)/C` with
/// `C = ∫ f`.
#[derive(Debug, Clone)]
pub struct TargetIntensity {
    spec: IntensitySpec,
    net: Network,
    normalizer: f64,
    edge_mass: Vec<f64>,
    cells: Vec<Cell>,
    /// Cumulative unit mass at the end of each cell.
    cumulative: Vec<f64>,
}

impl TargetIntensity {
    /// Resolves `spec` on `net`, integrating with the midpoint rule on the bin
    /// grid of width `h` refined 4×.
    pub fn new(net: &Network, spec: &IntensitySpec, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Contract(format!("quadrature width must be positive, got {h}")));
        }
        if let IntensitySpec::PerEdge { rates } = spec {
            if rates.len() != net.edge_count() {
                return Err(Error::Contract(format!(
                    "{} edge rates given for {} edges",
                    rates.len(),
                    net.edge_count()
                )));
            }
            if rates.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
                return Err(Error::Validation("edge rates must be finite and non-negative".into()));
            }
        }
        let mut target = Self {
            spec: spec.clone(),
            net: net.clone(),
            normalizer: 1.0,
            edge_mass: Vec::new(),
            cells: Vec::new(),
            cumulative: Vec::new(),
        };
        let grid = BinLayout::with_width(net, h).refined(4);
        let mut edge_mass = alloc::vec![0.0; net.edge_count()];
        let mut total = 0.0;
        for (m, bins) in grid.edges.iter().enumerate() {
            for k in 0..bins.count {
                let z = grid.midpoint(m, k);
                let f = target.shape(&z);
                if !(f >= 0.0 && f.is_finite()) {
                    return Err(Error::Validation(format!(
                        "target intensity is negative or not finite on edge {m}"
                    )));
                }
                let mass = f * bins.width;
                edge_mass[m] += mass;
                total += mass;
                target.cells.push(Cell {
                    edge: m,
                    start: k as f64 * bins.width,
                    width: bins.width,
                });
                target.cumulative.push(total);
            }
        }
        if !(total > 0.0) {
            return Err(Error::Validation("target intensity integrates to zero".into()));
        }
        for c in &mut target.cumulative {
            *c /= total;
        }
        target.normalizer = total;
        target.edge_mass = edge_mass.into_iter().map(|m| m / total).collect();
        Ok(target)
    }

    pub fn spec(&self) -> &IntensitySpec {
        &self.spec
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    /// `C = ∫ f` over the network.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// Probability that a point falls on each edge.
    pub fn edge_probabilities(&self) -> &[f64] {
        &self.edge_mass
    }

    /// Unnormalized shape `f(z)`.
    fn shape(&self, z: &NetworkPoint) -> f64 {
        match &self.spec {
            IntensitySpec::Uniform => 1.0,
            IntensitySpec::CoordinateFunction { function } => {
                let c = self.net.embed(z).expect("point on network");
                function.eval(c[0], c[1])
            }
            IntensitySpec::PerEdge { rates } => rates[z.edge],
        }
    }

    /// Density `f(z)/C`, integrating to one.
    pub fn density(&self, z: &NetworkPoint) -> f64 {
        self.shape(z) / self.normalizer
    }

    /// Intensity `n·f(z)/C`.
    pub fn intensity(&self, z: &NetworkPoint, n: usize) -> f64 {
        n as f64 * self.density(z)
    }

    /// `n` independent draws from the density.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<NetworkPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        if matches!(self.spec, IntensitySpec::Uniform) {
            let total = self.net.total_length();
            for _ in 0..n {
                let mut u = rng.random::<f64>() * total;
                let mut edge = self.net.edge_count() - 1;
                for (m, e) in self.net.edges().iter().enumerate() {
                    if u < e.length() {
                        edge = m;
                        break;
                    }
                    u -= e.length();
                }
                let len = self.net.edge(edge).length();
                out.push(NetworkPoint::new(edge, (rng.random::<f64>() * len).min(len)));
            }
            return out;
        }
        for _ in 0..n {
            let u: f64 = rng.random();
            let i = self.cumulative.partition_point(|&c| c <= u).min(self.cells.len() - 1);
            let cell = self.cells[i];
            let len = self.net.edge(cell.edge).length();
            let offset = (cell.start + rng.random::<f64>() * cell.width).min(len);
            out.push(NetworkPoint::new(cell.edge, offset));
        }
        out
    }
}

/// Samples `n` points from `target` with a reproducible seed.
pub fn sample_points(target: &TargetIntensity, n: usize, seed: u64) -> Vec<NetworkPoint> {
    target.sample(n, seed)
}

/// `(1/n²) ∫ (φ − φ̂)²` by the midpoint rule on the fit's bin grid refined
/// 4×.
pub fn ise(fit: &FitResult, target: &TargetIntensity, n: usize) -> f64 {
    ise_refined(fit, target, n, 4)
}

/// [`ise`] with a chosen refinement of the bin grid.
pub fn ise_refined(fit: &FitResult, target: &TargetIntensity, n: usize, factor: usize) -> f64 {
    let grid = BinLayout::with_width(target.network(), fit.config.h).refined(factor);
    let mut sum = 0.0;
    for (z, w) in grid.bins() {
        let diff = target.intensity(&z, n) - fit.intensity(&z);
        sum += diff * diff * w;
    }
    let n = n as f64;
    sum / (n * n)
}

/// Seed of replicate `s` at sample size `n`.
pub fn replicate_seed(seed: u64, n: usize, s: usize) -> u64 {
    seed ^ math::mix64(math::mix64(n as u64) ^ s as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub network_id: String,
    pub spec: IntensitySpec,
    pub fit: FitConfig,
    pub n_values: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        self.fit.validate()?;
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return Err(Error::Contract("sample sizes must be positive".into()));
        }
        if self.replicates == 0 {
            return Err(Error::Contract("replicate count must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of one simulated replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replicate {
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
    /// `None` when the fit failed.
    pub ise: Option<f64>,
    pub rho_hat: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

impl Replicate {
    pub fn failed(&self) -> bool {
        self.ise.is_none()
    }
}

/// Samples, fits and scores one replicate.
pub fn run_replicate(target: &TargetIntensity, fit: &FitConfig, n: usize, s: usize, seed: u64) -> Replicate {
    let rseed = replicate_seed(seed, n, s);
    let points = target.sample(n, rseed);
    let mut out = Replicate {
        n,
        replicate: s,
        seed: rseed,
        ise: None,
        rho_hat: None,
        converged: false,
        error: None,
    };
    match fit_intensity(target.network(), &points, fit) {
        Ok(f) => {
            let mass_error = (f.fitted_mass - n as f64).abs();
            if mass_error > 1e-8 * n as f64 {
                out.error = Some(format!("fitted mass {} differs from n = {n}", f.fitted_mass));
            } else {
                out.ise = Some(ise(&f, target, n));
                out.rho_hat = Some(f.rho);
                out.converged = f.converged();
            }
        }
        Err(e) => out.error = Some(e.to_string()),
    }
    if let Some(e) = &out.error {
        log::warn!("replicate n = {n}, s = {s} failed: {e}");
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation.
    pub sd: f64,
    pub completed: usize,
    pub failed: usize,
}

/// Mean and sample standard deviation.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, math::sqrt(ss / (k - 1.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: StudyConfig,
    /// Sorted by `(n, replicate)`.
    pub samples: Vec<Replicate>,
    pub summary: Vec<SummaryRow>,
}

impl StudyReport {
    /// Aggregates replicate outcomes, failing when more than 5% of the
    /// replicates for some `n` failed.
    pub fn from_replicates(config: StudyConfig, mut samples: Vec<Replicate>) -> Result<Self> {
        samples.sort_by_key(|r| (r.n, r.replicate));
        let mut summary = Vec::with_capacity(config.n_values.len());
        for &n in &config.n_values {
            let rows: Vec<&Replicate> = samples.iter().filter(|r| r.n == n).collect();
            let ises: Vec<f64> = rows.iter().filter_map(|r| r.ise).collect();
            let failed = rows.len() - ises.len();
            if failed * 20 > rows.len() {
                return Err(Error::Study {
                    n,
                    failed,
                    total: rows.len(),
                });
            }
            let (mean, sd) = mean_sd(&ises);
            summary.push(SummaryRow {
                n,
                mean,
                sd,
                completed: ises.len(),
                failed,
            });
        }
        Ok(Self {
            config,
            samples,
            summary,
        })
    }

    pub fn row(&self, n: usize) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.n == n)
    }
}

/// Runs a study sequentially.
pub fn run_study(net: &Network, config: &StudyConfig) -> Result<StudyReport> {
    config.validate()?;
    let target = TargetIntensity::new(net, &config.spec, config.fit.h)?;
    let mut samples = Vec::with_capacity(config.n_values.len() * config.replicates);
    for &n in &config.n_values {
        for s in 0..config.replicates {
            samples.push(run_replicate(&target, &config.fit, n, s, config.seed));
        }
    }
    StudyReport::from_replicates(config.clone(), samples)
}

/// Grid of mean (sd) ISE over knot distances (rows) and bin widths
/// (columns); cells with `h > δ` are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityTable {
    pub n: usize,
    pub deltas: Vec<f64>,
    pub hs: Vec<f64>,
    pub cells: Vec<Vec<Option<SummaryRow>>>,
}

impl SensitivityTable {
    pub fn valid_cells(&self) -> impl Iterator<Item = &SummaryRow> {
        self.cells.iter().flatten().flatten()
    }
}

/// Runs one study per valid `(δ, h)` cell, reusing `base` for the remaining
/// settings.
pub fn sensitivity_grid(
    net: &Network,
    spec: &IntensitySpec,
    n: usize,
    deltas: &[f64],
    hs: &[f64],
    replicates: usize,
    seed: u64,
    base: &FitConfig,
) -> Result<SensitivityTable> {
    let mut cells = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let mut row = Vec::with_capacity(hs.len());
        for &h in hs {
            if h > delta {
                row.push(None);
                continue;
            }
            let config = StudyConfig {
                network_id: String::new(),
                spec: spec.clone(),
                fit: FitConfig { delta, h, ..base.clone() },
                n_values: alloc::vec![n],
                replicates,
                seed,
            };
            row.push(Some(run_study(net, &config)?.summary[0]));
        }
        cells.push(row);
    }
    Ok(SensitivityTable {
        n,
        deltas: deltas.to_vec(),
        hs: hs.to_vec(),
        cells,
    })
}
