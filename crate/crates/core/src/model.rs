//! Penalized Poisson intensity model on binned network data.
//!
//! Each edge is cut into equal bins; bin counts are modelled as Poisson with
//! mean `exp(B(z)·γ + log h_m)` where `z` is the bin midpoint and `h_m` the
//! bin width. The objective is
//!
//! ```text
//! ℓ(γ; ρ) = Σ [ y·B(z)γ − exp(B(z)γ + log h_m) ] − ρ·γᵀKγ
//! ```
//!
//! so the gradient is `Bᵀ(y − λ) − 2ρKγ` and the (expected) negative
//! Hessian `BᵀWB + 2ρK`. The Fellner–Schall update is applied to the
//! effective smoothing parameter `2ρ` that multiplies `K` in that Hessian.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::basis::{BasisRow, NetworkBasis};
use crate::error::{Error, Result};
use crate::linalg::Envelope;
use crate::math;
use crate::network::{End, Network, NetworkPoint};
use crate::penalty::{PenaltyOrder, PenaltySet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeBins {
    pub length: f64,
    pub width: f64,
    pub count: usize,
}

/// Bins of near-equal width `h_m` on every edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinLayout {
    pub h: f64,
    pub edges: Vec<EdgeBins>,
    /// Global index of the first bin of each edge.
    first: Vec<usize>,
    total: usize,
}

impl BinLayout {
    /// Bin widths by the same half-up rule as the knots, at least one bin per
    /// edge. Requires `0 < h <= delta`.
    pub fn new(net: &Network, h: f64, basis: &NetworkBasis) -> Result<Self> {
        let delta = basis.layout().delta;
        if !(h > 0.0) {
            return Err(Error::Contract(format!("bin width must be positive, got {h}")));
        }
        if h > delta {
            return Err(Error::Contract(format!(
                "bin width h = {h} exceeds knot distance delta = {delta}"
            )));
        }
        Ok(Self::with_width(net, h))
    }

    /// Layout without the `h <= delta` check (used for quadrature grids).
    pub fn with_width(net: &Network, h: f64) -> Self {
        let mut first = Vec::with_capacity(net.edge_count());
        let mut total = 0;
        let edges = net
            .edges()
            .iter()
            .map(|e| {
                let count = math::half_up_count(e.length(), h).max(1);
                first.push(total);
                total += count;
                EdgeBins {
                    length: e.length(),
                    width: e.length() / count as f64,
                    count,
                }
            })
            .collect();
        Self {
            h,
            edges,
            first,
            total,
        }
    }

    /// Splits every bin into `factor` equal sub-bins.
    pub fn refined(&self, factor: usize) -> Self {
        let mut first = Vec::with_capacity(self.edges.len());
        let mut total = 0;
        let edges = self
            .edges
            .iter()
            .map(|b| {
                let count = b.count * factor;
                first.push(total);
                total += count;
                EdgeBins {
                    length: b.length,
                    width: b.length / count as f64,
                    count,
                }
            })
            .collect();
        Self {
            h: self.h / factor as f64,
            edges,
            first,
            total,
        }
    }

    /// Total number of bins `N`.
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn first_bin(&self, edge: usize) -> usize {
        self.first[edge]
    }

    /// Midpoint of bin `k` (0-based) on `edge`.
    pub fn midpoint(&self, edge: usize, k: usize) -> NetworkPoint {
        let b = &self.edges[edge];
        NetworkPoint::new(edge, (k as f64 + 0.5) * b.width)
    }

    /// All bins in global order as `(midpoint, width)`.
    pub fn bins(&self) -> impl Iterator<Item = (NetworkPoint, f64)> + '_ {
        self.edges
            .iter()
            .enumerate()
            .flat_map(move |(m, b)| (0..b.count).map(move |k| (self.midpoint(m, k), b.width)))
    }

    /// Global bin containing `p`: bins are half-open, the last bin of an edge
    /// also holds the edge end.
    pub fn bin_of(&self, p: &NetworkPoint) -> usize {
        let b = &self.edges[p.edge];
        let k = (math::floor(p.offset / b.width).max(0.0) as usize).min(b.count - 1);
        self.first[p.edge] + k
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedCounts {
    pub counts: Vec<u32>,
    pub n_total: usize,
    /// Points that sat exactly on a vertex and were moved onto an edge.
    pub nudged: usize,
}

/// Moves a point sitting exactly on a vertex by `1e-9·d_m` into its
/// lowest-index incident edge.
pub fn nudge_off_vertex(net: &Network, p: &NetworkPoint) -> Option<NetworkPoint> {
    let v = net.vertex_at(p)?;
    let &(m, end) = net
        .incident(v)
        .iter()
        .min_by_key(|(m, end)| (*m, *end == End::End))?;
    let d = net.edge(m).length();
    let offset = match end {
        End::Start => 1e-9 * d,
        End::End => d - 1e-9 * d,
    };
    Some(NetworkPoint::new(m, offset))
}

/// Counts observations per bin.
pub fn bin_counts(net: &Network, points: &[NetworkPoint], layout: &BinLayout) -> Result<BinnedCounts> {
    let mut counts = vec![0u32; layout.total()];
    let mut nudged = 0;
    for p in points {
        net.check_point(p)?;
        let p = match nudge_off_vertex(net, p) {
            Some(q) => {
                nudged += 1;
                q
            }
            None => *p,
        };
        counts[layout.bin_of(&p)] += 1;
    }
    if nudged > 0 {
        log::warn!("{nudged} point(s) located on vertices were moved onto an incident edge");
    }
    Ok(BinnedCounts {
        counts,
        n_total: points.len(),
        nudged,
    })
}

/// Fit configuration. `delta` and `h` have no defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub delta: f64,
    pub h: f64,
    pub order: PenaltyOrder,
    pub rho_init: f64,
    /// Keep ρ fixed at `rho_init` instead of selecting it.
    pub fixed_rho: bool,
    /// Outer stop: `|ρ_new − ρ| <= rho_tol·ρ`.
    pub rho_tol: f64,
    pub rho_cap: f64,
    pub max_outer: usize,
    pub max_newton: usize,
    /// Newton stop: gradient max-norm below `grad_tol·(1 + n)`.
    pub grad_tol: f64,
    /// Newton stop: relative change of the objective below this value.
    pub loglik_tol: f64,
}

impl FitConfig {
    pub fn new(delta: f64, h: f64) -> Self {
        Self {
            delta,
            h,
            order: PenaltyOrder::First,
            rho_init: 1.0,
            fixed_rho: false,
            rho_tol: 1e-3,
            rho_cap: 1e10,
            max_outer: 50,
            max_newton: 100,
            grad_tol: 1e-8,
            loglik_tol: 1e-10,
        }
    }

    pub fn with_order(mut self, order: PenaltyOrder) -> Self {
        self.order = order;
        self
    }

    pub fn with_fixed_rho(mut self, rho: f64) -> Self {
        self.rho_init = rho;
        self.fixed_rho = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("delta", self.delta),
            ("h", self.h),
            ("rho_tol", self.rho_tol),
            ("rho_cap", self.rho_cap),
            ("grad_tol", self.grad_tol),
            ("loglik_tol", self.loglik_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Contract(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.h > self.delta {
            return Err(Error::Contract(format!(
                "bin width h = {} exceeds knot distance delta = {}",
                self.h, self.delta
            )));
        }
        if !(self.rho_init >= 0.0 && self.rho_init.is_finite()) || (!self.fixed_rho && self.rho_init == 0.0) {
            return Err(Error::Contract(format!("invalid initial rho {}", self.rho_init)));
        }
        if self.max_outer == 0 || self.max_newton == 0 {
            return Err(Error::Contract("iteration limits must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of one damped Newton run at fixed ρ.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonFit {
    pub gamma: Vec<f64>,
    pub loglik: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
}

/// One Fellner–Schall update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoUpdate {
    pub rho_new: f64,
    /// `tr((BᵀWB + 2ρK)⁻¹ BᵀWB)`.
    pub edf: f64,
    /// `tr((BᵀWB + 2ρK)⁻¹ K)`.
    pub trace_inv_k: f64,
    /// `γᵀKγ`.
    pub penalty: f64,
}

/// `tr((ρK)⁻K)` for any generalized inverse: `rank(K)/ρ`.
pub fn pseudo_inverse_trace(rank: usize, rho: f64) -> f64 {
    rank as f64 / rho
}

/// Binned Poisson model with a network difference penalty.
pub struct PoissonModel<'a> {
    basis: &'a NetworkBasis,
    penalty: &'a PenaltySet,
    order: PenaltyOrder,
    rows: Vec<BasisRow>,
    log_width: Vec<f64>,
    counts: Vec<f64>,
    n: f64,
    env: Envelope,
}

impl<'a> PoissonModel<'a> {
    pub fn new(
        basis: &'a NetworkBasis,
        layout: &BinLayout,
        binned: &BinnedCounts,
        penalty: &'a PenaltySet,
        order: PenaltyOrder,
    ) -> Self {
        let mut rows = Vec::with_capacity(layout.total());
        let mut log_width = Vec::with_capacity(layout.total());
        for (z, w) in layout.bins() {
            rows.push(basis.evaluate(&z));
            log_width.push(math::ln(w));
        }
        // Pattern of BᵀWB (basis adjacency) merged with that of K.
        let k = penalty.matrix(order);
        let mut pattern: Vec<Vec<usize>> = penalty.adjacency.lists().to_vec();
        for (i, nb) in pattern.iter_mut().enumerate() {
            nb.extend(k.row(i).map(|(j, _)| j).filter(|&j| j != i));
            nb.sort_unstable();
            nb.dedup();
        }
        Self {
            basis,
            penalty,
            order,
            rows,
            log_width,
            counts: binned.counts.iter().map(|&c| c as f64).collect(),
            n: binned.n_total as f64,
            env: Envelope::new(&pattern),
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn bins(&self) -> usize {
        self.rows.len()
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn order(&self) -> PenaltyOrder {
        self.order
    }

    pub fn design_rows(&self) -> &[BasisRow] {
        &self.rows
    }

    /// Poisson means `λ = exp(Bγ + log h)`.
    pub fn means(&self, gamma: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.log_width)
            .map(|(r, lw)| math::exp(r.dot(gamma) + lw))
            .collect()
    }

    /// Penalized log-likelihood (constants dropped).
    pub fn penalized_loglik(&self, gamma: &[f64], rho: f64) -> f64 {
        let mut ll = 0.0;
        for ((r, lw), y) in self.rows.iter().zip(&self.log_width).zip(&self.counts) {
            let eta = r.dot(gamma);
            ll += y * eta - math::exp(eta + lw);
        }
        ll - rho * self.penalty.value(self.order, gamma)
    }

    /// `Bᵀ(y − λ) − 2ρKγ`.
    pub fn gradient(&self, gamma: &[f64], rho: f64) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        for ((r, lw), y) in self.rows.iter().zip(&self.log_width).zip(&self.counts) {
            let resid = y - math::exp(r.dot(gamma) + lw);
            g[r.idx[0]] += r.val[0] * resid;
            g[r.idx[1]] += r.val[1] * resid;
        }
        if rho != 0.0 {
            for (gi, ki) in g.iter_mut().zip(self.penalty.apply(self.order, gamma)) {
                *gi -= 2.0 * rho * ki;
            }
        }
        g
    }

    /// `BᵀWB + 2ρK` in envelope storage.
    fn curvature_values(&self, lambda: &[f64], rho: f64) -> Vec<f64> {
        let env = &self.env;
        let mut h = env.zeros();
        for (r, &l) in self.rows.iter().zip(lambda) {
            let [a, b] = r.idx;
            let [va, vb] = r.val;
            if a == b {
                env.add(&mut h, a, a, l * (va + vb) * (va + vb));
            } else {
                env.add(&mut h, a, a, l * va * va);
                env.add(&mut h, b, b, l * vb * vb);
                env.add(&mut h, a, b, l * va * vb);
            }
        }
        if rho != 0.0 {
            for (i, j, k) in self.penalty.matrix(self.order).iter() {
                if i >= j {
                    env.add(&mut h, i, j, 2.0 * rho * k);
                }
            }
        }
        h
    }

    /// Dense negative Hessian `BᵀW(γ)B + 2ρK`.
    pub fn curvature(&self, gamma: &[f64], rho: f64) -> Vec<Vec<f64>> {
        let vals = self.curvature_values(&self.means(gamma), rho);
        let n = self.dim();
        let mut d = vec![vec![0.0; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = self.env.get(&vals, i, j);
            }
        }
        d
    }

    /// Damped Newton ascent of the penalized log-likelihood at fixed ρ.
    pub fn newton(&self, rho: f64, init: &[f64], cfg: &FitConfig) -> Result<NewtonFit> {
        if init.len() != self.dim() {
            return Err(Error::Contract(format!(
                "initial coefficients have length {}, basis has {}",
                init.len(),
                self.dim()
            )));
        }
        let grad_tol = cfg.grad_tol * (1.0 + self.n);
        let mut gamma = init.to_vec();
        let mut obj = self.penalized_loglik(&gamma, rho);
        let mut gnorm = f64::INFINITY;
        for it in 0..=cfg.max_newton {
            let lambda = self.means(&gamma);
            let g = self.gradient(&gamma, rho);
            gnorm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mass_resid = (self.counts.iter().sum::<f64>() - lambda.iter().sum::<f64>()).abs();
            if gnorm < grad_tol && mass_resid <= 1e-10 * self.n.max(1.0) {
                return Ok(NewtonFit {
                    gamma,
                    loglik: obj,
                    iterations: it,
                    gradient_norm: gnorm,
                });
            }
            if it == cfg.max_newton {
                break;
            }
            let factor = self.env.factor(self.curvature_values(&lambda, rho), 1e-14);
            let step = factor.solve(&g);

            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let trial: Vec<f64> = gamma.iter().zip(&step).map(|(a, s)| a + alpha * s).collect();
                let trial_obj = self.penalized_loglik(&trial, rho);
                if trial_obj.is_finite() && trial_obj >= obj - 1e-13 * (1.0 + obj.abs()) {
                    accepted = Some((trial, trial_obj));
                    break;
                }
                alpha *= 0.5;
            }
            let Some((next, next_obj)) = accepted else {
                // No ascent left along the Newton direction: at the optimum up
                // to rounding.
                if gnorm < 1e3 * grad_tol {
                    return Ok(NewtonFit {
                        gamma,
                        loglik: obj,
                        iterations: it,
                        gradient_norm: gnorm,
                    });
                }
                break;
            };
            let change = (next_obj - obj).abs() / (1.0 + obj.abs());
            gamma = next;
            obj = next_obj;
            if change < cfg.loglik_tol && alpha == 1.0 && gnorm < 1e3 * grad_tol {
                // Converged by objective; one full step was just taken, which
                // also settles the fitted mass.
                let g = self.gradient(&gamma, rho);
                return Ok(NewtonFit {
                    gradient_norm: g.iter().fold(0.0f64, |m, v| m.max(v.abs())),
                    gamma,
                    loglik: obj,
                    iterations: it + 1,
                });
            }
        }
        Err(Error::NotConverged {
            iterations: cfg.max_newton,
            gradient_norm: gnorm,
            last_gamma: gamma,
        })
    }

    /// Fellner–Schall update of ρ at the fit `gamma` obtained with `rho`.
    ///
    /// With `S = 2ρ` the smoothing weight of `K` in the curvature matrix,
    /// `S_new = S·[tr((S K)⁻K) − tr((BᵀWB + S K)⁻¹K)] / γᵀKγ`, and since
    /// `S·tr((BᵀWB + S K)⁻¹K) = J − edf` this equals
    /// `(edf − (J − rank K)) / γᵀKγ`.
    pub fn fellner_schall_step(&self, gamma: &[f64], rho: f64) -> Result<RhoUpdate> {
        if !(rho > 0.0) {
            return Err(Error::Contract(format!("rho must be positive, got {rho}")));
        }
        let penalty = self.penalty.value(self.order, gamma);
        let (edf, trace_inv_k) = self.traces(gamma, rho)?;
        let nullity = (self.dim() - self.penalty.rank(self.order)) as f64;
        let numerator = edf - nullity;
        if !(penalty > 0.0) || !(numerator > 0.0) {
            return Err(Error::RhoDiverges);
        }
        let rho_new = 0.5 * numerator / penalty;
        if !rho_new.is_finite() {
            return Err(Error::RhoDiverges);
        }
        Ok(RhoUpdate {
            rho_new,
            edf,
            trace_inv_k,
            penalty,
        })
    }

    /// `(tr(H⁻¹BᵀWB), tr(H⁻¹K))` with `H = BᵀWB + 2ρK`, from the entries of
    /// `H⁻¹` on the envelope.
    pub fn traces(&self, gamma: &[f64], rho: f64) -> Result<(f64, f64)> {
        let lambda = self.means(gamma);
        let factor = self.env.factor(self.curvature_values(&lambda, rho), 1e-14);
        if !factor.is_positive_definite() {
            return Err(Error::Domain(
                "curvature matrix is not positive definite".into(),
            ));
        }
        let z = factor.selected_inverse();
        let zij = |i: usize, j: usize| z[self.env.index(i, j).expect("pattern covers basis rows")];
        let mut edf = 0.0;
        for (r, &l) in self.rows.iter().zip(&lambda) {
            let [a, b] = r.idx;
            let [va, vb] = r.val;
            edf += l * (va * va * zij(a, a) + 2.0 * va * vb * zij(a, b) + vb * vb * zij(b, b));
        }
        let tr_k = self
            .penalty
            .matrix(self.order)
            .iter()
            .map(|(i, j, k)| k * zij(i, j))
            .sum();
        Ok((edf, tr_k))
    }
}

/// Diagnostics of the fitting loops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub outer_iterations: usize,
    pub newton_iterations: usize,
    /// The ρ iteration stopped by its tolerance (or ρ was fixed/capped).
    pub outer_converged: bool,
    /// ρ hit the cap: the fit is effectively constant along the penalty.
    pub rho_capped: bool,
    pub rho_path: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub config: FitConfig,
    pub basis: NetworkBasis,
    pub gamma: Vec<f64>,
    pub rho: f64,
    pub order: PenaltyOrder,
    /// Number of observed points.
    pub n: usize,
    /// `Σ λ̂` over all bins.
    pub fitted_mass: f64,
    pub edf: f64,
    pub penalized_loglik: f64,
    pub report: ConvergenceReport,
}

impl FitResult {
    /// Fitted intensity `exp(B(z)γ̂)`.
    pub fn intensity(&self, z: &NetworkPoint) -> f64 {
        math::exp(self.basis.predict(z, &self.gamma))
    }

    /// Fitted density `φ̂(z)/n`.
    pub fn density(&self, z: &NetworkPoint, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::Domain("density needs n > 0".into()));
        }
        Ok(self.intensity(z) / n as f64)
    }

    pub fn converged(&self) -> bool {
        self.report.outer_converged
    }

    /// Whether both fits live on the same network geometry.
    pub fn same_network(&self, other: &FitResult) -> bool {
        let (a, b) = (self.basis.layout(), other.basis.layout());
        a.edges.len() == b.edges.len()
            && a.edges.iter().zip(&b.edges).all(|(x, y)| x.length == y.length)
            && (0..a.edges.len()).all(|m| {
                self.basis.node(m, 0) - self.basis.edge_spline_count()
                    == other.basis.node(m, 0) - other.basis.edge_spline_count()
                    && self.basis.node(m, a.edges[m].intervals) - self.basis.edge_spline_count()
                        == other.basis.node(m, b.edges[m].intervals) - other.basis.edge_spline_count()
            })
    }
}

/// Fits the intensity of `points` on `net`, selecting ρ unless fixed.
pub fn fit_intensity(net: &Network, points: &[NetworkPoint], cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    if points.is_empty() {
        return Err(Error::NoData);
    }
    let basis = NetworkBasis::new(net, cfg.delta);
    let layout = BinLayout::new(net, cfg.h, &basis)?;
    let binned = bin_counts(net, points, &layout)?;
    let penalty = PenaltySet::new(&basis);
    let model = PoissonModel::new(&basis, &layout, &binned, &penalty, cfg.order);

    let n = points.len();
    let start = math::ln((n as f64 + 1.0) / net.total_length());
    let mut gamma = vec![start; basis.dim()];
    let mut rho = cfg.rho_init;
    let mut newton_iterations = 0;
    let mut rho_path = vec![rho];
    let mut outer_converged = cfg.fixed_rho;
    let mut rho_capped = false;
    let mut outer = 0;

    let mut fit = model.newton(rho, &gamma, cfg)?;
    newton_iterations += fit.iterations;
    gamma = fit.gamma.clone();

    if !cfg.fixed_rho {
        while outer < cfg.max_outer {
            outer += 1;
            let rho_new = match model.fellner_schall_step(&gamma, rho) {
                Ok(u) => u.rho_new,
                Err(Error::RhoDiverges) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            let stop = if rho_new >= cfg.rho_cap {
                rho = cfg.rho_cap;
                rho_capped = true;
                true
            } else {
                let close = (rho_new - rho).abs() <= cfg.rho_tol * rho;
                rho = rho_new;
                close
            };
            rho_path.push(rho);
            fit = model.newton(rho, &gamma, cfg)?;
            newton_iterations += fit.iterations;
            gamma = fit.gamma.clone();
            if stop {
                outer_converged = true;
                break;
            }
        }
    }

    let edf = model.traces(&gamma, rho).map(|t| t.0).unwrap_or(f64::NAN);
    let fitted_mass = model.means(&gamma).iter().sum();
    Ok(FitResult {
        config: cfg.clone(),
        basis,
        gamma,
        rho,
        order: cfg.order,
        n,
        fitted_mass,
        edf,
        penalized_loglik: fit.loglik,
        report: ConvergenceReport {
            outer_iterations: outer,
            newton_iterations,
            outer_converged,
            rho_capped,
            rho_path,
        },
    })
}

/// Ratio `φ̂_num / φ̂_den`, defined where the denominator reaches `floor`.
#[derive(Debug, Clone, Copy)]
pub struct IntensityRatio<'a> {
    pub numerator: &'a FitResult,
    pub denominator: &'a FitResult,
    pub floor: f64,
}

impl<'a> IntensityRatio<'a> {
    pub fn new(numerator: &'a FitResult, denominator: &'a FitResult, floor: f64) -> Result<Self> {
        if !(floor > 0.0) {
            return Err(Error::Contract(format!("ratio floor must be positive, got {floor}")));
        }
        if !numerator.same_network(denominator) {
            return Err(Error::Contract(
                "numerator and denominator were fitted on different networks".into(),
            ));
        }
        Ok(Self {
            numerator,
            denominator,
            floor,
        })
    }

    /// `None` where the denominator intensity is below the floor.
    pub fn ratio(&self, z: &NetworkPoint) -> Option<f64> {
        let den = self.denominator.intensity(z);
        (den >= self.floor).then(|| self.numerator.intensity(z) / den)
    }

    /// Fraction of `points` where the ratio is defined.
    pub fn supported_fraction(&self, points: &[NetworkPoint]) -> f64 {
        if points.is_empty() {
            return 0.0;
        }
        points.iter().filter(|z| self.ratio(z).is_some()).count() as f64 / points.len() as f64
    }
}
