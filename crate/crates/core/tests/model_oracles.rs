use nalgebra::{DMatrix, DVector};
use netspline_core::model::{bin_counts, PoissonModel};
use netspline_core::sim::{IntensitySpec, TargetIntensity};
use netspline_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn three_edges() -> Network {
    Network::new(
        vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.7], vec![1.6, -0.3]],
        vec![
            EdgeInput::straight(0, 1),
            EdgeInput::with_polyline(1, 2, vec![vec![1.0, 0.0], vec![1.3, 0.35], vec![1.0, 0.7]]),
            EdgeInput::straight(1, 3),
        ],
    )
    .unwrap()
}

struct Setup {
    net: Network,
    basis: NetworkBasis,
    layout: BinLayout,
    counts: BinnedCounts,
    penalty: PenaltySet,
}

impl Setup {
    fn new(net: Network, delta: f64, h: f64, n: usize, seed: u64) -> Self {
        let basis = NetworkBasis::new(&net, delta);
        let layout = BinLayout::new(&net, h, &basis).unwrap();
        let target = TargetIntensity::new(&net, &IntensitySpec::exp_decay(), h).unwrap();
        let pts = target.sample(n, seed);
        let counts = bin_counts(&net, &pts, &layout).unwrap();
        let penalty = PenaltySet::new(&basis);
        Self {
            net,
            basis,
            layout,
            counts,
            penalty,
        }
    }

    fn model(&self, order: PenaltyOrder) -> PoissonModel<'_> {
        PoissonModel::new(&self.basis, &self.layout, &self.counts, &self.penalty, order)
    }
}

fn dense(rows: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows.len(), |i, j| rows[i][j])
}

fn random_gamma(rng: &mut ChaCha8Rng, j: usize) -> Vec<f64> {
    (0..j).map(|_| 3.0 + rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn gradient_matches_central_differences() {
    let s = Setup::new(three_edges(), 0.2, 0.05, 60, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for order in [PenaltyOrder::First, PenaltyOrder::Second] {
        let m = s.model(order);
        for _ in 0..10 {
            let gamma = random_gamma(&mut rng, m.dim());
            let rho = 10f64.powf(rng.random_range(-2.0..2.0));
            let g = m.gradient(&gamma, rho);
            for j in 0..m.dim() {
                let eps = 1e-5;
                let mut up = gamma.clone();
                let mut dn = gamma.clone();
                up[j] += eps;
                dn[j] -= eps;
                let fd = (m.penalized_loglik(&up, rho) - m.penalized_loglik(&dn, rho)) / (2.0 * eps);
                assert!((fd - g[j]).abs() <= 1e-6 * (1.0 + g[j].abs()), "j={j} fd={fd} g={}", g[j]);
            }
        }
    }
}

#[test]
fn curvature_matches_differenced_gradient() {
    let s = Setup::new(three_edges(), 0.2, 0.05, 60, 4);
    let m = s.model(PenaltyOrder::First);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let gamma = random_gamma(&mut rng, m.dim());
    let rho = 2.5;
    let h = m.curvature(&gamma, rho);
    for j in 0..m.dim() {
        let eps = 1e-6;
        let mut up = gamma.clone();
        let mut dn = gamma.clone();
        up[j] += eps;
        dn[j] -= eps;
        let (gu, gd) = (m.gradient(&up, rho), m.gradient(&dn, rho));
        for i in 0..m.dim() {
            let fd = -(gu[i] - gd[i]) / (2.0 * eps);
            assert!((fd - h[i][j]).abs() < 1e-5 * (1.0 + h[i][j].abs()));
        }
    }
}

#[test]
fn traces_match_dense_inverse() {
    let s = Setup::new(three_edges(), 0.15, 0.05, 80, 9);
    for order in [PenaltyOrder::First, PenaltyOrder::Second] {
        let m = s.model(order);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let gamma = random_gamma(&mut rng, m.dim());
        let rho = 0.7;
        let hinv = dense(&m.curvature(&gamma, rho)).try_inverse().unwrap();
        let a = dense(&m.curvature(&gamma, 0.0));
        let k = dense(&s.penalty.matrix(order).to_dense());
        let (edf, trk) = m.traces(&gamma, rho).unwrap();
        assert!(((&hinv * &a).trace() - edf).abs() < 1e-9);
        assert!(((&hinv * &k).trace() - trk).abs() < 1e-9);

        // Update in its textbook form for the weight 2ρ that multiplies K.
        let lam = 2.0 * rho;
        let p = s.penalty.value(order, &gamma);
        let rank = s.penalty.rank(order) as f64;
        let textbook = lam * (rank / lam - (&hinv * &k).trace()) / p / 2.0;
        let step = m.fellner_schall_step(&gamma, rho).unwrap();
        assert!((step.rho_new - textbook).abs() < 1e-9 * textbook.abs());
    }
}

#[test]
fn penalty_rank_matches_dense_rank() {
    let s = Setup::new(three_edges(), 0.15, 0.05, 10, 1);
    for order in [PenaltyOrder::First, PenaltyOrder::Second] {
        let k = dense(&s.penalty.matrix(order).to_dense());
        assert_eq!(k.rank(1e-9), s.penalty.rank(order));
    }
}

/// Textbook P-spline Poisson IRLS on an interval, written against dense
/// matrices with its own basis: hats at `k·s`, `k = 0..=I`.
fn pspline_irls(length: f64, intervals: usize, counts: &[f64], rho: f64) -> Vec<f64> {
    let nb = counts.len();
    let w = length / nb as f64;
    let s = length / intervals as f64;
    let j = intervals + 1;
    let b = DMatrix::from_fn(nb, j, |r, c| {
        let x = (r as f64 + 0.5) * w;
        (1.0 - (x / s - c as f64).abs()).max(0.0)
    });
    let d = DMatrix::from_fn(intervals, j, |r, c| {
        if c == r {
            -1.0
        } else if c == r + 1 {
            1.0
        } else {
            0.0
        }
    });
    let k = d.transpose() * &d;
    let y = DVector::from_column_slice(counts);
    let total: f64 = counts.iter().sum();
    let mut gamma = DVector::from_element(j, ((total + 1.0) / length).ln());
    for _ in 0..200 {
        let eta = &b * &gamma;
        let mu = eta.map(|e| (e + w.ln()).exp());
        let z = &eta + (&y - &mu).component_div(&mu);
        let wb = DMatrix::from_fn(nb, j, |r, c| mu[r] * b[(r, c)]);
        let lhs = b.transpose() * &wb + 2.0 * rho * &k;
        let rhs = wb.transpose() * z;
        let next = lhs.lu().solve(&rhs).unwrap();
        let change = (&next - &gamma).amax();
        gamma = next;
        if change < 1e-13 {
            break;
        }
    }
    gamma.iter().copied().collect()
}

#[test]
fn single_edge_matches_pspline_irls() {
    let net = Network::new(vec![vec![0.0, 0.0], vec![2.0, 0.0]], vec![EdgeInput::straight(0, 1)]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pts: Vec<NetworkPoint> = (0..150)
        .map(|_| {
            let u: f64 = rng.random();
            NetworkPoint::new(0, 2.0 * u * u)
        })
        .collect();
    for rho in [0.1, 1.0, 10.0] {
        let cfg = FitConfig::new(0.1, 0.02).with_fixed_rho(rho);
        let fit = fit_intensity(&net, &pts, &cfg).unwrap();
        let basis = &fit.basis;
        let intervals = basis.layout().edges[0].intervals;
        let layout = BinLayout::new(&net, 0.02, basis).unwrap();
        let counts: Vec<f64> = bin_counts(&net, &pts, &layout).unwrap().counts.iter().map(|&c| c as f64).collect();
        let oracle = pspline_irls(2.0, intervals, &counts, rho);
        for (k, g) in oracle.iter().enumerate() {
            let ours = fit.gamma[basis.node(0, k)];
            assert!((ours - g).abs() < 1e-6, "rho={rho} k={k}: {ours} vs {g}");
        }
        assert!((fit.fitted_mass - 150.0).abs() <= 1e-8 * 150.0);
    }
}

#[test]
fn newton_is_monotone_and_conserves_mass() {
    let s = Setup::new(three_edges(), 0.1, 0.02, 200, 21);
    let m = s.model(PenaltyOrder::Second);
    let cfg = FitConfig::new(0.1, 0.02);
    let start = vec![0.0; m.dim()];
    let mut previous = m.penalized_loglik(&start, 1.0);
    let mut gamma = start;
    // Newton with a one-step budget exposes every accepted iterate.
    let one = FitConfig { max_newton: 1, ..cfg.clone() };
    for _ in 0..60 {
        match m.newton(1.0, &gamma, &one) {
            Ok(f) => {
                gamma = f.gamma;
                break;
            }
            Err(Error::NotConverged { last_gamma, .. }) => {
                let ll = m.penalized_loglik(&last_gamma, 1.0);
                assert!(ll >= previous - 1e-12 * previous.abs());
                previous = ll;
                gamma = last_gamma;
            }
            Err(e) => panic!("{e}"),
        }
    }
    let fit = m.newton(1.0, &gamma, &cfg).unwrap();
    let mass: f64 = m.means(&fit.gamma).iter().sum();
    assert!((mass - 200.0).abs() <= 1e-8 * 200.0);
    let _ = &s.net;
}

#[test]
fn constant_fit_at_large_rho() {
    let net = builtin::simple_network();
    let target = TargetIntensity::new(&net, &IntensitySpec::exp_decay(), 0.01).unwrap();
    let pts = target.sample(100, 4);
    let fit = fit_intensity(&net, &pts, &FitConfig::new(0.05, 0.01).with_fixed_rho(1e10)).unwrap();
    let level = 100.0 / net.total_length();
    for m in 0..net.edge_count() {
        for k in 0..=4 {
            let z = NetworkPoint::new(m, net.edge(m).length() * k as f64 / 4.0);
            assert!((fit.intensity(&z) / level - 1.0).abs() < 0.01);
        }
    }
}

#[test]
fn fits_are_deterministic() {
    let net = builtin::simple_network();
    let target = TargetIntensity::new(&net, &IntensitySpec::exp_decay(), 0.01).unwrap();
    let pts = target.sample(80, 8);
    let cfg = FitConfig::new(0.05, 0.01);
    let a = fit_intensity(&net, &pts, &cfg).unwrap();
    let b = fit_intensity(&net, &pts, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn second_order_fit_selects_rho() {
    let net = builtin::simple_network();
    let target = TargetIntensity::new(&net, &IntensitySpec::exp_decay(), 0.01).unwrap();
    let pts = target.sample(300, 12);
    let fit = fit_intensity(&net, &pts, &FitConfig::new(0.05, 0.01).with_order(PenaltyOrder::Second)).unwrap();
    assert!(fit.rho > 0.0);
    assert!((fit.fitted_mass - 300.0).abs() <= 1e-8 * 300.0);
}
