//! Linear B-spline basis on a geometric network.
//!
//! Every edge carries an equidistant knot sequence whose spacing is as close
//! as possible to a global target. Interior knots get ordinary hat functions
//! supported on two knot intervals of one edge ("edge splines"); every
//! vertex gets one hat spanning the first knot interval of each incident edge
//! ("vertex splines"). Global indices list all edge splines grouped by edge
//! and ordered along the edge, followed by the vertex splines in vertex order.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::network::{End, Network, NetworkPoint};

/// Knot spacing for one edge.
///
/// `d / delta` is rounded half-up to an interval count, which is then
/// clamped to at least 2 so every edge carries at least one edge spline.
pub fn knot_spacing(length: f64, delta: f64) -> (f64, usize) {
    let intervals = math::half_up_count(length, delta).max(2);
    (length / intervals as f64, intervals)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeKnots {
    pub length: f64,
    pub spacing: f64,
    pub intervals: usize,
}

impl EdgeKnots {
    /// Knot offsets `0 = t_1 < ... < t_I = length`.
    pub fn offsets(&self) -> Vec<f64> {
        (0..=self.intervals)
            .map(|k| {
                if k == self.intervals {
                    self.length
                } else {
                    k as f64 * self.spacing
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotLayout {
    pub delta: f64,
    pub edges: Vec<EdgeKnots>,
}

impl KnotLayout {
    pub fn new(net: &Network, delta: f64) -> Self {
        let edges = net
            .edges()
            .iter()
            .map(|e| {
                let (spacing, intervals) = knot_spacing(e.length(), delta);
                EdgeKnots {
                    length: e.length(),
                    spacing,
                    intervals,
                }
            })
            .collect();
        Self { delta, edges }
    }

    pub fn max_spacing(&self) -> f64 {
        self.edges.iter().fold(0.0, |m, e| m.max(e.spacing))
    }
}

/// Basis values at one location: at most two splines are nonzero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisRow {
    pub idx: [usize; 2],
    pub val: [f64; 2],
}

impl BasisRow {
    pub fn dot(&self, coef: &[f64]) -> f64 {
        self.val[0] * coef[self.idx[0]] + self.val[1] * coef[self.idx[1]]
    }

    /// Dense row of length `dim`.
    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut row = alloc::vec![0.0; dim];
        row[self.idx[0]] += self.val[0];
        row[self.idx[1]] += self.val[1];
        row
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplineKind {
    /// `k`-th interior spline (0-based) of an edge.
    Edge { edge: usize, k: usize },
    Vertex { vertex: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkBasis {
    layout: KnotLayout,
    ends: Vec<(usize, usize)>,
    first_edge_spline: Vec<usize>,
    n_edge_splines: usize,
    /// One peak location per vertex (on its lowest-index incident edge end).
    vertex_peaks: Vec<NetworkPoint>,
}

impl NetworkBasis {
    pub fn new(net: &Network, delta: f64) -> Self {
        let layout = KnotLayout::new(net, delta);
        let mut first_edge_spline = Vec::with_capacity(net.edge_count());
        let mut n_edge_splines = 0;
        for k in &layout.edges {
            first_edge_spline.push(n_edge_splines);
            n_edge_splines += k.intervals - 1;
        }
        let vertex_peaks = (0..net.vertex_count())
            .map(|v| {
                let &(m, end) = net
                    .incident(v)
                    .iter()
                    .min_by_key(|(m, end)| (*m, *end == End::End))
                    .expect("vertices without edges are removed on construction");
                let offset = if end == End::Start { 0.0 } else { net.edge(m).length() };
                NetworkPoint::new(m, offset)
            })
            .collect();
        Self {
            ends: net.edges().iter().map(|e| (e.from(), e.to())).collect(),
            layout,
            first_edge_spline,
            n_edge_splines,
            vertex_peaks,
        }
    }

    pub fn layout(&self) -> &KnotLayout {
        &self.layout
    }

    /// Basis dimension `J`.
    pub fn dim(&self) -> usize {
        self.n_edge_splines + self.vertex_peaks.len()
    }

    pub fn edge_spline_count(&self) -> usize {
        self.n_edge_splines
    }

    pub fn edge_count(&self) -> usize {
        self.ends.len()
    }

    pub fn vertex_spline(&self, v: usize) -> usize {
        self.n_edge_splines + v
    }

    pub fn edge_spline(&self, edge: usize, k: usize) -> usize {
        debug_assert!(k + 1 < self.layout.edges[edge].intervals);
        self.first_edge_spline[edge] + k
    }

    /// Global index of knot `node` (0..=intervals) along `edge`.
    pub fn node(&self, edge: usize, node: usize) -> usize {
        let intervals = self.layout.edges[edge].intervals;
        let (from, to) = self.ends[edge];
        if node == 0 {
            self.vertex_spline(from)
        } else if node == intervals {
            self.vertex_spline(to)
        } else {
            self.first_edge_spline[edge] + node - 1
        }
    }

    pub fn kind(&self, j: usize) -> SplineKind {
        if j >= self.n_edge_splines {
            return SplineKind::Vertex {
                vertex: j - self.n_edge_splines,
            };
        }
        let edge = self.first_edge_spline.partition_point(|&f| f <= j) - 1;
        SplineKind::Edge {
            edge,
            k: j - self.first_edge_spline[edge],
        }
    }

    /// Location where spline `j` attains its peak value 1.
    pub fn peak(&self, j: usize) -> NetworkPoint {
        match self.kind(j) {
            SplineKind::Vertex { vertex } => self.vertex_peaks[vertex],
            SplineKind::Edge { edge, k } => {
                let knots = &self.layout.edges[edge];
                NetworkPoint::new(edge, (k + 1) as f64 * knots.spacing)
            }
        }
    }

    /// Evaluates all splines at `z`. Knot intervals are half-open except the
    /// last interval of each edge, which includes the edge end, so the
    /// values sum to one everywhere.
    pub fn evaluate(&self, z: &NetworkPoint) -> BasisRow {
        let knots = &self.layout.edges[z.edge];
        let u = z.offset / knots.spacing;
        let (k, frac) = if z.offset >= knots.length {
            (knots.intervals - 1, 1.0)
        } else {
            let k = (math::floor(u) as usize).min(knots.intervals - 1);
            (k, (u - k as f64).clamp(0.0, 1.0))
        };
        BasisRow {
            idx: [self.node(z.edge, k), self.node(z.edge, k + 1)],
            val: [1.0 - frac, frac],
        }
    }

    /// Log-linear predictor `B(z)·gamma`.
    pub fn predict(&self, z: &NetworkPoint, coef: &[f64]) -> f64 {
        self.evaluate(z).dot(coef)
    }

    /// Pairs of globally indexed splines whose supports overlap on a set of
    /// positive length: consecutive knots on every edge.
    pub fn adjacent_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for (m, knots) in self.layout.edges.iter().enumerate() {
            for k in 0..knots.intervals {
                let (a, b) = (self.node(m, k), self.node(m, k + 1));
                pairs.push((a.min(b), a.max(b)));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        pairs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::EdgeInput;
    use alloc::vec;

    fn unit_edge() -> Network {
        Network::new(vec![vec![0.0, 0.0], vec![1.0, 0.0]], vec![EdgeInput::straight(0, 1)]).unwrap()
    }

    fn star() -> Network {
        Network::new(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![-0.5, 0.8], vec![-0.5, -0.8]],
            vec![EdgeInput::straight(0, 1), EdgeInput::straight(0, 2), EdgeInput::straight(0, 3)],
        )
        .unwrap()
    }

    #[test]
    fn knot_spacing_rule() {
        assert_eq!(knot_spacing(1.0, 0.26), (0.25, 4));
        let (s, i) = knot_spacing(1.0, 0.3);
        assert_eq!(i, 3);
        assert!((s - 1.0 / 3.0).abs() < 1e-15);
        // 0.05 / 0.05 = 1 interval, clamped to 2.
        let (s, i) = knot_spacing(0.05, 0.05);
        assert_eq!(i, 2);
        assert!((s - 0.025).abs() < 1e-15);
    }

    #[test]
    fn single_edge_counts() {
        let b = NetworkBasis::new(&unit_edge(), 0.25);
        assert_eq!(b.layout().edges[0].intervals, 4);
        assert_eq!(b.edge_spline_count(), 3);
        assert_eq!(b.dim(), 5);
    }

    #[test]
    fn four_cycle_dimension() {
        let net = Network::new(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]],
            (0..4).map(|i| EdgeInput::straight(i, (i + 1) % 4)).collect(),
        )
        .unwrap();
        assert_eq!(NetworkBasis::new(&net, 0.5).dim(), 4 * (3 - 2) + 4);
    }

    #[test]
    fn peaks_are_one() {
        let net = star();
        let b = NetworkBasis::new(&net, 0.25);
        for j in 0..b.dim() {
            let row = b.evaluate(&b.peak(j));
            let dense = row.to_dense(b.dim());
            assert_eq!(dense[j], 1.0, "spline {j}");
            assert_eq!(dense.iter().sum::<f64>(), 1.0);
        }
        // Vertex 0 has degree 3 and is the first knot of all three edges.
        let v = b.vertex_spline(0);
        for m in 0..3 {
            assert_eq!(b.evaluate(&NetworkPoint::new(m, 0.0)).to_dense(b.dim())[v], 1.0);
        }
    }

    #[test]
    fn midpoint_of_first_interval() {
        let b = NetworkBasis::new(&unit_edge(), 0.25);
        let row = b.evaluate(&NetworkPoint::new(0, 0.125)).to_dense(b.dim());
        assert_eq!(row[b.vertex_spline(0)], 0.5);
        assert_eq!(row[b.edge_spline(0, 0)], 0.5);
        assert_eq!(row.iter().sum::<f64>(), 1.0);

        // Two intervals only: the single edge spline sits at the midpoint.
        let b = NetworkBasis::new(&unit_edge(), 0.5);
        let row = b.evaluate(&NetworkPoint::new(0, 0.75)).to_dense(b.dim());
        assert_eq!(row[b.vertex_spline(1)], 0.5);
        assert_eq!(row[b.edge_spline(0, 0)], 0.5);
    }

    #[test]
    fn interior_knot_peak() {
        let b = NetworkBasis::new(&unit_edge(), 0.25);
        let row = b.evaluate(&NetworkPoint::new(0, 0.5)).to_dense(b.dim());
        assert_eq!(row[b.edge_spline(0, 1)], 1.0);
        assert_eq!(row.iter().filter(|v| **v != 0.0).count(), 1);
    }

    #[test]
    fn loop_edge_uses_one_vertex_spline() {
        let net = Network::new(
            vec![vec![0.0, 0.0]],
            vec![EdgeInput::with_polyline(
                0,
                0,
                vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 0.0]],
            )],
        )
        .unwrap();
        let b = NetworkBasis::new(&net, 0.5);
        let v = b.vertex_spline(0);
        let len = net.total_length();
        let near_start = b.evaluate(&NetworkPoint::new(0, 0.01)).to_dense(b.dim());
        let near_end = b.evaluate(&NetworkPoint::new(0, len - 0.01)).to_dense(b.dim());
        assert!(near_start[v] > 0.9 && near_end[v] > 0.9);
        assert_eq!(b.evaluate(&NetworkPoint::new(0, len)).to_dense(b.dim())[v], 1.0);
    }

    #[test]
    fn kind_roundtrip() {
        let b = NetworkBasis::new(&star(), 0.3);
        for j in 0..b.dim() {
            match b.kind(j) {
                SplineKind::Edge { edge, k } => assert_eq!(b.edge_spline(edge, k), j),
                SplineKind::Vertex { vertex } => assert_eq!(b.vertex_spline(vertex), j),
            }
        }
    }
}
