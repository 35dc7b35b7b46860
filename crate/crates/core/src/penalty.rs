//! Difference penalties on the adjacency graph of the basis.
//!
//! Two splines are adjacent when their supports overlap on a set of positive
//! length. First-order differences run over adjacent pairs, second-order
//! differences over paths `i – k – j` with `i` and `j` at graph distance 2.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::basis::NetworkBasis;
use crate::error::{Error, Result};
use crate::linalg::{Envelope, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum PenaltyOrder {
    First,
    Second,
}

impl PenaltyOrder {
    pub fn as_u8(self) -> u8 {
        match self {
            PenaltyOrder::First => 1,
            PenaltyOrder::Second => 2,
        }
    }
}

impl TryFrom<u8> for PenaltyOrder {
    type Error = Error;

    fn try_from(r: u8) -> Result<Self> {
        match r {
            1 => Ok(PenaltyOrder::First),
            2 => Ok(PenaltyOrder::Second),
            _ => Err(Error::Contract(format!("penalty order must be 1 or 2, got {r}"))),
        }
    }
}

impl From<PenaltyOrder> for u8 {
    fn from(r: PenaltyOrder) -> u8 {
        r.as_u8()
    }
}

/// Undirected simple graph as sorted neighbor lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    neighbors: Vec<Vec<usize>>,
}

impl Adjacency {
    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Self {
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in pairs {
            if a != b {
                neighbors[a].push(b);
                neighbors[b].push(a);
            }
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
            nb.dedup();
        }
        Self { neighbors }
    }

    /// The basis adjacency matrix `A` of the spline graph.
    pub fn from_basis(basis: &NetworkBasis) -> Self {
        Self::from_pairs(basis.dim(), &basis.adjacent_pairs())
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn lists(&self) -> &[Vec<usize>] {
        &self.neighbors
    }

    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    /// Number of undirected edges (half the nonzeros of `A`).
    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn component_count(&self) -> usize {
        let mut seen = vec![false; self.n()];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..self.n() {
            if seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            stack.push(s);
            while let Some(v) = stack.pop() {
                for &u in &self.neighbors[v] {
                    if !seen[u] {
                        seen[u] = true;
                        stack.push(u);
                    }
                }
            }
        }
        count
    }
}

/// Unweighted shortest-path lengths of the spline graph, optionally
/// truncated at a maximum depth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShortestPaths {
    cutoff: Option<u32>,
    /// Per source: `(target, distance)` sorted by target.
    rows: Vec<Vec<(usize, u32)>>,
}

impl ShortestPaths {
    /// One breadth-first search per source; `cutoff` bounds the depth.
    pub fn bfs(adj: &Adjacency, cutoff: Option<u32>) -> Self {
        let n = adj.n();
        let mut dist = vec![u32::MAX; n];
        let mut queue = VecDeque::new();
        let mut rows = Vec::with_capacity(n);
        for s in 0..n {
            let mut touched = vec![s];
            dist[s] = 0;
            queue.push_back(s);
            while let Some(v) = queue.pop_front() {
                let d = dist[v];
                if cutoff.is_some_and(|c| d >= c) {
                    continue;
                }
                for &u in adj.neighbors(v) {
                    if dist[u] == u32::MAX {
                        dist[u] = d + 1;
                        touched.push(u);
                        queue.push_back(u);
                    }
                }
            }
            touched.sort_unstable();
            rows.push(touched.iter().map(|&t| (t, dist[t])).collect());
            for t in touched {
                dist[t] = u32::MAX;
            }
        }
        Self { cutoff, rows }
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn cutoff(&self) -> Option<u32> {
        self.cutoff
    }

    /// Distance from `i` to `j`; `None` when unreachable (or beyond the
    /// cutoff).
    pub fn get(&self, i: usize, j: usize) -> Option<u32> {
        let row = &self.rows[i];
        row.binary_search_by_key(&j, |e| e.0).ok().map(|p| row[p].1)
    }

    /// Targets of `i` at exactly distance `d`, ascending.
    pub fn at_distance(&self, i: usize, d: u32) -> impl Iterator<Item = usize> + '_ {
        self.rows[i].iter().filter(move |e| e.1 == d).map(|e| e.0)
    }

    /// Dense matrix with `u32::MAX` for unreachable pairs.
    pub fn to_dense(&self) -> Vec<Vec<u32>> {
        let n = self.n();
        let mut m = vec![vec![u32::MAX; n]; n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, d) in row {
                m[i][j] = d;
            }
        }
        m
    }
}

/// The full all-pairs shortest-path matrix `S_A` (BFS per source).
pub fn shortest_path_matrix(adj: &Adjacency) -> ShortestPaths {
    ShortestPaths::bfs(adj, None)
}

/// Sparse integer matrix with one difference per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DifferenceMatrix {
    ncols: usize,
    rows: Vec<Vec<(usize, i32)>>,
}

impl DifferenceMatrix {
    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn rows(&self) -> &[Vec<(usize, i32)>] {
        &self.rows
    }

    /// `D·x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(j, c)| c as f64 * x[j]).sum())
            .collect()
    }

    /// `Dᵀ·y`.
    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols];
        for (r, &v) in self.rows.iter().zip(y) {
            for &(j, c) in r {
                out[j] += c as f64 * v;
            }
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<i32>> {
        self.rows
            .iter()
            .map(|r| {
                let mut d = vec![0; self.ncols];
                for &(j, c) in r {
                    d[j] = c;
                }
                d
            })
            .collect()
    }

    /// `(row, col, value)` triplets in row order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, i32)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().map(move |&(j, c)| (i, j, c)))
    }

    /// `K = DᵀD`.
    pub fn gram(&self) -> SymMatrix {
        let mut t = Vec::new();
        for r in &self.rows {
            for &(a, ca) in r {
                for &(b, cb) in r {
                    t.push((a, b, (ca * cb) as f64));
                }
            }
        }
        SymMatrix::from_triplets(self.ncols, t)
    }
}

/// First- and second-order difference matrices read off the path lengths.
///
/// Rows are ordered lexicographically: `(i, j)` for first differences and
/// `(i, j, k)` for second differences `+1·γ_i − 2·γ_k + 1·γ_j`. A pair at
/// distance two with several common neighbors yields one row per neighbor.
pub fn difference_matrices(paths: &ShortestPaths) -> (DifferenceMatrix, DifferenceMatrix) {
    assert!(
        paths.cutoff().is_none_or(|c| c >= 2),
        "second differences need path lengths up to 2"
    );
    let n = paths.n();
    let mut d1 = Vec::new();
    let mut d2 = Vec::new();
    for i in 0..n {
        for j in paths.at_distance(i, 1).filter(|&j| j > i) {
            d1.push(vec![(i, 1), (j, -1)]);
        }
        for j in paths.at_distance(i, 2).filter(|&j| j > i) {
            let mids_i: Vec<usize> = paths.at_distance(i, 1).collect();
            for k in paths.at_distance(j, 1).filter(|k| mids_i.binary_search(k).is_ok()) {
                let mut row = vec![(i, 1), (k, -2), (j, 1)];
                row.sort_unstable_by_key(|e| e.0);
                d2.push(row);
            }
        }
    }
    (
        DifferenceMatrix { ncols: n, rows: d1 },
        DifferenceMatrix { ncols: n, rows: d2 },
    )
}

/// Penalty matrix `K = DᵀD` and its rank.
///
/// For first differences the rank is `J` minus the number of connected
/// components of the graph spanned by the rows; otherwise it comes from an
/// `LDLᵀ` factorization with pivot tolerance `1e-9 · max diag`.
pub fn penalty_matrix(d: &DifferenceMatrix, order: PenaltyOrder) -> (SymMatrix, usize) {
    let k = d.gram();
    let rank = match order {
        PenaltyOrder::First => {
            let pairs: Vec<(usize, usize)> = d
                .rows()
                .iter()
                .map(|r| (r[0].0, r[r.len() - 1].0))
                .collect();
            d.ncols() - Adjacency::from_pairs(d.ncols(), &pairs).component_count()
        }
        PenaltyOrder::Second => factor_rank(&k),
    };
    (k, rank)
}

/// Numerical rank of a positive semidefinite sparse matrix.
pub fn factor_rank(k: &SymMatrix) -> usize {
    let env = Envelope::new(&k.neighbors());
    let mut v = env.zeros();
    for (i, j, x) in k.iter() {
        if i >= j {
            env.add(&mut v, i, j, x);
        }
    }
    env.factor(v, 1e-9).rank()
}

/// `γᵀKγ`.
pub fn penalty_value(gamma: &[f64], k: &SymMatrix) -> Result<f64> {
    if gamma.len() != k.n() {
        return Err(Error::Contract(format!(
            "coefficient vector has length {}, penalty matrix is {}x{}",
            gamma.len(),
            k.n(),
            k.n()
        )));
    }
    Ok(k.quad_form(gamma))
}

/// All penalty ingredients for one basis.
#[derive(Debug, Clone)]
pub struct PenaltySet {
    pub adjacency: Adjacency,
    /// Path lengths up to 2 (the depth the penalties consume).
    pub paths: ShortestPaths,
    pub d1: DifferenceMatrix,
    pub d2: DifferenceMatrix,
    pub k1: SymMatrix,
    pub k2: SymMatrix,
    pub rank_k1: usize,
    pub rank_k2: usize,
}

impl PenaltySet {
    pub fn new(basis: &NetworkBasis) -> Self {
        Self::from_adjacency(Adjacency::from_basis(basis))
    }

    pub fn from_adjacency(adjacency: Adjacency) -> Self {
        let paths = ShortestPaths::bfs(&adjacency, Some(2));
        let (d1, d2) = difference_matrices(&paths);
        let (k1, rank_k1) = penalty_matrix(&d1, PenaltyOrder::First);
        let (k2, rank_k2) = penalty_matrix(&d2, PenaltyOrder::Second);
        Self {
            adjacency,
            paths,
            d1,
            d2,
            k1,
            k2,
            rank_k1,
            rank_k2,
        }
    }

    pub fn dim(&self) -> usize {
        self.adjacency.n()
    }

    pub fn difference(&self, order: PenaltyOrder) -> &DifferenceMatrix {
        match order {
            PenaltyOrder::First => &self.d1,
            PenaltyOrder::Second => &self.d2,
        }
    }

    pub fn matrix(&self, order: PenaltyOrder) -> &SymMatrix {
        match order {
            PenaltyOrder::First => &self.k1,
            PenaltyOrder::Second => &self.k2,
        }
    }

    pub fn rank(&self, order: PenaltyOrder) -> usize {
        match order {
            PenaltyOrder::First => self.rank_k1,
            PenaltyOrder::Second => self.rank_k2,
        }
    }

    /// `P_r(γ) = ‖D_r γ‖²`, evaluated through the differences so constant
    /// shifts cancel exactly.
    pub fn value(&self, order: PenaltyOrder, gamma: &[f64]) -> f64 {
        self.difference(order).apply(gamma).iter().map(|v| v * v).sum()
    }

    /// `K_r γ = D_rᵀ D_r γ`.
    pub fn apply(&self, order: PenaltyOrder, gamma: &[f64]) -> Vec<f64> {
        let d = self.difference(order);
        d.apply_transpose(&d.apply(gamma))
    }
}
