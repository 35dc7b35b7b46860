//! Sparse symmetric linear algebra for the penalized Newton iterations.
//!
//! Matrices are stored in envelope (skyline) form after a reverse
//! Cuthill–McKee reordering: row `i` keeps every entry from its first
//! nonzero column up to the diagonal. The envelope is closed under the
//! `LDLᵀ` factorization and under Takahashi's recurrences, so both the
//! factor and the entries of the inverse on the envelope can be computed
//! without further fill bookkeeping.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

/// Symmetric sparse matrix in compressed rows, both triangles stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SymMatrix {
    /// Builds from `(row, col, value)` triplets covering both triangles.
    /// Duplicates are summed; explicit zeros are dropped.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        let mut rows = Vec::with_capacity(triplets.len());
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                rows.push(i);
                cols.push(j);
                vals.push(v);
                last = Some((i, j));
            }
        }
        let keep: Vec<bool> = vals.iter().map(|v| *v != 0.0).collect();
        let mut c2 = Vec::new();
        let mut v2 = Vec::new();
        for (k, &i) in rows.iter().enumerate() {
            if keep[k] {
                row_ptr[i + 1] += 1;
                c2.push(cols[k]);
                v2.push(vals[k]);
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            cols: c2,
            vals: v2,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Nonzeros of row `i` as `(col, value)`, columns ascending.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(p) => self.vals[r.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, j, v) in self.iter() {
            d[i][j] = v;
        }
        d
    }

    /// Sparsity pattern as neighbor lists without the diagonal.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, _)| j).filter(|&j| j != i).collect())
            .collect()
    }
}

/// Reverse Cuthill–McKee ordering of an undirected graph. Returns
/// `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(neighbors: &[Vec<usize>]) -> Vec<usize> {
    let n = neighbors.len();
    let degree = |v: usize| neighbors[v].len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    // BFS returning (levels, last level) restricted to unvisited nodes.
    let bfs_levels = |start: usize, visited: &[bool]| -> (usize, Vec<usize>) {
        let mut level = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        level[start] = 0;
        queue.push_back(start);
        let mut depth = 0;
        let mut last = Vec::new();
        while let Some(v) = queue.pop_front() {
            if level[v] > depth {
                depth = level[v];
                last.clear();
            }
            last.push(v);
            for &u in &neighbors[v] {
                if !visited[u] && level[u] == usize::MAX {
                    level[u] = level[v] + 1;
                    queue.push_back(u);
                }
            }
        }
        (depth, last)
    };

    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        // Pseudo-peripheral start node (George–Liu).
        let mut start = seed;
        let (mut depth, mut last) = bfs_levels(start, &visited);
        loop {
            let cand = *last.iter().min_by_key(|&&v| (degree(v), v)).unwrap();
            let (d2, l2) = bfs_levels(cand, &visited);
            if d2 > depth {
                start = cand;
                depth = d2;
                last = l2;
            } else {
                break;
            }
        }

        let begin = order.len();
        visited[start] = true;
        order.push(start);
        let mut head = begin;
        while head < order.len() {
            let v = order[head];
            head += 1;
            let mut next: Vec<usize> = neighbors[v].iter().copied().filter(|&u| !visited[u]).collect();
            next.sort_unstable_by_key(|&u| (degree(u), u));
            next.dedup();
            for u in next {
                if !visited[u] {
                    visited[u] = true;
                    order.push(u);
                }
            }
        }
    }
    order.reverse();
    order
}

/// Envelope structure of a symmetric matrix under a fill-reducing order.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    perm: Vec<usize>,
    iperm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    /// For each permuted column `j`, the permuted rows `k > j` whose
    /// envelope reaches column `j`.
    below: Vec<Vec<usize>>,
}

impl Envelope {
    /// Structure for a matrix whose off-diagonal pattern is `neighbors`.
    pub fn new(neighbors: &[Vec<usize>]) -> Self {
        Self::with_order(neighbors, reverse_cuthill_mckee(neighbors))
    }

    /// Structure with an explicit ordering (`perm[new] = old`).
    pub fn with_order(neighbors: &[Vec<usize>], perm: Vec<usize>) -> Self {
        let n = neighbors.len();
        let mut iperm = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (old, nb) in neighbors.iter().enumerate() {
            let i = iperm[old];
            for &u in nb {
                let j = iperm[u];
                if j < i {
                    first[i] = first[i].min(j);
                } else if i < j {
                    first[j] = first[j].min(i);
                }
            }
        }
        let mut start = vec![0; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i] + 1);
        }
        let mut below = vec![Vec::new(); n];
        for i in 0..n {
            for j in first[i]..i {
                below[j].push(i);
            }
        }
        Self {
            perm,
            iperm,
            first,
            start,
            below,
        }
    }

    pub fn n(&self) -> usize {
        self.perm.len()
    }

    /// Number of stored entries (lower triangle including the diagonal).
    pub fn storage(&self) -> usize {
        self.start[self.n()]
    }

    pub fn zeros(&self) -> Vec<f64> {
        vec![0.0; self.storage()]
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        (j >= self.first[i]).then(|| self.start[i] + j - self.first[i])
    }

    /// Storage position of entry `(i, j)` (original indices, either triangle).
    pub fn index(&self, i: usize, j: usize) -> Option<usize> {
        self.slot(self.iperm[i], self.iperm[j])
    }

    /// Adds `v` to the symmetric pair `(i, j)`/`(j, i)` (counted once).
    pub fn add(&self, values: &mut [f64], i: usize, j: usize, v: f64) {
        let p = self
            .index(i, j)
            .expect("entry outside the envelope: pattern mismatch");
        values[p] += v;
    }

    pub fn get(&self, values: &[f64], i: usize, j: usize) -> f64 {
        self.index(i, j).map_or(0.0, |p| values[p])
    }

    /// `LDLᵀ` factorization of the matrix stored in `values`.
    ///
    /// A pivot with `|d| <= pivot_tol · max|diag|` is treated as exactly
    /// zero and its column skipped, which reveals the rank of a positive
    /// semidefinite matrix.
    pub fn factor(&self, mut values: Vec<f64>, pivot_tol: f64) -> LdlFactor<'_> {
        let n = self.n();
        let max_diag = (0..n)
            .map(|i| values[self.start[i + 1] - 1].abs())
            .fold(0.0f64, f64::max);
        let tol = pivot_tol * max_diag;
        let mut diag = vec![0.0; n];
        let mut zero = vec![false; n];
        let mut negative = 0;
        for i in 0..n {
            let fi = self.first[i];
            let si = self.start[i];
            for j in fi..i {
                let fj = self.first[j];
                let sj = self.start[j];
                let lo = fi.max(fj);
                let mut s = values[si + j - fi];
                for k in lo..j {
                    s -= values[si + k - fi] * values[sj + k - fj];
                }
                values[si + j - fi] = s;
            }
            let mut d = values[si + i - fi];
            for j in fi..i {
                let t = values[si + j - fi];
                let l = if zero[j] { 0.0 } else { t / diag[j] };
                d -= t * l;
                values[si + j - fi] = l;
            }
            if d.abs() <= tol {
                zero[i] = true;
                d = 0.0;
            } else if d < 0.0 {
                negative += 1;
            }
            diag[i] = d;
            values[si + i - fi] = d;
        }
        let rank = zero.iter().filter(|z| !**z).count();
        LdlFactor {
            env: self,
            values,
            diag,
            zero,
            rank,
            negative,
        }
    }
}

/// `LDLᵀ` factor stored in envelope form (unit lower `L` below the
/// diagonal, `D` on the diagonal).
#[derive(Debug, Clone)]
pub struct LdlFactor<'a> {
    env: &'a Envelope,
    values: Vec<f64>,
    diag: Vec<f64>,
    zero: Vec<bool>,
    rank: usize,
    negative: usize,
}

impl LdlFactor<'_> {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_positive_definite(&self) -> bool {
        self.rank == self.diag.len() && self.negative == 0
    }

    /// Solves `A x = b`. Zero pivots contribute nothing (a generalized
    /// inverse solve).
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let env = self.env;
        let n = env.n();
        let mut y: Vec<f64> = (0..n).map(|i| b[env.perm[i]]).collect();
        for i in 0..n {
            let fi = env.first[i];
            let si = env.start[i];
            let mut s = y[i];
            for j in fi..i {
                s -= self.values[si + j - fi] * y[j];
            }
            y[i] = s;
        }
        for i in 0..n {
            y[i] = if self.zero[i] { 0.0 } else { y[i] / self.diag[i] };
        }
        for i in (0..n).rev() {
            let fi = env.first[i];
            let si = env.start[i];
            let xi = y[i];
            for j in fi..i {
                y[j] -= self.values[si + j - fi] * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in env.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    /// Entries of `A⁻¹` on the envelope (Takahashi recurrences), in the same
    /// storage layout as the matrix. Requires a nonsingular factor.
    pub fn selected_inverse(&self) -> Vec<f64> {
        let env = self.env;
        let n = env.n();
        let mut z = env.zeros();
        let l = |i: usize, j: usize| self.values[env.start[i] + j - env.first[i]];
        for j in (0..n).rev() {
            let below = &env.below[j];
            for &i in below {
                let mut s = 0.0;
                for &k in below {
                    s -= l(k, j) * z[env.slot(i, k).unwrap()];
                }
                z[env.slot(i, j).unwrap()] = s;
            }
            let mut s = 1.0 / self.diag[j];
            for &k in below {
                s -= l(k, j) * z[env.slot(k, j).unwrap()];
            }
            z[env.slot(j, j).unwrap()] = s;
        }
        z
    }
}
