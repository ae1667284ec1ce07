//! Compressed sparse row matrices and a direct SPD solver.
//!
//! The solver reorders with reverse Cuthill-McKee and factors in envelope
//! (profile) storage. Mesh matrices have a narrow profile after RCM, which
//! keeps the factorization cheap without a supernodal code path.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Pivots whose ratio to the original diagonal falls below this are rejected.
pub const MIN_RELATIVE_PIVOT: f64 = 1e-12;

/// Largest accepted relative residual `|Mx - b| / |b|` after refinement.
pub const MAX_RELATIVE_RESIDUAL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut cursor = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            let k = cursor[r];
            cols[k] = c;
            vals[k] = v;
            cursor[r] += 1;
        }

        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        indptr.push(0);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for r in 0..nrows {
            row.clear();
            row.extend((counts[r]..counts[r + 1]).map(|k| (cols[k], vals[k])));
            row.sort_by_key(|&(c, _)| c);
            for &(c, v) in &row {
                if indices.len() > indptr[r] && *indices.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates the stored `(col, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.indptr[i]..self.indptr[i + 1];
        match self.indices[span.clone()].binary_search(&j) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.nrows)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn transpose(&self) -> CsrMatrix {
        let t: Vec<_> = self.triplets().into_iter().map(|(i, j, v)| (j, i, v)).collect();
        CsrMatrix::from_triplets(self.ncols, self.nrows, &t)
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.ncols, other.nrows);
        let mut indptr = vec![0usize];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut acc = vec![0.0; other.ncols];
        let mut marker = vec![usize::MAX; other.ncols];
        let mut touched = Vec::new();
        for i in 0..self.nrows {
            touched.clear();
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if marker[j] != i {
                        marker[j] = i;
                        acc[j] = 0.0;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                indices.push(j);
                values.push(acc[j]);
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: other.ncols,
            indptr,
            indices,
            values,
        }
    }

    /// Returns `self + diag(d)`.
    pub fn add_diagonal(&self, d: &[f64]) -> CsrMatrix {
        assert_eq!(d.len(), self.nrows);
        let mut t = self.triplets();
        t.extend(d.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, &v)| (i, i, v)));
        CsrMatrix::from_triplets(self.nrows, self.ncols, &t)
    }

    /// Largest `|a_ij - a_ji|` over stored entries.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v;
        }
        m
    }
}

/// Reverse Cuthill-McKee ordering of the symmetric pattern of `m`.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(m: &CsrMatrix) -> Vec<usize> {
    let n = m.nrows();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| m.row(i).map(|(j, _)| j).filter(|&j| j != i).collect())
        .collect();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs_levels = |start: usize, mask: &[bool]| -> (Vec<usize>, usize) {
        // Returns the last BFS level and the eccentricity of `start`.
        let mut depth = vec![usize::MAX; n];
        depth[start] = 0;
        let mut queue = VecDeque::from([start]);
        let mut last = vec![start];
        let mut ecc = 0;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !mask[v] && depth[v] == usize::MAX {
                    depth[v] = depth[u] + 1;
                    if depth[v] > ecc {
                        ecc = depth[v];
                        last.clear();
                    }
                    if depth[v] == ecc {
                        last.push(v);
                    }
                    queue.push_back(v);
                }
            }
        }
        (last, ecc)
    };

    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        // pseudo-peripheral start node
        let mut start = seed;
        let (mut last, mut ecc) = bfs_levels(start, &visited);
        for _ in 0..8 {
            let cand = *last.iter().min_by_key(|&&v| degree[v]).unwrap();
            let (l2, e2) = bfs_levels(cand, &visited);
            if e2 <= ecc {
                break;
            }
            start = cand;
            last = l2;
            ecc = e2;
        }

        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut nbrs = Vec::new();
        while let Some(u) = queue.pop_front() {
            order.push(u);
            nbrs.clear();
            nbrs.extend(adj[u].iter().copied().filter(|&v| !visited[v]));
            nbrs.sort_by_key(|&v| (degree[v], v));
            for &v in &nbrs {
                visited[v] = true;
                queue.push_back(v);
            }
        }
    }
    order.reverse();
    order
}

/// Cholesky factor `P M P^T = L L^T` in envelope storage.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    values: Vec<f64>,
}

impl CholeskyFactor {
    pub fn factor(m: &CsrMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Shape {
                what: "square matrix columns",
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let n = m.nrows();
        let perm = reverse_cuthill_mckee(m);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }

        let mut first: Vec<usize> = (0..n).collect();
        for (new, &old) in perm.iter().enumerate() {
            for (j, _) in m.row(old) {
                first[new] = first[new].min(inv[j]);
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + (i - first[i] + 1));
        }
        let mut values = vec![0.0; start[n]];
        let mut diag = vec![0.0; n];
        for (new, &old) in perm.iter().enumerate() {
            for (j, v) in m.row(old) {
                let c = inv[j];
                if c <= new {
                    values[start[new] + c - first[new]] += v;
                }
                if c == new {
                    diag[new] = v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            let row_i = start[i];
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                let (head, tail) = values.split_at_mut(row_i);
                let li = &tail[..=i - fi];
                let lj = &head[start[j]..start[j + 1]];
                let dot: f64 = li[lo - fi..j - fi]
                    .iter()
                    .zip(&lj[lo - fj..j - fj])
                    .map(|(a, b)| a * b)
                    .sum();
                let ljj = lj[j - fj];
                tail[j - fi] = (tail[j - fi] - dot) / ljj;
            }
            let li = &values[row_i..row_i + (i - fi)];
            let d = values[row_i + i - fi] - li.iter().map(|v| v * v).sum::<f64>();
            let scale = diag[i].abs().max(f64::MIN_POSITIVE);
            if !(d / scale > MIN_RELATIVE_PIVOT) {
                return Err(Error::RankDeficient {
                    pivot: d / scale,
                    index: perm[i],
                });
            }
            values[row_i + i - fi] = d.sqrt();
        }

        Ok(CholeskyFactor {
            perm,
            first,
            start,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Stored entries of the factor.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.values[self.start[i]..self.start[i + 1]];
            let dot: f64 = row[..i - fi].iter().zip(&y[fi..i]).map(|(a, b)| a * b).sum();
            y[i] = (y[i] - dot) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.values[self.start[i]..self.start[i + 1]];
            y[i] /= row[i - fi];
            let xi = y[i];
            for (yj, l) in y[fi..i].iter_mut().zip(&row[..i - fi]) {
                *yj -= l * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Relative residual `|Mx - b| / |b|` (absolute when `b` is zero).
pub fn relative_residual(m: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let mx = m.mul_vec(x);
    let r: Vec<f64> = mx.iter().zip(b).map(|(a, c)| a - c).collect();
    let nb = norm(b);
    if nb > 0.0 {
        norm(&r) / nb
    } else {
        norm(&r)
    }
}

/// Solves `M x = b` with a prefactored `M`, refining until the relative
/// residual stops improving. Returns the solution and its residual.
pub fn solve_refined(
    m: &CsrMatrix,
    factor: &CholeskyFactor,
    b: &[f64],
    max_refinements: usize,
) -> Result<(Vec<f64>, f64)> {
    let mut x = factor.solve(b);
    let mut residual = relative_residual(m, &x, b);
    let mut steps = 0;
    while steps < max_refinements && residual > 1e-14 {
        let mx = m.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&mx).map(|(a, c)| a - c).collect();
        let dx = factor.solve(&r);
        let candidate: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
        let res = relative_residual(m, &candidate, b);
        steps += 1;
        if res >= residual {
            break;
        }
        x = candidate;
        residual = res;
    }
    if !(residual <= MAX_RELATIVE_RESIDUAL) {
        return Err(Error::NonConvergence {
            residual,
            iterations: steps,
        });
    }
    Ok((x, residual))
}
