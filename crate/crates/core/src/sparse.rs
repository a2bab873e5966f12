//! Sparse matrix storage and a simplicial LDL^T factorization.
//!
//! The factorization follows the up-looking algorithm of QDLDL: elimination
//! tree, per-column counts, then a sparse triangular solve per row. Dynamic
//! regularization with per-index signs makes it applicable to symmetric
//! quasi-definite matrices (saddle-point systems after a small diagonal
//! shift); combined with iterative refinement this recovers full accuracy
//! on the unshifted system.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FactorError {
    #[error("zero pivot at index {0}")]
    ZeroPivot(usize),
    #[error("matrix is not square")]
    NotSquare,
}

/// Compressed sparse row matrix.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), values: Vec::new() }
    }

    /// Builds from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &mut Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in triplets.iter() {
            debug_assert!(r < nrows && c < ncols);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] = indices.len();
                last = Some((r, c));
            }
        }
        // rows without entries keep the running prefix
        let mut running = 0usize;
        for r in 0..nrows {
            running = running.max(indptr[r + 1]);
            indptr[r + 1] = running;
        }
        CsrMatrix { nrows, ncols, indptr, indices, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.indptr[r], self.indptr[r + 1]);
        (&self.indices[s..e], &self.values[s..e])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (idx, vals) = self.row(r);
        match idx.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for r in 0..self.nrows {
            let (idx, vals) = self.row(r);
            let mut acc = 0.0;
            for (&c, &v) in idx.iter().zip(vals) {
                acc += v * x[c];
            }
            y[r] = acc;
        }
    }

    pub fn matvec_alloc(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec(x, &mut y);
        y
    }

    /// y += A x
    pub fn matvec_add(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for r in 0..self.nrows {
            let (idx, vals) = self.row(r);
            let mut acc = 0.0;
            for (&c, &v) in idx.iter().zip(vals) {
                acc += v * x[c];
            }
            y[r] += acc;
        }
    }

    /// y += A^T x
    pub fn tr_matvec_add(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        for r in 0..self.nrows {
            let xr = x[r];
            if xr == 0.0 {
                continue;
            }
            let (idx, vals) = self.row(r);
            for (&c, &v) in idx.iter().zip(vals) {
                y[c] += v * xr;
            }
        }
    }

    pub fn tr_matvec_alloc(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        self.tr_matvec_add(x, &mut y);
        y
    }

    /// Restricts a square matrix to the index subset `keep` (in order).
    pub fn restrict(&self, keep_map: &[Option<usize>], n_keep: usize) -> CsrMatrix {
        debug_assert_eq!(self.nrows, self.ncols);
        let mut triplets = Vec::new();
        for r in 0..self.nrows {
            let Some(rr) = keep_map[r] else { continue };
            let (idx, vals) = self.row(r);
            for (&c, &v) in idx.iter().zip(vals) {
                if let Some(cc) = keep_map[c] {
                    triplets.push((rr, cc, v));
                }
            }
        }
        CsrMatrix::from_triplets(n_keep, n_keep, &mut triplets)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for r in 0..self.nrows {
            let (idx, vals) = self.row(r);
            for (&c, &v) in idx.iter().zip(vals) {
                out[r][c] = v;
            }
        }
        out
    }
}

/// Reverse Cuthill-McKee ordering of a symmetric sparsity pattern.
/// Returns `perm` with `perm[new] = old`.
pub fn rcm_ordering(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows;
    let degree: Vec<usize> = (0..n).map(|r| a.indptr[r + 1] - a.indptr[r]).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = std::collections::VecDeque::new();
    let mut nbrs: Vec<usize> = Vec::new();

    loop {
        let start = match (0..n).filter(|&i| !visited[i]).min_by_key(|&i| degree[i]) {
            Some(s) => s,
            None => break,
        };
        visited[start] = true;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            nbrs.clear();
            let (idx, _) = a.row(u);
            for &v in idx {
                if v != u && !visited[v] {
                    visited[v] = true;
                    nbrs.push(v);
                }
            }
            nbrs.sort_unstable_by_key(|&v| degree[v]);
            for &v in &nbrs {
                queue.push_back(v);
            }
        }
    }
    order.reverse();
    order
}

/// Simplicial LDL^T factorization of a symmetric matrix given in full CSR form.
pub struct LdlFactorization {
    n: usize,
    perm: Vec<usize>,
    perm_inv: Vec<usize>,
    l_colptr: Vec<usize>,
    l_rowidx: Vec<usize>,
    l_values: Vec<f64>,
    d_inv: Vec<f64>,
    pub regularized_pivots: usize,
    pub positive_pivots: usize,
}

pub struct LdlOptions {
    /// Expected sign of each pivot (1 for SPD). Length n or empty for all-positive.
    pub signs: Vec<i8>,
    pub regularize_eps: f64,
    pub regularize_delta: f64,
}

impl Default for LdlOptions {
    fn default() -> Self {
        LdlOptions { signs: Vec::new(), regularize_eps: 0.0, regularize_delta: 0.0 }
    }
}

impl LdlFactorization {
    pub fn new(a: &CsrMatrix, opts: LdlOptions) -> Result<Self, FactorError> {
        if a.nrows != a.ncols {
            return Err(FactorError::NotSquare);
        }
        let n = a.nrows;
        let perm = rcm_ordering(a);
        let mut perm_inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            perm_inv[old] = new;
        }

        // Permuted upper triangle in CSC form (column-sorted), diagonal always
        // present. The input stores both halves; keep entries with r <= c once.
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for r in 0..n {
            let (idx, vals) = a.row(r);
            let pr = perm_inv[r];
            for (&c, &v) in idx.iter().zip(vals) {
                if r > c {
                    continue;
                }
                let pc = perm_inv[c];
                let (i, j) = if pr <= pc { (pr, pc) } else { (pc, pr) };
                cols[j].push((i, v));
            }
        }
        for j in 0..n {
            cols[j].sort_unstable_by_key(|e| e.0);
            if cols[j].last().map(|e| e.0) != Some(j) {
                cols[j].push((j, 0.0));
            }
        }
        let mut ap = vec![0usize; n + 1];
        let mut ai = Vec::new();
        let mut ax = Vec::new();
        for j in 0..n {
            for &(i, v) in &cols[j] {
                ai.push(i);
                ax.push(v);
            }
            ap[j + 1] = ai.len();
        }

        // Elimination tree and column counts.
        const NIL: usize = usize::MAX;
        let mut etree = vec![NIL; n];
        let mut lnz = vec![0usize; n];
        let mut work = vec![NIL; n];
        for j in 0..n {
            work[j] = j;
            for p in ap[j]..ap[j + 1] {
                let mut i = ai[p];
                if i == j {
                    continue;
                }
                while work[i] != j {
                    if etree[i] == NIL {
                        etree[i] = j;
                    }
                    lnz[i] += 1;
                    work[i] = j;
                    i = etree[i];
                }
            }
        }

        let total_lnz: usize = lnz.iter().sum();
        let mut l_colptr = vec![0usize; n + 1];
        for j in 0..n {
            l_colptr[j + 1] = l_colptr[j] + lnz[j];
        }
        let mut l_rowidx = vec![0usize; total_lnz];
        let mut l_values = vec![0.0f64; total_lnz];
        let mut d = vec![0.0f64; n];
        let mut d_inv = vec![0.0f64; n];

        let signs = if opts.signs.is_empty() { vec![1i8; n] } else { opts.signs.clone() };
        debug_assert_eq!(signs.len(), n);
        // signs refer to the original ordering; permute.
        let psigns: Vec<i8> = (0..n).map(|k| signs[perm[k]]).collect();

        let mut regularized = 0usize;
        let mut positive = 0usize;

        // Up-looking numeric factorization.
        let mut y_vals = vec![0.0f64; n];
        let mut y_used = vec![false; n];
        let mut y_idx = vec![0usize; n];
        let mut elim = vec![0usize; n];
        let mut next_slot: Vec<usize> = l_colptr[..n].to_vec();

        let finalize_pivot = |dk: &mut f64, k: usize, regularized: &mut usize, positive: &mut usize| -> Result<f64, FactorError> {
            let sign = psigns[k] as f64;
            if opts.regularize_delta > 0.0 && *dk * sign < opts.regularize_eps {
                *dk = opts.regularize_delta * sign;
                *regularized += 1;
            }
            if *dk == 0.0 {
                return Err(FactorError::ZeroPivot(perm[k]));
            }
            if *dk > 0.0 {
                *positive += 1;
            }
            Ok(1.0 / *dk)
        };

        for p in ap[0]..ap[1] {
            if ai[p] == 0 {
                d[0] = ax[p];
            }
        }
        d_inv[0] = finalize_pivot(&mut d[0], 0, &mut regularized, &mut positive)?;

        for k in 1..n {
            let mut nnz_y = 0usize;
            for p in ap[k]..ap[k + 1] {
                let bidx = ai[p];
                if bidx == k {
                    d[k] = ax[p];
                    continue;
                }
                y_vals[bidx] = ax[p];
                if !y_used[bidx] {
                    y_used[bidx] = true;
                    elim[0] = bidx;
                    let mut nnz_e = 1usize;
                    let mut next = etree[bidx];
                    while next != NIL && next < k {
                        if y_used[next] {
                            break;
                        }
                        y_used[next] = true;
                        elim[nnz_e] = next;
                        nnz_e += 1;
                        next = etree[next];
                    }
                    while nnz_e > 0 {
                        nnz_e -= 1;
                        y_idx[nnz_y] = elim[nnz_e];
                        nnz_y += 1;
                    }
                }
            }
            for i in (0..nnz_y).rev() {
                let cidx = y_idx[i];
                let slot = next_slot[cidx];
                let yv = y_vals[cidx];
                for j in l_colptr[cidx]..slot {
                    y_vals[l_rowidx[j]] -= l_values[j] * yv;
                }
                let lki = yv * d_inv[cidx];
                l_values[slot] = lki;
                d[k] -= yv * lki;
                l_rowidx[slot] = k;
                next_slot[cidx] += 1;
                y_vals[cidx] = 0.0;
                y_used[cidx] = false;
            }
            d_inv[k] = finalize_pivot(&mut d[k], k, &mut regularized, &mut positive)?;
        }

        Ok(LdlFactorization {
            n,
            perm,
            perm_inv,
            l_colptr,
            l_rowidx,
            l_values,
            d_inv,
            regularized_pivots: regularized,
            positive_pivots: positive,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        let mut x = vec![0.0f64; self.n];
        for k in 0..self.n {
            x[k] = b[self.perm[k]];
        }
        // L x' = x
        for i in 0..self.n {
            let xi = x[i];
            if xi != 0.0 {
                for j in self.l_colptr[i]..self.l_colptr[i + 1] {
                    x[self.l_rowidx[j]] -= self.l_values[j] * xi;
                }
            }
        }
        for i in 0..self.n {
            x[i] *= self.d_inv[i];
        }
        // L^T x'' = x'
        for i in (0..self.n).rev() {
            let mut s = x[i];
            for j in self.l_colptr[i]..self.l_colptr[i + 1] {
                s -= self.l_values[j] * x[self.l_rowidx[j]];
            }
            x[i] = s;
        }
        for k in 0..self.n {
            b[self.perm[k]] = x[k];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Dense Cholesky for small SPD blocks (row-major storage).
pub struct DenseCholesky {
    n: usize,
    l: Vec<f64>,
}

impl DenseCholesky {
    /// Factors `a` (row-major n*n). On a non-positive pivot retries once with
    /// a diagonal shift `eps = 1e-12 * trace / n`; returns whether a shift was used.
    pub fn new_regularized(a: &[f64], n: usize) -> Result<(Self, bool), FactorError> {
        match Self::try_factor(a, n, 0.0) {
            Ok(f) => Ok((f, false)),
            Err(_) => {
                let trace: f64 = (0..n).map(|i| a[i * n + i]).sum();
                let eps = 1e-12 * trace.abs().max(1.0) / n as f64;
                Self::try_factor(a, n, eps).map(|f| (f, true))
            }
        }
    }

    pub fn new(a: &[f64], n: usize) -> Result<Self, FactorError> {
        Self::try_factor(a, n, 0.0)
    }

    fn try_factor(a: &[f64], n: usize, shift: f64) -> Result<Self, FactorError> {
        let mut l = vec![0.0f64; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[i * n + j];
                if i == j {
                    s += shift;
                }
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= 0.0 {
                        return Err(FactorError::ZeroPivot(i));
                    }
                    l[i * n + j] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(DenseCholesky { n, l })
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * n + k] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter().map(|row| row.iter().zip(x).map(|(v, xi)| v * xi).sum()).collect()
    }

    #[test]
    fn triplets_merge_duplicates() {
        let mut t = vec![(0, 0, 1.0), (0, 0, 2.0), (1, 1, 5.0), (0, 1, 3.0)];
        let a = CsrMatrix::from_triplets(2, 2, &mut t);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(0, 1), 3.0);
        assert_eq!(a.get(1, 1), 5.0);
        assert_eq!(a.nnz(), 3);
    }

    #[test]
    fn ldl_solves_spd_system() {
        // tridiagonal SPD
        let n = 50;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &mut t);
        let f = LdlFactorization::new(&a, LdlOptions::default()).unwrap();
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = a.matvec_alloc(&x_true);
        let x = f.solve(&b);
        for (xa, xb) in x.iter().zip(&x_true) {
            assert!((xa - xb).abs() < 1e-10, "{xa} vs {xb}");
        }
        assert_eq!(f.positive_pivots, n);
    }

    #[test]
    fn ldl_solves_indefinite_saddle_system() {
        // [I  B^T; B  0] with B = [1 1]
        let mut t = vec![
            (0, 0, 1.0),
            (1, 1, 1.0),
            (2, 0, 1.0),
            (0, 2, 1.0),
            (2, 1, 1.0),
            (1, 2, 1.0),
        ];
        let a = CsrMatrix::from_triplets(3, 3, &mut t);
        let opts = LdlOptions { signs: vec![1, 1, -1], regularize_eps: 1e-13, regularize_delta: 1e-9 };
        let f = LdlFactorization::new(&a, opts).unwrap();
        let b = vec![1.0, 2.0, 1.0];
        let x = f.solve(&b);
        let dense = a.to_dense();
        let r = dense_matvec(&dense, &x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-7);
        }
    }

    #[test]
    fn dense_cholesky_roundtrip() {
        let a = vec![4.0, 2.0, 2.0, 3.0];
        let chol = DenseCholesky::new(&a, 2).unwrap();
        let mut b = vec![8.0, 7.0];
        chol.solve_in_place(&mut b);
        // solution of [[4,2],[2,3]] x = [8,7]
        assert!((b[0] - 1.25).abs() < 1e-12);
        assert!((b[1] - 1.5).abs() < 1e-12);
    }
}
