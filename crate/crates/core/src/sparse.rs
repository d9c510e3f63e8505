//! Complex compressed-sparse-row operators and the vector kernels shared by
//! every propagation engine.
//!
//! Density matrices are vectorized by stacking columns: entry `(i, j)` of an
//! `m x m` matrix lives at index `i + j * m`. Under this convention the
//! commutator superoperator is `Id ⊗ H − Hᵀ ⊗ Id` (see [`crate::spin`]).

use std::ops::{Deref, DerefMut};
use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Largest row or column count `kron` will produce.
pub const MAX_DIMENSION: usize = 1 << 28;

/// Row count above which `spmv` splits rows across the rayon pool.
const PARALLEL_ROWS: usize = 4096;

/// Vectorized density matrix (or any Liouville-space vector).
#[derive(Clone, Debug, PartialEq, Default)]
pub struct StateVector(pub Vec<C64>);

impl StateVector {
    pub fn zeros(len: usize) -> Self {
        StateVector(vec![C64::new(0.0, 0.0); len])
    }

    pub fn from_real(values: &[f64]) -> Self {
        StateVector(values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Hermitian inner product `⟨self, other⟩ = Σ conj(self_i) other_i`.
    pub fn dot(&self, other: &[C64]) -> C64 {
        self.0.iter().zip(other).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn scale(&mut self, factor: C64) {
        for z in &mut self.0 {
            *z *= factor;
        }
    }

    /// `self += factor * other`
    pub fn axpy(&mut self, factor: C64, other: &[C64]) {
        for (a, b) in self.0.iter_mut().zip(other) {
            *a += factor * b;
        }
    }

    pub fn max_abs_diff(&self, other: &[C64]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn into_inner(self) -> Vec<C64> {
        self.0
    }
}

impl Deref for StateVector {
    type Target = [C64];
    fn deref(&self) -> &[C64] {
        &self.0
    }
}

impl DerefMut for StateVector {
    fn deref_mut(&mut self) -> &mut [C64] {
        &mut self.0
    }
}

impl From<Vec<C64>> for StateVector {
    fn from(v: Vec<C64>) -> Self {
        StateVector(v)
    }
}

/// Covector `w` with `Trace{mat(ρ) Q} = Σ_i w_i ρ_i` for the column-stacking
/// vectorization. No conjugation is applied when evaluating.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceForm {
    weights: StateVector,
}

impl TraceForm {
    pub fn from_weights(weights: StateVector) -> Self {
        TraceForm { weights }
    }

    pub fn weights(&self) -> &StateVector {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn apply(&self, rho: &[C64]) -> Result<C64> {
        if rho.len() != self.weights.len() {
            return Err(Error::Dimension(format!(
                "trace form of length {} applied to state of length {}",
                self.weights.len(),
                rho.len()
            )));
        }
        Ok(self.eval(rho))
    }

    /// Unchecked evaluation for hot loops where lengths are known to match.
    #[inline]
    pub(crate) fn eval(&self, rho: &[C64]) -> C64 {
        self.weights.iter().zip(rho).map(|(w, r)| w * r).sum()
    }

    /// Keeps only the listed coordinates, in the given order.
    pub fn restrict(&self, kept: &[usize]) -> TraceForm {
        TraceForm { weights: StateVector(kept.iter().map(|&i| self.weights[i]).collect()) }
    }
}

/// Complex CSR matrix. Immutable after construction apart from the
/// matrix-vector product counter, which is atomic.
#[derive(Debug)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<C64>,
    matvecs: AtomicU64,
}

impl Clone for SparseMatrix {
    /// The clone starts with a fresh matvec counter.
    fn clone(&self) -> Self {
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_offsets: self.row_offsets.clone(),
            col_indices: self.col_indices.clone(),
            values: self.values.clone(),
            matvecs: AtomicU64::new(0),
        }
    }
}

impl PartialEq for SparseMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.row_offsets == other.row_offsets
            && self.col_indices == other.col_indices
            && self.values == other.values
    }
}

impl SparseMatrix {
    /// Builds a matrix from raw CSR arrays, validating every structural
    /// invariant. Stored exact zeros are dropped.
    pub fn from_csr(
        nrows: usize,
        ncols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<C64>,
    ) -> Result<Self> {
        if row_offsets.len() != nrows + 1 {
            return Err(Error::Dimension(format!(
                "row_offsets has length {}, expected {}",
                row_offsets.len(),
                nrows + 1
            )));
        }
        if col_indices.len() != values.len() || row_offsets[0] != 0 {
            return Err(Error::InvalidArgument("inconsistent CSR arrays".into()));
        }
        if *row_offsets.last().unwrap() != values.len() {
            return Err(Error::InvalidArgument("last row offset does not equal the number of values".into()));
        }
        for r in 0..nrows {
            let (lo, hi) = (row_offsets[r], row_offsets[r + 1]);
            if lo > hi {
                return Err(Error::InvalidArgument(format!("row_offsets decrease at row {r}")));
            }
            let cols = &col_indices[lo..hi];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(format!("column indices of row {r} are not strictly increasing")));
            }
            if cols.last().is_some_and(|&c| c >= ncols) {
                return Err(Error::Dimension(format!("column index out of range in row {r}")));
            }
        }
        let mut m = SparseMatrix { nrows, ncols, row_offsets, col_indices, values, matvecs: AtomicU64::new(0) };
        m.prune_exact_zeros();
        Ok(m)
    }

    /// Builds a matrix from unordered `(row, col, value)` triplets. Duplicates
    /// are summed; entries that are exactly zero afterwards are dropped.
    pub fn from_triplets<I>(nrows: usize, ncols: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, C64)>,
    {
        let mut entries: Vec<(usize, usize, C64)> = triplets.into_iter().collect();
        if let Some(&(r, c, _)) = entries.iter().find(|&&(r, c, _)| r >= nrows || c >= ncols) {
            return Err(Error::Dimension(format!("triplet ({r}, {c}) outside a {nrows}x{ncols} matrix")));
        }
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));

        let mut row_offsets = vec![0usize; nrows + 1];
        let mut col_indices = Vec::with_capacity(entries.len());
        let mut values: Vec<C64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                row_offsets[r + 1] += 1;
                col_indices.push(c);
                values.push(v);
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_offsets[r + 1] += row_offsets[r];
        }
        let mut m = SparseMatrix { nrows, ncols, row_offsets, col_indices, values, matvecs: AtomicU64::new(0) };
        m.prune_exact_zeros();
        Ok(m)
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseMatrix {
            nrows,
            ncols,
            row_offsets: vec![0; nrows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
            matvecs: AtomicU64::new(0),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![C64::new(1.0, 0.0); n])
    }

    pub fn diagonal(diag: &[C64]) -> Self {
        let n = diag.len();
        Self::from_triplets(n, n, diag.iter().enumerate().map(|(i, &v)| (i, i, v)))
            .expect("diagonal triplets are in range")
    }

    /// Sparsifies a dense row-major array; exact zeros are not stored.
    pub fn from_dense(rows: &[Vec<C64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::Dimension("ragged dense rows".into()));
        }
        Self::from_triplets(
            nrows,
            ncols,
            rows.iter().enumerate().flat_map(|(i, row)| row.iter().enumerate().map(move |(j, &v)| (i, j, v))),
        )
    }

    pub fn from_nalgebra(m: &DMatrix<C64>) -> Self {
        let triplets = (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| (i, j))).map(|(i, j)| (i, j, m[(i, j)]));
        Self::from_triplets(m.nrows(), m.ncols(), triplets).expect("indices come from the matrix shape")
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            d[(r, c)] = v;
        }
        d
    }

    fn prune_exact_zeros(&mut self) {
        if self.values.iter().all(|v| *v != C64::new(0.0, 0.0)) {
            return;
        }
        let mut write = 0;
        let mut new_offsets = vec![0usize; self.nrows + 1];
        for r in 0..self.nrows {
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                if self.values[k] != C64::new(0.0, 0.0) {
                    self.values[write] = self.values[k];
                    self.col_indices[write] = self.col_indices[k];
                    write += 1;
                }
            }
            new_offsets[r + 1] = write;
        }
        self.values.truncate(write);
        self.col_indices.truncate(write);
        self.row_offsets = new_offsets;
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

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// Stored entries of row `r` as `(col, value)` pairs.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let range = self.row_offsets[r]..self.row_offsets[r + 1];
        self.col_indices[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    /// All stored entries as `(row, col, value)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let range = self.row_offsets[r]..self.row_offsets[r + 1];
        match self.col_indices[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    /// Number of matrix-vector products performed with this matrix.
    pub fn matvec_count(&self) -> u64 {
        self.matvecs.load(Ordering::Relaxed)
    }

    pub fn spmv(&self, x: &[C64]) -> Result<StateVector> {
        let mut y = StateVector::zeros(self.nrows);
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    pub fn spmv_into(&self, x: &[C64], y: &mut [C64]) -> Result<()> {
        self.check_spmv(x, y)?;
        self.apply_rows(x, y, |acc, _| acc);
        Ok(())
    }

    /// `y = scale * (A x) + shift * x` for square `A`, in one pass over the rows.
    pub fn spmv_affine_into(&self, x: &[C64], y: &mut [C64], scale: f64, shift: f64) -> Result<()> {
        self.check_spmv(x, y)?;
        if !self.is_square() {
            return Err(Error::Dimension("affine spmv needs a square matrix".into()));
        }
        self.apply_rows(x, y, |acc, r| acc * scale + x[r] * shift);
        Ok(())
    }

    fn check_spmv(&self, x: &[C64], y: &[C64]) -> Result<()> {
        if x.len() != self.ncols || y.len() != self.nrows {
            return Err(Error::Dimension(format!(
                "spmv of a {}x{} matrix with x of length {} into y of length {}",
                self.nrows,
                self.ncols,
                x.len(),
                y.len()
            )));
        }
        Ok(())
    }

    /// Each row is summed left to right by stored index regardless of how rows
    /// are distributed over threads.
    fn apply_rows<F>(&self, x: &[C64], y: &mut [C64], finish: F)
    where
        F: Fn(C64, usize) -> C64 + Sync,
    {
        self.matvecs.fetch_add(1, Ordering::Relaxed);
        let row_sum = |r: usize| -> C64 {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            finish(acc, r)
        };
        if self.nrows >= PARALLEL_ROWS && rayon::current_num_threads() > 1 {
            y.par_chunks_mut(1024).enumerate().for_each(|(chunk, out)| {
                let base = chunk * 1024;
                for (i, yi) in out.iter_mut().enumerate() {
                    *yi = row_sum(base + i);
                }
            });
        } else {
            for (r, yi) in y.iter_mut().enumerate() {
                *yi = row_sum(r);
            }
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> SparseMatrix {
        self.map_transposed(|v| v.conj())
    }

    pub fn transpose(&self) -> SparseMatrix {
        self.map_transposed(|v| v)
    }

    fn map_transposed(&self, f: impl Fn(C64) -> C64) -> SparseMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let row_offsets = counts.clone();
        let mut next = counts;
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![C64::new(0.0, 0.0); self.nnz()];
        for (r, c, v) in self.iter() {
            let k = next[c];
            col_indices[k] = r;
            values[k] = f(v);
            next[c] += 1;
        }
        SparseMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            row_offsets,
            col_indices,
            values,
            matvecs: AtomicU64::new(0),
        }
    }

    pub fn scaled(&self, factor: C64) -> SparseMatrix {
        if factor == C64::new(0.0, 0.0) {
            return SparseMatrix::zeros(self.nrows, self.ncols);
        }
        let mut m = self.clone();
        for v in &mut m.values {
            *v *= factor;
        }
        m.prune_exact_zeros();
        m
    }

    /// Largest entrywise modulus of `A − A†`.
    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let adj = self.adjoint();
        linear_combine(C64::new(1.0, 0.0), self, C64::new(-1.0, 0.0), &adj)
            .map(|d| d.values.iter().map(|v| v.norm()).fold(0.0, f64::max))
            .unwrap_or(f64::INFINITY)
    }

    /// Principal submatrix on the given (sorted, unique) index set.
    pub fn restrict(&self, kept: &[usize]) -> Result<SparseMatrix> {
        if !self.is_square() {
            return Err(Error::Dimension("restriction needs a square matrix".into()));
        }
        let mut position = vec![usize::MAX; self.ncols];
        for (new, &old) in kept.iter().enumerate() {
            if old >= self.ncols {
                return Err(Error::Dimension(format!("kept index {old} out of range")));
            }
            position[old] = new;
        }
        let mut row_offsets = Vec::with_capacity(kept.len() + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for &old_row in kept {
            let mut row: Vec<(usize, C64)> =
                self.row(old_row).filter(|&(c, _)| position[c] != usize::MAX).map(|(c, v)| (position[c], v)).collect();
            row.sort_unstable_by_key(|&(c, _)| c);
            for (c, v) in row {
                col_indices.push(c);
                values.push(v);
            }
            row_offsets.push(values.len());
        }
        SparseMatrix::from_csr(kept.len(), kept.len(), row_offsets, col_indices, values)
    }
}

/// Kronecker product: `C[(i·p + k), (j·q + l)] = A[i, j] · B[k, l]` for a
/// `p x q` right factor.
pub fn kron(a: &SparseMatrix, b: &SparseMatrix) -> Result<SparseMatrix> {
    let nrows = a.nrows.checked_mul(b.nrows);
    let ncols = a.ncols.checked_mul(b.ncols);
    let (nrows, ncols) = match (nrows, ncols) {
        (Some(r), Some(c)) if r <= MAX_DIMENSION && c <= MAX_DIMENSION => (r, c),
        _ => {
            return Err(Error::Resource(format!(
                "kron of {}x{} and {}x{} exceeds the maximum dimension {MAX_DIMENSION}",
                a.nrows, a.ncols, b.nrows, b.ncols
            )))
        }
    };
    if a.values.iter().chain(&b.values).any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::InvalidArgument("kron operands must be finite".into()));
    }
    let mut row_offsets = Vec::with_capacity(nrows + 1);
    row_offsets.push(0);
    let mut col_indices = Vec::with_capacity(a.nnz() * b.nnz());
    let mut values = Vec::with_capacity(a.nnz() * b.nnz());
    for i in 0..a.nrows {
        for k in 0..b.nrows {
            for (j, av) in a.row(i) {
                for (l, bv) in b.row(k) {
                    let v = av * bv;
                    if v != C64::new(0.0, 0.0) {
                        col_indices.push(j * b.ncols + l);
                        values.push(v);
                    }
                }
            }
            row_offsets.push(values.len());
        }
    }
    Ok(SparseMatrix { nrows, ncols, row_offsets, col_indices, values, matvecs: AtomicU64::new(0) })
}

/// `alpha·A + beta·B` on the merged pattern; cancellations are pruned.
pub fn linear_combine(alpha: C64, a: &SparseMatrix, beta: C64, b: &SparseMatrix) -> Result<SparseMatrix> {
    if a.nrows != b.nrows || a.ncols != b.ncols {
        return Err(Error::Dimension(format!("cannot combine {}x{} with {}x{}", a.nrows, a.ncols, b.nrows, b.ncols)));
    }
    let zero = C64::new(0.0, 0.0);
    let mut row_offsets = Vec::with_capacity(a.nrows + 1);
    row_offsets.push(0);
    let mut col_indices = Vec::with_capacity(a.nnz() + b.nnz());
    let mut values = Vec::with_capacity(a.nnz() + b.nnz());
    let push = |col_indices: &mut Vec<usize>, values: &mut Vec<C64>, c: usize, v: C64| {
        if v != zero {
            col_indices.push(c);
            values.push(v);
        }
    };
    for r in 0..a.nrows {
        let (mut p, pe) = (a.row_offsets[r], a.row_offsets[r + 1]);
        let (mut q, qe) = (b.row_offsets[r], b.row_offsets[r + 1]);
        while p < pe || q < qe {
            let ca = if p < pe { a.col_indices[p] } else { usize::MAX };
            let cb = if q < qe { b.col_indices[q] } else { usize::MAX };
            if ca == cb {
                push(&mut col_indices, &mut values, ca, alpha * a.values[p] + beta * b.values[q]);
                p += 1;
                q += 1;
            } else if ca < cb {
                push(&mut col_indices, &mut values, ca, alpha * a.values[p]);
                p += 1;
            } else {
                push(&mut col_indices, &mut values, cb, beta * b.values[q]);
                q += 1;
            }
        }
        row_offsets.push(values.len());
    }
    Ok(SparseMatrix { nrows: a.nrows, ncols: a.ncols, row_offsets, col_indices, values, matvecs: AtomicU64::new(0) })
}

/// Covector for `ρ ↦ Trace{mat(ρ) Q}`: with column stacking,
/// `Trace{ρ Q} = Σ_ij ρ_ij Q_ji`, so `w[i + j·m] = Q[j, i]`.
pub fn trace_form(q: &SparseMatrix) -> Result<TraceForm> {
    if !q.is_square() {
        return Err(Error::Dimension(format!("observable must be square, got {}x{}", q.nrows, q.ncols)));
    }
    let m = q.nrows;
    let mut w = StateVector::zeros(m * m);
    for (r, c, v) in q.iter() {
        w[c + r * m] = v;
    }
    Ok(TraceForm::from_weights(w))
}

/// Column-stacking vectorization of a square operator.
pub fn vectorize(rho: &SparseMatrix) -> Result<StateVector> {
    if !rho.is_square() {
        return Err(Error::Dimension("only square operators can be vectorized".into()));
    }
    let m = rho.nrows;
    let mut v = StateVector::zeros(m * m);
    for (r, c, val) in rho.iter() {
        v[r + c * m] = val;
    }
    Ok(v)
}

/// Inverse of [`vectorize`], densified.
pub fn matricize(v: &[C64]) -> Result<DMatrix<C64>> {
    let m = (v.len() as f64).sqrt().round() as usize;
    if m * m != v.len() {
        return Err(Error::Dimension(format!("length {} is not a perfect square", v.len())));
    }
    Ok(DMatrix::from_column_slice(m, m, v))
}
