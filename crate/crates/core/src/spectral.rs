//! Lanczos tridiagonalization and the small symmetric tridiagonal
//! eigenproblem behind both the spectral-bound estimate and the Krylov
//! exponential.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sparse::{SparseMatrix, StateVector, C64};

/// Relative size of `β_{j+1}` (against `‖L q_j‖`) below which the Krylov
/// space is treated as invariant.
pub const BREAKDOWN_TOL: f64 = 1e-14;

/// Absolute floor added to the inflated half-width.
pub const HALF_WIDTH_FLOOR: f64 = 1e-8;

pub const DEFAULT_BOUND_STEPS: usize = 30;
pub const DEFAULT_INFLATION: f64 = 0.05;

/// Lanczos vectors beyond this count are no longer fully reorthogonalized.
pub const FULL_REORTH_LIMIT: usize = 200;

const START_SEED: u64 = 0x5eed_1a2c;

#[derive(Clone, Debug)]
pub struct LanczosFactorization {
    pub basis: Vec<StateVector>,
    pub alpha: Vec<f64>,
    /// `β_2 … β_{m+1}`; the last entry couples to the first vector outside the basis.
    pub beta: Vec<f64>,
    pub breakdown: bool,
}

impl LanczosFactorization {
    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// Eigenvalues of `T_m`, ascending.
    pub fn ritz_values(&self) -> Result<Vec<f64>> {
        let off = &self.beta[..self.len().saturating_sub(1)];
        Ok(TridiagEigen::compute(&self.alpha, off, EigvecRows::None)?.values)
    }
}

/// Incremental Lanczos process for Hermitian `L`, one basis vector at a time.
pub struct LanczosProcess<'a> {
    op: &'a SparseMatrix,
    basis: Vec<StateVector>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    pending: Option<StateVector>,
    reorthogonalize: bool,
    breakdown: bool,
    work: StateVector,
}

impl<'a> LanczosProcess<'a> {
    /// Starts from `v0 / ‖v0‖`.
    pub fn new(op: &'a SparseMatrix, v0: &[C64], reorthogonalize: bool) -> Result<Self> {
        if !op.is_square() || op.ncols() != v0.len() {
            return Err(Error::Dimension(format!(
                "Lanczos on a {}x{} operator with a start vector of length {}",
                op.nrows(),
                op.ncols(),
                v0.len()
            )));
        }
        let mut q = StateVector(v0.to_vec());
        let norm = q.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidArgument("Lanczos start vector must be nonzero".into()));
        }
        q.scale(C64::new(1.0 / norm, 0.0));
        Ok(LanczosProcess {
            op,
            basis: Vec::new(),
            alpha: Vec::new(),
            beta: Vec::new(),
            pending: Some(q),
            reorthogonalize,
            breakdown: false,
            work: StateVector::zeros(v0.len()),
        })
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn breakdown(&self) -> bool {
        self.breakdown
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn basis(&self) -> &[StateVector] {
        &self.basis
    }

    /// `q_{m+1}`, normalized; `None` after breakdown.
    pub fn next_vector(&self) -> Option<&StateVector> {
        self.pending.as_ref()
    }

    /// Adds one basis vector and computes the next `α`, `β`. Returns `false`
    /// (doing nothing) once the process has broken down.
    pub fn extend(&mut self) -> Result<bool> {
        let Some(q) = self.pending.take() else {
            return Ok(false);
        };
        self.op.spmv_into(&q, &mut self.work)?;
        let scale = self.work.norm();
        let mut w = std::mem::replace(&mut self.work, StateVector::zeros(q.len()));
        if let (Some(prev), Some(&b)) = (self.basis.last(), self.beta.last()) {
            w.axpy(C64::new(-b, 0.0), prev);
        }
        let a = q.dot(&w).re;
        w.axpy(C64::new(-a, 0.0), &q);
        self.basis.push(q);
        if self.reorthogonalize && self.basis.len() <= FULL_REORTH_LIMIT {
            for v in &self.basis {
                let proj = v.dot(&w);
                w.axpy(-proj, v);
            }
        }
        let b = w.norm();
        self.alpha.push(a);
        self.beta.push(b);
        if b <= BREAKDOWN_TOL * scale || b == 0.0 {
            self.breakdown = true;
        } else {
            w.scale(C64::new(1.0 / b, 0.0));
            self.pending = Some(w);
        }
        Ok(true)
    }

    pub fn finish(self) -> LanczosFactorization {
        LanczosFactorization { basis: self.basis, alpha: self.alpha, beta: self.beta, breakdown: self.breakdown }
    }
}

/// Runs up to `m_max` Lanczos steps, stopping early at breakdown.
pub fn lanczos(op: &SparseMatrix, v0: &[C64], m_max: usize, reorthogonalize: bool) -> Result<LanczosFactorization> {
    let mut process = LanczosProcess::new(op, v0, reorthogonalize)?;
    while process.len() < m_max && process.extend()? {}
    Ok(process.finish())
}

/// Which rows of the eigenvector matrix to accumulate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigvecRows {
    None,
    /// Rows `0` and `m − 1`, enough for `[e^{−itT}]_{m,1}`.
    FirstLast,
    All,
}

/// Eigendecomposition of a real symmetric tridiagonal matrix by implicit QL
/// with Wilkinson shifts.
#[derive(Clone, Debug)]
pub struct TridiagEigen {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Selected rows of the orthogonal eigenvector matrix; `rows[r][j]` is
    /// component `row_index[r]` of eigenvector `j`.
    pub rows: Vec<Vec<f64>>,
    pub row_index: Vec<usize>,
}

impl TridiagEigen {
    pub fn compute(diag: &[f64], offdiag: &[f64], want: EigvecRows) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Ok(TridiagEigen { values: vec![], rows: vec![], row_index: vec![] });
        }
        if offdiag.len() + 1 != n {
            return Err(Error::Dimension(format!(
                "tridiagonal with {n} diagonal entries needs {} off-diagonal entries",
                n - 1
            )));
        }
        let row_index: Vec<usize> = match want {
            EigvecRows::None => vec![],
            EigvecRows::FirstLast if n == 1 => vec![0],
            EigvecRows::FirstLast => vec![0, n - 1],
            EigvecRows::All => (0..n).collect(),
        };
        let mut z: Vec<Vec<f64>> =
            row_index.iter().map(|&r| (0..n).map(|j| if j == r { 1.0 } else { 0.0 }).collect()).collect();
        let mut d = diag.to_vec();
        let mut e = offdiag.to_vec();
        e.push(0.0);

        for l in 0..n {
            let mut iterations = 0;
            loop {
                let mut m = l;
                while m + 1 < n {
                    let dd = d[m].abs() + d[m + 1].abs();
                    if e[m].abs() <= f64::EPSILON * dd {
                        break;
                    }
                    m += 1;
                }
                if m == l {
                    break;
                }
                iterations += 1;
                if iterations > 100 {
                    return Err(Error::Numerical("tridiagonal QL iteration did not converge".into()));
                }
                let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                let mut r = g.hypot(1.0);
                g = d[m] - d[l] + e[l] / (g + r.copysign(g));
                let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
                let mut deflated = false;
                let mut i = m;
                while i > l {
                    i -= 1;
                    let f = s * e[i];
                    let b = c * e[i];
                    r = f.hypot(g);
                    e[i + 1] = r;
                    if r == 0.0 {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        deflated = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    for row in z.iter_mut() {
                        let f = row[i + 1];
                        row[i + 1] = s * row[i] + c * f;
                        row[i] = c * row[i] - s * f;
                    }
                }
                if deflated {
                    continue;
                }
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
        let values = order.iter().map(|&j| d[j]).collect();
        let rows = z.into_iter().map(|row| order.iter().map(|&j| row[j]).collect()).collect();
        Ok(TridiagEigen { values, rows, row_index })
    }

    fn row(&self, index: usize) -> Option<&[f64]> {
        self.row_index.iter().position(|&r| r == index).map(|p| self.rows[p].as_slice())
    }

    /// Entry `(i, 0)` of `e^{−itT}`; row `i` must have been accumulated.
    pub fn exp_entry(&self, i: usize, t: f64) -> Option<C64> {
        let first = self.row(0)?;
        let target = self.row(i)?;
        Some(
            self.values
                .iter()
                .zip(first)
                .zip(target)
                .map(|((&lam, &z0), &zi)| C64::from_polar(z0 * zi, -lam * t))
                .sum(),
        )
    }

    /// `e^{−itT} e_1`; needs all rows.
    pub fn exp_first_column(&self, t: f64) -> Option<Vec<C64>> {
        if self.row_index.len() != self.values.len() {
            return None;
        }
        let first = &self.rows[0];
        let phases: Vec<C64> = self.values.iter().zip(first).map(|(&lam, &z0)| C64::from_polar(z0, -lam * t)).collect();
        Some(self.rows.iter().map(|row| row.iter().zip(&phases).map(|(&z, &ph)| ph * z).sum()).collect())
    }
}

/// First column of `e^{−itT}` for the symmetric tridiagonal `T` with
/// diagonal `alpha` and off-diagonal `beta`.
pub fn tridiag_expv(alpha: &[f64], beta: &[f64], t: f64) -> Result<Vec<C64>> {
    if alpha.is_empty() {
        return Err(Error::InvalidArgument("empty tridiagonal matrix".into()));
    }
    let eig = TridiagEigen::compute(alpha, beta, EigvecRows::All)?;
    Ok(eig.exp_first_column(t).expect("all rows accumulated"))
}

/// Spectral enclosure `[lower, upper]` and the derived affine map
/// `L = shift·Id + half_width·L_s` with `σ(L_s) ⊂ [−1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingParams {
    pub upper: f64,
    pub lower: f64,
    pub shift: f64,
    pub half_width: f64,
    /// Half-width before inflation; zero for a single-point spectrum.
    pub raw_half_width: f64,
}

impl ScalingParams {
    /// Inflates `[lower, upper]` outward by `inflation` of its half-width plus
    /// [`HALF_WIDTH_FLOOR`].
    pub fn from_bounds(lower: f64, upper: f64, inflation: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) || lower > upper {
            return Err(Error::InvalidArgument(format!("invalid spectral bounds [{lower}, {upper}]")));
        }
        let shift = 0.5 * (upper + lower);
        let raw = 0.5 * (upper - lower);
        let half_width = raw * (1.0 + inflation.max(0.0)) + HALF_WIDTH_FLOOR;
        Ok(ScalingParams {
            upper: shift + half_width,
            lower: shift - half_width,
            shift,
            half_width,
            raw_half_width: raw,
        })
    }

    pub fn is_degenerate(&self) -> bool {
        self.raw_half_width == 0.0
    }

    pub fn contains(&self, lambda: f64) -> bool {
        self.lower <= lambda && lambda <= self.upper
    }
}

/// Deterministic pseudo-random start vector used for bound estimation.
pub fn start_vector(len: usize) -> StateVector {
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    StateVector((0..len).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())
}

/// Encloses `σ(L)` from an `m`-step Lanczos run. Each extreme Ritz value is
/// pushed outward by its residual bound `β_{m+1}|z_{m,j}|` before the
/// relative inflation is applied.
pub fn extreme_eigs(op: &SparseMatrix, m: usize, inflation: f64) -> Result<ScalingParams> {
    if !op.is_square() || op.nrows() == 0 {
        return Err(Error::Dimension("spectral bounds need a nonempty square operator".into()));
    }
    let fact = lanczos(op, &start_vector(op.ncols()), m.max(1), true)?;
    let k = fact.len();
    let eig = TridiagEigen::compute(&fact.alpha, &fact.beta[..k - 1], EigvecRows::FirstLast)?;
    let (lo, hi) = (eig.values[0], eig.values[k - 1]);
    let (lo, hi) = if fact.breakdown {
        (lo, hi)
    } else {
        let beta_next = fact.beta[k - 1];
        let last = eig.rows.last().expect("last row accumulated");
        (lo - beta_next * last[0].abs(), hi + beta_next * last[k - 1].abs())
    };
    ScalingParams::from_bounds(lo, hi, inflation)
}
