//! Dense reference engine: full eigendecomposition `L = X diag(λ) X†`.

use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::sparse::{SparseMatrix, StateVector, C64};
use crate::trace::{ExpectationTrace, Observable};

/// Largest dimension the dense engine accepts by default.
pub const DEFAULT_ORACLE_CAP: usize = 4096;

#[derive(Clone, Debug)]
pub struct ModeDecomposition {
    /// Ascending.
    pub lambda: Vec<f64>,
    /// Orthonormal eigenvectors as columns, ordered like `lambda`.
    pub x: DMatrix<C64>,
}

pub fn dense_eig(l: &SparseMatrix) -> Result<ModeDecomposition> {
    dense_eig_with_cap(l, DEFAULT_ORACLE_CAP)
}

pub fn dense_eig_with_cap(l: &SparseMatrix, cap: usize) -> Result<ModeDecomposition> {
    if !l.is_square() {
        return Err(Error::Dimension("dense eigensolve needs a square operator".into()));
    }
    let n = l.nrows();
    if n > cap {
        return Err(Error::Resource(format!(
            "dimension {n} exceeds the dense oracle cap {cap}; use a sparse engine (dec, cheb, krylov)"
        )));
    }
    if n == 0 {
        return Err(Error::Dimension("empty operator".into()));
    }
    let eig = SymmetricEigen::new(l.to_dense());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lambda = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let x = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(ModeDecomposition { lambda, x })
}

impl ModeDecomposition {
    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    /// Modal amplitudes `μ = X† ρ0`.
    pub fn amplitudes(&self, rho0: &[C64]) -> Result<Vec<C64>> {
        self.check_len(rho0.len())?;
        let mu = self.x.ad_mul(&DVector::from_column_slice(rho0));
        Ok(mu.iter().copied().collect())
    }

    /// `ρ(t) = X e^{−iλt} μ`.
    pub fn state_at(&self, mu: &[C64], t: f64) -> Result<StateVector> {
        self.check_len(mu.len())?;
        let phased = DVector::from_iterator(
            mu.len(),
            mu.iter().zip(&self.lambda).map(|(m, &lam)| m * C64::from_polar(1.0, -lam * t)),
        );
        Ok(StateVector((&self.x * phased).iter().copied().collect()))
    }

    /// Largest residual `‖L X − X diag(λ)‖_max` relative to `max|λ|`.
    pub fn residual(&self, l: &SparseMatrix) -> f64 {
        let lx = l.to_dense() * &self.x;
        let mut worst: f64 = 0.0;
        for j in 0..self.dim() {
            for i in 0..self.dim() {
                worst = worst.max((lx[(i, j)] - self.x[(i, j)] * self.lambda[j]).norm());
            }
        }
        let scale = self.lambda.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        worst / scale
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::Dimension(format!(
                "vector of length {len} for a decomposition of dimension {}",
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Exact expectations `Σ_j (wᵀX)_j μ_j e^{−iλ_j t}` at arbitrary times.
pub fn oracle_expect(
    dec: &ModeDecomposition,
    rho0: &[C64],
    observables: &[Observable],
    times: &[f64],
) -> Result<ExpectationTrace> {
    let start = Instant::now();
    let mu = dec.amplitudes(rho0)?;
    let mut weights = Vec::with_capacity(observables.len());
    for obs in observables {
        dec.check_len(obs.form.len())?;
        let w = DVector::from_column_slice(obs.form.weights());
        let wx = dec.x.tr_mul(&w);
        weights.push(wx.iter().zip(&mu).map(|(a, b)| a * b).collect::<Vec<C64>>());
    }
    let mut trace = ExpectationTrace::for_observables(observables, "oracle", 0.0);
    trace.meta.full_dim = dec.dim();
    for &t in times {
        let phases: Vec<C64> = dec.lambda.iter().map(|&lam| C64::from_polar(1.0, -lam * t)).collect();
        trace.times.push(t);
        for (series, g) in trace.values.iter_mut().zip(&weights) {
            series.push(g.iter().zip(&phases).map(|(a, b)| a * b).sum());
        }
    }
    trace.meta.wall_time = start.elapsed().as_secs_f64();
    Ok(trace)
}
