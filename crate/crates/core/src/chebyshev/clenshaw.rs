//! Chebyshev series applied to a vector.

use crate::error::{Error, Result};
use crate::sparse::{SparseMatrix, StateVector, C64};
use crate::spectral::ScalingParams;

/// `L_s = (L − shift·Id) / half_width`, applied without forming `L_s`.
#[derive(Clone, Copy, Debug)]
pub struct RescaledOperator<'a> {
    pub matrix: &'a SparseMatrix,
    pub shift: f64,
    pub half_width: f64,
}

impl<'a> RescaledOperator<'a> {
    pub fn new(matrix: &'a SparseMatrix, scaling: &ScalingParams) -> Result<Self> {
        Self::with(matrix, scaling.shift, scaling.half_width)
    }

    pub fn with(matrix: &'a SparseMatrix, shift: f64, half_width: f64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension("rescaled operator must be square".into()));
        }
        if !(half_width > 0.0) || !half_width.is_finite() || !shift.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid rescaling: shift {shift}, half-width {half_width}")));
        }
        Ok(RescaledOperator { matrix, shift, half_width })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `y = L_s x`; one matrix-vector product.
    pub fn apply_into(&self, x: &[C64], y: &mut [C64]) -> Result<()> {
        let inv = 1.0 / self.half_width;
        self.matrix.spmv_affine_into(x, y, inv, -self.shift * inv)
    }
}

/// `Σ_{k=0}^{n} c_k T_k(L_s) v` by Clenshaw's backward recurrence
/// `b_k = c_k v + 2 L_s b_{k+1} − b_{k+2}`, closed with
/// `(b_0 − b_2 + c_0 v) / 2`. Uses `n` products with `L` for `n + 1`
/// coefficients.
pub fn clenshaw_apply(op: &RescaledOperator<'_>, coeffs: &[C64], v: &[C64]) -> Result<StateVector> {
    if coeffs.is_empty() {
        return Err(Error::InvalidArgument("empty coefficient array".into()));
    }
    if v.len() != op.dim() {
        return Err(Error::Dimension(format!(
            "vector of length {} for an operator of dimension {}",
            v.len(),
            op.dim()
        )));
    }
    let dim = v.len();
    let n = coeffs.len() - 1;
    // b1 = b_{k+1}, b2 = b_{k+2}
    let mut b1 = StateVector(v.iter().map(|x| coeffs[n] * x).collect());
    let mut b2 = StateVector::zeros(dim);
    let mut work = StateVector::zeros(dim);
    for k in (0..n).rev() {
        op.apply_into(&b1, &mut work)?;
        let ck = coeffs[k];
        for i in 0..dim {
            work[i] = ck * v[i] + 2.0 * work[i] - b2[i];
        }
        // (b1, b2, work) <- (b_k, b_{k+1}, b_{k+2})
        std::mem::swap(&mut b2, &mut b1);
        std::mem::swap(&mut b1, &mut work);
    }
    if n == 0 {
        return Ok(b1);
    }
    // b1 = b_0 and work = b_2 (zero when n == 1)
    let c0 = coeffs[0];
    for i in 0..dim {
        b1[i] = 0.5 * (b1[i] - work[i] + c0 * v[i]);
    }
    Ok(b1)
}

/// Direct summation through `T_{k+1} = 2 L_s T_k − T_{k−1}`; reference for
/// [`clenshaw_apply`].
pub fn chebyshev_recurrence_sum(op: &RescaledOperator<'_>, coeffs: &[C64], v: &[C64]) -> Result<StateVector> {
    if coeffs.is_empty() {
        return Err(Error::InvalidArgument("empty coefficient array".into()));
    }
    if v.len() != op.dim() {
        return Err(Error::Dimension("vector length does not match operator".into()));
    }
    let dim = v.len();
    let mut out = StateVector(v.iter().map(|x| coeffs[0] * x).collect());
    if coeffs.len() == 1 {
        return Ok(out);
    }
    let mut prev = StateVector(v.to_vec());
    let mut cur = StateVector::zeros(dim);
    op.apply_into(&prev, &mut cur)?;
    out.axpy(coeffs[1], &cur);
    let mut next = StateVector::zeros(dim);
    for &c in &coeffs[2..] {
        op.apply_into(&cur, &mut next)?;
        for i in 0..dim {
            next[i] = 2.0 * next[i] - prev[i];
        }
        out.axpy(c, &next);
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(out)
}
