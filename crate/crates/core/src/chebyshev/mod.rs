//! Chebyshev expansion of `e^{−iLt}`.
//!
//! With `L = S·Id + D·L_s` and `σ(L_s) ⊂ [−1, 1]`,
//! `e^{−iLt} = e^{−itS} Σ_k c_k(tD) T_k(L_s)` where
//! `c_k(x) = (2 − δ_{k0}) (−i)^k J_k(x)`.

mod bessel;
mod clenshaw;
mod propagate;

pub use bessel::{bessel_sequence, forward_recurrence, miller_buffer, miller_start_guess};
pub use clenshaw::{chebyshev_recurrence_sum, clenshaw_apply, RescaledOperator};
pub use propagate::{cheb_step_propagate, ChebyshevOptions, ChebyshevStepper};

use crate::error::{Error, Result};
use crate::sparse::C64;

/// Tolerance used by the reference experiments.
pub const DEFAULT_EPS: f64 = 1e-7;

/// Expansion-order selector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StopCriterion {
    /// `√(|c_{n−1}|² + |c_n|²) < ε`, searched from `⌈t_D⌉ + 1`.
    #[default]
    TwoTerm,
    /// `|c_n| < ε` searched from `n = 1`; can stop early at a Bessel zero.
    SingleTerm,
}

/// `c_0 … c_{n_max}` for one rescaled time.
#[derive(Clone, Debug, PartialEq)]
pub struct ChebCoefficients {
    pub t_d: f64,
    pub values: Vec<C64>,
    pub eps: f64,
}

impl ChebCoefficients {
    /// Order `n_max`; `values` holds `n_max + 1` entries.
    pub fn order(&self) -> usize {
        self.values.len() - 1
    }
}

/// `(2 − δ_{k0}) (−i)^k J_k`.
pub fn coefficients_from_bessel(bessel: &[f64]) -> Vec<C64> {
    const PHASE: [C64; 4] = [C64::new(1.0, 0.0), C64::new(0.0, -1.0), C64::new(-1.0, 0.0), C64::new(0.0, 1.0)];
    bessel.iter().enumerate().map(|(k, &j)| PHASE[k % 4] * if k == 0 { j } else { 2.0 * j }).collect()
}

/// Bessel values `J_0 … J_{len-1}` at `t_d` long enough to contain the stop
/// order for `eps`, together with that order.
pub(crate) fn bessel_through_stop(t_d: f64, eps: f64, criterion: StopCriterion) -> Result<(Vec<f64>, usize)> {
    check_stop_args(t_d, eps)?;
    if t_d == 0.0 {
        return Ok((vec![1.0, 0.0], 1));
    }
    let mut len = miller_start_guess(t_d) + 2;
    loop {
        let j = bessel_sequence(t_d, len)?;
        if let Some(n) = search_order(&j, t_d, eps, criterion) {
            return Ok((j, n));
        }
        len *= 2;
    }
}

fn search_order(j: &[f64], t_d: f64, eps: f64, criterion: StopCriterion) -> Option<usize> {
    let mag = |k: usize| if k == 0 { j[0].abs() } else { 2.0 * j[k].abs() };
    match criterion {
        StopCriterion::TwoTerm => {
            let start = t_d.ceil() as usize + 1;
            (start..j.len()).find(|&n| (mag(n - 1).powi(2) + mag(n).powi(2)).sqrt() < eps)
        }
        StopCriterion::SingleTerm => (1..j.len()).find(|&n| mag(n) < eps),
    }
}

fn check_stop_args(t_d: f64, eps: f64) -> Result<()> {
    if !(t_d >= 0.0) || !t_d.is_finite() {
        return Err(Error::InvalidArgument(format!("rescaled time must be >= 0, got {t_d}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("tolerance must lie in (0, 1), got {eps}")));
    }
    Ok(())
}

/// Smallest admissible expansion order for rescaled time `t_d`.
pub fn stop_order(t_d: f64, eps: f64) -> Result<usize> {
    stop_order_with(t_d, eps, StopCriterion::TwoTerm)
}

pub fn stop_order_with(t_d: f64, eps: f64, criterion: StopCriterion) -> Result<usize> {
    Ok(bessel_through_stop(t_d, eps, criterion)?.1)
}

/// Coefficients `c_0 … c_{n_max}` where `n_max = stop_order(t_d, eps)`.
pub fn chebyshev_coefficients(t_d: f64, eps: f64, criterion: StopCriterion) -> Result<ChebCoefficients> {
    let (j, n) = bessel_through_stop(t_d, eps, criterion)?;
    Ok(ChebCoefficients { t_d, values: coefficients_from_bessel(&j[..=n]), eps })
}

/// `4 (e^{1 − (t/2m)²} t / 2m)^m` without the regime check.
pub(crate) fn error_bound_value(t: f64, m: usize) -> f64 {
    let m = m as f64;
    let x = t / (2.0 * m);
    4.0 * ((1.0 - x * x).exp() * x).powf(m)
}

/// A-priori bound on `‖P_{m−1}(t L_s) v − e^{−itL_s} v‖` for unit `v`, where
/// `P_{m−1}` keeps the first `m` Chebyshev terms. Only meaningful for `m > t`.
pub fn error_bound(t: f64, m: usize) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time must be >= 0, got {t}")));
    }
    if (m as f64) <= t {
        return Err(Error::InvalidArgument(format!("bound regime needs m > t (m = {m}, t = {t})")));
    }
    Ok(error_bound_value(t, m))
}
