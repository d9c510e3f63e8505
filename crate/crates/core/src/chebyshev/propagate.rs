//! Fixed-step Chebyshev propagation `ρ_{n+1} = e^{−iL dt} ρ_n`.

use std::time::Instant;

use super::{chebyshev_coefficients, clenshaw_apply, RescaledOperator, StopCriterion, DEFAULT_EPS};
use crate::error::{Error, Result};
use crate::sparse::{SparseMatrix, StateVector, C64};
use crate::spectral::ScalingParams;
use crate::trace::{Deadline, ExpectationTrace, Observable};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChebyshevOptions {
    pub eps: f64,
    pub criterion: StopCriterion,
}

impl Default for ChebyshevOptions {
    fn default() -> Self {
        ChebyshevOptions { eps: DEFAULT_EPS, criterion: StopCriterion::TwoTerm }
    }
}

/// One-step propagator `e^{−i dt S} Σ c_k(dt D) T_k(L_s)`, built once and
/// reused for every step.
pub struct ChebyshevStepper<'a> {
    op: Option<RescaledOperator<'a>>,
    coeffs: Vec<C64>,
    phase: C64,
}

impl<'a> ChebyshevStepper<'a> {
    pub fn new(l: &'a SparseMatrix, scaling: &ScalingParams, dt: f64, opts: &ChebyshevOptions) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        let phase = C64::from_polar(1.0, -dt * scaling.shift);
        if scaling.is_degenerate() {
            // L = S·Id on the relevant subspace: the step is a pure phase
            return Ok(ChebyshevStepper { op: None, coeffs: vec![C64::new(1.0, 0.0)], phase });
        }
        let op = RescaledOperator::new(l, scaling)?;
        let coeffs = chebyshev_coefficients(dt * scaling.half_width, opts.eps, opts.criterion)?.values;
        Ok(ChebyshevStepper { op: Some(op), coeffs, phase })
    }

    /// Polynomial degree, equal to the products with `L` per step.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn step(&self, rho: &[C64]) -> Result<StateVector> {
        let mut next = match &self.op {
            Some(op) => clenshaw_apply(op, &self.coeffs, rho)?,
            None => StateVector(rho.to_vec()),
        };
        next.scale(self.phase);
        Ok(next)
    }
}

/// `steps` Chebyshev steps of length `dt`, recording every observable at
/// `t = 0, dt, …, steps·dt`.
#[allow(clippy::too_many_arguments)]
pub fn cheb_step_propagate(
    l: &SparseMatrix,
    scaling: &ScalingParams,
    rho0: &[C64],
    dt: f64,
    steps: usize,
    observables: &[Observable],
    opts: &ChebyshevOptions,
    deadline: &Deadline,
) -> Result<ExpectationTrace> {
    if rho0.len() != l.ncols() || observables.iter().any(|o| o.form.len() != rho0.len()) {
        return Err(Error::Dimension("state, operator and observables differ in dimension".into()));
    }
    let start = Instant::now();
    let before = l.matvec_count();
    let stepper = ChebyshevStepper::new(l, scaling, dt, opts)?;
    let mut trace = ExpectationTrace::for_observables(observables, "cheb", opts.eps);
    trace.meta.full_dim = rho0.len();
    trace.meta.chebyshev_order = Some(stepper.order());
    let mut rho = StateVector(rho0.to_vec());
    trace.record(0.0, observables, &rho);
    for n in 1..=steps {
        deadline.check()?;
        rho = stepper.step(&rho)?;
        trace.record(n as f64 * dt, observables, &rho);
    }
    trace.meta.matvecs = l.matvec_count() - before;
    trace.meta.wall_time = start.elapsed().as_secs_f64();
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{extreme_eigs, DEFAULT_BOUND_STEPS, DEFAULT_INFLATION};
    use crate::spin::{SpinProblem, SpinSystemSpec};

    fn fid_observable(p: &SpinProblem) -> Vec<Observable> {
        vec![Observable::new("ip", p.fid_form())]
    }

    #[test]
    fn zero_operator_leaves_state_unchanged() {
        let l = SparseMatrix::zeros(4, 4);
        let scaling = extreme_eigs(&l, DEFAULT_BOUND_STEPS, DEFAULT_INFLATION).unwrap();
        let rho0 = StateVector(vec![C64::new(1.0, 0.5), C64::new(0.0, 0.0), C64::new(-2.0, 0.0), C64::new(0.0, 1.0)]);
        let stepper = ChebyshevStepper::new(&l, &scaling, 0.1, &ChebyshevOptions::default()).unwrap();
        let mut rho = rho0.clone();
        for _ in 0..10 {
            rho = stepper.step(&rho).unwrap();
        }
        assert!(rho.max_abs_diff(&rho0) < 1e-15);
    }

    #[test]
    fn single_spin_fid() {
        let omega = 2.0;
        let p = SpinProblem::new(SpinSystemSpec::uncoupled(vec![omega]).unwrap()).unwrap();
        let scaling = extreme_eigs(&p.liouvillian, DEFAULT_BOUND_STEPS, DEFAULT_INFLATION).unwrap();
        let opts = ChebyshevOptions::default();
        let trace = cheb_step_propagate(
            &p.liouvillian,
            &scaling,
            &p.rho0,
            0.1,
            100,
            &fid_observable(&p),
            &opts,
            &Deadline::none(),
        )
        .unwrap();
        assert_eq!(trace.len(), 101);
        for (t, f) in trace.times.iter().zip(trace.primary()) {
            let exact = C64::new(0.0, -0.5) * C64::from_polar(1.0, -omega * t);
            assert!((f - exact).norm() <= 10.0 * opts.eps, "t = {t}");
        }
        assert_eq!(trace.meta.matvecs, 100 * trace.meta.chebyshev_order.unwrap() as u64);
    }

    #[test]
    fn norm_is_preserved() {
        let spec = SpinSystemSpec::new(
            vec![3.0, -1.5, 0.7],
            vec![vec![0.0, 0.4, 0.1], vec![0.4, 0.0, 0.25], vec![0.1, 0.25, 0.0]],
        )
        .unwrap();
        let p = SpinProblem::new(spec).unwrap();
        let scaling = extreme_eigs(&p.liouvillian, DEFAULT_BOUND_STEPS, DEFAULT_INFLATION).unwrap();
        let opts = ChebyshevOptions::default();
        let stepper = ChebyshevStepper::new(&p.liouvillian, &scaling, 0.1, &opts).unwrap();
        let n0 = p.rho0.norm();
        let mut rho = p.rho0.clone();
        for n in 1..=200 {
            rho = stepper.step(&rho).unwrap();
            assert!((rho.norm() - n0).abs() <= n as f64 * opts.eps);
        }
    }

    #[test]
    fn rejects_bad_step() {
        let l = SparseMatrix::identity(2);
        let s = ScalingParams::from_bounds(0.0, 2.0, 0.0).unwrap();
        assert!(ChebyshevStepper::new(&l, &s, 0.0, &ChebyshevOptions::default()).is_err());
    }
}
