//! Zero-track elimination: propagate over an initial window, drop every
//! coordinate whose modulus never reaches `xi`, continue in the reduced
//! space.
//!
//! Only coordinates that are exactly unreachable from `ρ0` are safe to drop.
//! A coordinate can sit below any threshold during the window and still grow
//! to order one later; [`counterexample_system`] builds such a case.

use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

use crate::chebyshev::{ChebyshevOptions, ChebyshevStepper};
use crate::error::{Error, Result};
use crate::krylov::{krylov_propagate, krylov_step, KrylovOptions};
use crate::sparse::{SparseMatrix, StateVector, TraceForm, C64};
use crate::spectral::ScalingParams;
use crate::spin::SpinSystemSpec;
use crate::trace::{Deadline, ExpectationTrace, Observable};

pub const DEFAULT_XI: f64 = 1e-6;

/// Full-space time stepping used to scan the window.
pub trait Propagator {
    fn advance(&mut self, rho: &[C64], dt: f64) -> Result<StateVector>;
}

pub struct KrylovPropagator<'a> {
    pub l: &'a SparseMatrix,
    pub opts: KrylovOptions,
}

impl Propagator for KrylovPropagator<'_> {
    fn advance(&mut self, rho: &[C64], dt: f64) -> Result<StateVector> {
        Ok(krylov_step(self.l, rho, dt, &self.opts)?.state)
    }
}

/// Chebyshev stepping with a step length fixed at construction.
pub struct ChebyshevPropagator<'a> {
    stepper: ChebyshevStepper<'a>,
    dt: f64,
}

impl<'a> ChebyshevPropagator<'a> {
    pub fn new(l: &'a SparseMatrix, scaling: &ScalingParams, dt: f64, opts: &ChebyshevOptions) -> Result<Self> {
        Ok(ChebyshevPropagator { stepper: ChebyshevStepper::new(l, scaling, dt, opts)?, dt })
    }
}

impl Propagator for ChebyshevPropagator<'_> {
    fn advance(&mut self, rho: &[C64], dt: f64) -> Result<StateVector> {
        if (dt - self.dt).abs() > 1e-12 * self.dt {
            return Err(Error::InvalidArgument(format!(
                "Chebyshev propagator built for dt = {}, asked for {dt}",
                self.dt
            )));
        }
        self.stepper.step(rho)
    }
}

#[derive(Clone, Debug)]
pub struct ZteReduction {
    /// Ascending indices into the full space.
    pub kept: Vec<usize>,
    pub l_z: SparseMatrix,
    pub xi: f64,
    pub delta_t: f64,
    pub window_steps: usize,
    pub full_dim: usize,
    /// Products with the full operator spent scanning the window.
    pub setup_matvecs: u64,
}

impl ZteReduction {
    pub fn reduced_dim(&self) -> usize {
        self.kept.len()
    }

    pub fn report(&self) -> ZteReport {
        ZteReport {
            kept: self.kept.len(),
            full: self.full_dim,
            xi: self.xi,
            delta_t: self.delta_t,
            window_steps: self.window_steps,
        }
    }

    pub fn restrict_state(&self, rho: &[C64]) -> Result<StateVector> {
        if rho.len() != self.full_dim {
            return Err(Error::Dimension(format!(
                "state of length {} for a reduction of a {}-dimensional space",
                rho.len(),
                self.full_dim
            )));
        }
        Ok(StateVector(self.kept.iter().map(|&i| rho[i]).collect()))
    }

    pub fn restrict_form(&self, form: &TraceForm) -> Result<TraceForm> {
        if form.len() != self.full_dim {
            return Err(Error::Dimension("observable does not match the full space".into()));
        }
        Ok(form.restrict(&self.kept))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZteReport {
    pub kept: usize,
    pub full: usize,
    pub xi: f64,
    pub delta_t: f64,
    pub window_steps: usize,
}

impl fmt::Display for ZteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "zte kept={} full={} xi={:e} delta_t={:e} window_steps={}",
            self.kept, self.full, self.xi, self.delta_t, self.window_steps
        )
    }
}

/// `2π / min_j |ω_j|` over the nonzero Larmor frequencies.
pub fn zte_window(spec: &SpinSystemSpec) -> Result<f64> {
    zte_window_from(spec.omega0())
}

pub fn zte_window_from(omega0: &[f64]) -> Result<f64> {
    omega0
        .iter()
        .map(|w| w.abs())
        .filter(|&w| w > 0.0)
        .min_by(f64::total_cmp)
        .map(|w| 2.0 * PI / w)
        .ok_or_else(|| Error::InvalidArgument("the window needs at least one nonzero Larmor frequency".into()))
}

/// Propagates `⌈δt/dt⌉` steps and keeps every coordinate whose modulus
/// reaches `xi` at some sampled time, including `t = 0`.
pub fn zte_detect(
    l: &SparseMatrix,
    rho0: &[C64],
    dt: f64,
    delta_t: f64,
    xi: f64,
    engine: &mut dyn Propagator,
) -> Result<ZteReduction> {
    if !(dt > 0.0) || !(delta_t >= dt) {
        return Err(Error::InvalidArgument(format!("need 0 < dt <= delta_t, got dt = {dt}, delta_t = {delta_t}")));
    }
    if !(xi >= 0.0) || !xi.is_finite() {
        return Err(Error::InvalidArgument(format!("threshold must be >= 0, got {xi}")));
    }
    if rho0.len() != l.ncols() || !l.is_square() {
        return Err(Error::Dimension("state length does not match the operator".into()));
    }
    let before = l.matvec_count();
    let steps = ((delta_t / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let mut peak: Vec<f64> = rho0.iter().map(|z| z.norm()).collect();
    let mut rho = StateVector(rho0.to_vec());
    for _ in 0..steps {
        rho = engine.advance(&rho, dt)?;
        for (p, z) in peak.iter_mut().zip(rho.iter()) {
            *p = p.max(z.norm());
        }
    }
    let kept: Vec<usize> = (0..peak.len()).filter(|&i| peak[i] >= xi).collect();
    if kept.is_empty() {
        return Err(Error::InvalidArgument(format!("threshold {xi} prunes every coordinate")));
    }
    let l_z = l.restrict(&kept)?;
    Ok(ZteReduction {
        kept,
        l_z,
        xi,
        delta_t,
        window_steps: steps,
        full_dim: rho0.len(),
        setup_matvecs: l.matvec_count() - before,
    })
}

/// Krylov propagation of the restricted problem from `t = 0`.
pub fn zte_propagate(
    red: &ZteReduction,
    rho0: &[C64],
    dt: f64,
    steps: usize,
    observables: &[Observable],
    opts: &KrylovOptions,
    deadline: &Deadline,
) -> Result<ExpectationTrace> {
    let start = Instant::now();
    let rho_z = red.restrict_state(rho0)?;
    let obs_z: Vec<Observable> = observables
        .iter()
        .map(|o| Ok(Observable::new(o.label.clone(), red.restrict_form(&o.form)?)))
        .collect::<Result<_>>()?;
    let mut trace = krylov_propagate(&red.l_z, &rho_z, dt, steps, &obs_z, opts, deadline)?;
    trace.meta.engine = "zte".into();
    trace.meta.full_dim = red.full_dim;
    trace.meta.reduced_dim = Some(red.reduced_dim());
    trace.meta.setup_matvecs += red.setup_matvecs;
    let pruned = red.full_dim - red.reduced_dim();
    if pruned > 0 {
        trace.meta.warnings.insert(
            0,
            format!(
                "zte pruned {pruned} of {} coordinates at xi = {:e}; accuracy is not guaranteed",
                red.full_dim, red.xi
            ),
        );
    }
    trace.meta.wall_time = start.elapsed().as_secs_f64();
    Ok(trace)
}

/// Coordinates `l` with `⟨l|L^k ρ0⟩ = 0` for `k = 0 … k_max`.
pub fn unreachable_coordinates(l: &SparseMatrix, rho0: &[C64], k_max: usize) -> Result<Vec<usize>> {
    let mut reached: Vec<bool> = rho0.iter().map(|z| *z != C64::new(0.0, 0.0)).collect();
    let mut v = StateVector(rho0.to_vec());
    let mut w = StateVector::zeros(rho0.len());
    for _ in 0..k_max {
        l.spmv_into(&v, &mut w)?;
        std::mem::swap(&mut v, &mut w);
        // keep the iterate bounded; only the zero pattern matters
        let n = v.norm();
        if n == 0.0 {
            break;
        }
        v.scale(C64::new(1.0 / n, 0.0));
        for (r, z) in reached.iter_mut().zip(v.iter()) {
            *r |= *z != C64::new(0.0, 0.0);
        }
    }
    Ok((0..reached.len()).filter(|&i| !reached[i]).collect())
}

/// `e^{−i2πt} − ½ e^{−i2π(1.001)t} − ½ e^{−i2π(0.999)t}`.
pub fn counterexample_f(t: f64) -> C64 {
    let osc = |nu: f64| C64::from_polar(1.0, -2.0 * PI * nu * t);
    osc(1.0) - 0.5 * osc(1.001) - 0.5 * osc(0.999)
}

/// Three-mode problem whose middle coordinate follows [`counterexample_f`].
pub struct CounterExample {
    pub l: SparseMatrix,
    pub rho0: StateVector,
    /// Picks out the resonant coordinate.
    pub observable: Observable,
    /// Index of the resonant coordinate.
    pub resonant: usize,
    pub delta_t: f64,
}

/// `L = X diag(λ) Xᵀ` with orthonormal `X`, `λ = 2π (1, 1.001, 0.999)` and
/// `ρ0 = X μ`, `μ = √3 (1, −½, −½)`. Row 1 of `X` is constant, so
/// coordinate 1 equals `counterexample_f(t)`.
pub fn counterexample_system() -> CounterExample {
    let (s2, s3, s6) = (2f64.sqrt(), 3f64.sqrt(), 6f64.sqrt());
    let x = [[1.0 / s2, -1.0 / s2, 0.0], [1.0 / s3, 1.0 / s3, 1.0 / s3], [1.0 / s6, 1.0 / s6, -2.0 / s6]];
    let lambda = [2.0 * PI, 2.0 * PI * 1.001, 2.0 * PI * 0.999];
    let mu = [s3, -0.5 * s3, -0.5 * s3];
    let rows: Vec<Vec<C64>> = (0..3)
        .map(|i| (0..3).map(|j| C64::new((0..3).map(|k| x[i][k] * lambda[k] * x[j][k]).sum(), 0.0)).collect())
        .collect();
    let l = SparseMatrix::from_dense(&rows).expect("3x3");
    let rho0 = StateVector((0..3).map(|i| C64::new((0..3).map(|k| x[i][k] * mu[k]).sum(), 0.0)).collect());
    let mut w = StateVector::zeros(3);
    w[1] = C64::new(1.0, 0.0);
    CounterExample {
        l,
        rho0,
        observable: Observable::new("resonant", TraceForm::from_weights(w)),
        resonant: 1,
        delta_t: 1.0,
    }
}
