//! Step-wise Lanczos approximation `e^{−iL h} ρ ≈ ‖ρ‖ V_m e^{−ihT_m} e_1`.
//!
//! The basis grows until `‖ρ‖ h β_{m+1} |[e^{−ihT_m}]_{m,1}| ≤ ε`. When the
//! dimension cap is hit first, the adaptive mode shortens the step using the
//! same factorization and continues from the partial result.
//!
//! By default the returned state carries the corrected term
//! `−ih β_{m+1} [φ_1(−ihT_m)]_{m,1} q_{m+1}`, `φ_1(z) = (e^z − 1)/z`, which
//! raises the order by one at no extra product.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::sparse::{SparseMatrix, StateVector, C64};
use crate::spectral::{EigvecRows, LanczosProcess, TridiagEigen};
use crate::trace::{Deadline, ExpectationTrace, Observable};

pub const DEFAULT_M_MAX: usize = 128;

/// Up to this dimension the stopping test runs after every growth; beyond
/// it, every [`CHECK_STRIDE`] growths.
const DENSE_CHECK_LIMIT: usize = 30;
const CHECK_STRIDE: usize = 5;

/// Shortest substep as a fraction of the requested step.
const MIN_SUBSTEP_FRACTION: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrylovOptions {
    pub eps: f64,
    pub m_max: usize,
    /// Split a step into substeps when `m_max` is reached instead of
    /// returning an unconverged result.
    pub adaptive: bool,
    pub reorthogonalize: bool,
    pub corrected: bool,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions { eps: 1e-7, m_max: DEFAULT_M_MAX, adaptive: true, reorthogonalize: true, corrected: true }
    }
}

impl KrylovOptions {
    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidArgument(format!("tolerance must lie in (0, 1), got {}", self.eps)));
        }
        if self.m_max == 0 {
            return Err(Error::InvalidArgument("m_max must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct KrylovStep {
    pub state: StateVector,
    /// Largest Krylov dimension over the substeps.
    pub m_used: usize,
    /// Lanczos runs needed; 1 unless the step was split.
    pub substeps: usize,
    /// `false` only in non-adaptive mode when `m_max` was reached.
    pub converged: bool,
}

/// Result of one Lanczos run aimed at time `target`.
struct Partial {
    state: StateVector,
    h: f64,
    m: usize,
    converged: bool,
}

fn criterion(eig: &TridiagEigen, beta_next: f64, m: usize, h: f64) -> f64 {
    let entry = eig.exp_entry(m - 1, h).expect("last row accumulated");
    h * beta_next * entry.norm()
}

/// `[φ_1(−ihT)]_{m,1}` with `φ_1(−iθ) = sinc(θ/2) e^{−iθ/2}`; needs all rows.
fn phi1_last(eig: &TridiagEigen, h: f64) -> C64 {
    let first = &eig.rows[0];
    let target = &eig.rows[eig.rows.len() - 1];
    eig.values
        .iter()
        .zip(first)
        .zip(target)
        .map(|((&lam, &z0), &zi)| {
            let half = 0.5 * h * lam;
            let sinc = if half.abs() < 1e-8 { 1.0 - half * half / 6.0 } else { half.sin() / half };
            C64::from_polar(z0 * zi * sinc, -half)
        })
        .sum()
}

/// One Lanczos run from `rho` aimed at time `target`, accepting the first
/// dimension whose residual estimate, scaled by `‖ρ‖`, is at most
/// `eps · h / dt_ref`.
fn lanczos_advance(l: &SparseMatrix, rho: &[C64], target: f64, dt_ref: f64, opts: &KrylovOptions) -> Result<Partial> {
    let norm = rho.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::InvalidArgument("Krylov step needs a nonzero finite state".into()));
    }
    let tol = |h: f64| opts.eps * h / (dt_ref * norm);
    let mut process = LanczosProcess::new(l, rho, opts.reorthogonalize)?;
    let mut accepted = None;
    while process.len() < opts.m_max && process.extend()? {
        let m = process.len();
        if process.breakdown() {
            accepted = Some(target);
            break;
        }
        if m <= DENSE_CHECK_LIMIT || (m - DENSE_CHECK_LIMIT) % CHECK_STRIDE == 0 {
            let off = &process.beta()[..m - 1];
            let eig = TridiagEigen::compute(process.alpha(), off, EigvecRows::FirstLast)?;
            if criterion(&eig, process.beta()[m - 1], m, target) <= tol(target) {
                accepted = Some(target);
                break;
            }
        }
    }
    let m = process.len();
    let off = &process.beta()[..m - 1];
    let eig = TridiagEigen::compute(process.alpha(), off, EigvecRows::All)?;
    let (h, converged) = match accepted {
        Some(h) => (h, true),
        None if opts.adaptive => {
            let beta_next = process.beta()[m - 1];
            let mut h = target;
            while criterion(&eig, beta_next, m, h) > tol(h) {
                h *= 0.5;
                if h < MIN_SUBSTEP_FRACTION * dt_ref {
                    return Err(Error::Numerical(format!(
                        "Krylov substep fell below {:.1e} of the step at dimension {m}",
                        MIN_SUBSTEP_FRACTION
                    )));
                }
            }
            (h, true)
        }
        None => (target, false),
    };
    let coeffs = eig.exp_first_column(h).expect("all rows accumulated");
    let mut state = StateVector::zeros(rho.len());
    for (v, c) in process.basis().iter().zip(&coeffs) {
        state.axpy(c * norm, v);
    }
    if let (true, Some(next)) = (opts.corrected, process.next_vector()) {
        let c = C64::new(0.0, -h * process.beta()[m - 1]) * phi1_last(&eig, h);
        state.axpy(c * norm, next);
    }
    Ok(Partial { state, h, m, converged })
}

/// Advances `rho` by `dt`.
pub fn krylov_step(l: &SparseMatrix, rho: &[C64], dt: f64, opts: &KrylovOptions) -> Result<KrylovStep> {
    let mut hint = dt;
    krylov_step_hinted(l, rho, dt, opts, &mut hint)
}

/// `hint` carries the last substep length between calls so a run that needs
/// splitting does not rediscover it every step.
fn krylov_step_hinted(
    l: &SparseMatrix,
    rho: &[C64],
    dt: f64,
    opts: &KrylovOptions,
    hint: &mut f64,
) -> Result<KrylovStep> {
    opts.validate()?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if rho.len() != l.ncols() || !l.is_square() {
        return Err(Error::Dimension("state length does not match the operator".into()));
    }
    let mut state = StateVector(rho.to_vec());
    let mut remaining = dt;
    let mut m_used = 0;
    let mut substeps = 0;
    let mut converged = true;
    while remaining > 0.0 {
        let target = remaining.min(*hint);
        let part = lanczos_advance(l, &state, target, dt, opts)?;
        substeps += 1;
        m_used = m_used.max(part.m);
        converged &= part.converged;
        state = part.state;
        if part.h < target {
            *hint = part.h;
        } else if part.m < opts.m_max / 2 {
            *hint = (*hint * 2.0).min(dt);
        }
        remaining -= part.h;
        if remaining <= dt * 1e-14 {
            break;
        }
    }
    Ok(KrylovStep { state, m_used, substeps, converged })
}

/// `steps` sequential Krylov steps, each starting a fresh Lanczos basis.
pub fn krylov_propagate(
    l: &SparseMatrix,
    rho0: &[C64],
    dt: f64,
    steps: usize,
    observables: &[Observable],
    opts: &KrylovOptions,
    deadline: &Deadline,
) -> Result<ExpectationTrace> {
    if rho0.len() != l.ncols() || observables.iter().any(|o| o.form.len() != rho0.len()) {
        return Err(Error::Dimension("state, operator and observables differ in dimension".into()));
    }
    let start = Instant::now();
    let before = l.matvec_count();
    let mut trace = ExpectationTrace::for_observables(observables, "krylov", opts.eps);
    trace.meta.full_dim = rho0.len();
    let mut rho = StateVector(rho0.to_vec());
    trace.record(0.0, observables, &rho);
    let mut hint = dt;
    let mut max_m = 0;
    let mut unconverged = 0;
    let mut split = 0;
    for n in 1..=steps {
        deadline.check()?;
        let step = krylov_step_hinted(l, &rho, dt, opts, &mut hint)?;
        max_m = max_m.max(step.m_used);
        unconverged += usize::from(!step.converged);
        split += usize::from(step.substeps > 1);
        rho = step.state;
        trace.record(n as f64 * dt, observables, &rho);
    }
    if unconverged > 0 {
        trace.meta.warnings.push(format!(
            "{unconverged} of {steps} steps reached m_max = {} before the stopping test passed",
            opts.m_max
        ));
    }
    if split > 0 {
        trace.meta.warnings.push(format!("{split} of {steps} steps were split into substeps"));
    }
    trace.meta.max_krylov_dim = Some(max_m);
    trace.meta.matvecs = l.matvec_count() - before;
    trace.meta.wall_time = start.elapsed().as_secs_f64();
    Ok(trace)
}
