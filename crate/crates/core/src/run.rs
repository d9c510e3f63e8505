//! Engine dispatch shared by the command line and the benchmark harness.

use std::time::Instant;

use crate::chebyshev::{cheb_step_propagate, ChebyshevOptions};
use crate::config::{Engine, RunConfig};
use crate::dec::{dec_precompute_scaled, DecSeries};
use crate::error::{Error, Result};
use crate::krylov::{krylov_propagate, KrylovOptions};
use crate::oracle::{dense_eig_with_cap, oracle_expect, DEFAULT_ORACLE_CAP};
use crate::sparse::{SparseMatrix, C64};
use crate::spectral::{extreme_eigs, DEFAULT_BOUND_STEPS, DEFAULT_INFLATION};
use crate::spin::{named_observable, SpinProblem};
use crate::trace::{Deadline, ExpectationTrace, Observable};
use crate::zte::{zte_detect, zte_propagate, zte_window_from, KrylovPropagator};

/// Everything an engine needs, independent of how the problem was built.
pub struct Problem {
    pub liouvillian: SparseMatrix,
    pub rho0: Vec<C64>,
    pub observables: Vec<Observable>,
    /// Larmor frequencies, used for the ZTE window.
    pub omega0: Vec<f64>,
}

impl Problem {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let sp = SpinProblem::new(cfg.system.clone())?;
        let observables = cfg
            .observables
            .iter()
            .map(|name| named_observable(name, cfg.system.n_spins()).map(|(l, f)| Observable::new(l, f)))
            .collect::<Result<_>>()?;
        Ok(Problem {
            liouvillian: sp.liouvillian,
            rho0: sp.rho0.into_inner(),
            observables,
            omega0: cfg.system.omega0().to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.rho0.len()
    }
}

#[derive(Clone, Debug)]
pub struct RunSettings {
    pub dt: f64,
    pub steps: usize,
    pub eps: f64,
    pub xi: f64,
    pub oracle_cap: usize,
}

impl RunSettings {
    pub fn from_config(cfg: &RunConfig) -> Self {
        RunSettings { dt: cfg.dt, steps: cfg.steps, eps: cfg.eps, xi: cfg.xi, oracle_cap: DEFAULT_ORACLE_CAP }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| k as f64 * self.dt).collect()
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.dt
    }
}

/// Runs one engine on the uniform grid `0, dt, …, steps·dt`. Wall time in
/// the returned metadata covers setup and propagation.
pub fn run_engine(
    engine: Engine,
    problem: &Problem,
    settings: &RunSettings,
    deadline: &Deadline,
) -> Result<ExpectationTrace> {
    let start = Instant::now();
    let l = &problem.liouvillian;
    let rho0 = &problem.rho0;
    let obs = &problem.observables;
    let mut trace = match engine {
        Engine::Dec => {
            precompute_dec(problem, settings.eps, settings.horizon(), deadline)?.evaluate_grid(&settings.times())?
        }
        Engine::Cheb => {
            let before = l.matvec_count();
            let scaling = extreme_eigs(l, DEFAULT_BOUND_STEPS, DEFAULT_INFLATION)?;
            let setup = l.matvec_count() - before;
            let opts = ChebyshevOptions { eps: settings.eps, ..Default::default() };
            let mut trace = cheb_step_propagate(l, &scaling, rho0, settings.dt, settings.steps, obs, &opts, deadline)?;
            trace.meta.setup_matvecs = setup;
            trace
        }
        Engine::Krylov => {
            let opts = KrylovOptions { eps: settings.eps, ..Default::default() };
            krylov_propagate(l, rho0, settings.dt, settings.steps, obs, &opts, deadline)?
        }
        Engine::Zte => {
            let opts = KrylovOptions { eps: settings.eps, ..Default::default() };
            let window = zte_window_from(&problem.omega0)?.max(settings.dt);
            let mut driver = KrylovPropagator { l, opts };
            let red = zte_detect(l, rho0, settings.dt, window, settings.xi, &mut driver)?;
            deadline.check()?;
            zte_propagate(&red, rho0, settings.dt, settings.steps, obs, &opts, deadline)?
        }
        Engine::Oracle => {
            let modes = dense_eig_with_cap(l, settings.oracle_cap)?;
            deadline.check()?;
            oracle_expect(&modes, rho0, obs, &settings.times())?
        }
    };
    trace.meta.wall_time = start.elapsed().as_secs_f64();
    if trace.meta.full_dim == 0 {
        trace.meta.full_dim = problem.dim();
    }
    if let Some(bad) = trace.values.iter().flatten().find(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Numerical(format!("{engine} produced a non-finite value {bad}")));
    }
    Ok(trace)
}

/// DEC series over `[0, tau]` including the spectral bound estimate.
pub fn precompute_dec(problem: &Problem, eps: f64, tau: f64, deadline: &Deadline) -> Result<DecSeries> {
    let l = &problem.liouvillian;
    let before = l.matvec_count();
    let scaling = extreme_eigs(l, DEFAULT_BOUND_STEPS, DEFAULT_INFLATION)?;
    let setup = l.matvec_count() - before;
    let mut series = dec_precompute_scaled(l, &scaling, &problem.rho0, &problem.observables, tau, eps, deadline)?;
    series.stats.setup_matvecs = setup;
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    const TWO_SPIN: &str = "[system]\nn = 2\nlarmor_hz = [100.0, 250.0]\nj_hz = [[0.0, 7.0], [7.0, 0.0]]\n\
[run]\ndt = 0.1\nsteps = 200\ntime_unit = \"ms\"\n";

    #[test]
    fn every_engine_agrees_with_the_oracle() {
        let cfg = parse_config(TWO_SPIN).unwrap();
        let problem = Problem::from_config(&cfg).unwrap();
        let settings = RunSettings::from_config(&cfg);
        let reference = run_engine(Engine::Oracle, &problem, &settings, &Deadline::none()).unwrap();
        assert!((reference.values[0][0] - C64::new(0.0, -2.0)).norm() < 1e-12);
        for engine in [Engine::Dec, Engine::Cheb, Engine::Krylov, Engine::Zte] {
            let trace = run_engine(engine, &problem, &settings, &Deadline::none()).unwrap();
            assert_eq!(trace.len(), 201);
            assert_eq!(trace.meta.engine, engine.name());
            let err = trace.max_abs_error(&reference).unwrap();
            assert!(err < 1e-5, "{engine}: {err}");
        }
    }

    #[test]
    fn oracle_cap_is_a_resource_error() {
        let cfg = parse_config(TWO_SPIN).unwrap();
        let problem = Problem::from_config(&cfg).unwrap();
        let settings = RunSettings { oracle_cap: 8, ..RunSettings::from_config(&cfg) };
        let err = run_engine(Engine::Oracle, &problem, &settings, &Deadline::none()).unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn expired_deadline_times_out() {
        let cfg = parse_config(TWO_SPIN).unwrap();
        let problem = Problem::from_config(&cfg).unwrap();
        let settings = RunSettings::from_config(&cfg);
        let err = run_engine(Engine::Krylov, &problem, &settings, &Deadline::after_secs(-1.0)).unwrap_err();
        assert!(matches!(err, Error::Timeout(_)));
    }
}
