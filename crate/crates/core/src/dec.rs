//! Direct expectation values through a scalar Chebyshev series.
//!
//! One sweep of `t_{k+1} = 2 L_s t_k − t_{k−1}` stores
//! `T̃_k = Trace{mat(t_k) Q}` for every observable. Afterwards
//! `⟨Q(t)⟩ = e^{−itS} Σ_k c_k(tD) T̃_k` for any `0 ≤ t ≤ τ` with no further
//! work on state vectors.
//!
//! # Sidecar format
//!
//! Plain text, one item per line:
//!
//! ```text
//! DECS1
//! order <n>
//! observables <k>
//! label <name>          (k lines)
//! shift <S>
//! half_width <D>
//! tau <τ>
//! eps <ε>
//! data
//! <re> <im> ...         (n lines, 2k numbers each, observable order)
//! ```
//!
//! Numbers carry 17 significant digits so a round trip is exact.

use std::io::{BufRead, Write};
use std::time::Instant;

use rayon::prelude::*;

use crate::chebyshev::{bessel_through_stop, stop_order, RescaledOperator, StopCriterion};
use crate::error::{Error, Result};
use crate::sparse::{SparseMatrix, StateVector, C64};
use crate::spectral::{extreme_eigs, ScalingParams, DEFAULT_BOUND_STEPS, DEFAULT_INFLATION};
use crate::trace::{Deadline, ExpectationTrace, Observable};

pub const SIDECAR_MAGIC: &str = "DECS1";

/// Relative slack above `τ` that is clamped instead of rejected.
const TAU_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DecStats {
    pub matvecs: u64,
    pub setup_matvecs: u64,
    pub wall_time: f64,
    pub full_dim: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecSeries {
    pub shift: f64,
    pub half_width: f64,
    pub tau: f64,
    pub eps: f64,
    pub labels: Vec<String>,
    /// `tilde[q][k] = T̃_k` for observable `q`.
    pub tilde: Vec<Vec<C64>>,
    pub stats: DecStats,
}

/// Bounds the spectrum with Lanczos, then precomputes up to
/// `stop_order(D τ, eps)`.
pub fn dec_precompute(
    l: &SparseMatrix,
    rho0: &[C64],
    observables: &[Observable],
    tau: f64,
    eps: f64,
) -> Result<DecSeries> {
    let before = l.matvec_count();
    let scaling = extreme_eigs(l, DEFAULT_BOUND_STEPS, DEFAULT_INFLATION)?;
    let setup = l.matvec_count() - before;
    let mut series = dec_precompute_scaled(l, &scaling, rho0, observables, tau, eps, &Deadline::none())?;
    series.stats.setup_matvecs = setup;
    Ok(series)
}

/// As [`dec_precompute`] with given spectral scaling.
pub fn dec_precompute_scaled(
    l: &SparseMatrix,
    scaling: &ScalingParams,
    rho0: &[C64],
    observables: &[Observable],
    tau: f64,
    eps: f64,
    deadline: &Deadline,
) -> Result<DecSeries> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidArgument(format!("horizon tau must be positive, got {tau}")));
    }
    let order = stop_order(tau * scaling.half_width, eps)?;
    let mut series = dec_precompute_order(l, scaling, rho0, observables, order, deadline)?;
    series.tau = tau;
    series.eps = eps;
    Ok(series)
}

/// Stores `T̃_0 … T̃_{order−1}` using `order − 1` products with `L`. The
/// returned series has `tau = 0` and `eps = 0` until the caller sets them.
pub fn dec_precompute_order(
    l: &SparseMatrix,
    scaling: &ScalingParams,
    rho0: &[C64],
    observables: &[Observable],
    order: usize,
    deadline: &Deadline,
) -> Result<DecSeries> {
    if observables.is_empty() {
        return Err(Error::InvalidArgument("at least one observable is required".into()));
    }
    if order == 0 {
        return Err(Error::InvalidArgument("series order must be at least 1".into()));
    }
    if rho0.len() != l.ncols() || observables.iter().any(|o| o.form.len() != rho0.len()) {
        return Err(Error::Dimension("state, operator and observables differ in dimension".into()));
    }
    let start = Instant::now();
    let before = l.matvec_count();
    let op = RescaledOperator::new(l, scaling)?;
    let dim = rho0.len();
    let mut tilde: Vec<Vec<C64>> = observables.iter().map(|_| Vec::with_capacity(order)).collect();
    let record = |v: &[C64], tilde: &mut Vec<Vec<C64>>| {
        for (series, obs) in tilde.iter_mut().zip(observables) {
            series.push(obs.form.eval(v));
        }
    };
    let mut prev = StateVector(rho0.to_vec());
    record(&prev, &mut tilde);
    if order > 1 {
        let mut cur = StateVector::zeros(dim);
        op.apply_into(&prev, &mut cur)?;
        record(&cur, &mut tilde);
        let mut next = StateVector::zeros(dim);
        for _ in 2..order {
            deadline.check()?;
            op.apply_into(&cur, &mut next)?;
            for i in 0..dim {
                next[i] = 2.0 * next[i] - prev[i];
            }
            record(&next, &mut tilde);
            // (prev, cur, next) <- (cur, next, prev)
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
        }
    }
    Ok(DecSeries {
        shift: scaling.shift,
        half_width: scaling.half_width,
        tau: 0.0,
        eps: 0.0,
        labels: observables.iter().map(|o| o.label.clone()).collect(),
        tilde,
        stats: DecStats {
            matvecs: l.matvec_count() - before,
            setup_matvecs: 0,
            wall_time: start.elapsed().as_secs_f64(),
            full_dim: dim,
        },
    })
}

impl DecSeries {
    /// Number of stored orders per observable.
    pub fn order(&self) -> usize {
        self.tilde.first().map_or(0, Vec::len)
    }

    pub fn n_observables(&self) -> usize {
        self.tilde.len()
    }

    fn check_time(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!("evaluation time must be >= 0, got {t}")));
        }
        if t > self.tau {
            if t <= self.tau * (1.0 + TAU_SLACK) {
                return Ok(self.tau);
            }
            return Err(Error::InvalidArgument(format!("time {t} lies beyond the precomputed horizon {}", self.tau)));
        }
        Ok(t)
    }

    /// `⟨Q(t)⟩` for every observable, truncated at the two-term criterion
    /// for `t D`.
    pub fn evaluate(&self, t: f64) -> Result<Vec<C64>> {
        let t = self.check_time(t)?;
        let t_d = t * self.half_width;
        let (j, n) = bessel_through_stop(t_d, self.eps.max(f64::MIN_POSITIVE), StopCriterion::TwoTerm)?;
        let n = n.min(self.order());
        let phase = C64::from_polar(1.0, -t * self.shift);
        Ok(self
            .tilde
            .iter()
            .map(|series| {
                let mut acc = C64::new(0.0, 0.0);
                for (k, &tk) in series[..n].iter().enumerate() {
                    acc += coefficient(k, j[k]) * tk;
                }
                phase * acc
            })
            .collect())
    }

    /// Independent evaluations at each time, in the given order.
    pub fn evaluate_grid(&self, times: &[f64]) -> Result<ExpectationTrace> {
        let start = Instant::now();
        if let Some((i, t)) = times.iter().enumerate().find(|(_, t)| self.check_time(**t).is_err()) {
            return Err(Error::InvalidArgument(format!("grid point {i} (t = {t}) is outside [0, {}]", self.tau)));
        }
        let rows: Vec<Vec<C64>> = times.par_iter().map(|&t| self.evaluate(t)).collect::<Result<_>>()?;
        let mut trace = ExpectationTrace::new(self.labels.clone());
        trace.meta.engine = "dec".into();
        trace.meta.eps = self.eps;
        trace.meta.matvecs = self.stats.matvecs;
        trace.meta.setup_matvecs = self.stats.setup_matvecs;
        trace.meta.full_dim = self.stats.full_dim;
        trace.meta.chebyshev_order = Some(self.order());
        trace.times = times.to_vec();
        for row in rows {
            for (series, v) in trace.values.iter_mut().zip(row) {
                series.push(v);
            }
        }
        trace.meta.wall_time = self.stats.wall_time + start.elapsed().as_secs_f64();
        Ok(trace)
    }

    pub fn write_sidecar<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{SIDECAR_MAGIC}")?;
        writeln!(out, "order {}", self.order())?;
        writeln!(out, "observables {}", self.n_observables())?;
        for label in &self.labels {
            writeln!(out, "label {label}")?;
        }
        writeln!(out, "shift {:.16e}", self.shift)?;
        writeln!(out, "half_width {:.16e}", self.half_width)?;
        writeln!(out, "tau {:.16e}", self.tau)?;
        writeln!(out, "eps {:.16e}", self.eps)?;
        writeln!(out, "data")?;
        for k in 0..self.order() {
            let line: Vec<String> = self.tilde.iter().map(|s| format!("{:.16e} {:.16e}", s[k].re, s[k].im)).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn read_sidecar<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let mut next = |what: &str| -> Result<String> {
            lines.next().ok_or_else(|| Error::Format(format!("sidecar truncated before {what}")))?.map_err(Error::from)
        };
        if next("magic")?.trim() != SIDECAR_MAGIC {
            return Err(Error::Format(format!("missing {SIDECAR_MAGIC} header")));
        }
        let order: usize = parse_field(&next("order")?, "order")?;
        let k: usize = parse_field(&next("observables")?, "observables")?;
        let mut labels = Vec::with_capacity(k);
        for _ in 0..k {
            let line = next("label")?;
            let label = line
                .strip_prefix("label ")
                .ok_or_else(|| Error::Format(format!("expected a label line, found '{line}'")))?;
            labels.push(label.to_string());
        }
        let shift = parse_field(&next("shift")?, "shift")?;
        let half_width = parse_field(&next("half_width")?, "half_width")?;
        let tau = parse_field(&next("tau")?, "tau")?;
        let eps = parse_field(&next("eps")?, "eps")?;
        if next("data")?.trim() != "data" {
            return Err(Error::Format("expected 'data'".into()));
        }
        let mut tilde = vec![Vec::with_capacity(order); k];
        for row in 0..order {
            let line = next("data rows")?;
            let nums: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(format!("data row {row}: {e}")))?;
            if nums.len() != 2 * k {
                return Err(Error::Format(format!("data row {row}: expected {} numbers, found {}", 2 * k, nums.len())));
            }
            for (q, series) in tilde.iter_mut().enumerate() {
                series.push(C64::new(nums[2 * q], nums[2 * q + 1]));
            }
        }
        Ok(DecSeries { shift, half_width, tau, eps, labels, tilde, stats: DecStats::default() })
    }
}

fn coefficient(k: usize, j: f64) -> C64 {
    let m = if k == 0 { j } else { 2.0 * j };
    match k % 4 {
        0 => C64::new(m, 0.0),
        1 => C64::new(0.0, -m),
        2 => C64::new(-m, 0.0),
        _ => C64::new(0.0, m),
    }
}

fn parse_field<T: std::str::FromStr>(line: &str, key: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let value = line
        .strip_prefix(key)
        .and_then(|rest| rest.strip_prefix(' '))
        .ok_or_else(|| Error::Format(format!("expected '{key} <value>', found '{line}'")))?;
    value.trim().parse().map_err(|e| Error::Format(format!("{key}: {e}")))
}
