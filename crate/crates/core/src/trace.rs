//! Expectation-value time series and their CSV form.
//!
//! CSV layout: a header `t,re_<label>,im_<label>,...` followed by one row per
//! sample. Numbers are written with 17 significant digits so that reading a
//! file back reproduces every `f64` exactly.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::sparse::{TraceForm, C64};

/// A labelled detection operator in trace-form representation.
#[derive(Clone, Debug)]
pub struct Observable {
    pub label: String,
    pub form: TraceForm,
}

impl Observable {
    pub fn new(label: impl Into<String>, form: TraceForm) -> Self {
        Observable { label: label.into(), form }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TraceMetadata {
    pub engine: String,
    pub eps: f64,
    pub warnings: Vec<String>,
    /// Seconds.
    pub wall_time: f64,
    /// Sparse matrix-vector products spent on propagation proper.
    pub matvecs: u64,
    /// Products spent estimating spectral bounds or scanning a ZTE window.
    pub setup_matvecs: u64,
    pub full_dim: usize,
    pub reduced_dim: Option<usize>,
    /// Largest Krylov dimension used in any step.
    pub max_krylov_dim: Option<usize>,
    /// Chebyshev order per step (step engine) or stored series length (DEC).
    pub chebyshev_order: Option<usize>,
}

/// Time grid plus one complex series per observable.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpectationTrace {
    pub times: Vec<f64>,
    pub labels: Vec<String>,
    pub values: Vec<Vec<C64>>,
    pub meta: TraceMetadata,
}

impl ExpectationTrace {
    pub fn new(labels: Vec<String>) -> Self {
        let values = vec![Vec::new(); labels.len()];
        ExpectationTrace { times: Vec::new(), labels, values, meta: TraceMetadata::default() }
    }

    pub(crate) fn for_observables(observables: &[Observable], engine: &str, eps: f64) -> Self {
        let mut trace = Self::new(observables.iter().map(|o| o.label.clone()).collect());
        trace.meta.engine = engine.to_string();
        trace.meta.eps = eps;
        trace
    }

    pub(crate) fn record(&mut self, t: f64, observables: &[Observable], rho: &[C64]) {
        self.times.push(t);
        for (series, obs) in self.values.iter_mut().zip(observables) {
            series.push(obs.form.eval(rho));
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Values of the first observable.
    pub fn primary(&self) -> &[C64] {
        &self.values[0]
    }

    /// Largest modulus difference between the two traces over all
    /// observables and samples.
    pub fn max_abs_error(&self, other: &ExpectationTrace) -> Result<f64> {
        self.check_comparable(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max))
    }

    /// Largest modulus difference at the final sample.
    pub fn endpoint_error(&self, other: &ExpectationTrace) -> Result<f64> {
        self.check_comparable(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .filter_map(|(a, b)| Some((a.last()? - b.last()?).norm()))
            .fold(0.0, f64::max))
    }

    fn check_comparable(&self, other: &ExpectationTrace) -> Result<()> {
        if self.values.len() != other.values.len()
            || self.values.iter().zip(&other.values).any(|(a, b)| a.len() != b.len())
        {
            return Err(Error::Dimension("traces have different shapes".into()));
        }
        Ok(())
    }

    /// Checks that times increase strictly and every series matches the grid.
    pub fn validate(&self) -> Result<()> {
        if self.times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Format("trace times are not strictly increasing".into()));
        }
        if self.values.iter().any(|v| v.len() != self.times.len()) {
            return Err(Error::Format("trace series length differs from the time grid".into()));
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header = String::from("t");
        for label in &self.labels {
            write!(header, ",re_{label},im_{label}").unwrap();
        }
        writeln!(out, "{header}")?;
        let mut line = String::new();
        for (i, t) in self.times.iter().enumerate() {
            line.clear();
            write!(line, "{t:.16e}").unwrap();
            for series in &self.values {
                let z = series[i];
                write!(line, ",{:.16e},{:.16e}", z.re, z.im).unwrap();
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::Format("empty trace file".into()))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.first() != Some(&"t") || cols.len() % 2 != 1 {
            return Err(Error::Format(format!("bad trace header '{header}'")));
        }
        let mut labels = Vec::new();
        for pair in cols[1..].chunks(2) {
            let re = pair[0].strip_prefix("re_");
            let im = pair[1].strip_prefix("im_");
            match (re, im) {
                (Some(a), Some(b)) if a == b => labels.push(a.to_string()),
                _ => return Err(Error::Format(format!("bad trace header '{header}'"))),
            }
        }
        let mut trace = ExpectationTrace::new(labels);
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let nums: Vec<f64> = line
                .trim()
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 2)))?;
            if nums.len() != cols.len() {
                return Err(Error::Format(format!(
                    "line {}: expected {} columns, found {}",
                    lineno + 2,
                    cols.len(),
                    nums.len()
                )));
            }
            trace.times.push(nums[0]);
            for (k, series) in trace.values.iter_mut().enumerate() {
                series.push(C64::new(nums[1 + 2 * k], nums[2 + 2 * k]));
            }
        }
        Ok(trace)
    }
}

/// Wall-clock deadline checked between propagation steps.
#[derive(Clone, Copy, Debug, Default)]
pub struct Deadline {
    start: Option<Instant>,
    limit: Option<f64>,
}

impl Deadline {
    pub fn none() -> Self {
        Deadline::default()
    }

    pub fn after_secs(secs: f64) -> Self {
        Deadline { start: Some(Instant::now()), limit: Some(secs) }
    }

    pub fn check(&self) -> Result<()> {
        if let (Some(start), Some(limit)) = (self.start, self.limit) {
            let elapsed = start.elapsed().as_secs_f64();
            if elapsed > limit {
                return Err(Error::Timeout(elapsed));
            }
        }
        Ok(())
    }
}
