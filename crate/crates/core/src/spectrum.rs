//! Spectra from expectation-value traces.
//!
//! The trace is multiplied by `exp(−ξ t)` and transformed with the
//! unnormalized kernel `exp(+2πi k n / N)`, so a component `exp(−iωt)` peaks
//! at `+ω/2π`. Frequencies are signed, in Hz, in ascending order.
//! CSV layout: header `freq_hz,amplitude`, amplitude is the modulus.

use std::io::{BufRead, Write};

use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::sparse::C64;
use crate::trace::ExpectationTrace;

/// Relative deviation tolerated between sample spacings.
const GRID_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub freq_hz: Vec<f64>,
    pub values: Vec<C64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.freq_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq_hz.is_empty()
    }

    pub fn amplitude(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// Frequency of the largest amplitude.
    pub fn peak_hz(&self) -> Option<f64> {
        let amp = self.amplitude();
        let (k, _) = amp.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
        Some(self.freq_hz[k])
    }

    /// Full width at half maximum of the highest peak, by linear
    /// interpolation. `None` when the peak never falls below half height
    /// inside the band or the spectrum is zero.
    pub fn fwhm(&self) -> Option<f64> {
        let amp = self.amplitude();
        let (k, &top) = amp.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
        if !(top > 0.0) {
            return None;
        }
        let half = top / 2.0;
        let cross = |i: usize, j: usize| {
            let (fi, fj, ai, aj) = (self.freq_hz[i], self.freq_hz[j], amp[i], amp[j]);
            fi + (half - ai) / (aj - ai) * (fj - fi)
        };
        let left = (0..k).rev().find(|&i| amp[i] <= half).map(|i| cross(i, i + 1))?;
        let right = (k + 1..amp.len()).find(|&i| amp[i] <= half).map(|i| cross(i - 1, i))?;
        Some(right - left)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "freq_hz,amplitude")?;
        for (f, v) in self.freq_hz.iter().zip(&self.values) {
            writeln!(out, "{:.16e},{:.16e}", f, v.norm())?;
        }
        Ok(())
    }

    /// Reads `(freq_hz, amplitude)` pairs back; phases are not stored.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Vec<(f64, f64)>> {
        let mut lines = input.lines();
        match lines.next().transpose()? {
            Some(h) if h.trim() == "freq_hz,amplitude" => {}
            other => return Err(Error::Format(format!("unexpected spectrum header {other:?}"))),
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parse = |s: Option<&str>| {
                s.and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Format(format!("bad spectrum row {}: '{line}'", i + 2)))
            };
            let mut parts = line.split(',');
            rows.push((parse(parts.next())?, parse(parts.next())?));
        }
        Ok(rows)
    }
}

/// Transforms `samples` taken at spacing `dt` (in units of `time_unit`
/// seconds) after apodization with rate `decay` per time unit.
pub fn spectrum_of(samples: &[C64], dt: f64, time_unit: f64, decay: f64) -> Result<Spectrum> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("cannot transform an empty trace".into()));
    }
    if !(dt > 0.0) || !(time_unit > 0.0) || !(decay >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need dt > 0, time_unit > 0 and decay >= 0, got {dt}, {time_unit}, {decay}"
        )));
    }
    let n = samples.len();
    let mut buf: Vec<C64> = samples.iter().enumerate().map(|(k, &v)| v * (-decay * k as f64 * dt).exp()).collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let df = 1.0 / (n as f64 * dt * time_unit);
    // Bins n - n/2 .. n carry the negative frequencies.
    let neg = n / 2;
    let order = (n - neg..n).chain(0..n - neg);
    let (freq_hz, values) = order
        .map(|k| {
            let signed = if k >= n - neg { k as f64 - n as f64 } else { k as f64 };
            (signed * df, buf[k])
        })
        .unzip();
    Ok(Spectrum { freq_hz, values })
}

/// Spectrum of one observable of a trace on a uniform grid.
pub fn trace_spectrum(trace: &ExpectationTrace, observable: usize, time_unit: f64, decay: f64) -> Result<Spectrum> {
    let series = trace.values.get(observable).ok_or_else(|| {
        Error::InvalidArgument(format!("observable {observable} not in trace with {} series", trace.values.len()))
    })?;
    let dt = uniform_spacing(&trace.times)?;
    spectrum_of(series, dt, time_unit, decay)
}

/// Common spacing of a uniform grid (1.0 for a single sample).
pub fn uniform_spacing(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Ok(1.0);
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("time grid must be increasing".into()));
    }
    for (i, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - dt).abs() > GRID_TOL * dt.max(w[1].abs()) {
            return Err(Error::InvalidArgument(format!(
                "time grid is not uniform at sample {}: spacing {} vs {dt}",
                i + 1,
                w[1] - w[0]
            )));
        }
    }
    Ok(dt)
}
