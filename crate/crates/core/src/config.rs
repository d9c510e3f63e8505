//! Run configuration in TOML.
//!
//! ```toml
//! [system]
//! n = 2
//! larmor_hz = [100.0, 250.0]
//! j_hz = [[0.0, 7.0], [7.0, 0.0]]   # optional, zero coupling by default
//!
//! [run]
//! engine = "dec"                     # dec | cheb | krylov | zte | oracle
//! dt = 0.1
//! steps = 1000
//! eps = 1e-7
//! observables = ["ip"]               # ip, im, ix, iy, iz, optionally "name:site"
//! time_unit = "ms"                   # s (default) or ms
//!
//! [zte]
//! xi = 1e-6
//!
//! [output]
//! fid = "fid.csv"
//! spectrum = "spectrum.csv"
//!
//! [spectrum]
//! apodization = 0.0                  # decay rate per time unit
//! ```

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::spin::SpinSystemSpec;
use crate::zte::DEFAULT_XI;

pub const DEFAULT_EPS: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Engine {
    Dec,
    Cheb,
    Krylov,
    Zte,
    Oracle,
}

impl Engine {
    pub const ALL: [Engine; 5] = [Engine::Dec, Engine::Cheb, Engine::Krylov, Engine::Zte, Engine::Oracle];

    pub fn name(self) -> &'static str {
        match self {
            Engine::Dec => "dec",
            Engine::Cheb => "cheb",
            Engine::Krylov => "krylov",
            Engine::Zte => "zte",
            Engine::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Engine::ALL
            .into_iter()
            .find(|e| e.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown engine '{s}' (expected dec, cheb, krylov, zte or oracle)")))
    }
}

/// Simulation time unit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeUnit {
    pub label: &'static str,
    pub seconds: f64,
}

impl TimeUnit {
    pub const SECONDS: TimeUnit = TimeUnit { label: "s", seconds: 1.0 };
    pub const MILLISECONDS: TimeUnit = TimeUnit { label: "ms", seconds: 1e-3 };
}

impl FromStr for TimeUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "s" => Ok(TimeUnit::SECONDS),
            "ms" => Ok(TimeUnit::MILLISECONDS),
            other => Err(Error::Config(format!("unknown time_unit '{other}' (expected s or ms)"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub system: SpinSystemSpec,
    pub larmor_hz: Vec<f64>,
    pub j_hz: Vec<Vec<f64>>,
    pub engine: Engine,
    pub dt: f64,
    pub steps: usize,
    pub eps: f64,
    pub xi: f64,
    pub apodization: f64,
    pub observables: Vec<String>,
    pub time_unit: TimeUnit,
    pub fid_path: Option<PathBuf>,
    pub spectrum_path: Option<PathBuf>,
}

impl RunConfig {
    pub fn liouville_dim(&self) -> usize {
        self.system.liouville_dim()
    }

    /// Checks the numeric invariants after command-line overrides.
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("run.dt must be positive, got {}", self.dt)));
        }
        if self.steps == 0 {
            return Err(Error::Config("run.steps must be at least 1".into()));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::Config(format!("run.eps must lie in (0, 1), got {}", self.eps)));
        }
        if !(self.xi >= 0.0) || !self.xi.is_finite() {
            return Err(Error::Config(format!("zte.xi must be >= 0, got {}", self.xi)));
        }
        if !(self.apodization >= 0.0) || !self.apodization.is_finite() {
            return Err(Error::Config(format!("spectrum.apodization must be >= 0, got {}", self.apodization)));
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    system: RawSystem,
    #[serde(default)]
    run: RawRun,
    #[serde(default)]
    zte: RawZte,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    spectrum: RawSpectrum,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    n: usize,
    larmor_hz: Vec<f64>,
    j_hz: Option<Vec<Vec<f64>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    #[serde(default = "default_engine")]
    engine: String,
    #[serde(default = "default_dt")]
    dt: f64,
    #[serde(default = "default_steps")]
    steps: usize,
    #[serde(default = "default_eps")]
    eps: f64,
    #[serde(default = "default_observables")]
    observables: Vec<String>,
    #[serde(default = "default_time_unit")]
    time_unit: String,
}

impl Default for RawRun {
    fn default() -> Self {
        RawRun {
            engine: default_engine(),
            dt: default_dt(),
            steps: default_steps(),
            eps: default_eps(),
            observables: default_observables(),
            time_unit: default_time_unit(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawZte {
    #[serde(default = "default_xi")]
    xi: f64,
}

impl Default for RawZte {
    fn default() -> Self {
        RawZte { xi: default_xi() }
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    fid: Option<PathBuf>,
    spectrum: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSpectrum {
    #[serde(default)]
    apodization: f64,
}

fn default_engine() -> String {
    "dec".into()
}
fn default_dt() -> f64 {
    0.1
}
fn default_steps() -> usize {
    1000
}
fn default_eps() -> f64 {
    DEFAULT_EPS
}
fn default_observables() -> Vec<String> {
    vec!["ip".into()]
}
fn default_time_unit() -> String {
    "s".into()
}
fn default_xi() -> f64 {
    DEFAULT_XI
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let sys = raw.system;
    if sys.n == 0 {
        return Err(Error::Config("system.n must be at least 1".into()));
    }
    if sys.larmor_hz.len() != sys.n {
        return Err(Error::Config(format!(
            "system.larmor_hz has {} entries but system.n = {}",
            sys.larmor_hz.len(),
            sys.n
        )));
    }
    let j_hz = sys.j_hz.unwrap_or_else(|| vec![vec![0.0; sys.n]; sys.n]);
    check_coupling(&j_hz, sys.n)?;
    let time_unit: TimeUnit = raw.run.time_unit.parse()?;
    let system = SpinSystemSpec::from_hz(&sys.larmor_hz, &j_hz, time_unit.seconds)
        .map_err(|e| Error::Config(format!("system: {e}")))?;
    if raw.run.observables.is_empty() {
        return Err(Error::Config("run.observables must not be empty".into()));
    }
    for name in &raw.run.observables {
        crate::spin::named_observable(name, sys.n).map_err(|e| Error::Config(format!("run.observables: {e}")))?;
    }
    let cfg = RunConfig {
        system,
        larmor_hz: sys.larmor_hz,
        j_hz,
        engine: raw.run.engine.parse()?,
        dt: raw.run.dt,
        steps: raw.run.steps,
        eps: raw.run.eps,
        xi: raw.zte.xi,
        apodization: raw.spectrum.apodization,
        observables: raw.run.observables,
        time_unit,
        fid_path: raw.output.fid,
        spectrum_path: raw.output.spectrum,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn check_coupling(j: &[Vec<f64>], n: usize) -> Result<()> {
    if j.len() != n {
        return Err(Error::Config(format!("system.j_hz has {} rows but system.n = {n}", j.len())));
    }
    for (a, row) in j.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Config(format!("system.j_hz row {a} has {} entries, expected {n}", row.len())));
        }
        if !row.iter().all(|v| v.is_finite()) {
            return Err(Error::Config(format!("system.j_hz row {a} contains a non-finite value")));
        }
    }
    for a in 0..n {
        if j[a][a] != 0.0 {
            return Err(Error::Config(format!("system.j_hz[{a}][{a}] = {} must be zero", j[a][a])));
        }
        for b in a + 1..n {
            if j[a][b] != j[b][a] {
                return Err(Error::Config(format!(
                    "system.j_hz is not symmetric: j_hz[{a}][{b}] = {} but j_hz[{b}][{a}] = {}",
                    j[a][b], j[b][a]
                )));
            }
        }
    }
    Ok(())
}
