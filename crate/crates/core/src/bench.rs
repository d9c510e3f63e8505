//! Benchmark harness: every engine on random spin systems of growing size.
//!
//! ```toml
//! [benchmark]
//! spins = [2, 3, 4]
//! engines = ["dec", "cheb", "krylov", "zte"]
//! dt = 0.1
//! steps = 1000
//! eps = 1e-7
//! xi = 1e-6
//! seed = 1
//! time_unit = "ms"
//! timeout = 600.0         # seconds per engine run
//! oracle_cap = 4096       # largest dimension compared against the oracle
//! larmor_hz = [10.0, 500.0]
//! j_hz = [0.0, 20.0]
//! coupling_probability = 1.0
//! ```
//!
//! Every column except `wall_s` depends only on the configuration.

use std::fmt::Write as _;
use std::io::Write;

use serde::Deserialize;

use crate::config::{Engine, TimeUnit};
use crate::error::{Error, Result};
use crate::oracle::DEFAULT_ORACLE_CAP;
use crate::run::{run_engine, Problem, RunSettings};
use crate::sparse::trace_form;
use crate::spin::{
    build_hamiltonian, build_liouvillian, initial_state, observable_ip, RandomSpinParams, SpinSystemSpec,
};
use crate::trace::{Deadline, ExpectationTrace, Observable};
use crate::zte::DEFAULT_XI;

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub spins: Vec<usize>,
    pub engines: Vec<Engine>,
    pub settings: RunSettings,
    pub seed: u64,
    pub timeout: Option<f64>,
    pub params: RandomSpinParams,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            spins: vec![2, 3, 4],
            engines: vec![Engine::Dec, Engine::Cheb, Engine::Krylov, Engine::Zte],
            settings: RunSettings { dt: 0.1, steps: 1000, eps: 1e-7, xi: DEFAULT_XI, oracle_cap: DEFAULT_ORACLE_CAP },
            seed: 1,
            timeout: None,
            params: RandomSpinParams { time_unit: TimeUnit::MILLISECONDS.seconds, ..Default::default() },
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBenchFile {
    benchmark: RawBench,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBench {
    spins: Option<Vec<usize>>,
    engines: Option<Vec<String>>,
    dt: Option<f64>,
    steps: Option<usize>,
    eps: Option<f64>,
    xi: Option<f64>,
    seed: Option<u64>,
    time_unit: Option<String>,
    timeout: Option<f64>,
    oracle_cap: Option<usize>,
    larmor_hz: Option<[f64; 2]>,
    j_hz: Option<[f64; 2]>,
    coupling_probability: Option<f64>,
}

pub fn parse_bench_config(text: &str) -> Result<BenchConfig> {
    let raw = toml::from_str::<RawBenchFile>(text).map_err(|e| Error::Config(e.to_string()))?.benchmark;
    let mut cfg = BenchConfig::default();
    if let Some(spins) = raw.spins {
        cfg.spins = spins;
    }
    if let Some(engines) = raw.engines {
        cfg.engines = engines.iter().map(|e| e.parse()).collect::<Result<_>>()?;
    }
    let s = &mut cfg.settings;
    s.dt = raw.dt.unwrap_or(s.dt);
    s.steps = raw.steps.unwrap_or(s.steps);
    s.eps = raw.eps.unwrap_or(s.eps);
    s.xi = raw.xi.unwrap_or(s.xi);
    s.oracle_cap = raw.oracle_cap.unwrap_or(s.oracle_cap);
    cfg.seed = raw.seed.unwrap_or(cfg.seed);
    cfg.timeout = raw.timeout;
    if let Some(unit) = raw.time_unit {
        cfg.params.time_unit = unit.parse::<TimeUnit>()?.seconds;
    }
    if let Some([lo, hi]) = raw.larmor_hz {
        cfg.params.larmor_hz = (lo, hi);
    }
    if let Some([lo, hi]) = raw.j_hz {
        cfg.params.j_hz = (lo, hi);
    }
    cfg.params.coupling_probability = raw.coupling_probability.unwrap_or(cfg.params.coupling_probability);
    cfg.validate()?;
    Ok(cfg)
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.spins.is_empty() || self.spins.contains(&0) {
            return Err(Error::Config("benchmark.spins must list sizes of at least one spin".into()));
        }
        if self.engines.is_empty() {
            return Err(Error::Config("benchmark.engines must not be empty".into()));
        }
        let s = &self.settings;
        if !(s.dt > 0.0) || s.steps == 0 || !(s.eps > 0.0 && s.eps < 1.0) || !(s.xi >= 0.0) {
            return Err(Error::Config(format!(
                "benchmark needs dt > 0, steps >= 1, eps in (0, 1), xi >= 0; got dt = {}, steps = {}, eps = {}, xi = {}",
                s.dt, s.steps, s.eps, s.xi
            )));
        }
        let (lo, hi) = self.params.larmor_hz;
        let (jlo, jhi) = self.params.j_hz;
        if !(lo <= hi) || !(jlo <= jhi) || !(0.0..=1.0).contains(&self.params.coupling_probability) {
            return Err(Error::Config("benchmark frequency ranges must be ordered".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BenchStatus {
    Ok,
    TimedOut,
    Failed(String),
}

impl BenchStatus {
    pub fn label(&self) -> &str {
        match self {
            BenchStatus::Ok => "ok",
            BenchStatus::TimedOut => "timeout",
            BenchStatus::Failed(_) => "failed",
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchRow {
    pub spins: usize,
    pub dim: usize,
    pub engine: Engine,
    pub status: BenchStatus,
    pub wall_time: f64,
    pub matvecs: u64,
    pub setup_matvecs: u64,
    pub max_error: Option<f64>,
    pub endpoint_error: Option<f64>,
    pub reduced_dim: Option<usize>,
    pub chebyshev_order: Option<usize>,
    pub max_krylov_dim: Option<usize>,
}

/// Machine and build description printed with every report.
#[derive(Clone, Debug)]
pub struct Fingerprint {
    pub version: &'static str,
    pub os: &'static str,
    pub arch: &'static str,
    pub debug_assertions: bool,
    pub cpus: usize,
    pub threads: usize,
}

impl Fingerprint {
    pub fn current() -> Self {
        Fingerprint {
            version: env!("CARGO_PKG_VERSION"),
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
            debug_assertions: cfg!(debug_assertions),
            cpus: std::thread::available_parallelism().map_or(1, |n| n.get()),
            threads: rayon::current_num_threads(),
        }
    }

    fn pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("version", self.version.to_string()),
            ("os", self.os.to_string()),
            ("arch", self.arch.to_string()),
            ("debug_assertions", self.debug_assertions.to_string()),
            ("cpus", self.cpus.to_string()),
            ("threads", self.threads.to_string()),
        ]
    }
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub fingerprint: Fingerprint,
    pub seed: u64,
    pub rows: Vec<BenchRow>,
}

/// Random spin problem with the total `I_p` as its only observable.
pub fn random_problem(n: usize, params: &RandomSpinParams, seed: u64) -> Result<Problem> {
    let spec = SpinSystemSpec::random(n, params, seed)?;
    spin_problem(&spec)
}

pub fn spin_problem(spec: &SpinSystemSpec) -> Result<Problem> {
    let n = spec.n_spins();
    let liouvillian = build_liouvillian(&build_hamiltonian(spec))?;
    Ok(Problem {
        liouvillian,
        rho0: initial_state(n)?.into_inner(),
        observables: vec![Observable::new("ip", trace_form(&observable_ip(n)?)?)],
        omega0: spec.omega0().to_vec(),
    })
}

/// Runs every configured engine on every size. Engine failures and timeouts
/// are recorded in the rows; only problem construction errors abort.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for (i, &n) in cfg.spins.iter().enumerate() {
        let problem = random_problem(n, &cfg.params, cfg.seed.wrapping_add(i as u64))?;
        let reference: Option<ExpectationTrace> = if problem.dim() <= cfg.settings.oracle_cap {
            Some(run_engine(Engine::Oracle, &problem, &cfg.settings, &Deadline::none())?)
        } else {
            None
        };
        for &engine in &cfg.engines {
            let deadline = cfg.timeout.map_or_else(Deadline::none, Deadline::after_secs);
            let result = run_engine(engine, &problem, &cfg.settings, &deadline);
            rows.push(make_row(n, problem.dim(), engine, result, reference.as_ref()));
        }
    }
    Ok(BenchReport { fingerprint: Fingerprint::current(), seed: cfg.seed, rows })
}

fn make_row(
    spins: usize,
    dim: usize,
    engine: Engine,
    result: Result<ExpectationTrace>,
    reference: Option<&ExpectationTrace>,
) -> BenchRow {
    let mut row = BenchRow {
        spins,
        dim,
        engine,
        status: BenchStatus::Ok,
        wall_time: 0.0,
        matvecs: 0,
        setup_matvecs: 0,
        max_error: None,
        endpoint_error: None,
        reduced_dim: None,
        chebyshev_order: None,
        max_krylov_dim: None,
    };
    match result {
        Ok(trace) => {
            row.wall_time = trace.meta.wall_time;
            row.matvecs = trace.meta.matvecs;
            row.setup_matvecs = trace.meta.setup_matvecs;
            row.reduced_dim = trace.meta.reduced_dim;
            row.chebyshev_order = trace.meta.chebyshev_order;
            row.max_krylov_dim = trace.meta.max_krylov_dim;
            if let Some(r) = reference {
                row.max_error = trace.max_abs_error(r).ok();
                row.endpoint_error = trace.endpoint_error(r).ok();
            }
        }
        Err(Error::Timeout(secs)) => {
            row.status = BenchStatus::TimedOut;
            row.wall_time = secs;
        }
        Err(e) => row.status = BenchStatus::Failed(e.to_string()),
    }
    row
}

const COLUMNS: [&str; 12] = [
    "spins",
    "dim",
    "engine",
    "status",
    "wall_s",
    "matvecs",
    "setup_matvecs",
    "max_err",
    "end_err",
    "reduced_dim",
    "cheb_order",
    "krylov_dim",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

fn sci(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.3e}"))
}

impl BenchRow {
    fn cells(&self) -> Vec<String> {
        vec![
            self.spins.to_string(),
            self.dim.to_string(),
            self.engine.to_string(),
            self.status.label().to_string(),
            format!("{:.4}", self.wall_time),
            self.matvecs.to_string(),
            self.setup_matvecs.to_string(),
            sci(self.max_error),
            sci(self.endpoint_error),
            opt(self.reduced_dim),
            opt(self.chebyshev_order),
            opt(self.max_krylov_dim),
        ]
    }
}

impl BenchReport {
    /// Human-readable aligned table preceded by the fingerprint.
    pub fn table(&self) -> String {
        let cells: Vec<Vec<String>> = self.rows.iter().map(BenchRow::cells).collect();
        let widths: Vec<usize> = (0..COLUMNS.len())
            .map(|c| cells.iter().map(|r| r[c].len()).chain([COLUMNS[c].len()]).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        let fp: Vec<String> = self.fingerprint.pairs().into_iter().map(|(k, v)| format!("{k}={v}")).collect();
        let _ = writeln!(out, "# {} seed={}", fp.join(" "), self.seed);
        let line =
            |row: &[String]| row.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect::<Vec<_>>().join("  ");
        let header: Vec<String> = COLUMNS.iter().map(|s| s.to_string()).collect();
        let _ = writeln!(out, "{}", line(&header));
        for row in &cells {
            let _ = writeln!(out, "{}", line(row));
        }
        for row in &self.rows {
            if let BenchStatus::Failed(msg) = &row.status {
                let _ = writeln!(out, "# {} spins {}: {msg}", row.spins, row.engine);
            }
        }
        out
    }

    /// CSV with `#` fingerprint lines ahead of the header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for (k, v) in self.fingerprint.pairs() {
            writeln!(out, "# {k}={v}")?;
        }
        writeln!(out, "# seed={}", self.seed)?;
        writeln!(out, "{}", COLUMNS.join(","))?;
        for row in &self.rows {
            writeln!(out, "{}", row.cells().join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> BenchConfig {
        let mut cfg = BenchConfig::default();
        cfg.spins = vec![1, 2];
        cfg.engines = Engine::ALL.to_vec();
        cfg.settings.steps = 50;
        cfg
    }

    #[test]
    fn rows_cover_every_pair_and_agree_with_the_oracle() {
        let report = run_benchmark(&small()).unwrap();
        assert_eq!(report.rows.len(), 10);
        for row in &report.rows {
            assert_eq!(row.status, BenchStatus::Ok, "{row:?}");
            assert!(row.max_error.unwrap() < 1e-5, "{row:?}");
            assert!(row.endpoint_error.unwrap() <= row.max_error.unwrap());
        }
        let zte = report.rows.iter().find(|r| r.engine == Engine::Zte && r.spins == 2).unwrap();
        assert!(zte.reduced_dim.unwrap() <= 16);
    }

    #[test]
    fn numeric_columns_are_deterministic() {
        let strip = |r: &BenchReport| -> Vec<Vec<String>> {
            r.rows
                .iter()
                .map(|row| {
                    let mut c = row.cells();
                    c.remove(4);
                    c
                })
                .collect()
        };
        let a = run_benchmark(&small()).unwrap();
        let b = run_benchmark(&small()).unwrap();
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn timeout_is_recorded_not_fatal() {
        let mut cfg = small();
        cfg.timeout = Some(-1.0);
        let report = run_benchmark(&cfg).unwrap();
        assert!(report.rows.iter().any(|r| r.status == BenchStatus::TimedOut));
        let table = report.table();
        assert!(table.contains("timeout") && table.contains("arch="));
        let mut csv = Vec::new();
        report.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.lines().any(|l| l.starts_with("spins,dim,engine,status")));
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 11);
    }

    #[test]
    fn config_parsing() {
        let cfg = parse_bench_config(
            "[benchmark]\nspins = [3]\nengines = [\"dec\", \"krylov\"]\nsteps = 10\ntime_unit = \"s\"\nlarmor_hz = [1.0, 2.0]\n",
        )
        .unwrap();
        assert_eq!(cfg.spins, vec![3]);
        assert_eq!(cfg.engines, vec![Engine::Dec, Engine::Krylov]);
        assert_eq!(cfg.settings.steps, 10);
        assert_eq!(cfg.params.time_unit, 1.0);
        assert_eq!(cfg.params.larmor_hz, (1.0, 2.0));
        for bad in [
            "[benchmark]\nspins = []\n",
            "[benchmark]\nengines = [\"x\"]\n",
            "[benchmark]\nfoo = 1\n",
            "[benchmark]\ndt = 0.0\n",
        ] {
            assert_eq!(parse_bench_config(bad).unwrap_err().exit_code(), 2, "{bad}");
        }
    }
}
