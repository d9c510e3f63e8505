#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use decspin::bench::{parse_bench_config, run_benchmark};
use decspin::config::{parse_config, RunConfig, TimeUnit};
use decspin::dec::DecSeries;
use decspin::run::{precompute_dec, run_engine, Problem, RunSettings};
use decspin::spectrum::trace_spectrum;
use decspin::trace::{Deadline, ExpectationTrace};
use decspin::{Error, Result};

#[derive(Parser)]
#[command(name = "decspin", version, about = "Liouville-space spin dynamics: FIDs, spectra and engine benchmarks")]
struct Cli {
    /// Worker threads for sparse kernels (default: all cores, 1 for benchmark)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate a configured system and write its expectation trace
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        engine: Option<String>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        xi: Option<f64>,
        /// Trace CSV (overrides output.fid; stdout when neither is set)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Wall-clock limit in seconds
        #[arg(long)]
        timeout: Option<f64>,
    },
    /// Transform a trace CSV into a spectrum CSV
    Spectrum {
        #[arg(long)]
        input: PathBuf,
        /// Observable label (default: first series)
        #[arg(long)]
        observable: Option<String>,
        /// Exponential decay rate per time unit
        #[arg(long, default_value_t = 0.0)]
        apodization: f64,
        /// Time unit of the trace: s or ms
        #[arg(long, default_value = "s")]
        time_unit: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every engine on random systems and report cost and accuracy
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        /// CSV report (the table always goes to stdout)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-run wall-clock limit in seconds
        #[arg(long)]
        timeout: Option<f64>,
    },
    /// Store the DEC series of a configured system for later evaluation
    DecPrecompute {
        #[arg(long)]
        config: PathBuf,
        /// Horizon (default: steps·dt)
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        timeout: Option<f64>,
    },
    /// Evaluate a stored DEC series on a uniform grid
    DecEval {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        dt: f64,
        /// Number of steps (default: as many as fit in the horizon)
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let benchmark = matches!(cli.command, Command::Benchmark { .. });
    if let Some(k) = cli.threads.or(benchmark.then_some(1)) {
        if k == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global().map_err(|e| Error::Resource(e.to_string()))?;
    }
    match cli.command {
        Command::Simulate { config, engine, eps, xi, out, timeout } => {
            let mut cfg = load_config(&config)?;
            if let Some(engine) = engine {
                cfg.engine = engine.parse()?;
            }
            cfg.eps = eps.unwrap_or(cfg.eps);
            cfg.xi = xi.unwrap_or(cfg.xi);
            cfg.validate()?;
            let problem = Problem::from_config(&cfg)?;
            let trace = run_engine(cfg.engine, &problem, &RunSettings::from_config(&cfg), &deadline(timeout)?)?;
            summarize(&trace);
            write_with(out.as_deref().or(cfg.fid_path.as_deref()), |w| trace.write_csv(w))?;
            if let Some(path) = &cfg.spectrum_path {
                let spec = trace_spectrum(&trace, 0, cfg.time_unit.seconds, cfg.apodization)?;
                write_with(Some(path), |w| spec.write_csv(w))?;
            }
            Ok(())
        }
        Command::Spectrum { input, observable, apodization, time_unit, out } => {
            let unit: TimeUnit = time_unit.parse()?;
            let trace = ExpectationTrace::read_csv(BufReader::new(open(&input)?))?;
            let index = match observable {
                Some(label) => trace
                    .labels
                    .iter()
                    .position(|l| *l == label)
                    .ok_or_else(|| Error::Config(format!("observable '{label}' not in {}", input.display())))?,
                None => 0,
            };
            let spec = trace_spectrum(&trace, index, unit.seconds, apodization)?;
            write_with(out.as_deref(), |w| spec.write_csv(w))
        }
        Command::Benchmark { config, out, timeout } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", config.display())))?;
            let mut cfg = parse_bench_config(&text)?;
            if timeout.is_some() {
                cfg.timeout = timeout;
            }
            let report = run_benchmark(&cfg)?;
            print!("{}", report.table());
            if let Some(path) = out {
                write_with(Some(&path), |w| report.write_csv(w))?;
            }
            Ok(())
        }
        Command::DecPrecompute { config, tau, eps, out, timeout } => {
            let mut cfg = load_config(&config)?;
            cfg.eps = eps.unwrap_or(cfg.eps);
            cfg.validate()?;
            let tau = tau.unwrap_or(cfg.steps as f64 * cfg.dt);
            let problem = Problem::from_config(&cfg)?;
            let series = precompute_dec(&problem, cfg.eps, tau, &deadline(timeout)?)?;
            eprintln!(
                "dec order={} tau={} dim={} matvecs={} setup_matvecs={} wall={:.3}s",
                series.order(),
                series.tau,
                series.stats.full_dim,
                series.stats.matvecs,
                series.stats.setup_matvecs,
                series.stats.wall_time
            );
            write_with(Some(&out), |w| series.write_sidecar(w))
        }
        Command::DecEval { input, dt, steps, out } => {
            let series = DecSeries::read_sidecar(BufReader::new(open(&input)?))?;
            if !(dt > 0.0) {
                return Err(Error::Config(format!("--dt must be positive, got {dt}")));
            }
            let steps = steps.unwrap_or(((series.tau / dt) * (1.0 + 1e-12)).floor() as usize);
            let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
            let trace = series.evaluate_grid(&times)?;
            summarize(&trace);
            write_with(out.as_deref(), |w| trace.write_csv(w))
        }
    }
}

fn load_config(path: &Path) -> Result<RunConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))
}

fn deadline(timeout: Option<f64>) -> Result<Deadline> {
    match timeout {
        None => Ok(Deadline::none()),
        Some(t) if t > 0.0 => Ok(Deadline::after_secs(t)),
        Some(t) => Err(Error::Config(format!("--timeout must be positive, got {t}"))),
    }
}

fn write_with(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            f(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn summarize(trace: &ExpectationTrace) {
    let m = &trace.meta;
    let mut line = format!(
        "{} dim={} points={} matvecs={} setup_matvecs={} wall={:.3}s",
        m.engine,
        m.full_dim,
        trace.len(),
        m.matvecs,
        m.setup_matvecs,
        m.wall_time
    );
    if let Some(r) = m.reduced_dim {
        line.push_str(&format!(" reduced_dim={r}"));
    }
    if let Some(k) = m.chebyshev_order {
        line.push_str(&format!(" order={k}"));
    }
    if let Some(k) = m.max_krylov_dim {
        line.push_str(&format!(" krylov_dim={k}"));
    }
    eprintln!("{line}");
    for w in &m.warnings {
        eprintln!("warning: {w}");
    }
}
