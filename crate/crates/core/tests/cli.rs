use std::path::Path;
use std::process::{Command, Output};

use decspin::trace::ExpectationTrace;
use decspin::C64;

const TWO_SPIN: &str = "[system]\nn = 2\nlarmor_hz = [100.0, 250.0]\nj_hz = [[0.0, 7.0], [7.0, 0.0]]\n\
[run]\nengine = \"dec\"\ndt = 0.1\nsteps = 1000\ntime_unit = \"ms\"\n";

fn decspin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_decspin")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn read_trace(path: &str) -> ExpectationTrace {
    ExpectationTrace::read_csv(std::io::BufReader::new(std::fs::File::open(path).unwrap())).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn simulate_writes_a_trace_for_every_engine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "two.toml", TWO_SPIN);
    let mut traces = Vec::new();
    for engine in ["dec", "cheb", "krylov", "zte", "oracle"] {
        let out_path = dir.path().join(format!("{engine}.csv"));
        let out_path = out_path.to_str().unwrap();
        let out = decspin(&["simulate", "--config", &cfg, "--engine", engine, "--out", out_path]);
        assert!(out.status.success(), "{engine}: {}", stderr(&out));
        assert!(stderr(&out).starts_with(engine), "{}", stderr(&out));
        let header = std::fs::read_to_string(out_path).unwrap();
        assert!(header.starts_with("t,re_ip,im_ip\n"));
        let trace = read_trace(out_path);
        assert_eq!(trace.len(), 1001);
        assert!((trace.values[0][0] - C64::new(0.0, -2.0)).norm() < 1e-9);
        traces.push(trace);
    }
    for t in &traces[..4] {
        assert!(t.max_abs_error(&traces[4]).unwrap() < 1e-5);
    }
}

#[test]
fn stdout_is_the_default_sink() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &TWO_SPIN.replace("steps = 1000", "steps = 5"));
    let out = decspin(&["simulate", "--config", &cfg, "--threads", "2"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn spectrum_of_a_single_spin_peaks_at_its_larmor_frequency() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("spec.csv");
    let text = format!(
        "[system]\nn = 1\nlarmor_hz = [100.0]\n[run]\nengine = \"krylov\"\ndt = 0.1\nsteps = 999\ntime_unit = \"ms\"\n\
[output]\nspectrum = \"{}\"\n",
        spec_path.display()
    );
    let cfg = write(dir.path(), "one.toml", &text);
    let fid = dir.path().join("fid.csv");
    let out = decspin(&["simulate", "--config", &cfg, "--out", fid.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = decspin::spectrum::Spectrum::read_csv(std::io::BufReader::new(std::fs::File::open(&spec_path).unwrap()))
        .unwrap();
    let peak = rows.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    assert!((peak.0 - 100.0).abs() < 1e-6, "{peak:?}");

    // The standalone verb reads the trace file back.
    let again = dir.path().join("again.csv");
    let out = decspin(&[
        "spectrum",
        "--input",
        fid.to_str().unwrap(),
        "--time-unit",
        "ms",
        "--apodization",
        "0.05",
        "--out",
        again.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let header = std::fs::read_to_string(&again).unwrap();
    assert!(header.starts_with("freq_hz,amplitude\n"));
}

#[test]
fn dec_sidecar_verbs_reproduce_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "two.toml", TWO_SPIN);
    let direct = dir.path().join("direct.csv");
    assert!(decspin(&["simulate", "--config", &cfg, "--out", direct.to_str().unwrap()]).status.success());
    let side = dir.path().join("series.decs");
    let out = decspin(&["dec-precompute", "--config", &cfg, "--tau", "100", "--out", side.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(std::fs::read_to_string(&side).unwrap().starts_with("DECS1\n"));
    let eval = dir.path().join("eval.csv");
    let out = decspin(&["dec-eval", "--input", side.to_str().unwrap(), "--dt", "0.1", "--out", eval.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let (a, b) = (read_trace(direct.to_str().unwrap()), read_trace(eval.to_str().unwrap()));
    assert_eq!(a.len(), b.len());
    assert!(a.max_abs_error(&b).unwrap() < 1e-15);

    let out = decspin(&["dec-eval", "--input", side.to_str().unwrap(), "--dt", "0.1", "--steps", "2000"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let asym =
        write(dir.path(), "asym.toml", "[system]\nn = 2\nlarmor_hz = [1.0, 2.0]\nj_hz = [[0.0, 7.0], [5.0, 0.0]]\n");
    let out = decspin(&["simulate", "--config", &asym]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("j_hz[0][1]"), "{}", stderr(&out));

    let missing = write(dir.path(), "missing.toml", "[system]\nn = 2\n");
    let out = decspin(&["simulate", "--config", &missing]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("larmor_hz"), "{}", stderr(&out));

    let out = decspin(&["simulate", "--config", "/nonexistent/x.toml"]);
    assert_eq!(out.status.code(), Some(2));

    let ok = write(dir.path(), "ok.toml", TWO_SPIN);
    for args in [["--eps", "3"], ["--engine", "nope"], ["--xi", "-1"]] {
        let out = decspin(&["simulate", "--config", &ok, args[0], args[1]]);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", stderr(&out));
    }
    assert_eq!(decspin(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn resource_limits_exit_with_code_four() {
    let dir = tempfile::tempdir().unwrap();
    let big = write(
        dir.path(),
        "seven.toml",
        "[system]\nn = 7\nlarmor_hz = [10.0, 80.0, 150.0, 220.0, 300.0, 390.0, 480.0]\n[run]\nengine = \"oracle\"\nsteps = 2\ntime_unit = \"ms\"\n",
    );
    let out = decspin(&["simulate", "--config", &big]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));

    let cfg = write(dir.path(), "two.toml", TWO_SPIN);
    let out = decspin(&["simulate", "--config", &cfg, "--engine", "krylov", "--timeout", "1e-9"]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    assert!(stderr(&out).contains("timed out"));
}

#[test]
fn benchmark_prints_a_table_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bench.toml",
        "[benchmark]\nspins = [1, 2, 3]\nengines = [\"dec\", \"krylov\"]\nsteps = 100\nseed = 5\n",
    );
    let csv = dir.path().join("bench.csv");
    let out = decspin(&["benchmark", "--config", &cfg, "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("threads=1"), "{table}");
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<Vec<&str>> =
        text.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    for row in &rows {
        assert_eq!(row[3], "ok");
        assert!(row[7].parse::<f64>().unwrap() < 1e-5);
    }
    // DEC products track the horizon, so they grow with the system's
    // spectral width but not with grid density.
    let dec: Vec<u64> = rows.iter().filter(|r| r[2] == "dec").map(|r| r[5].parse().unwrap()).collect();
    let order: Vec<u64> = rows.iter().filter(|r| r[2] == "dec").map(|r| r[10].parse().unwrap()).collect();
    assert!(dec.iter().zip(&order).all(|(m, n)| m + 1 == *n));
}
