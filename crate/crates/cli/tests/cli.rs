use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use curveflow_cli::checks::parse_mutation;
use curveflow_cli::config::ConfigFile;
use curveflow_cli::parse::{parse_m_range, parse_node_list, DtRule};

fn curveflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curveflow"))
        .args(args)
        .env_remove("CURVEFLOW_THREADS")
        .output()
        .expect("spawn curveflow")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn summary_value(out: &str, key: &str) -> f64 {
    let line = out
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no `{key}` in\n{out}"));
    line.split_whitespace().next().unwrap().parse().unwrap()
}

#[test]
fn missing_nodes_is_config_error() {
    let o = curveflow(&["run", "--problem", "radial", "--dt", "1e-3"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--nodes"));
}

#[test]
fn bad_flags_are_config_errors() {
    for argv in [
        &["run", "--problem", "circle", "--nodes", "10", "--dt", "h2"][..],
        &["run", "--problem", "radial", "--nodes", "10", "--dt", "-1"],
        &["run", "--bogus"],
        &["convergence", "--nodes", "61,21"],
        &["convergence", "--mode", "space-time"],
        &["validate", "--only", "everything"],
        &["validate", "--mutate", "sc:7"],
        &[],
    ] {
        assert_eq!(code(&curveflow(argv)), 1, "{argv:?}");
    }
    assert_eq!(code(&curveflow(&["--help"])), 0);
    assert_eq!(code(&curveflow(&["--version"])), 0);
}

#[test]
fn shrinking_circle_aborts() {
    let o = curveflow(&["run", "--problem", "pure-csf", "--nodes", "64", "--dt", "1e-4", "--tmax", "1"]);
    assert_eq!(code(&o), 2);
    let out = stdout(&o);
    assert!(out.contains("aborted: step"), "{out}");
    // a circle of radius 0.5 vanishes at t = 0.125
    let t = summary_value(&out, "t");
    assert!((t - 0.125).abs() < 5e-3, "{t}");
}

#[test]
fn radial_trace_and_state() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let state = dir.path().join("state.csv");
    let o = curveflow(&[
        "run", "--problem", "radial", "--nodes", "64", "--dt", "1e-3", "--tmax", "2",
        "--trace", p(&trace), "--out", p(&state),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let mut rdr = csv::Reader::from_path(&trace).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["t", "R", "B", "length", "mass", "min_q"]);
    let rows: Vec<Vec<f64>> = rdr
        .records()
        .map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2001);
    assert_eq!(rows[0][0], 0.0);
    assert!((rows[0][1] - 1.25).abs() < 1e-2 && (rows[0][2] - 0.8).abs() < 1e-14);
    // (R, B) relaxes towards (1, 1) with R·B fixed
    let last = rows.last().unwrap();
    assert!((last[1] - 1.0).abs() < (rows[0][1] - 1.0).abs() / 2.0);
    assert!((last[2] - 1.0).abs() < (rows[0][2] - 1.0).abs() / 2.0);
    for r in &rows {
        assert!((r[1] * r[2] - rows[0][1] * rows[0][2]).abs() < 1e-10);
    }

    let mut rdr = csv::Reader::from_path(&state).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["j", "x", "u1", "u2", "c"]);
    assert_eq!(rdr.records().count(), 64);
}

#[test]
fn oscillating_run_reports_errors() {
    let o = curveflow(&["run", "--problem", "oscillating", "--nodes", "21", "--dt", "h2"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    for k in 1..=5 {
        assert!(summary_value(&out, &format!("E{k}")) > 0.0);
    }
}

#[test]
fn space_convergence_rates() {
    let o = curveflow(&["convergence", "--nodes", "21,61", "--quad", "trapezoid5"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let mut rdr = csv::Reader::from_reader(out.as_bytes());
    assert_eq!(rdr.headers().unwrap().len(), 12);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].iter().skip(7).all(str::is_empty));
    let eoc = |k: usize| rows[1][6 + k].parse::<f64>().unwrap();
    assert!((eoc(1) - 3.78).abs() < 0.01, "{out}");
    assert!((eoc(2) - 2.32).abs() < 0.01, "{out}");
}

#[test]
fn time_convergence_rates() {
    let o = curveflow(&["convergence", "--mode", "time", "--nodes", "2001", "--m-range", "0..2"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let rows: Vec<csv::StringRecord> = csv::Reader::from_reader(out.as_bytes())
        .records()
        .map(Result::unwrap)
        .collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(&rows[2][0], "2");
    let eoc1: f64 = rows[2][7].parse().unwrap();
    assert!((eoc1 - 1.69).abs() < 0.05, "{out}");
}

#[test]
fn single_row_table_has_no_rates() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("table.csv");
    let o = curveflow(&["convergence", "--mode", "time", "--nodes", "40", "--m-range", "1", "--out", p(&out)]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).is_empty());
    let mut rdr = csv::Reader::from_path(&out).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][0], "1");
    assert_eq!(rows[0][1].parse::<f64>().unwrap(), 0.01);
    assert!(rows[0].iter().skip(7).all(str::is_empty));
}

#[test]
fn validate_passes_and_mutation_fails() {
    let o = curveflow(&["validate"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let out = stdout(&o);
    for name in ["residual", "crosscheck", "audit", "identities", "mass"] {
        assert!(out.contains(&format!("{name}: PASS")), "{out}");
    }
    let o = curveflow(&["validate", "--mutate", "sc:2"]);
    assert_eq!(code(&o), 3);
    assert!(stdout(&o).contains("residual: FAIL"));
}

#[test]
fn output_is_deterministic() {
    let args = ["run", "--problem", "oscillating", "--nodes", "30", "--dt", "1e-3", "--tmax", "0.3"];
    let a = curveflow(&args);
    let b = curveflow(&args);
    assert_eq!(a.stdout, b.stdout);
    let c = Command::new(env!("CARGO_BIN_EXE_curveflow"))
        .args(["convergence", "--nodes", "11,21", "--tmax", "0.2"])
        .env("CURVEFLOW_THREADS", "1")
        .output()
        .unwrap();
    let d = curveflow(&["convergence", "--nodes", "11,21", "--tmax", "0.2"]);
    assert_eq!(code(&c), 0);
    assert_eq!(c.stdout, d.stdout);
}

#[test]
fn bad_thread_count_is_config_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_curveflow"))
        .args(["validate", "--only", "mass"])
        .env("CURVEFLOW_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# short radial run\nproblem = radial\nnodes = 32\ndt = 1e-3\ntmax = 0.01\n").unwrap();
    let o = curveflow(&["run", "--config", p(&cfg)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(summary_value(&stdout(&o), "nodes"), 32.0);
    assert_eq!(summary_value(&stdout(&o), "steps"), 10.0);

    let o = curveflow(&["run", "--config", p(&cfg), "--nodes", "48", "--dt", "2e-3"]);
    assert_eq!(code(&o), 0);
    assert_eq!(summary_value(&stdout(&o), "nodes"), 48.0);
    assert_eq!(summary_value(&stdout(&o), "steps"), 5.0);

    std::fs::write(&cfg, "problem = radial\ncolour = blue\n").unwrap();
    assert_eq!(code(&curveflow(&["run", "--config", p(&cfg)])), 1);
    assert_eq!(code(&curveflow(&["run", "--config", p(&dir.path().join("missing.conf"))])), 1);
}

fn corpus(target: &str) -> Vec<(PathBuf, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut files: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    assert!(!files.is_empty(), "no seeds in {}", dir.display());
    files
        .into_iter()
        .map(|f| {
            let s = String::from_utf8_lossy(&std::fs::read(&f).unwrap()).into_owned();
            (f, s)
        })
        .collect()
}

#[test]
fn fuzz_seeds_replay() {
    for (f, s) in corpus("config_file") {
        let ok = ConfigFile::parse(&s).is_ok();
        assert_eq!(ok, !f.ends_with("bad_line"), "{}", f.display());
    }
    for (f, s) in corpus("node_list") {
        assert_eq!(parse_node_list(&s).is_ok(), !f.ends_with("decreasing"), "{}", f.display());
    }
    for (f, s) in corpus("m_range") {
        assert_eq!(parse_m_range(&s).is_ok(), !f.ends_with("empty"), "{}", f.display());
    }
    for (f, s) in corpus("dt_rule") {
        assert_eq!(s.parse::<DtRule>().is_ok(), !f.ends_with("neg_zero"), "{}", f.display());
    }
    for (f, s) in corpus("quadrature") {
        let ok = s.parse::<curveflow::quadrature::Quadrature>().is_ok();
        assert_eq!(ok, !f.ends_with("too_many"), "{}", f.display());
    }
    for (f, s) in corpus("source_mutation") {
        assert_eq!(parse_mutation(&s).is_ok(), !f.ends_with("out_of_range"), "{}", f.display());
    }
}
