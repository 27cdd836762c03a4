use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

struct Run {
    output: Output,
    csv: PathBuf,
    json: PathBuf,
}

impl Run {
    fn code(&self) -> i32 {
        self.output.status.code().unwrap_or(-1)
    }

    fn json(&self) -> serde_json::Value {
        serde_json::from_slice(&std::fs::read(&self.json).unwrap()).unwrap()
    }

    /// CSV rows after the commented preamble, header first.
    fn rows(&self) -> Vec<Vec<String>> {
        let text = std::fs::read_to_string(&self.csv).unwrap();
        let body: String = text
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(|l| format!("{l}\n"))
            .collect();
        csv::Reader::from_reader(body.as_bytes())
            .records()
            .map(|r| r.unwrap().iter().map(str::to_string).collect())
            .collect()
    }
}

fn run(dir: &Path, args: &[&str], extra: &[&str]) -> Run {
    let csv = dir.join("out.csv");
    let json = dir.join("out.json");
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_transfer-lab"));
    cmd.args(args)
        .arg("--set")
        .arg(format!("output.csv={}", csv.display()))
        .arg("--set")
        .arg(format!("output.json={}", json.display()));
    for e in extra {
        cmd.arg("--set").arg(e);
    }
    let output = cmd.env("TRANSFER_LAB_THREADS", "1").output().unwrap();
    Run { output, csv, json }
}

fn parse(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn oracle_self_adjoint_example() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(dir.path(), &["oracle"], &[]);
    assert_eq!(r.code(), 0, "{}", String::from_utf8_lossy(&r.output.stderr));
    let rows = r.rows();
    assert_eq!(rows.len(), 6);
    let lambda0 = parse(&rows[0][1]);
    let exact = (PI / (10.0 + 19f64.sqrt())).sqrt();
    assert!((lambda0 - exact).abs() <= 1e-14 * exact);
    assert_eq!(parse(&rows[0][2]), 0.0);
    // self-adjoint: singular values equal the eigenvalues
    assert!((parse(&rows[3][4]) - parse(&rows[3][3])).abs() <= 1e-14);
    let stdout = String::from_utf8(r.output.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 6);
}

#[test]
fn oracle_reads_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# harmonic data at W = 5\nmodel.w = 5\nexperiment.j_max = 2\n").unwrap();
    let r = run(dir.path(), &["oracle", cfg.to_str().unwrap()], &[]);
    assert_eq!(r.code(), 0);
    assert_eq!(r.rows().len(), 3);
    assert_eq!(r.json()["config"]["model.w"], "5");
}

#[test]
fn sweep_defaults_report_block_slope() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(dir.path(), &["sweep"], &[]);
    assert_eq!(r.code(), 0, "{}", String::from_utf8_lossy(&r.output.stderr));
    let j = r.json();
    let slope = j["result"]["fits"]["abs_a_minus_1"]["slope"].as_f64().unwrap();
    assert!(slope <= -1.1, "slope {slope}");
    assert_eq!(j["grids"].as_array().unwrap().len(), 4);
    assert_eq!(r.rows().len(), 4);
}

#[test]
fn negative_w_is_a_config_error_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(dir.path(), &["spectrum"], &["model.w=-4"]);
    assert_eq!(r.code(), 1);
    assert!(!r.csv.exists() && !r.json.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(dir.path(), &["spectrum"], &["solver.tolerance=1e-8"]);
    assert_eq!(r.code(), 1);
    assert!(String::from_utf8_lossy(&r.output.stderr).contains("unknown key"));
}

#[test]
fn growth_violation_exits_with_assumption_code() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(dir.path(), &["correlate"], &["model.a=1", "model.w=4"]);
    assert_eq!(r.code(), 3);
    assert!(String::from_utf8_lossy(&r.output.stderr).contains("F2"));
}

#[test]
fn unrotated_complex_curvature_fails_u2() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(
        dir.path(),
        &["blocks"],
        &["model.kind=harmonic", "model.b=1", "model.zeta_arg=0", "model.w=4"],
    );
    assert_eq!(r.code(), 3);
    assert!(String::from_utf8_lossy(&r.output.stderr).contains("U2"));
}

#[test]
fn check_assumptions_writes_report_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(dir.path(), &["check-assumptions"], &["experiment.observables=one,x"]);
    assert_eq!(r.code(), 3);
    let j = r.json();
    assert_eq!(j["result"]["failures"][0], "F2(x)");
    assert_eq!(j["result"]["assumptions"]["u2"]["passed"], true);

    let ok = run(
        dir.path(),
        &["check-assumptions"],
        &["model.a=2", "experiment.observables=one,x,x2"],
    );
    assert_eq!(ok.code(), 0);
}

#[test]
fn iteration_cap_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(dir.path(), &["spectrum"], &["model.w=4", "solver.max_iters=2"]);
    assert_eq!(r.code(), 2);
    assert!(!r.csv.exists());
}

#[test]
fn outputs_embed_config_and_grid() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(dir.path(), &["spectrum", "--gnuplot"], &["model.w=4", "experiment.k=2"]);
    assert_eq!(r.code(), 0);
    let text = std::fs::read_to_string(&r.csv).unwrap();
    assert!(text.contains("# model.w = 4\n"));
    let grid_line = text.lines().find(|l| l.starts_with("# grid ")).unwrap();
    let j = r.json();
    let n = j["grids"][0]["n"].as_u64().unwrap();
    assert!(grid_line.ends_with(&format!("N={n}")));
    assert_eq!(j["config"]["solver.tol"], "1e-10");
    let dat = std::fs::read_to_string(dir.path().join("out.dat")).unwrap();
    let data: Vec<&str> = dat.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data.len(), 2);
    assert_eq!(data[0].split_whitespace().count(), 9);
}

#[test]
fn harmonic_spectrum_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(
        dir.path(),
        &["spectrum"],
        &[
            "model.kind=harmonic",
            "model.a=1",
            "model.b=0.5",
            "model.w=4",
            "experiment.k=3",
        ],
    );
    assert_eq!(r.code(), 0);
    for row in r.rows() {
        let (re, im) = (parse(&row[1]), parse(&row[2]));
        let (ere, eim) = (parse(&row[6]), parse(&row[7]));
        let rel = ((re - ere).hypot(im - eim)) / ere.hypot(eim);
        assert!(rel <= 1e-8, "{row:?}");
        assert!((parse(&row[5]) - parse(&row[8])).abs() <= 1e-8 * parse(&row[8]));
    }
}

#[test]
fn contour_check_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(dir.path(), &["check-contour"], &[]);
    assert_eq!(r.code(), 0);
    let diff = r.json()["result"]["finite_abs_diff"].as_f64().unwrap();
    assert!(diff <= 1e-6, "{diff}");
}

#[test]
fn correlate_summary_fields() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(dir.path(), &["correlate"], &["model.w=8", "experiment.n_max=25"]);
    assert_eq!(r.code(), 0);
    let j = r.json();
    let rate = j["result"]["rate"].as_f64().unwrap();
    let c0w = j["result"]["c0_over_w"].as_f64().unwrap();
    assert!((rate - (1.0 - c0w)).abs() <= 0.2 * c0w);
    assert_eq!(r.rows().len(), 26);
}
