//! End-to-end tests of the command-line binary: exit codes, output files,
//! flag precedence, and byte-level determinism of reruns.

use microgrid::config::{self, MicrogridConfig};
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_microgrid"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

/// Value of one `quantity,value` row of an equilibrium CSV.
fn csv_value(path: &Path, quantity: &str) -> f64 {
    let text = fs::read_to_string(path).expect("csv exists");
    for line in text.lines().skip(1) {
        let (name, value) = line.split_once(',').expect("two columns");
        if name == quantity {
            return value.parse().expect("numeric value");
        }
    }
    panic!("no row '{quantity}' in {}", path.display());
}

#[test]
fn help_succeeds_and_names_every_subcommand() {
    let out = run(&["--help"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    for sub in [
        "equilibrium",
        "linearize",
        "eigenloci",
        "region",
        "simulate",
        "report",
    ] {
        assert!(text.contains(sub), "--help misses {sub}");
    }
}

#[test]
fn usage_errors_exit_with_two() {
    // clap's own parse failure.
    assert_eq!(code(&run(&["equilibrium", "--bogus"])), 2);
    // Unknown model and unknown preset.
    assert_eq!(code(&run(&["equilibrium", "--model", "em9"])), 2);
    assert_eq!(code(&run(&["equilibrium", "--preset", "rx-zz9"])), 2);
    // A single-model command refuses --model all.
    for sub in ["equilibrium", "linearize", "simulate"] {
        let out = run(&[sub, "--model", "all"]);
        assert_eq!(code(&out), 2, "{sub} accepted --model all");
        assert!(stderr(&out).contains("--model all"));
    }
    // Malformed sweep/grid specifications.
    assert_eq!(code(&run(&["region", "--kq-grid", "5e-4:1e-4:3"])), 2);
    assert_eq!(code(&run(&["region", "--kq-grid", "nope"])), 2);
    assert_eq!(code(&run(&["eigenloci", "--kp-range", "1e-5:1e-3"])), 2);
    // Unknown simulate source.
    assert_eq!(code(&run(&["simulate", "--source", "warp"])), 2);
    // Missing and invalid config files.
    let out = run(&["equilibrium", "--config", "/nonexistent/params.toml"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("cannot read"));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "inverter_i = { k_p = -1.0 }\n").unwrap();
    assert_eq!(code(&run(&["equilibrium", "--config", bad.to_str().unwrap()])), 2);
}

#[test]
fn equilibrium_solves_and_writes_the_operating_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "equilibrium",
        "--preset",
        "rx-eq1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("49.9676"), "frequency missing from: {text}");
    assert!(text.contains("wrote "));

    let csv = dir.path().join("equilibrium.csv");
    let f0 = csv_value(&csv, "f0 (Hz)");
    assert!((f0 - 49.967632).abs() < 1e-5);
    let v_i = csv_value(&csv, "V_i");
    assert!((v_i - 310.726).abs() < 1e-2);
    // The CSV frequency round-trips at full precision.
    let omega0 = csv_value(&csv, "omega0 (rad/s)");
    assert!((omega0 - f0 * std::f64::consts::TAU).abs() < 1e-9);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("params.toml");
    // A config whose gains differ from the defaults.
    let cfg = MicrogridConfig::default().with_droop_gains(8e-5, 2e-4);
    fs::write(&cfg_path, config::serialize_config(&cfg)).unwrap();

    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let base = run(&[
        "equilibrium",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        out_a.to_str().unwrap(),
    ]);
    assert_eq!(code(&base), 0);
    let overridden = run(&[
        "equilibrium",
        "--config",
        cfg_path.to_str().unwrap(),
        "--kp",
        "6e-5",
        "--kq",
        "1.5e-4",
        "--out",
        out_b.to_str().unwrap(),
    ]);
    assert_eq!(code(&overridden), 0);

    let f_config = csv_value(&out_a.join("equilibrium.csv"), "f0 (Hz)");
    let f_flags = csv_value(&out_b.join("equilibrium.csv"), "f0 (Hz)");
    // Larger frequency droop pulls the operating point further below 50 Hz.
    assert!(f_config < f_flags);
    // The flag-overridden run reproduces the default-gains operating point.
    assert!((f_flags - 49.967632).abs() < 1e-5);
}

#[test]
fn linearize_writes_matrices_and_the_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "linearize",
        "--preset",
        "rx-eq1",
        "--model",
        "conv3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("spectral abscissa"));

    let gamma = fs::read_to_string(dir.path().join("gamma.csv")).unwrap();
    assert!(gamma.starts_with("row,delta_i,delta_k,"));
    let a = fs::read_to_string(dir.path().join("a.csv")).unwrap();
    // Square 10-state matrix: header plus ten rows.
    assert_eq!(a.lines().count(), 11);
    let eig = fs::read_to_string(dir.path().join("eigenvalues.csv")).unwrap();
    let mut lines = eig.lines();
    assert_eq!(lines.next(), Some("re (1/s),im (rad/s)"));
    assert_eq!(lines.count(), 10);
}

#[test]
fn region_output_is_byte_identical_across_reruns() {
    let args = |dir: &Path| {
        vec![
            "region".to_string(),
            "--preset".into(),
            "rx-ll1".into(),
            "--model".into(),
            "conv3".into(),
            "--kq-grid".into(),
            "1e-4:4e-4:2".into(),
            "--out".into(),
            dir.to_str().unwrap().to_string(),
        ]
    };
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let out_a = bin().args(args(dir_a.path())).output().unwrap();
    let out_b = bin().args(args(dir_b.path())).output().unwrap();
    assert_eq!(code(&out_a), 0, "stderr: {}", stderr(&out_a));
    assert_eq!(code(&out_b), 0);

    let bytes_a = fs::read(dir_a.path().join("region.csv")).unwrap();
    let bytes_b = fs::read(dir_b.path().join("region.csv")).unwrap();
    assert_eq!(bytes_a, bytes_b, "rerun changed the CSV bytes");

    let text = String::from_utf8(bytes_a).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("k_q (V/var),k_p_crit ((rad/s)/W),mechanism")
    );
    assert_eq!(lines.count(), 2);
}

#[test]
fn region_over_all_models_adds_the_model_column() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "region",
        "--preset",
        "rx-eq1",
        "--model",
        "all",
        "--kq-grid",
        "1.5e-4:3e-4:2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("region.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("model,k_q (V/var),k_p_crit ((rad/s)/W),mechanism")
    );
    // Four models, two grid rows each.
    assert_eq!(lines.clone().count(), 8);
    for kind in ["detailed", "em5", "conv3", "hf3"] {
        assert_eq!(
            lines.clone().filter(|l| l.starts_with(kind)).count(),
            2,
            "missing rows for {kind}"
        );
    }
}

#[test]
fn eigenloci_over_all_models_writes_one_file_each() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "eigenloci",
        "--preset",
        "rx-eq1",
        "--model",
        "all",
        "--kp-range",
        "1e-5:1e-4:2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    for kind in ["detailed", "em5", "conv3", "hf3"] {
        let path = dir.path().join(format!("eigenloci_{kind}.csv"));
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("k_p ((rad/s)/W),abscissa (1/s),re_1 (1/s),im_1 (rad/s),"));
        assert_eq!(text.lines().count(), 3, "{kind}: two sweep rows expected");
    }
}

#[test]
fn simulate_writes_the_sampled_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "simulate",
        "--preset",
        "rx-eq1",
        "--model",
        "em5",
        "--t-end",
        "0.05",
        "--rel-tol",
        "1e-7",
        "--abs-tol",
        "1e-7",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("completed:"));

    let text = fs::read_to_string(dir.path().join("simulate.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("t (s),f_i (Hz),f_k (Hz),V_i (V),V_k (V),P_i (W),P_k (W)")
    );
    let rows: Vec<&str> = lines.collect();
    // Millisecond grid limited by t_end/1000: 50 microseconds over 50 ms.
    assert!(rows.len() >= 1000, "only {} samples", rows.len());
    let last: Vec<f64> = rows
        .last()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert!((last[0] - 0.05).abs() < 1e-9);
    // Perturbed start relaxes back toward 49.9676 Hz.
    assert!((last[1] - 49.9676).abs() < 1e-2);
}
