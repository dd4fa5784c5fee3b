use std::path::Path;
use std::process::{Command, Output};

use gsc_core::geometry::max_affinity;
use gsc_core::harness::{cluster_points, Algorithm, PipelineConfig};
use gsc_core::io;
use gsc_core::nsn::NsnParams;
use gsc_core::spectral::SpectralOptions;

fn gsc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gsc"))
        .args(args)
        .env_remove("GSC_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = gsc(args);
    assert!(
        out.status.success(),
        "gsc {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn generate(dir: &Path, extra: &[&str]) {
    let mut args = vec!["generate", "--out-dir", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    ok(&args);
}

const BENIGN: &[&str] = &[
    "--model", "fully-random", "--p", "20", "--d", "3", "--L", "5", "--n", "30", "--seed", "7",
];

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn generate_writes_expected_rows() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), BENIGN);
    assert_eq!(read(dir.path().join("points.csv")).lines().count(), 150);
    assert_eq!(read(dir.path().join("labels.csv")).lines().count(), 150);
    let bases = io::read_bases(dir.path().join("bases.json")).unwrap();
    assert_eq!(bases.len(), 5);
}

#[test]
fn generate_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    generate(a.path(), BENIGN);
    generate(b.path(), BENIGN);
    for f in ["points.csv", "labels.csv", "bases.json"] {
        assert_eq!(read(a.path().join(f)), read(b.path().join(f)), "{f} differs");
    }
}

#[test]
fn semi_random_bases_have_requested_affinity() {
    let dir = tempfile::tempdir().unwrap();
    generate(
        dir.path(),
        &["--model", "semi-random", "--maxaff", "0.5", "--p", "20", "--d", "3", "--L", "4", "--n", "10"],
    );
    let bases = io::read_bases(dir.path().join("bases.json")).unwrap();
    assert!((max_affinity(&bases).unwrap() - 0.5).abs() < 1e-10);
}

#[test]
fn semi_random_requires_maxaff() {
    let dir = tempfile::tempdir().unwrap();
    let out = gsc(&[
        "generate", "--model", "semi-random", "--p", "20", "--d", "3", "--L", "4", "--n", "10", "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--maxaff"));
}

#[test]
fn cluster_benign_instance_exactly() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), BENIGN);
    let d = dir.path();
    let out_dir = d.join("out");
    let stdout = ok(&[
        "cluster", "--points", d.join("points.csv").to_str().unwrap(), "--algo", "nsn-gsr", "--K", "3", "--kmax", "3",
        "--d", "3", "--L", "5", "--truth", d.join("labels.csv").to_str().unwrap(), "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    let report: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(report["ce"], 0.0);
    assert_eq!(report["nse"], 0.0);
    assert!(report.get("estimated_L").is_none());

    // the files agree bit for bit with an in-process run on the reloaded points
    let points = io::read_points(d.join("points.csv")).unwrap();
    let cfg = PipelineConfig {
        algorithm: Algorithm::NsnGsr,
        nsn: NsnParams::new(3, 3),
        d: 3,
        num_clusters: Some(5),
        eps: 1e-6,
        coverage: Default::default(),
        spectral: SpectralOptions::default(),
        seed: 0,
        timing: false,
    };
    let expected = cluster_points(&points, &cfg).unwrap();
    assert_eq!(read(out_dir.join("labels.csv")), io::format_labels(&expected.labels));
    assert_eq!(read(out_dir.join("neighbors.csv")), io::format_edges(&expected.neighborhoods));
}

#[test]
fn spectral_without_count_reports_estimate() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), BENIGN);
    let d = dir.path();
    let stdout = ok(&[
        "cluster", "--points", d.join("points.csv").to_str().unwrap(), "--algo", "nsn-spectral", "--K", "3",
        "--truth", d.join("labels.csv").to_str().unwrap(), "--out-dir", d.join("out").to_str().unwrap(),
    ]);
    let report: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(report["estimated_L"], 5);
    assert_eq!(report["ce"], 0.0);
}

#[test]
fn malformed_points_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "1,0,0\n0,1,0\n0,oops,1\n").unwrap();
    let out = gsc(&[
        "cluster", "--points", path.to_str().unwrap(), "--algo", "nsn-gsr", "--d", "1", "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 3"), "{stderr}");
    assert!(out.stdout.is_empty());
}

#[test]
fn algorithm_errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), BENIGN);
    let out = gsc(&[
        "cluster", "--points", dir.path().join("points.csv").to_str().unwrap(), "--algo", "nsn-gsr", "--K", "2",
        "--kmax", "3", "--d", "3", "--out-dir", dir.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("max_dim"));
}

fn experiment(dir: &Path, extra: &[&str]) -> (String, String) {
    let mut args = vec!["experiment", "--out-dir", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    ok(&args);
    (read(dir.join("results.csv")), read(dir.join("summary.json")))
}

const GRID: &[&str] = &[
    "--p", "20", "--d", "3", "--L", "3", "--n-over-d", "3,6", "--p-values", "15,20", "--trials", "4", "--seed", "11",
    "--no-timing",
];

#[test]
fn experiment_single_cell() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, _) = experiment(
        dir.path(),
        &["--p", "20", "--d", "3", "--L", "5", "--n", "12", "--trials", "3", "--no-timing"],
    );
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(
        lines[0],
        "model,algo,p,d,L,n,K,kmax,trials,mean_ce,mean_nse,exact_rate,mean_nsn_s,mean_cluster_s"
    );
    assert!(lines[1].starts_with("fully_random,nsn_gsr,20,3,5,12,3,3,3,"));
}

#[test]
fn experiment_is_deterministic_across_thread_counts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = experiment(a.path(), &[GRID, &["--threads", "1"]].concat());
    let second = experiment(b.path(), &[GRID, &["--threads", "3"]].concat());
    assert_eq!(first, second);
    assert_eq!(first.0.lines().count(), 5);
}

#[test]
fn experiment_budget_guardrail() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["experiment", "--out-dir", dir.path().to_str().unwrap(), "--budget", "1000"];
    args.extend_from_slice(GRID);
    let out = gsc(&args);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("budget"));
    args.push("--force");
    assert!(gsc(&args).status.success());
}

#[test]
fn config_file_supplies_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("grid.toml");
    std::fs::write(
        &cfg,
        "p = 20\nd = 3\nL = 3\nn-over-d = [3, 6]\np-values = [15, 20]\ntrials = 2\nseed = 5\nno-timing = true\n",
    )
    .unwrap();
    let (csv, _) = experiment(dir.path(), &["--config", cfg.to_str().unwrap(), "--trials", "4", "--seed", "11"]);
    let direct = tempfile::tempdir().unwrap();
    let (expected, _) = experiment(direct.path(), GRID);
    // the command line overrides trials and seed from the file
    assert_eq!(csv, expected);

    std::fs::write(&cfg, "bogus = 1\n").unwrap();
    let out = gsc(&["experiment", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
}
