use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fockfit::formats::{CountsFile, EstimateFile};
use fockfit_core::bootstrap::{parametric_bootstrap, percentile_indices, IntervalMethod, Parameter};
use fockfit_core::estimation::{fit, posterior_weights, Observations, PriorShape};
use fockfit_core::sampling::SeedSpec;

fn fockfit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fockfit"))
        .args(args)
        .env("FOCKFIT_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read<T: serde::de::DeserializeOwned>(path: &Path) -> T {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn probs_table(o: &Output) -> Vec<(String, f64)> {
    stdout(o)
        .lines()
        .skip(1)
        .map(|l| {
            let (n, v) = l.split_once(',').unwrap();
            (n.to_owned(), v.parse().unwrap())
        })
        .collect()
}

#[test]
fn probs_vacuum() {
    let o = fockfit(&["probs", "--r", "0", "--nbar", "0", "--nmax", "3"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "n,probability\n0,1\n1,0\n2,0\n3,0\noverflow,0\n");
}

#[test]
fn probs_thermal_is_geometric() {
    let o = fockfit(&["probs", "--r", "0", "--nbar", "1"]);
    assert!(o.status.success());
    let rows = probs_table(&o);
    assert_eq!(rows.len(), 22);
    for (n, (label, v)) in rows.iter().take(21).enumerate() {
        assert_eq!(label, &n.to_string());
        assert!((v - 0.5f64.powi(n as i32 + 1)).abs() < 1e-15);
    }
    assert!((rows[21].1 - 0.5f64.powi(21)).abs() < 1e-12);
}

#[test]
fn probs_variance_style_and_errors() {
    let by_state = probs_table(&fockfit(&["probs", "--r", "0.7", "--nbar", "0.2"]));
    let v = fockfit_core::model::SqueezedThermalState::new(0.7, 0.2).unwrap().variances();
    let (vq, vp) = (v.vq().to_string(), v.vp().to_string());
    let by_variance = probs_table(&fockfit(&["probs", "--vq", &vq, "--vp", &vp]));
    for (a, b) in by_state.iter().zip(&by_variance) {
        assert!((a.1 - b.1).abs() < 1e-14);
    }
    assert_eq!(fockfit(&["probs", "--vq", "0.2", "--vp", "0.2"]).status.code(), Some(1));
    assert_eq!(fockfit(&["probs", "--r", "1", "--vq", "0.2", "--vp", "2"]).status.code(), Some(1));
    assert_eq!(fockfit(&["probs", "--vq", "0.2"]).status.code(), Some(1));
    assert_eq!(fockfit(&["probs"]).status.code(), Some(1));
    assert_eq!(fockfit(&["probs", "--r", "-1"]).status.code(), Some(1));
    assert_eq!(fockfit(&["probs", "--r", "1", "--nmax", "65"]).status.code(), Some(1));
    assert_eq!(fockfit(&["probs", "--bogus"]).status.code(), Some(1));
    assert_eq!(fockfit(&["--help"]).status.code(), Some(0));
}

#[test]
fn simulate_vacuum_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let o = fockfit(&["simulate", "--r", "0", "--nbar", "0", "--shots", "100", "--out", p(&a)]);
    assert!(o.status.success());
    let c: CountsFile = read(&a);
    assert_eq!(c.format_version, 1);
    assert_eq!(c.n_max, 20);
    assert_eq!(c.counts[0], 100);
    assert!(c.counts[1..].iter().all(|&k| k == 0));
    assert_eq!((c.overflow, c.total), (0, 100));

    for out in [&a, &b] {
        let o = fockfit(&["simulate", "--r", "1.2", "--nbar", "0.3", "--shots", "5000", "--seed", "17", "--out", p(out)]);
        assert!(o.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let o = fockfit(&["simulate", "--r", "1.2", "--nbar", "0.3", "--shots", "5000", "--seed", "18"]);
    assert_ne!(o.stdout, std::fs::read(&a).unwrap());
}

#[test]
fn simulate_thermal_ground_state_count() {
    let o = fockfit(&["simulate", "--r", "0", "--nbar", "1", "--shots", "100000", "--seed", "5"]);
    assert!(o.status.success());
    let c: CountsFile = serde_json::from_slice(&o.stdout).unwrap();
    let k0 = c.counts[0] as f64;
    assert!((k0 - 50_000.0).abs() < 5.0 * 25_000f64.sqrt(), "k0 = {k0}");
    assert_eq!(c.counts.iter().sum::<u64>() + c.overflow, 100_000);
}

#[test]
fn estimate_round_trip_vacuum() {
    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("c.json");
    let est = dir.path().join("e.json");
    assert!(fockfit(&["simulate", "--r", "0", "--nbar", "0", "--shots", "100", "--out", p(&counts)]).status.success());
    for weights in ["posterior", "mle", "uniform"] {
        let o = fockfit(&["estimate", "--counts", p(&counts), "--weights", weights, "--out", p(&est)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let e: EstimateFile = read(&est);
        assert_eq!((e.r, e.nbar), (0.0, 0.0));
        assert!(e.converged);
        assert_eq!(e.weight_scheme, weights);
        assert_eq!(e.prior.is_some(), weights == "posterior");
    }
}

#[test]
fn estimate_recovers_exact_counts() {
    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("c.json");
    for (r, nbar) in [(1.0, 0.01), (2.5, 0.1), (0.0, 2.0)] {
        let (r_s, n_s) = (r.to_string(), nbar.to_string());
        let o = fockfit(&[
            "simulate", "--r", &r_s, "--nbar", &n_s, "--shots", "1000000000000", "--from-exact", "--out", p(&counts),
        ]);
        assert!(o.status.success());
        let o = fockfit(&["estimate", "--counts", p(&counts)]);
        assert!(o.status.success());
        let e: EstimateFile = serde_json::from_slice(&o.stdout).unwrap();
        let v = fockfit_core::model::SqueezedThermalState::new(r, nbar).unwrap().variances();
        assert!((e.vq - v.vq()).abs() <= 1e-6 * v.vq(), "vq {} vs {}", e.vq, v.vq());
        assert!((e.vp - v.vp()).abs() <= 1e-6 * v.vp(), "vp {} vs {}", e.vp, v.vp());
    }
}

#[test]
fn malformed_inputs_leave_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e.json");
    let cases = [
        ("broken.json", "{\"format_version\": 1, \"n_max\": 2,"),
        ("unknown.json", r#"{"format_version":1,"n_max":1,"counts":[1,2],"overflow":0,"total":3,"extra":1}"#),
        ("mismatch.json", r#"{"format_version":1,"n_max":1,"counts":[1,2],"overflow":0,"total":4}"#),
        ("version.json", r#"{"format_version":2,"n_max":1,"counts":[1,2],"overflow":0,"total":3}"#),
    ];
    for (name, text) in cases {
        let path = dir.path().join(name);
        std::fs::write(&path, text).unwrap();
        let o = fockfit(&["estimate", "--counts", p(&path), "--out", p(&out)]);
        assert_eq!(o.status.code(), Some(1), "{name}");
        assert!(!out.exists(), "{name}");
    }
    let o = fockfit(&["estimate", "--counts", p(&dir.path().join("missing.json"))]);
    assert_eq!(o.status.code(), Some(3));
    let o = fockfit(&["estimate", "--counts", p(&dir.path().join("unknown.json"))]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("extra"));
}

fn simulate(dir: &Path, r: &str, nbar: &str, seed: &str) -> PathBuf {
    let counts = dir.join(format!("c-{r}-{nbar}-{seed}.json"));
    let o = fockfit(&["simulate", "--r", r, "--nbar", nbar, "--shots", "10000", "--seed", seed, "--out", p(&counts)]);
    assert!(o.status.success());
    counts
}

#[test]
fn ci_matches_library_bootstrap() {
    let dir = tempfile::tempdir().unwrap();
    let counts = simulate(dir.path(), "1", "0.1", "3");
    let out = dir.path().join("ci.json");
    let o = fockfit(&[
        "ci", "--counts", p(&counts), "--replicates", "1000", "--alpha", "0.05", "--method", "percentile", "--seed", "9",
        "--out", p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let e: EstimateFile = read(&out);
    assert_eq!(e.intervals.len(), 4);

    let h = fockfit::formats::read_counts(&counts).unwrap();
    let obs = Observations::from(&h);
    let point = fit(&obs, &posterior_weights(&obs, &PriorShape::UNIFORM)).unwrap();
    let set = parametric_bootstrap(&point, 10_000, 1000, &PriorShape::UNIFORM, SeedSpec::new(9, 0)).unwrap();
    assert_eq!(percentile_indices(1000, 0.05), (50, 950));
    for param in Parameter::ALL {
        let sorted = set.sorted(param);
        let ci = e.interval(param, IntervalMethod::Percentile).unwrap();
        assert_eq!((ci.lower, ci.upper), (sorted[49], sorted[949]), "{param}");
        assert!((ci.level - 0.9).abs() < 1e-15);
    }
}

#[test]
fn ci_bias_correction_shifts_nbar_interval() {
    let dir = tempfile::tempdir().unwrap();
    let counts = simulate(dir.path(), "2.5", "0.01", "1");
    let run = |method: &str| {
        let o = fockfit(&["ci", "--counts", p(&counts), "--replicates", "400", "--method", method, "--seed", "2"]);
        assert!(o.status.success());
        let e: EstimateFile = serde_json::from_slice(&o.stdout).unwrap();
        let m = if method == "bc" { IntervalMethod::Bc } else { IntervalMethod::Percentile };
        e.interval(Parameter::Nbar, m).unwrap().clone()
    };
    let (pct, bc) = (run("percentile"), run("bc"));
    // nbar estimates are biased low here, so the corrected interval moves up
    assert!(bc.upper > pct.upper, "bc {bc:?} vs percentile {pct:?}");
    assert!(bc.lower >= pct.lower);
}

#[test]
fn ci_rejects_bad_arguments() {
    let dir = tempfile::tempdir().unwrap();
    let counts = simulate(dir.path(), "1", "0.1", "3");
    assert_eq!(fockfit(&["ci", "--counts", p(&counts), "--alpha", "0.5"]).status.code(), Some(1));
    assert_eq!(fockfit(&["ci", "--counts", p(&counts), "--replicates", "1"]).status.code(), Some(1));
    assert_eq!(fockfit(&["ci", "--counts", p(&counts), "--method", "bca"]).status.code(), Some(1));
}

#[test]
fn fidelity_values() {
    let f = |a: &str, b: &str| {
        let o = fockfit(&["fidelity", "--state1", a, "--state2", b]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        stdout(&o).trim().to_owned()
    };
    assert_eq!(f("r=1,nbar=0.01", "r=1,nbar=0.01"), "1.00000000000");
    assert_eq!(f("r=0,nbar=0", "r=0,nbar=1"), "0.500000000000");
    assert_eq!(f("vq=0.5,vp=0.5", "r=1"), "0.648054273664");
    assert_eq!(fockfit(&["fidelity", "--state1", "r=1,vq=0.2", "--state2", "r=0"]).status.code(), Some(1));
    assert_eq!(fockfit(&["fidelity", "--state1", "vq=0.2,vp=0.2", "--state2", "r=0"]).status.code(), Some(1));
    assert_eq!(fockfit(&["fidelity", "--state1", "x=1", "--state2", "r=0"]).status.code(), Some(1));
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("study.json");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn study_smoke_and_coverage_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"format_version":1,"kind":"fidelity","true_states":[{"r":1,"nbar":0.01}],"shot_counts":[1000],"n_experiments":1}"#,
    );
    let out = dir.path().join("report.csv");
    let o = fockfit(&["study", "--config", p(&cfg), "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("state_r,state_nbar,shots,scheme,nu,eta,n_experiments,n_failed,mean_fidelity"));
    assert!(header.ends_with("method,n_b"));
    assert_eq!(csv.lines().count(), 2);
    assert!(dir.path().join("report.json").exists());

    let cfg = write_config(
        dir.path(),
        r#"{"format_version":1,"kind":"coverage","true_states":[{"r":0,"nbar":0.01},{"r":1,"nbar":0.01},{"r":2.5,"nbar":0.01}],
            "shot_counts":[2000],"n_experiments":2,"n_b":[20],"alpha":0.05}"#,
    );
    let o = fockfit(&["study", "--config", p(&cfg), "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut reader = csv::Reader::from_path(&out).unwrap();
    let rows: Vec<fockfit::studies::StudyRow> = reader.deserialize().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 6);
    let methods: Vec<_> = rows.iter().map(|r| r.method.clone().unwrap()).collect();
    assert_eq!(methods, ["percentile", "bc", "percentile", "bc", "percentile", "bc"]);
    assert!(rows.iter().all(|r| r.n_b == Some(20) && r.coverage_nbar.is_some()));
}

#[test]
fn study_schema_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.csv");
    let cfg = write_config(
        dir.path(),
        r#"{"format_version":1,"kind":"fidelity","true_states":[{"r":1,"nbar":0.01,"temperature":3}]}"#,
    );
    let o = fockfit(&["study", "--config", p(&cfg), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("true_states[0]") && err.contains("temperature"), "{err}");

    let cfg = write_config(dir.path(), r#"{"format_version":1,"kind":"fidelity","true_states":[],"n_experimentz":3}"#);
    let o = fockfit(&["study", "--config", p(&cfg), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_experimentz"));

    let cfg = write_config(dir.path(), r#"{"format_version":1,"kind":"coverage","true_states":[{"r":1,"nbar":0}],"schemes":[{"scheme":"uniform"}]}"#);
    assert_eq!(fockfit(&["study", "--config", p(&cfg), "--out", p(&out)]).status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn invalid_thread_count_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let counts = simulate(dir.path(), "1", "0.1", "3");
    let o = Command::new(env!("CARGO_BIN_EXE_fockfit"))
        .args(["ci", "--counts", p(&counts), "--replicates", "10"])
        .env("FOCKFIT_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}
