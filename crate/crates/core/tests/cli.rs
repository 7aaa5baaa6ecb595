use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hdbell::bellbasis::{bell_state_minus, BellIndex};
use hdbell::certify::fidelity;
use hdbell::cli::{CertifySummary, Manifest};
use hdbell::formats::{self, LabeledMatrix};
use hdbell::measurement::joint_settings;
use hdbell::tomography::forward_probabilities;
use hdbell::DensityMatrix;
use tempfile::TempDir;

fn hdbell(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdbell"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("HDBELL_OUT")
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> Output {
    let o = hdbell(out, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o
}

/// Relative path → file bytes for everything under `dir`.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn write_config(dir: &Path, json: &str) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, json).unwrap();
    p
}

#[test]
fn basis_writes_states_and_identity_gram() {
    let t = TempDir::new().unwrap();
    ok(t.path(), &["basis", "--d", "4"]);
    let files = snapshot(&t.path().join("basis"));
    assert_eq!(files.keys().filter(|p| p.extension().unwrap() == "json").count(), 16);
    let gram = formats::read_matrix(t.path().join("basis/gram.csv")).unwrap();
    for i in 0..16 {
        for j in 0..16 {
            let e = if i == j { 1.0 } else { 0.0 };
            assert!((gram.values[(i, j)] - e).abs() < 1e-12);
        }
    }

    let t2 = TempDir::new().unwrap();
    ok(t2.path(), &["basis", "--d", "4"]);
    assert_eq!(snapshot(&t2.path().join("basis")), files);

    let t3 = TempDir::new().unwrap();
    ok(t3.path(), &["basis", "--d", "2", "--convention", "plus"]);
    let n = snapshot(&t3.path().join("basis"))
        .keys()
        .filter(|p| p.extension().unwrap() == "json")
        .count();
    assert_eq!(n, 4);
}

#[test]
fn usage_and_data_errors_have_distinct_codes() {
    let t = TempDir::new().unwrap();
    let o = hdbell(t.path(), &["basis", "--d", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    assert_eq!(hdbell(t.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        hdbell(t.path(), &["generate", "--profile", "gaussian"]).status.code(),
        Some(2)
    );
    assert_eq!(
        hdbell(t.path(), &["simulate", "/nonexistent/psi_0_0.json"])
            .status
            .code(),
        Some(3)
    );
    let empty = TempDir::new().unwrap();
    assert_eq!(
        hdbell(t.path(), &["report", empty.path().to_str().unwrap()])
            .status
            .code(),
        Some(3)
    );
    let bad = write_config(t.path(), r#"{"d": 4, "noise": {"epsilon": 1.5}}"#);
    assert_eq!(
        hdbell(t.path(), &["run", "--config", bad.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn output_directory_from_environment() {
    let t = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_hdbell"))
        .args(["basis", "--d", "2"])
        .env("HDBELL_OUT", t.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(t.path().join("basis/psi_1_1.json").is_file());
}

#[test]
fn generate_default_and_variants() {
    let t = TempDir::new().unwrap();
    ok(t.path(), &["generate"]);
    let m: Manifest = formats::read_json(t.path().join("states/manifest.json"), "manifest").unwrap();
    assert_eq!(m.states.len(), 16);
    for e in &m.states {
        assert!(e.fidelity >= 1.0 - 1e-10, "{}: {}", e.state, e.fidelity);
        let (s, _) = formats::read_state(t.path().join(format!("states/{}.json", e.state))).unwrap();
        let f = fidelity(
            &DensityMatrix::from_pure(&s),
            &bell_state_minus(BellIndex::new(4, e.m, e.n).unwrap()),
        )
        .unwrap();
        assert!(f >= 1.0 - 1e-10);
    }

    let g = TempDir::new().unwrap();
    ok(g.path(), &["generate", "--profile", "gaussian", "--sigma", "2"]);
    let m: Manifest = formats::read_json(g.path().join("states/manifest.json"), "manifest").unwrap();
    assert!(m
        .states
        .iter()
        .all(|e| e.fidelity >= 1.0 - 1e-10 && e.filter_efficiency < 1.0));

    let groups = TempDir::new().unwrap();
    ok(groups.path(), &["generate", "--n", "0", "--party", "b"]);
    let m: Manifest = formats::read_json(groups.path().join("states/manifest.json"), "manifest").unwrap();
    assert_eq!(
        m.states.iter().map(|e| (e.m, e.n)).collect::<Vec<_>>(),
        vec![(0, 0), (1, 0), (2, 0), (3, 0)]
    );
}

#[test]
fn simulate_noiseless_matches_forward_model() {
    let t = TempDir::new().unwrap();
    ok(t.path(), &["basis", "--d", "4"]);
    let state = t.path().join("basis/psi_2_1.json");
    ok(
        t.path(),
        &[
            "simulate",
            state.to_str().unwrap(),
            "--noiseless",
            "--shots",
            "1000000000",
        ],
    );
    let counts = formats::read_counts(t.path().join("counts/psi_2_1.csv")).unwrap();
    let (s, _) = formats::read_state(&state).unwrap();
    let p = forward_probabilities(&DensityMatrix::from_pure(&s), &joint_settings(4).unwrap(), 4).unwrap();
    assert_eq!(counts.len(), 784);
    for (r, p) in counts.iter().zip(p) {
        assert!((r.frequency() - p).abs() <= 1e-9);
    }
}

#[test]
fn simulate_is_seed_deterministic() {
    let t = TempDir::new().unwrap();
    ok(t.path(), &["basis", "--d", "4"]);
    let state = t.path().join("basis/psi_0_0.json");
    let s = state.to_str().unwrap();
    ok(t.path(), &["simulate", s, "--seed", "9", "--epsilon", "0.1"]);
    let a = fs::read(t.path().join("counts/psi_0_0.csv")).unwrap();
    ok(t.path(), &["simulate", s, "--seed", "9", "--epsilon", "0.1"]);
    assert_eq!(fs::read(t.path().join("counts/psi_0_0.csv")).unwrap(), a);
    ok(t.path(), &["simulate", s, "--seed", "10", "--epsilon", "0.1"]);
    assert_ne!(fs::read(t.path().join("counts/psi_0_0.csv")).unwrap(), a);
}

#[test]
fn tomo_closed_loop_and_crosstalk() {
    let t = TempDir::new().unwrap();
    ok(t.path(), &["basis", "--d", "4"]);
    let state = t.path().join("basis/psi_1_3.json");
    let target = bell_state_minus(BellIndex::new(4, 1, 3).unwrap());
    let mut fids = Vec::new();
    for eps in ["0", "0.1"] {
        ok(
            t.path(),
            &[
                "simulate",
                state.to_str().unwrap(),
                "--shots",
                "10000",
                "--seed",
                "3",
                "--epsilon",
                eps,
            ],
        );
        ok(
            t.path(),
            &["tomo", t.path().join("counts/psi_1_3.csv").to_str().unwrap()],
        );
        let rho = formats::read_density(t.path().join("tomo/rho_1_3.json")).unwrap();
        fids.push(fidelity(&rho, &target).unwrap());
        let diag = formats::read_diagnostics(t.path().join("tomo/rho_1_3.diagnostics.json")).unwrap();
        assert!(diag.converged);
        assert_eq!(diag.settings, 784);
    }
    assert!(fids[0] >= 0.98, "{fids:?}");
    assert!(fids[1] < fids[0] && fids[1] < 1.0, "{fids:?}");
}

#[test]
fn tomo_rejects_incomplete_settings() {
    let t = TempDir::new().unwrap();
    ok(t.path(), &["basis", "--d", "4"]);
    ok(
        t.path(),
        &[
            "simulate",
            t.path().join("basis/psi_0_0.json").to_str().unwrap(),
            "--noiseless",
        ],
    );
    let text = fs::read_to_string(t.path().join("counts/psi_0_0.csv")).unwrap();
    let kept: Vec<&str> = text.lines().filter(|l| !l.contains("superposition")).collect();
    let subset = t.path().join("subset.csv");
    fs::write(&subset, kept.join("\n") + "\n").unwrap();
    let o = hdbell(t.path(), &["tomo", subset.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("informationally complete"));
}

#[test]
fn tomo_reports_non_convergence() {
    let t = TempDir::new().unwrap();
    ok(t.path(), &["basis", "--d", "4"]);
    ok(
        t.path(),
        &[
            "simulate",
            t.path().join("basis/psi_0_0.json").to_str().unwrap(),
            "--seed",
            "4",
        ],
    );
    let o = hdbell(
        t.path(),
        &["tomo", t.path().join("counts").to_str().unwrap(), "--max-iters", "3"],
    );
    assert_eq!(o.status.code(), Some(4));
    assert!(t.path().join("tomo/rho_0_0.json").is_file());
}

#[test]
fn certify_ideal_states_and_table() {
    let t = TempDir::new().unwrap();
    let tomo = t.path().join("ideal");
    for idx in BellIndex::all(4).unwrap() {
        let rho = DensityMatrix::from_pure(&bell_state_minus(idx));
        formats::write_density(tomo.join(format!("rho_{}_{}.json", idx.m, idx.n)), &rho).unwrap();
    }
    ok(t.path(), &["certify", tomo.to_str().unwrap()]);
    let overlaps: LabeledMatrix = formats::read_matrix(t.path().join("certify/overlaps.csv")).unwrap();
    assert_eq!(overlaps.row_labels, overlaps.col_labels);
    assert_eq!(overlaps.col_labels[1], "psi_1_0");
    for i in 0..16 {
        for j in 0..16 {
            let e = if i == j { 1.0 } else { 0.0 };
            assert!((overlaps.values[(i, j)] - e).abs() < 1e-12);
        }
    }
    let svg = fs::read_to_string(t.path().join("certify/overlaps.svg")).unwrap();
    assert_eq!(svg.matches("<rect").count(), 256);
    let report: CertifySummary = formats::read_json(t.path().join("certify/report.json"), "report").unwrap();
    assert!((report.mutual_information_bits - 4.0).abs() < 1e-9);

    let single = TempDir::new().unwrap();
    let one = tomo.join("rho_2_2.json");
    ok(single.path(), &["certify", one.to_str().unwrap()]);
    let report: CertifySummary = formats::read_json(single.path().join("certify/report.json"), "report").unwrap();
    assert_eq!(report.states.len(), 1);
    assert_eq!(report.states[0].d_ent, 4);

    let tab = TempDir::new().unwrap();
    ok(tab.path(), &["certify", "--table1"]);
    let report: CertifySummary = formats::read_json(tab.path().join("certify/report.json"), "report").unwrap();
    assert!((report.mean_fidelity - 0.821).abs() <= 1e-3);
    assert!(report.all_pass);

    let via_file = TempDir::new().unwrap();
    let csv = via_file.path().join("t.csv");
    fs::write(&csv, formats::TABLE1_CSV).unwrap();
    ok(via_file.path(), &["certify", "--overlaps", csv.to_str().unwrap()]);
    assert_eq!(
        fs::read(via_file.path().join("certify/report.json")).unwrap(),
        fs::read(tab.path().join("certify/report.json")).unwrap()
    );
}

#[test]
fn full_run_is_byte_identical_on_rerun() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let cfg = write_config(
        a.path(),
        r#"{"m": [0, 3], "n": [1, 2], "noise": {"epsilon": 0.05, "shots": 5000, "seed": 11}}"#,
    );
    ok(&a.path().join("run"), &["run", "--config", cfg.to_str().unwrap()]);
    ok(&b.path().join("run"), &["run", "--config", cfg.to_str().unwrap()]);
    let sa = snapshot(&a.path().join("run"));
    assert_eq!(sa, snapshot(&b.path().join("run")));
    assert_eq!(sa.keys().filter(|p| p.starts_with("tomo")).count(), 8);
    let summary = String::from_utf8(sa[Path::new("report/summary.txt")].clone()).unwrap();
    assert!(summary.contains("psi_3_2"));
    assert!(summary.contains("mutual information"));

    // report alone regenerates identical files
    ok(a.path(), &["report", a.path().join("run").to_str().unwrap()]);
    assert_eq!(snapshot(&a.path().join("run")), sa);
}

#[test]
fn written_files_round_trip_through_readers() {
    let t = TempDir::new().unwrap();
    let cfg = write_config(t.path(), r#"{"m": [1], "n": [0], "noise": {"shots": 2000, "seed": 5}}"#);
    ok(&t.path().join("run"), &["run", "--config", cfg.to_str().unwrap()]);
    let run = t.path().join("run");

    let p = run.join("states/psi_1_0.json");
    let (s, w) = formats::read_state(&p).unwrap();
    let again = t.path().join("again.json");
    formats::write_state(&again, &s, &w).unwrap();
    assert_eq!(fs::read(&again).unwrap(), fs::read(&p).unwrap());

    let p = run.join("counts/psi_1_0.csv");
    formats::write_counts(&again, &formats::read_counts(&p).unwrap()).unwrap();
    assert_eq!(fs::read(&again).unwrap(), fs::read(&p).unwrap());

    let p = run.join("tomo/rho_1_0.json");
    formats::write_density(&again, &formats::read_density(&p).unwrap()).unwrap();
    assert_eq!(fs::read(&again).unwrap(), fs::read(&p).unwrap());

    let p = run.join("tomo/rho_1_0.diagnostics.json");
    formats::write_diagnostics(&again, &formats::read_diagnostics(&p).unwrap()).unwrap();
    assert_eq!(fs::read(&again).unwrap(), fs::read(&p).unwrap());

    let p = run.join("certify/overlaps.csv");
    formats::write_matrix(&again, &formats::read_matrix(&p).unwrap()).unwrap();
    assert_eq!(fs::read(&again).unwrap(), fs::read(&p).unwrap());

    let p = run.join("states/manifest.json");
    let m: Manifest = formats::read_json(&p, "manifest").unwrap();
    formats::write_json(&again, &m).unwrap();
    assert_eq!(fs::read(&again).unwrap(), fs::read(&p).unwrap());

    let p = run.join("certify/report.json");
    let r: CertifySummary = formats::read_json(&p, "report").unwrap();
    formats::write_json(&again, &r).unwrap();
    assert_eq!(fs::read(&again).unwrap(), fs::read(&p).unwrap());
}
