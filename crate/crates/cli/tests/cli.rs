//! CLI-level tests: config diagnostics, artifact emission, exit codes,
//! and criterion 12 (byte-identical outputs across same-seed runs,
//! manifests excluded for their timestamps).

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bosegas"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path
}

const BASE: &str = r#"
seed = 42

[potential]
shape = "square-barrier"
v0 = 50.0
r0 = 1.0

[scales]
rho = 1e-4
eta = 0.05

[doubling]
h = 2
"#;

#[test]
fn missing_key_is_named_with_config_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[potential]\nshape = \"square-barrier\"\nr0 = 1.0\n");
    let out = bin().args(["--config", cfg.to_str().unwrap(), "scattering"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("v0"), "stderr should name the missing key: {err}");
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{BASE}\nbogus_knob = 3\n"));
    let out = bin().args(["--config", cfg.to_str().unwrap(), "scattering"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bogus_knob"), "stderr should name the unknown key: {err}");
}

#[test]
fn missing_config_file_is_a_config_error() {
    let out = bin().args(["--config", "/nonexistent/nope.toml", "scattering"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scattering_emits_profile_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let out_dir = dir.path().join("out");
    let st = bin()
        .args(["--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "scattering"])
        .status()
        .unwrap();
    assert!(st.success());
    let profile = std::fs::read_to_string(out_dir.join("scattering_profile.csv")).unwrap();
    assert!(profile.starts_with("# kind=zero-energy"));
    assert!(profile.contains("r,u"));
    let manifest = std::fs::read_to_string(out_dir.join("manifest.txt")).unwrap();
    assert!(manifest.contains("a = 0.8000181591"), "manifest carries a: {manifest}");
    assert!(manifest.contains("config_hash = sha256:"));
    let json = std::fs::read_to_string(out_dir.join("scattering.json")).unwrap();
    assert!(json.contains("scattering_length"));
}

#[test]
fn doubling_verify_merge_sweep_is_clean_and_floor_violations_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let out_dir = dir.path().join("out");
    let st = bin()
        .args([
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "doubling-verify",
        ])
        .status()
        .unwrap();
    assert!(st.success());
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("doubling.json")).unwrap())
            .unwrap();
    for rep in json["merge"].as_array().unwrap() {
        assert_eq!(rep["violations"].as_array().unwrap().len(), 0);
    }
    // the floor inequality genuinely fails on a band at this density;
    // the counterexamples are data, not a crash
    let floor_viols: usize = json["floor"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["violations"].as_array().unwrap().len())
        .sum();
    assert!(floor_viols > 0);
    let csv = std::fs::read_to_string(out_dir.join("doubling_margins.csv")).unwrap();
    assert!(csv.starts_with("s,n,margin"));
}

#[test]
fn invalid_bc_is_config_error_and_bad_kappa_is_numerical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{BASE}\n[oracle]\nbc = \"open\"\n"));
    let out = bin().args(["--config", cfg.to_str().unwrap(), "oracle"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // kappa below 4 R0: the solver refuses, which is a numerical failure
    let cfg = write_config(dir.path(), &format!("{BASE}\n[neumann]\nkappa = 2.0\n"));
    let out = bin().args(["--config", cfg.to_str().unwrap(), "neumann"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != "manifest.txt")
        .map(|e| {
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

/// A configuration whose scale hierarchy is valid at desk size, so the
/// cell certificate actually runs (weak short-range coupling, adjusted
/// prefactors at rho = 1e-3).
const CERT: &str = r#"
seed = 42

[potential]
shape = "square-barrier"
v0 = 10.0
r0 = 0.05

[scales]
rho = 1e-3
eta = 0.05
r0 = 0.05

[scales.prefactors]
l_minus1 = 0.04
l0 = 0.55

[doubling]
h = 2

[certificate]
n_particles = 5
"#;

#[test]
fn fast_commands_are_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let base_cfg = write_config(dir.path(), BASE);
    let cert_cfg = dir.path().join("cert.toml");
    std::fs::write(&cert_cfg, CERT).unwrap();
    for cmd in ["scattering", "scales", "doubling-verify", "cell-certificate"] {
        let cfg = if cmd == "cell-certificate" { &cert_cfg } else { &base_cfg };
        let run = |out: &Path| {
            let st = bin()
                .args([
                    "--config",
                    cfg.to_str().unwrap(),
                    "--seed",
                    "7",
                    "--out",
                    out.to_str().unwrap(),
                    "--budget",
                    "20000",
                    cmd,
                ])
                .status()
                .unwrap();
            assert!(st.success(), "command {cmd} failed");
        };
        let out_a = dir.path().join(format!("{cmd}-a"));
        let out_b = dir.path().join(format!("{cmd}-b"));
        run(&out_a);
        run(&out_b);
        let (a, b) = (snapshot(&out_a), snapshot(&out_b));
        assert!(!a.is_empty());
        assert_eq!(a, b, "outputs of {cmd} differ between same-seed runs");
    }
}

#[test]
fn report_all_runs_suite_and_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let run = |out: &Path| {
        let o = bin()
            .args([
                "--config",
                cfg.to_str().unwrap(),
                "--seed",
                "20260810",
                "--out",
                out.to_str().unwrap(),
                "report-all",
            ])
            .output()
            .unwrap();
        // criterion 5 is a documented red: report-all signals it via
        // exit code 3 while still writing every artifact
        assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
        let stdout = String::from_utf8_lossy(&o.stdout).into_owned();
        assert!(stdout.contains("criterion 01"));
        assert!(stdout.contains("criterion 12"));
        stdout
    };
    let out_a = dir.path().join("ra-a");
    let out_b = dir.path().join("ra-b");
    let strip_timing = |s: &str| -> String {
        s.lines()
            .map(|l| match l.rfind(" [") {
                Some(i) if l.ends_with("s]") => &l[..i],
                _ => l,
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    let stdout_a = strip_timing(&run(&out_a));
    let stdout_b = strip_timing(&run(&out_b));
    assert_eq!(stdout_a, stdout_b, "report-all stdout differs between runs");
    assert_eq!(snapshot(&out_a), snapshot(&out_b), "report-all artifacts differ");
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_a.join("acceptance.json")).unwrap())
            .unwrap();
    assert_eq!(json.as_array().unwrap().len(), 12);
}
