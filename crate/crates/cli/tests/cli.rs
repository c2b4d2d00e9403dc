use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bsr(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bsr")).args(args).env("BSR_OUT", out).output().expect("bsr runs")
}

fn golden() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/golden.json").display().to_string()
}

fn run_dir(out: &Path) -> PathBuf {
    let mut dirs: Vec<_> = fs::read_dir(out).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs.pop().unwrap()
}

#[test]
fn potential_writes_a_monotone_table_and_a_certificate() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bsr(&["potential", "--config", &golden(), "--samples", "400"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = run_dir(tmp.path());
    let csv = fs::read_to_string(dir.join("potential.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# run_id "));
    assert_eq!(lines.next().unwrap(), "R,W1,W2,W1_filled,W2_filled");
    let r: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(r.len(), 400);
    assert!(r.windows(2).all(|w| w[1] > w[0]));
    let side: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("potential.json")).unwrap()).unwrap();
    assert_eq!(side["valid_hyp3"], true);
    assert_eq!(side["run_id"].as_str().unwrap(), dir.file_name().unwrap().to_str().unwrap());
}

#[test]
fn eigs_is_reproducible_and_cached() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["eigs", "--config", &golden(), "--h", "0.04,0.03"];
    let first = bsr(&args, tmp.path());
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let dir = run_dir(tmp.path());
    let files = ["spectra/psharp-dirichlet-h0.04.csv", "spectra/p1-dirichlet-h0.03.csv", "refinement/psharp-dirichlet-h0.03.csv"];
    let before: Vec<Vec<u8>> = files.iter().map(|f| fs::read(dir.join(f)).unwrap()).collect();

    let cached = bsr(&args, tmp.path());
    assert!(cached.status.success());
    assert!(String::from_utf8_lossy(&cached.stderr).contains("cached"));

    let mut forced = args.to_vec();
    forced.push("--force");
    let again = bsr(&forced, tmp.path());
    assert!(again.status.success());
    assert!(!String::from_utf8_lossy(&again.stderr).contains("cached"));
    for (f, b) in files.iter().zip(&before) {
        assert_eq!(&fs::read(dir.join(f)).unwrap(), b, "{f} changed between runs");
    }

    let refinement = String::from_utf8(before[2].clone()).unwrap();
    let header = refinement.lines().nth(1).unwrap();
    assert!(header.contains("re_4n") && header.contains("re_extrapolated") && header.contains("error_estimate"));
    let record: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("records/eigs.json")).unwrap()).unwrap();
    assert_eq!(record["status"], "done");
    assert_eq!(record["exit_code"], 0);
}

#[test]
fn bad_configuration_fails_with_the_key_named() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    fs::write(&cfg, r#"{"grid": {"kapa": 0.5}}"#).unwrap();
    let o = bsr(&["eigs", "--config", cfg.to_str().unwrap()], &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("kapa"));
}

#[test]
fn usage_errors_do_not_collide_with_verdict_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(bsr(&["frobnicate"], tmp.path()).status.code(), Some(64));
    assert_eq!(bsr(&["eigs"], tmp.path()).status.code(), Some(64));
    assert_eq!(bsr(&["--help"], tmp.path()).status.code(), Some(0));
}

#[test]
fn failed_commands_leave_a_marker() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bsr(&["eigs", "--config", &golden(), "--h", "0.9"], tmp.path());
    assert_eq!(o.status.code(), Some(3));
    let dir = run_dir(tmp.path());
    assert!(dir.join("eigs.failed").exists());
    let record: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("records/eigs.json")).unwrap()).unwrap();
    assert_eq!(record["status"], "failed");
}
