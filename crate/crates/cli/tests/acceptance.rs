//! Runs the verification suite on the golden configuration in-process, then once
//! more through the `bsr` binary, and prints one line per numbered criterion.

use std::path::Path;
use std::process::Command;

use bsr_core::config::RunConfig;
use bsr_core::verify::run_verify;

#[test]
fn acceptance() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/golden.json");
    let cfg = RunConfig::load(&golden).expect("golden config loads");
    let report = run_verify(&cfg, &|m| eprintln!("[acceptance] {m}")).expect("verify runs");

    let mut lines: Vec<String> = report.criteria.iter().map(|c| c.summary_line()).collect();
    let mut all = report.criteria.iter().all(|c| c.passed);
    assert_eq!(report.criteria.len(), 9);

    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_bsr"))
        .args(["verify", "--config", golden.to_str().unwrap(), "--force"])
        .env("BSR_OUT", tmp.path())
        .output()
        .expect("bsr runs");
    let written = std::fs::read_to_string(tmp.path().join(&report.run_id).join("verify-report.json")).unwrap_or_default();
    let identical = written == report.to_json();
    let code = out.status.code();
    let ten = identical && code == Some(0);
    all &= ten;
    lines.push(format!(
        "criterion 10 {} reproducibility [reports bitwise identical: {identical}; exit code {}]",
        if ten { "PASS" } else { "FAIL" },
        code.map_or("none".into(), |c| c.to_string())
    ));

    println!("acceptance summary");
    for l in &lines {
        println!("{l}");
    }
    assert!(all, "acceptance criteria failed:\n{}", lines.join("\n"));
}
