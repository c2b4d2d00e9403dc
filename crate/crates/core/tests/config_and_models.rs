use bsr_core::config::{ModelConfig, RunConfig};
use bsr_core::defaults;
use bsr_core::model::{find_critical_points, Channel, TailParams};
use bsr_core::setup::MuRule;

#[test]
fn misspelled_section_is_named_in_the_error() {
    let err = RunConfig::from_json(r#"{"modle": {}}"#).unwrap_err().to_string();
    assert!(err.contains("modle"), "{err}");
}

#[test]
fn semiclassical_mu_at_h_001() {
    let mu = MuRule::Semiclassical.mu(0.01).unwrap();
    assert_eq!(mu.re, 0.0);
    assert!((mu.im - 0.0921034).abs() < 1e-7);
    let cfg = RunConfig::from_json(r#"{"distortion": {"mu": {"rule": "explicit", "re": 0.0, "im": 0.1}}}"#).unwrap();
    assert_eq!(cfg.distortion.mu.mu(0.3).unwrap().im, 0.1);
}

#[test]
fn tabulated_default_model_reproduces_the_certificate() {
    let analytic = defaults::default_model();
    let dir = std::env::temp_dir().join(format!("bsr-tab-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut csv = String::from("R,W1,W2\n");
    for k in 0..=1150 {
        let r = 0.5 + 0.01 * k as f64;
        let w1 = analytic.eval(Channel::One, r).unwrap();
        let w2 = analytic.eval(Channel::Two, r).unwrap();
        csv.push_str(&format!("{r},{w1:e},{w2:e}\n"));
    }
    std::fs::write(dir.join("w.csv"), csv).unwrap();
    let p = defaults::default_params();
    let tail = TailParams { e1_inf: p.e1_inf, delta: p.delta, d: defaults::FIELD_D, c4: p.c4 };
    let doc = serde_json::json!({ "model": { "kind": "tabulated", "path": "w.csv", "tail": tail } });
    std::fs::write(dir.join("run.json"), doc.to_string()).unwrap();

    let cfg = RunConfig::load(&dir.join("run.json")).unwrap();
    assert!(matches!(cfg.model, ModelConfig::Tabulated { .. }));
    let tab = cfg.potential_model().unwrap();
    let a = find_critical_points(&analytic, None).unwrap();
    let t = find_critical_points(&tab, None).unwrap();
    assert!(t.valid_hyp3);
    for (x, y) in [(a.m1, t.m1), (a.m2, t.m2), (a.big_m1, t.big_m1), (a.r1_max, t.r1_max)] {
        assert!((x - y).abs() < 1e-4, "{x} vs {y}");
    }
}
