use std::path::Path;
use std::process::Command;

use pidectl_cli::{analyze, load_controller, simulate, synthesize, Scenario};

fn headline(out: &Path) -> Scenario {
    let doc = serde_json::json!({
        "spectrum": {"source": "values", "values": [1.0, 4.0, 9.0, 16.0, 25.0, 36.0, 49.0, 64.0]},
        "kernel": {"b": 1.0, "delta": 4.0},
        "gamma": 2.0,
        "t_max": 4.0,
        "out": out,
    });
    let s = Scenario::from_json(&doc.to_string()).unwrap();
    s.validate().unwrap();
    s
}

fn pidectl(config: &Path, args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_pidectl"))
        .arg("--config")
        .arg(config)
        .args(args)
        .output()
        .unwrap()
        .status
        .code()
        .unwrap()
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let s = headline(&out);
        synthesize(&s, &out).unwrap();
        let c = load_controller(&out.join("controller.json")).unwrap();
        simulate(&s, Some(&c), &out).unwrap();
        files.push(
            ["trajectory.csv", "null_control.csv", "controller.json"]
                .map(|f| std::fs::read(out.join(f)).unwrap()),
        );
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn saved_controller_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let s = headline(&out);
    synthesize(&s, &out).unwrap();
    let c = load_controller(&out.join("controller.json")).unwrap();
    let first = simulate(&s, Some(&c), &out).unwrap();
    let again = load_controller(&out.join("controller.json")).unwrap();
    assert_eq!(c.gain, again.gain);
    let second = simulate(&s, Some(&again), &out).unwrap();
    assert_eq!(first.final_norm, second.final_norm);
}

#[test]
fn analysis_reports_growth_bound() {
    let dir = tempfile::tempdir().unwrap();
    let r = analyze(&headline(dir.path()), dir.path()).unwrap();
    assert_eq!(r.omega0, 5.0);
    assert_eq!(r.partition.n_total, 1);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"gamma": 1.0, "kernel": {"b": 1, "delta": 1}, "spectrum": {"source": "values", "values": [1]}, "typo": 3}"#).unwrap();
    assert_eq!(pidectl(&bad, &["analyze"]), 2);

    let gamma_high = dir.path().join("g.json");
    std::fs::write(
        &gamma_high,
        serde_json::json!({
            "spectrum": {"source": "values", "values": [1.0]},
            "kernel": {"b": 1.0, "delta": 1.0},
            "gamma": 5.0,
            "out": dir.path().join("g"),
        })
        .to_string(),
    )
    .unwrap();
    assert_eq!(pidectl(&gamma_high, &["analyze"]), 2);

    let ok = dir.path().join("ok.json");
    std::fs::write(
        &ok,
        serde_json::json!({
            "spectrum": {"source": "values", "values": [1.0, 4.0, 9.0, 16.0]},
            "kernel": {"b": 1.0, "delta": 4.0},
            "gamma": 2.0,
            "t_max": 6.0,
            "out": dir.path().join("ok"),
        })
        .to_string(),
    )
    .unwrap();
    assert_eq!(pidectl(&ok, &["synthesize"]), 0);
    assert_eq!(pidectl(&ok, &["simulate", "--open-loop"]), 0);
    assert_eq!(pidectl(&ok, &["certify", "--open-loop"]), 5);
    assert_eq!(pidectl(&ok, &["simulate"]), 0);
    assert_eq!(pidectl(&ok, &["certify"]), 0);
}
