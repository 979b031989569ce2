use std::path::Path;
use std::process::{Command, Output};

fn zkss(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zkss"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn simulate(dir: &Path, extra: &[&str]) -> Output {
    let out_dir = dir.to_str().unwrap();
    let mut args = vec!["simulate", "--n", "4", "--seed", "21", "--out", out_dir];
    args.extend_from_slice(extra);
    zkss(&args)
}

#[test]
fn simulate_writes_the_four_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = simulate(tmp.path(), &["--no-envelopes"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    for name in ["state.json", "txlog.jsonl", "relay.jsonl", "report.json"] {
        assert!(tmp.path().join(name).is_file(), "{name} missing");
    }
    let text = stdout(&out);
    assert!(text.contains("check derangement      PASS"));
    assert!(text.contains("check envelopes        SKIP"));
}

#[test]
fn verify_accepts_untouched_and_rejects_tampered_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(simulate(tmp.path(), &["--no-envelopes"]).status.code(), Some(0));
    let report = tmp.path().join("report.json");
    let ok = zkss(&["verify", "--report", report.to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));

    // relabel one disclosure so a receiver shows up twice
    let state_path = tmp.path().join("state.json");
    let mut state: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&state_path).unwrap()).unwrap();
    let first = state["senders"][0]["assigned_receiver"].clone();
    state["senders"][1]["assigned_receiver"] = first;
    std::fs::write(&state_path, serde_json::to_string_pretty(&state).unwrap()).unwrap();
    let bad = zkss(&["verify", "--report", report.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("check bijective        FAIL"));
}

#[test]
fn simulate_is_byte_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    simulate(a.path(), &["--no-envelopes", "--attack", "frontrun"]);
    simulate(b.path(), &["--no-envelopes", "--attack", "frontrun"]);
    for name in ["report.json", "txlog.jsonl", "relay.jsonl", "state.json"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs");
    }
}

#[test]
fn undefended_malleable_attack_exits_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = simulate(
        tmp.path(),
        &["--no-envelopes", "--no-commit-step", "--attack", "malleable-sig"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("succeeded=true"));

    let defended = simulate(tmp.path(), &["--no-envelopes", "--attack", "malleable-sig"]);
    assert_eq!(defended.status.code(), Some(0));
}

#[test]
fn envelope_game_verifies_from_disk() {
    let tmp = tempfile::tempdir().unwrap();
    let out = zkss(&["simulate", "--n", "2", "--seed", "3", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("check envelopes        PASS"));
    let report = tmp.path().join("report.json");
    let verified = zkss(&["verify", "--report", report.to_str().unwrap()]);
    assert_eq!(verified.status.code(), Some(0));
    assert!(stdout(&verified).contains("check envelopes        PASS"));
}

#[test]
fn keys_gen_is_deterministic() {
    let a = zkss(&["keys", "gen", "--seed", "7"]);
    let b = zkss(&["keys", "gen", "--seed", "7"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let value: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(value["address"].as_str().unwrap().len(), 42);
    let c = zkss(&["keys", "gen", "--seed", "8"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn bad_arguments_fail() {
    assert_ne!(zkss(&["simulate", "--n", "4"]).status.code(), Some(0));
    assert_ne!(zkss(&["simulate", "--n", "4", "--seed", "1", "--attack", "bogus"]).status.code(), Some(0));
    let tmp = tempfile::tempdir().unwrap();
    let out = zkss(&["simulate", "--n", "1", "--seed", "1", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let missing = zkss(&["verify", "--report", tmp.path().join("nope.json").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));
}
