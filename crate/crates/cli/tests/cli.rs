//! Drives the `ffward` binary through a small end-to-end session.

use std::path::Path;
use std::process::{Command, Output};

fn ffward(args: &[&str], cwd: &Path) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_ffward"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(out.status.success(), "ffward {args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn generate_train_run_report() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ffward(&["generate", "--out", "scene.ffwd", "--seed", "3", "--length", "1200", "--dim", "8", "--events", "6"], d);
    ffward(&["train", "--strategy", "all", "--data", "scene.ffwd", "--out", "pol", "--episodes", "3"], d);
    assert!(d.join("pol").is_dir());

    let dmvf = ffward(
        &["run-dmvf", "--data", "scene.ffwd", "--policies", "pol", "--graph", "path", "--out", "dmvf.report"],
        d,
    );
    assert!(stdout(&dmvf).starts_with("dmvf: 12 periods"));
    let mff = ffward(
        &["run-mffnet", "--data", "scene.ffwd", "--policies", "pol", "--loss", "0.1", "--out", "mff.report"],
        d,
    );
    assert!(stdout(&mff).starts_with("mffnet: 12 periods"));
    let text = std::fs::read_to_string(d.join("mff.report")).unwrap();
    assert!(ffward_core::run::RunReport::from_text(&text).is_ok());

    ffward(&["train-controller", "--data", "scene.ffwd", "--policies", "pol", "--out", "ctl", "--episodes", "2"], d);
    ffward(
        &[
            "run-mffnet", "--data", "scene.ffwd", "--policies", "pol", "--controller", "dqn",
            "--controller-ckpt", "ctl", "--out", "dqn.report",
        ],
        d,
    );
}

#[test]
fn bench_then_report() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(
        d.join("bench.toml"),
        r#"
seeds = [1]
methods = ["uniform", "ffnet", "dmvf", "mffnet"]
loss = [0.0, 0.2]

[data.synthetic]
num_views = 3
length = 1000
dim = 8
num_events = 6
event_len_min = 20
event_len_max = 40
overlap = 0.7
noise_std = 0.3

[policies.training]
episodes = 3
max_steps = 20
"#,
    )
    .unwrap();
    let bench = stdout(&ffward(&["bench", "--config", "bench.toml", "--out", "out"], d));
    assert!(bench.contains("6 cells"), "{bench}");
    assert!(d.join("out/summary.csv").is_file());
    let table = stdout(&ffward(&["report", "out"], d));
    for m in ["uniform", "ffnet", "dmvf", "mffnet"] {
        assert!(table.contains(m), "{table}");
    }
}

#[test]
fn bad_input_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ffward"))
        .args(["run-dmvf", "--data", "missing.ffwd", "--policies", "nope", "--out", "x"])
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.ffwd"));
    let out = Command::new(env!("CARGO_BIN_EXE_ffward"))
        .args(["run-mffnet", "--data", "a", "--policies", "b", "--controller", "dqn", "--out", "c"])
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
}
