use std::path::Path;
use std::process::{Command, Output};

fn mechcool(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mechcool"))
        .args(args)
        .env_remove("RUST_BACKTRACE")
        .output()
        .expect("spawn mechcool")
}

fn ok(args: &[&str]) -> String {
    let out = mechcool(args);
    assert!(
        out.status.success(),
        "mechcool {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn train_evaluate_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train");
    let eval = dir.path().join("eval");
    ok(&["train", "--epochs", "2", "--batch", "3", "--steps", "50", "--seed", "3", "--out", s(&train)]);
    let ck = train.join("checkpoint.bin");
    assert!(ck.exists());
    let curve = std::fs::read_to_string(train.join("learning_curve.csv")).unwrap();
    assert!(curve.starts_with("# preset=single_quadratic seed=3\nepoch,mean_total_reward,baseline\n"));

    let stdout = ok(&["evaluate", "--checkpoint", s(&ck), "--n-traj", "3", "--steps", "40", "--mode", "sample", "--out", s(&eval)]);
    assert!(stdout.contains("final mean energy"));
    assert!(eval.join("actions_traj1.csv").exists());

    let stdout = ok(&["inspect-checkpoint", s(&ck)]);
    assert!(stdout.contains("epochs done     2"));
    assert!(stdout.contains("master seed     3"));
}

#[test]
fn resume_continues_epoch_count() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["train", "--epochs", "1", "--batch", "2", "--steps", "30", "--out", s(&a)]);
    ok(&[
        "train", "--epochs", "3", "--batch", "2", "--steps", "30", "--out", s(&b), "--checkpoint",
        s(&a.join("checkpoint.bin")),
    ]);
    let stdout = ok(&["inspect-checkpoint", s(&b.join("checkpoint.bin"))]);
    assert!(stdout.contains("epochs done     3"), "{stdout}");
}

#[test]
fn config_file_and_flags_merge() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "preset = \"four_linear\"\nseed = 8\n[thermalize]\nn_traj = 3\nsteps = 100\nseries_stride = 50\n",
    )
    .unwrap();
    let out = dir.path().join("th");
    ok(&["thermalize", "--config", s(&cfg), "--seed", "9", "--out", s(&out)]);
    let series = std::fs::read_to_string(out.join("energy_vs_time.csv")).unwrap();
    let mut lines = series.lines();
    assert_eq!(lines.next(), Some("# preset=four_linear seed=9"));
    assert!(lines.next().unwrap().contains("mean_energy_mode3"));
    assert_eq!(lines.count(), 3);
}

#[test]
fn errors_are_reported() {
    let bad_preset = mechcool(&["thermalize", "--preset", "nope"]);
    assert!(!bad_preset.status.success());
    assert!(String::from_utf8_lossy(&bad_preset.stderr).contains("unknown preset"));

    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.bin");
    let out = mechcool(&["evaluate", "--checkpoint", s(&missing)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not exist"));

    let garbage = dir.path().join("garbage.bin");
    std::fs::write(&garbage, b"MCCK\x07\x00\x00\x00rest").unwrap();
    let out = mechcool(&["inspect-checkpoint", s(&garbage)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("version"));

    let dir2 = tempfile::tempdir().unwrap();
    let train = dir2.path().join("t");
    ok(&["train", "--preset", "four_linear", "--epochs", "1", "--batch", "1", "--steps", "5", "--out", s(&train)]);
    let ck = train.join("checkpoint.bin");
    let cfg = dir2.path().join("c.toml");
    std::fs::write(&cfg, "[physics]\nn_actions = 5\n").unwrap();
    let out = mechcool(&["evaluate", "--checkpoint", s(&ck), "--config", s(&cfg), "--out", s(&dir2.path().join("e"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("do not match"));
}
