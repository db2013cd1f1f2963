use std::path::Path;
use std::process::{Command, Output};

fn tmpinn(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tmpinn"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .env_remove("TMPINN_DATA_SEED")
        .env_remove("TMPINN_INIT_SEED")
        .env_remove("TMPINN_SHUFFLE_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

const SMALL_RUN: &str = r#"
system = "duffing"
method = "tm_pinn"
epochs = 3
batch_size = 16
n_ic = 8
n_t = 5
hidden = 8
"#;

#[test]
fn list_systems_names_every_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let o = tmpinn(&["list-systems"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 9);
    assert!(rows.contains(&"duffing,2,1"));
    assert!(rows.contains(&"lorenz,3,3"));
}

#[test]
fn derive_prints_first_order_field() {
    let dir = tempfile::tempdir().unwrap();
    let o = tmpinn(&["derive", "duffing", "--order", "1"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.lines().any(|l| l == "f1.x = y"));
    assert_eq!(text.lines().filter(|l| l.starts_with("f2.")).count(), 2);
    assert!(!text.contains("f3."));
}

#[test]
fn training_is_reproducible_and_evaluation_pipeline_runs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "small.toml", SMALL_RUN);
    for out in ["a", "b"] {
        let o = tmpinn(&["train", "small.toml", "--out", out], d);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let summary: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
        assert_eq!(summary["epochs"], 3);
    }
    for f in ["manifest.json", "model.json", "history.csv", "config.toml"] {
        let a = std::fs::read(d.join("a").join(f)).unwrap();
        let b = std::fs::read(d.join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
    assert!(d.join("a/timing.json").exists());

    let o = tmpinn(&["eval", "a", "--n-eval", "4", "--horizons", "1,2"], d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.join("a/metrics.csv").exists());
    assert!(d.join("a/eval_manifest.json").exists());

    let o = tmpinn(&["table", "a", "--out", "t"], d);
    assert!(o.status.success());
    let first = std::fs::read(d.join("t/table_mae.csv")).unwrap();
    let o = tmpinn(&["table", "a", "--out", "t"], d);
    assert!(o.status.success());
    assert_eq!(first, std::fs::read(d.join("t/table_mae.csv")).unwrap());
    assert!(String::from_utf8(first).unwrap().starts_with("system,horizon,tm_pinn"));

    let o = tmpinn(&["series", "a", "--n-eval", "3", "--horizon", "0.5"], d);
    assert!(o.status.success());
    let series = std::fs::read_to_string(d.join("a/series.csv")).unwrap();
    assert_eq!(series.lines().count(), 1 + 51);
}

#[test]
fn seed_override_changes_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "small.toml", SMALL_RUN);
    assert!(tmpinn(&["train", "small.toml", "--out", "a"], d).status.success());
    let o = Command::new(env!("CARGO_BIN_EXE_tmpinn"))
        .args(["train", "small.toml", "--out", "b"])
        .current_dir(d)
        .env("TMPINN_INIT_SEED", "99")
        .output()
        .unwrap();
    assert!(o.status.success());
    let a = std::fs::read(d.join("a/model.json")).unwrap();
    let b = std::fs::read(d.join("b/model.json")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn exit_codes_classify_failures() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "bad.toml", "system = \"duffing\"\nmethod = \"nonsense\"\n");
    assert_eq!(tmpinn(&["train", "bad.toml"], d).status.code(), Some(1));
    assert_eq!(tmpinn(&["train", "missing.toml"], d).status.code(), Some(3));
    assert_eq!(tmpinn(&["eval", "nowhere"], d).status.code(), Some(3));
    assert_eq!(tmpinn(&["bogus-command"], d).status.code(), Some(1));

    write(
        d,
        "blowup.toml",
        r#"
name = "blowup"
states = ["x"]
rhs = ["exp(x*x)"]
state_bounds = [[20.0, 30.0]]
horizon = 1.0
"#,
    );
    write(
        d,
        "diverge.toml",
        "system = \"blowup.toml\"\nmethod = \"pinn\"\nepochs = 2\nlearning_rate = 100.0\nn_ic = 4\nn_t = 3\nhidden = 4\n",
    );
    let o = tmpinn(&["train", "diverge.toml"], d);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}
