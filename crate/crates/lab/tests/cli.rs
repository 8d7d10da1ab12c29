use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fnls-lab"))
        .args(args)
        .output()
        .expect("spawn fnls-lab")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn threshold_passes_with_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t");
    let o = lab(&["threshold", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS threshold [criterion 11] alpha0 is 1.124"));
    assert!(out.join("margin.csv").exists());
    assert_eq!(report(&out)["experiment"], "threshold");
}

#[test]
fn corrupted_hierarchy_fails_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "experiment = \"threshold\"\n[threshold]\ncorrupt_b1 = true\n").unwrap();
    let out = dir.path().join("bad");
    let o = lab(&[
        "threshold",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("FAIL threshold [criterion 11] hierarchy: b < b1"));
}

#[test]
fn all_on_an_empty_directory_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["all", "--config", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("no experiments to run"));
}

#[test]
fn all_runs_each_config_into_its_own_directory() {
    let dir = tempfile::tempdir().unwrap();
    let configs = dir.path().join("configs");
    fs::create_dir(&configs).unwrap();
    fs::write(configs.join("a.toml"), "experiment = \"threshold\"\n").unwrap();
    fs::write(
        configs.join("b.toml"),
        "experiment = \"threshold\"\n[threshold]\nhierarchy_alpha = \"5/4\"\n",
    )
    .unwrap();
    fs::write(configs.join("notes.txt"), "ignored").unwrap();
    let out = dir.path().join("out");
    let o = lab(&[
        "all",
        "--config",
        configs.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(report(&out.join("a"))["config"]["threshold"]["hierarchy_alpha"], "6/5");
    assert_eq!(report(&out.join("b"))["config"]["threshold"]["hierarchy_alpha"], "5/4");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let run = || {
        let o = lab(&[
            "conserve",
            "--n-max",
            "8",
            "--T",
            "0.1",
            "--seed",
            "11",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(
            o.status.code().is_some_and(|c| c <= 1),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
        let mut files: Vec<(String, String)> = fs::read_dir(&out)
            .unwrap()
            .map(|e| {
                let path = e.unwrap().path();
                let name = path.file_name().unwrap().to_string_lossy().into_owned();
                (name, fs::read_to_string(&path).unwrap())
            })
            .collect();
        files.sort();
        files
    };
    let first = run();
    assert_eq!(first.len(), 2);
    assert_eq!(first, run());
}

#[test]
fn overrides_are_recorded_in_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "alpha = 1.7\nseed = 3\nsamples = 50\n").unwrap();
    let out = dir.path().join("o");
    let o = lab(&[
        "picard",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "9",
        "--n-max",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        o.status.code().is_some_and(|c| c <= 1),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = report(&out);
    assert_eq!(r["master_seed"], 9);
    assert_eq!(r["config"]["alpha"], 1.7);
    assert_eq!(r["config"]["n"], 4);
    assert_eq!(r["config"]["samples"], 50);
}

#[test]
fn bad_input_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("typo.toml");
    fs::write(&cfg, "alpah = 1.5\n").unwrap();
    let o = lab(&["threshold", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpah"));

    assert_eq!(lab(&["nonsense"]).status.code(), Some(2));
    fs::write(&cfg, "experiment = \"counting\"\n").unwrap();
    assert_eq!(
        lab(&["threshold", "--config", cfg.to_str().unwrap()]).status.code(),
        Some(2)
    );
    assert_eq!(lab(&["picard", "--alpha", "0.5"]).status.code(), Some(2));
}
