use std::path::Path;
use std::process::{Command, Output};

use extremal_design::cli::RunConfig;
use extremal_design::io::read_json;

fn bin(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_extremal-design"))
        .env_remove("EXDESIGN_THREADS")
        .arg("--out-dir")
        .arg(out)
        .arg("--no-plots")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_writes_outputs_and_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.json");
    std::fs::write(
        &cfg_path,
        r#"{"seed": 3, "simulate": {"n": 150, "xi": 0.5}}"#,
    )
    .unwrap();
    let out = dir.path().join("sim");
    let o = bin(
        &out,
        &[
            "--config",
            cfg_path.to_str().unwrap(),
            "--seed",
            "8",
            "simulate",
            "--threshold",
            "-0.25",
            "--csv",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for f in [
        "config.json",
        "ensemble.bin",
        "ensemble.json",
        "samples.csv",
    ] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let echoed: RunConfig = read_json(&out.join("config.json")).unwrap();
    assert_eq!(echoed.seed, 8);
    assert_eq!(
        (
            echoed.simulate.n,
            echoed.simulate.xi,
            echoed.simulate.threshold
        ),
        (150, 0.5, -0.25)
    );
    let rows = std::fs::read_to_string(out.join("samples.csv"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(rows, 151);
}

#[test]
fn simulate_is_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("t{threads}"));
        let o = bin(
            &out,
            &[
                "--threads",
                threads,
                "--seed",
                "21",
                "simulate",
                "--n",
                "400",
            ],
        );
        assert!(o.status.success(), "{}", stderr(&o));
        bytes.push(std::fs::read(out.join("ensemble.bin")).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn unreachable_threshold_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    // ξ = -0.5 bounds the standardized values above by 2
    let o = bin(
        dir.path(),
        &["simulate", "--n", "10", "--xi", "-0.5", "--threshold", "5"],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("acceptance probability too low"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn invalid_inputs_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let bad_cfg = dir.path().join("bad.json");
    std::fs::write(&bad_cfg, r#"{"sede": 1}"#).unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["--config", bad_cfg.to_str().unwrap(), "simulate"],
        vec!["--config", "does-not-exist.json", "simulate"],
        vec!["fit", "--stations", "nope", "--radar", "nope.bin"],
        vec!["design", "--fit", "nope.json", "--l-samp", "0"],
        vec!["--threads", "0", "simulate"],
        vec!["simulate", "--process", "no-such-process"],
    ];
    for args in cases {
        let o = bin(&dir.path().join("out"), &args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
        assert!(
            stderr(&o).starts_with("error: "),
            "{args:?}: {}",
            stderr(&o)
        );
    }
    let o = Command::new(env!("CARGO_BIN_EXE_extremal-design"))
        .env("EXDESIGN_THREADS", "0")
        .arg("--out-dir")
        .arg(dir.path().join("env"))
        .args(["simulate", "--n", "5"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn iterative_experiment_writes_step_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("it");
    let o = bin(
        &out,
        &[
            "iterative-experiment",
            "--init",
            "boundary",
            "--n",
            "500",
            "--additions",
            "3",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let steps = std::fs::read_to_string(out.join("iterative_steps.csv")).unwrap();
    // header plus one row per candidate cell and step
    assert!(steps.lines().count() > 3);
    assert!(out.join("iterative.json").is_file());
}
