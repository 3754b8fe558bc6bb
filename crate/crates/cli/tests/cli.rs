use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const SMOKE: &str = "[train]\nepisodes = 1\nsteps_per_episode = 1\nstl_steps = 4\neval_episodes = 1\n";

fn vidrate(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vidrate"))
        .args(args)
        .env("VIDRATE_OUT", out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn smoke_config(dir: &TempDir) -> String {
    let path = dir.path().join("smoke.toml");
    fs::write(&path, SMOKE).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn missing_config_names_path() {
    let dir = TempDir::new().unwrap();
    let o = vidrate(&["train", "--config", "/no/such/run.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/no/such/run.toml"), "{}", stderr(&o));
}

#[test]
fn smoke_train_writes_metrics_and_checkpoint() {
    let dir = TempDir::new().unwrap();
    let cfg = smoke_config(&dir);
    let out = dir.path().join("run");
    let o = vidrate(&["train", "--config", &cfg, "--out", out.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["metrics.csv", "metrics.jsonl", "agent.ckpt"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let csv = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(csv.lines().count() >= 3, "{csv}");

    // The checkpoint evaluates.
    let ckpt = out.join("agent.ckpt");
    let o = vidrate(
        &[
            "evaluate",
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--episodes",
            "1",
            "--out",
            out.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("mean_average"));
    assert!(out.join("eval.json").exists());
}

#[test]
fn repeated_seed_gives_identical_metrics() {
    let dir = TempDir::new().unwrap();
    let cfg = smoke_config(&dir);
    let mut files = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = vidrate(
            &[
                "--seed",
                "11",
                "train",
                "--config",
                &cfg,
                "--out",
                out.to_str().unwrap(),
            ],
            dir.path(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
        files.push((
            fs::read(out.join("metrics.csv")).unwrap(),
            fs::read(out.join("metrics.jsonl")).unwrap(),
        ));
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn out_defaults_to_env_var() {
    let dir = TempDir::new().unwrap();
    let o = vidrate(&["oracle", "bellman"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("oracle.json").exists());
}

#[test]
fn usage_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let o = vidrate(&["sweep", "--sweep-kind", "buffer", "--method", "ppo"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    for name in ["dstrl", "deep-naf", "naf-no-deep", "actor-critic", "random"] {
        assert!(err.contains(name), "{err}");
    }
    assert_eq!(vidrate(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(
        vidrate(&["sweep", "--sweep-kind", "volume"], dir.path()).status.code(),
        Some(1)
    );
    assert_eq!(
        vidrate(&["sweep", "--sweep-kind", "buffer", "--range", "9:1:1"], dir.path())
            .status
            .code(),
        Some(1)
    );
    assert_eq!(vidrate(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn single_point_sweep_has_one_row() {
    let dir = TempDir::new().unwrap();
    let cfg = smoke_config(&dir);
    let o = vidrate(
        &[
            "sweep",
            "--config",
            &cfg,
            "--sweep-kind",
            "buffer",
            "--range",
            "110",
            "--method",
            "random",
            "--seeds",
            "1",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2, "{csv}");
    assert_eq!(lines[0], "kind,point,method,seed,mean_reward,std_reward");
    assert!(lines[1].starts_with("buffer,110.0,random,0,"));
}

#[test]
fn sweep_rows_are_points_times_methods_times_seeds() {
    let dir = TempDir::new().unwrap();
    let cfg = smoke_config(&dir);
    let o = vidrate(
        &[
            "sweep",
            "--config",
            &cfg,
            "--sweep-kind",
            "capacity",
            "--range",
            "20:40:10",
            "--method",
            "random,naf-no-deep",
            "--seeds",
            "2",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 2 * 2);
}

#[test]
fn config_selects_baseline_by_name() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("ac.toml");
    fs::write(&path, format!("method = \"actor-critic\"\n{SMOKE}")).unwrap();
    let o = vidrate(&["train", "--config", path.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("actor-critic"));
    assert!(!dir.path().join("agent.ckpt").exists());

    fs::write(&path, "[train]\nepisods = 3\n").unwrap();
    let o = vidrate(&["train", "--config", path.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("episods"), "{}", stderr(&o));
}

#[test]
fn oracle_checks_report_numbers() {
    let dir = TempDir::new().unwrap();
    let o = vidrate(&["oracle", "bellman"], dir.path());
    assert!(o.status.success());
    assert!(
        stdout(&o).contains("PASS two-state chain gain: 0.500000"),
        "{}",
        stdout(&o)
    );

    let o = vidrate(
        &["oracle", "regret_bound", "--m", "3", "--samples", "200000"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("closed form 2.500000"));

    let o = vidrate(&["oracle", "regret_empirical", "--horizon", "2000"], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS optimal self regret: 0.000000"));
}
