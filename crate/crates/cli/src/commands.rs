use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use vidrate_core::baselines::{Policy, RandomPolicy};
use vidrate_core::oracle::{
    bellman_residual, empirical_regret, regret_bound_mc, two_state_chain, value_iteration, OracleEnv, TablePolicy,
    DEFAULT_TOLERANCE,
};
use vidrate_core::trainer::{
    evaluate, parse_range, run_sweep, train_method, train_with_callback, write_metrics_csv, write_metrics_jsonl,
    EvalReport, Method, MetricRecord, Phase, TrainConfig, TrainedPolicy,
};
use vidrate_core::{Env, NafAgent};

use crate::run_config::RunConfig;
use crate::{Cli, CliError, Command, EvaluateArgs, OracleArgs, OracleCheck, SweepArgs, TrainArgs};

pub fn run(cli: &Cli) -> Result<(), CliError> {
    fs::create_dir_all(&cli.out).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", cli.out.display())))?;
    match &cli.command {
        Command::Train(args) => train_cmd(cli, args),
        Command::Evaluate(args) => evaluate_cmd(cli, args),
        Command::Sweep(args) => sweep_cmd(cli, args),
        Command::Oracle(args) => oracle_cmd(cli, args),
    }
}

fn train_config(run: &RunConfig, cli: &Cli, episodes: Option<usize>) -> Result<TrainConfig, CliError> {
    let cfg = TrainConfig {
        seed: cli.seed,
        episodes: episodes.unwrap_or(run.train.episodes),
        ..run.train.clone()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Runtime(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn eval_record(report: &EvalReport, episode: usize, step: usize) -> MetricRecord {
    let mut rec = MetricRecord::new(Phase::Eval, episode, step);
    rec.episode_reward = Some(report.mean_return);
    rec.discounted_reward = Some(report.mean_discounted);
    rec.average_reward = Some(report.mean_average);
    rec
}

fn train_cmd(cli: &Cli, args: &TrainArgs) -> Result<(), CliError> {
    let run = RunConfig::load(args.config.as_deref())?;
    let method = run.method(args.method)?;
    let cfg = train_config(&run, cli, args.episodes)?;
    let env = Env::new(run.env.clone())?;
    let eval_seed = cfg.seed.wrapping_add(1_000_003);

    let (mut metrics, policy) = match method {
        Method::Dstrl | Method::DeepNaf => {
            let on = method == Method::Dstrl;
            let naf_cfg = TrainConfig {
                use_stl: on,
                use_isl: on,
                ..cfg.clone()
            };
            let outcome = train_with_callback(&run.env, &naf_cfg, |_| {})?;
            let ckpt = cli.out.join("agent.ckpt");
            outcome.agent.save(&ckpt)?;
            (outcome.metrics, TrainedPolicy::Naf(Box::new(outcome.agent)))
        }
        _ => (Vec::new(), train_method(method, &run.env, &cfg)?),
    };
    let report = evaluate(&policy, &env, cfg.eval_episodes, cfg.steps_per_episode, eval_seed)?;
    metrics.push(eval_record(&report, cfg.episodes, cfg.episodes * cfg.steps_per_episode));

    write_metrics_csv(&cli.out.join("metrics.csv"), &metrics)?;
    write_metrics_jsonl(&cli.out.join("metrics.jsonl"), &metrics)?;
    println!(
        "{method}: {} episodes, final average reward {:.4} (std {:.4}) over {} evaluation episodes",
        cfg.episodes, report.mean_average, report.std_average, report.episodes
    );
    println!("wrote {}", cli.out.display());
    Ok(())
}

fn evaluate_cmd(cli: &Cli, args: &EvaluateArgs) -> Result<(), CliError> {
    let run = RunConfig::load(args.config.as_deref())?;
    let cfg = train_config(&run, cli, None)?;
    let env = Env::new(run.env.clone())?;
    let policy = match &args.checkpoint {
        Some(path) => {
            if args.method.is_some() {
                return Err(CliError::Usage("pass either --checkpoint or --method, not both".into()));
            }
            let agent = NafAgent::load(path, Some(env.observation_dim()))
                .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
            TrainedPolicy::Naf(Box::new(agent))
        }
        None => train_method(run.method(args.method)?, &run.env, &cfg)?,
    };
    let episodes = args.episodes.unwrap_or(cfg.eval_episodes);
    if episodes == 0 {
        return Err(CliError::Usage("--episodes must be at least 1".into()));
    }
    let report = evaluate(&policy, &env, episodes, cfg.steps_per_episode, cli.seed)?;
    write_json(&cli.out.join("eval.json"), &report)?;
    println!(
        "{}",
        serde_json::to_string(&report).map_err(|e| CliError::Runtime(e.to_string()))?
    );
    Ok(())
}

fn sweep_cmd(cli: &Cli, args: &SweepArgs) -> Result<(), CliError> {
    let run = RunConfig::load(args.config.as_deref())?;
    let cfg = train_config(&run, cli, args.episodes)?;
    let points = match &args.range {
        Some(text) => parse_range(text).map_err(|e| CliError::Usage(e.to_string()))?,
        None => args.sweep_kind.default_points(),
    };
    let methods = if args.method.is_empty() {
        Method::ALL.to_vec()
    } else {
        args.method.clone()
    };
    if args.seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    let seeds: Vec<u64> = (0..args.seeds).map(|i| cli.seed.wrapping_add(i)).collect();
    let rows = run_sweep(args.sweep_kind, &points, &methods, &seeds, &run.env, &cfg)?;

    let path = cli.out.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    for row in &rows {
        w.serialize(row).map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    w.flush()?;

    for method in &methods {
        let line: Vec<String> = points
            .iter()
            .map(|&p| {
                let vals: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.point == p && r.method == method.name())
                    .map(|r| r.mean_reward)
                    .collect();
                format!("{p}:{:.3}", vals.iter().sum::<f64>() / vals.len() as f64)
            })
            .collect();
        println!("{method:<13} {}", line.join(" "));
    }
    println!("wrote {} rows to {}", rows.len(), path.display());
    Ok(())
}

#[derive(Serialize)]
struct CheckLine {
    check: String,
    value: f64,
    expected: Option<f64>,
    tolerance: Option<f64>,
    pass: bool,
}

impl CheckLine {
    fn new(check: &str, value: f64, expected: f64, tolerance: f64) -> Self {
        Self {
            check: check.to_string(),
            value,
            expected: Some(expected),
            tolerance: Some(tolerance),
            pass: (value - expected).abs() <= tolerance,
        }
    }

    fn holds(check: &str, value: f64, pass: bool) -> Self {
        Self {
            check: check.to_string(),
            value,
            expected: None,
            tolerance: None,
            pass,
        }
    }
}

fn oracle_cmd(cli: &Cli, args: &OracleArgs) -> Result<(), CliError> {
    let mut lines = Vec::new();
    match args.check {
        OracleCheck::Bellman => {
            let chain = two_state_chain();
            let sol = value_iteration(&chain, DEFAULT_TOLERANCE)?;
            lines.push(CheckLine::new("two-state chain gain", sol.gain, 0.5, 1e-9));
            lines.push(CheckLine::new(
                "two-state chain residual",
                bellman_residual(&chain, sol.gain, &sol.values),
                0.0,
                DEFAULT_TOLERANCE,
            ));
            let oracle = OracleEnv::new()?;
            let sol = value_iteration(oracle.mdp(), DEFAULT_TOLERANCE)?;
            lines.push(CheckLine::new(
                "small world residual",
                bellman_residual(oracle.mdp(), sol.gain, &sol.values),
                0.0,
                DEFAULT_TOLERANCE,
            ));
            println!(
                "small world: {} states, optimal gain {:.6}",
                oracle.mdp().num_states(),
                sol.gain
            );
        }
        OracleCheck::RegretBound => {
            if args.m == 0 || args.samples == 0 {
                return Err(CliError::Usage("--m and --samples must be at least 1".into()));
            }
            let (emp, closed) = regret_bound_mc(args.m, args.samples, cli.seed)?;
            println!("m = {}: closed form {closed:.6}, Monte Carlo {emp:.6}", args.m);
            lines.push(CheckLine::new("regret bound", emp, closed, 0.01));
            lines.push(CheckLine::holds("bound below 3", closed, closed < 3.0));
        }
        OracleCheck::RegretEmpirical => {
            if args.horizon == 0 {
                return Err(CliError::Usage("--horizon must be at least 1".into()));
            }
            let oracle = OracleEnv::new()?;
            let sol = value_iteration(oracle.mdp(), DEFAULT_TOLERANCE)?;
            let best = TablePolicy::new(&oracle, sol.policy.clone())?;
            let seeds: Vec<u64> = (0..5).map(|i| cli.seed.wrapping_add(i)).collect();
            let gamma = oracle.env().config().discount;
            let own = empirical_regret(&oracle, &best, &best, args.horizon, &seeds, gamma)?;
            let random: &dyn Policy = &RandomPolicy;
            let rand = empirical_regret(&oracle, random, &best, args.horizon, &seeds, gamma)?;
            println!(
                "optimal vs itself: gap {:.6}; random vs optimal: gap {:.4} (stderr {:.4}), value gap {:.4}",
                own.average_gap, rand.average_gap, rand.average_gap_stderr, rand.value_gap
            );
            lines.push(CheckLine::new("optimal self regret", own.average_gap, 0.0, 1e-12));
            lines.push(CheckLine::holds(
                "random regret positive",
                rand.average_gap,
                rand.average_gap > 0.0,
            ));
        }
    }
    for l in &lines {
        let verdict = if l.pass { "PASS" } else { "FAIL" };
        match (l.expected, l.tolerance) {
            (Some(e), Some(t)) => println!(
                "{verdict} {}: {:.6} (expected {e:.6}, tolerance {t:e})",
                l.check, l.value
            ),
            _ => println!("{verdict} {}: {:.6}", l.check, l.value),
        }
    }
    write_json(&cli.out.join("oracle.json"), &lines)?;
    if lines.iter().all(|l| l.pass) {
        Ok(())
    } else {
        Err(CliError::Runtime("oracle check failed".into()))
    }
}
