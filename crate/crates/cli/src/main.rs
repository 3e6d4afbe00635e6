//! `slatesim`: run, evaluate, replay and summarize experiments.
//!
//! Exit codes: 0 success, 1 invalid input (config, flags, logs, missing
//! baseline), 2 runtime failure.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use slatesim::config::{parse_json, validate_override, ExperimentConfig};
use slatesim::envs::EnvOverride;
use slatesim::replay::replay;
use slatesim::sim::{write_metrics_csv, MetricsRow, Simulation};
use slatesim::summary::{summarize, RunResult};
use walkdir::WalkDir;

const OUT_ENV: &str = "SLATESIM_OUT";
const DEFAULT_OUT: &str = "slatesim-out";

#[derive(Parser)]
#[command(name = "slatesim", version, about = "Slate recommendation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the configured agent, checkpoint it and evaluate it.
    Run(RunArgs),
    /// Evaluate the checkpoint in the output directory (or a fresh agent).
    Eval(RunArgs),
    /// Validate a JSONL episode log and recompute episode rewards.
    Replay {
        log: PathBuf,
        /// Config whose digests the log headers must carry.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Average CTR per strategy and environment over run directories.
    Summarize {
        /// Directories searched recursively for run results.
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Path of the CSV table; defaults to summary.csv in the first directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; falls back to $SLATESIM_OUT, then ./slatesim-out.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON environment override applied at evaluation time.
    #[arg(long = "eval-override")]
    eval_override: Option<PathBuf>,
    /// Evaluation worker threads.
    #[arg(long)]
    workers: Option<usize>,
}

enum Failure {
    Input(String),
    Runtime(String),
}

impl Failure {
    fn runtime(e: impl std::fmt::Display) -> Self {
        Failure::Runtime(e.to_string())
    }
}

struct Prepared {
    cfg: ExperimentConfig,
    extra: Option<EnvOverride>,
    out: PathBuf,
}

fn prepare(args: &RunArgs) -> Result<Prepared, Failure> {
    let mut cfg = ExperimentConfig::load(&args.config).map_err(|e| Failure::Input(e.to_string()))?;
    if let Some(seed) = args.seed {
        cfg.sim.seed = seed;
    }
    if let Some(w) = args.workers {
        cfg.sim.parallel_eval_workers = w;
    }
    cfg.validate().map_err(|e| Failure::Input(e.to_string()))?;
    let extra = match &args.eval_override {
        None => None,
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            let ov: EnvOverride = parse_json(&text)
                .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            validate_override(&ov, &cfg.env, "$")
                .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            Some(ov)
        }
    };
    let out = args
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    fs::create_dir_all(&out).map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
    Ok(Prepared { cfg, extra, out })
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn write_rows(path: &Path, rows: &[MetricsRow]) -> Result<(), Failure> {
    let mut w = create(path)?;
    write_metrics_csv(&mut w, rows).map_err(Failure::runtime)?;
    w.flush().map_err(Failure::runtime)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(Failure::runtime)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

/// Evaluates, then writes the eval log, eval metrics and the run result.
fn evaluate_into(sim: &Simulation, p: &Prepared) -> Result<MetricsRow, Failure> {
    let env = p.cfg.build_eval_env(p.extra.as_ref());
    let row = if p.cfg.sim.log_eval_episodes {
        let mut log = create(&p.out.join("eval.jsonl"))?;
        let row = sim.evaluate(&env, Some(&mut log)).map_err(Failure::runtime)?;
        log.flush().map_err(Failure::runtime)?;
        row
    } else {
        sim.evaluate(&env, None).map_err(Failure::runtime)?
    };
    write_rows(&p.out.join("eval_metrics.csv"), std::slice::from_ref(&row))?;
    write_json(
        &p.out.join("result.json"),
        &RunResult {
            strategy: p.cfg.strategy_label(),
            environment: p.cfg.environment_label(),
            ctr: row.ctr,
        },
    )?;
    Ok(row)
}

fn run(args: &RunArgs) -> Result<(), Failure> {
    let p = prepare(args)?;
    write_json(&p.out.join("config.json"), &p.cfg)?;
    let mut sim = p.cfg.simulation();
    let rows = if p.cfg.sim.log_train_episodes {
        let mut log = create(&p.out.join("train.jsonl"))?;
        let rows = sim.train(Some(&mut log)).map_err(Failure::runtime)?;
        log.flush().map_err(Failure::runtime)?;
        rows
    } else {
        sim.train(None).map_err(Failure::runtime)?
    };
    write_rows(&p.out.join("metrics.csv"), &rows)?;
    sim.save_checkpoint(&p.out.join("checkpoint.json"))
        .map_err(Failure::runtime)?;
    let row = evaluate_into(&sim, &p)?;
    println!(
        "{} on {}: {} training iterations, eval ctr {:.4} over {} episodes; outputs in {}",
        p.cfg.strategy_label(),
        p.cfg.environment_label(),
        rows.len(),
        row.ctr,
        row.episodes,
        p.out.display()
    );
    Ok(())
}

fn eval(args: &RunArgs) -> Result<(), Failure> {
    let p = prepare(args)?;
    let mut sim = p.cfg.simulation();
    let ckpt_path = p.out.join("checkpoint.json");
    let source = if ckpt_path.exists() {
        let ckpt = slatesim::sim::Checkpoint::load(&ckpt_path, &sim.agent().kind())
            .map_err(|e| Failure::Runtime(format!("{}: {e}", ckpt_path.display())))?;
        if ckpt.config_digest != sim.context().config_digest {
            eprintln!("warning: {} was written for a different config", ckpt_path.display());
        }
        sim.restore(&ckpt).map_err(Failure::runtime)?;
        format!("checkpoint {}", ckpt_path.display())
    } else {
        "an untrained agent".to_string()
    };
    let row = evaluate_into(&sim, &p)?;
    println!(
        "evaluated {source}: ctr {:.4} over {} episodes; outputs in {}",
        row.ctr,
        row.episodes,
        p.out.display()
    );
    Ok(())
}

fn replay_log(log: &Path, config: Option<&Path>) -> Result<(), Failure> {
    let expected = match config {
        None => None,
        Some(path) => Some(
            ExperimentConfig::load(path)
                .map_err(|e| Failure::Input(e.to_string()))?
                .log_context(),
        ),
    };
    let text =
        fs::read_to_string(log).map_err(|e| Failure::Input(format!("{}: {e}", log.display())))?;
    let report = replay(&text, expected.as_ref());
    for ep in &report.episodes {
        println!(
            "episode {} ({:?}, seed {}): {} turns, {} clicks, cumulative reward {}{}",
            ep.episode,
            ep.phase,
            ep.seed,
            ep.turns,
            ep.clicks,
            ep.cumulative_reward,
            if ep.complete { "" } else { ", incomplete" }
        );
    }
    for v in &report.violations {
        println!("line {}: {}", v.line, v.message);
    }
    for line in &report.digest_mismatches {
        println!("line {line}: header digests differ from the config");
    }
    if report.is_clean() {
        println!("{} episodes, no violations", report.episodes.len());
        Ok(())
    } else {
        Err(Failure::Input(format!(
            "{} schema violations, {} digest mismatches",
            report.violations.len(),
            report.digest_mismatches.len()
        )))
    }
}

fn summarize_runs(dirs: &[PathBuf], out: Option<&Path>) -> Result<(), Failure> {
    let mut files = Vec::new();
    for d in dirs {
        for entry in WalkDir::new(d).sort_by_file_name() {
            let entry = entry.map_err(|e| Failure::Input(format!("{}: {e}", d.display())))?;
            if entry.file_type().is_file() && entry.file_name() == "result.json" {
                files.push(entry.into_path());
            }
        }
    }
    let mut runs = Vec::new();
    for f in &files {
        let text = fs::read_to_string(f).map_err(|e| Failure::Input(format!("{}: {e}", f.display())))?;
        let run: RunResult =
            parse_json(&text).map_err(|e| Failure::Input(format!("{}: {e}", f.display())))?;
        runs.push(run);
    }
    let table = summarize(&runs).map_err(|e| Failure::Input(e.to_string()))?;
    print!("{}", table.render_text());
    let csv_path = out.map_or_else(|| dirs[0].join("summary.csv"), Path::to_path_buf);
    fs::write(&csv_path, table.render_csv())
        .map_err(|e| Failure::Runtime(format!("{}: {e}", csv_path.display())))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Eval(args) => eval(args),
        Command::Replay { log, config } => replay_log(log, config.as_deref()),
        Command::Summarize { dirs, out } => summarize_runs(dirs, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
