use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use etrl::atppo::{evaluate, EvalReport, Trainer};
use etrl::baseline::png_baseline;
use etrl::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use etrl::config::{load_config, RunConfig};
use etrl::envs::EnvKind;
use etrl::report::{comparison_rows, write_comparison_csv, write_eval_report, write_training_csv};
use etrl::{Error, Result};

#[derive(Parser)]
#[command(name = "etrl", version, about = "Train and evaluate event-triggered PPO controllers")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; defaults to $ETRL_OUT or ./runs.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra `key=value` settings applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a policy and write a checkpoint plus the training curve.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a checkpoint deterministically.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Fly the proportional-navigation baseline on the pursuit task.
    BaselinePng {
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate two checkpoints on the same episodes and tabulate the result.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
}

fn overrides(set: &[String]) -> Result<Vec<(String, String)>> {
    set.iter()
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{kv}'")))
        })
        .collect()
}

fn load(common: &Common, extra: &[(String, String)]) -> Result<RunConfig> {
    let mut ov = overrides(&common.set)?;
    ov.extend_from_slice(extra);
    let mut cfg = load_config(common.config.as_deref(), &ov)?;
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn seed_override(seed: Option<u64>) -> Vec<(String, String)> {
    seed.map(|s| vec![("seed".to_string(), s.to_string())]).unwrap_or_default()
}

fn print_report(r: &EvalReport) {
    println!(
        "{:<6} episodes={} mean_return={:.4} comm_fraction={:.4} min_inter_event={:.4}{}",
        r.label,
        r.episodes.len(),
        r.mean_return(),
        r.comm_fraction(),
        r.min_inter_event(),
        match r.env {
            EnvKind::Pursuit => format!(" capture_rate={:.3}", r.capture_rate()),
            EnvKind::Integrator => String::new(),
        }
    );
}

fn train(common: &Common, seed: Option<u64>) -> Result<()> {
    let cfg = load(common, &seed_override(seed))?;
    let out = cfg.out_dir.clone();
    std::fs::create_dir_all(&out)?;
    let mut trainer = Trainer::new(cfg)?;
    while !trainer.finished() {
        match trainer.run_cycle() {
            Ok(row) => println!(
                "step {:>8}  return {:>10.3}  comm {:.3}  policy_loss {:.4}  value_loss {:.4}",
                row.step, row.mean_raw_return, row.comm_fraction, row.policy_loss, row.value_loss
            ),
            Err(e) => {
                if matches!(e, Error::Numeric(_)) {
                    let path = out.join("checkpoint_abort.etrl");
                    save_checkpoint(&trainer.checkpoint(), &path)?;
                    write_training_csv(trainer.log(), &out.join("train.csv"))?;
                    eprintln!("diagnostic checkpoint written to {}", path.display());
                }
                return Err(e);
            }
        }
    }
    let ckpt = trainer.selected_checkpoint();
    if let Some(score) = trainer.best_score() {
        println!("kept parameters from step {} (validation score {score:.3})", ckpt.total_steps);
    }
    save_checkpoint(&ckpt, &out.join("checkpoint.etrl"))?;
    write_training_csv(trainer.log(), &out.join("train.csv"))?;
    println!("wrote {}", out.join("checkpoint.etrl").display());
    Ok(())
}

fn eval_one(cfg: &RunConfig, ckpt: &Checkpoint, episodes: usize, seed: u64) -> Result<EvalReport> {
    evaluate(ckpt, cfg.build_env_for(ckpt.env)?, episodes, seed, cfg.window)
}

fn eval(common: &Common, path: &Path, episodes: Option<usize>, seed: Option<u64>) -> Result<()> {
    let cfg = load(common, &[])?;
    let ckpt = load_checkpoint(path)?;
    let report = eval_one(&cfg, &ckpt, episodes.unwrap_or(cfg.eval_episodes), seed.unwrap_or(cfg.eval_seed))?;
    write_eval_report(&report, &cfg.out_dir.join("eval"))?;
    print_report(&report);
    Ok(())
}

fn baseline(common: &Common, episodes: Option<usize>, seed: Option<u64>) -> Result<()> {
    let cfg = load(common, &[])?;
    let report = png_baseline(
        &cfg.pursuit,
        cfg.hyper.accrual_scale,
        episodes.unwrap_or(cfg.eval_episodes),
        seed.unwrap_or(cfg.eval_seed),
        cfg.window,
    )?;
    write_eval_report(&report, &cfg.out_dir.join("png"))?;
    print_report(&report);
    Ok(())
}

fn compare(common: &Common, a: &Path, b: &Path, episodes: Option<usize>, seed: Option<u64>) -> Result<()> {
    let cfg = load(common, &[])?;
    let (ca, cb) = (load_checkpoint(a)?, load_checkpoint(b)?);
    if ca.env != cb.env {
        return Err(Error::Dimension(format!(
            "checkpoints target different environments ({} vs {})",
            ca.env, cb.env
        )));
    }
    let n = episodes.unwrap_or(cfg.eval_episodes);
    let seed = seed.unwrap_or(cfg.eval_seed);
    let mut reports = vec![eval_one(&cfg, &ca, n, seed)?, eval_one(&cfg, &cb, n, seed)?];
    if ca.env == EnvKind::Pursuit {
        reports.push(png_baseline(&cfg.pursuit, cfg.hyper.accrual_scale, n, seed, cfg.window)?);
    }
    // savings are measured against the always-broadcasting checkpoint when there is one
    let reference = if cb.algorithm == etrl::atppo::Algorithm::Ppo && ca.algorithm != cb.algorithm {
        1
    } else {
        0
    };
    let refs: Vec<&EvalReport> = reports.iter().collect();
    let rows = comparison_rows(&refs, reference);
    write_comparison_csv(&rows, &cfg.out_dir.join("comparison.csv"))?;
    for r in &reports {
        print_report(r);
    }
    for row in &rows {
        println!("{:<6} resource_saving={:.4}", row.label, row.resource_saving);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Cmd::Train { common, seed } => train(common, *seed),
        Cmd::Eval { checkpoint, episodes, seed, common } => eval(common, checkpoint, *episodes, *seed),
        Cmd::BaselinePng { episodes, seed, common } => baseline(common, *episodes, *seed),
        Cmd::Compare { a, b, episodes, seed, common } => compare(common, a, b, *episodes, *seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
