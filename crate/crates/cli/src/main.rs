use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mechcool::harness::{self, ExperimentPreset, PresetName, RunConfig};
use mechcool::reinforce::ActionMode;

#[derive(Parser)]
#[command(name = "mechcool", version, about = "Feedback cooling of mechanical resonators with policy gradients")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Relax resonators from rest with the control off.
    Thermalize(Common),
    /// Train a cooling policy.
    Train(TrainArgs),
    /// Evaluate a trained policy.
    Evaluate(EvaluateArgs),
    /// Print the contents of a checkpoint file.
    InspectCheckpoint {
        checkpoint: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// thermalize | single_quadratic | four_linear
    #[arg(long)]
    preset: Option<String>,
    /// TOML run configuration; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trajectories to simulate.
    #[arg(long)]
    n_traj: Option<usize>,
    /// Time steps per trajectory.
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    epochs: Option<u64>,
    #[arg(long)]
    batch: Option<usize>,
    /// Resume from this checkpoint.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    /// Trained policy to evaluate.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Action selection during evaluation.
    #[arg(long, value_parser = ["sample", "argmax"])]
    mode: Option<String>,
}

enum Kind {
    Thermalize,
    Train,
    Evaluate,
}

impl Common {
    fn overrides(&self, kind: Kind) -> RunConfig {
        let mut c = RunConfig {
            preset: self.preset.clone(),
            seed: self.seed,
            out: self.out.clone(),
            ..RunConfig::default()
        };
        match kind {
            Kind::Thermalize => {
                c.thermalize.n_traj = self.n_traj;
                c.thermalize.steps = self.steps;
            }
            Kind::Train => {
                c.train.batch = self.n_traj;
                c.train.steps = self.steps;
            }
            Kind::Evaluate => {
                c.evaluate.n_traj = self.n_traj;
                c.evaluate.steps = self.steps;
            }
        }
        c
    }

    /// Resolve preset < config file < command line.
    fn resolve(&self, cli: RunConfig, default: PresetName) -> Result<(ExperimentPreset, PathBuf)> {
        let file = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let merged = file.merged_with(&cli);
        let name = match &merged.preset {
            Some(s) => s.parse::<PresetName>()?,
            None => default,
        };
        let mut preset = ExperimentPreset::new(name);
        preset.apply(&merged)?;
        let out = merged.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(name.as_str()));
        Ok((preset, out))
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Thermalize(args) => {
            let (preset, out) = args.resolve(args.overrides(Kind::Thermalize), PresetName::Thermalize)?;
            let started = Instant::now();
            let s = harness::run_thermalize(&preset, &out)?;
            println!(
                "thermalized {} trajectories to t={} in {:.1}s: mean energy {:.4}",
                s.n_traj,
                s.t_final,
                started.elapsed().as_secs_f64(),
                s.final_mean_energy
            );
            if let (Some(ks), Some(crit)) = (s.ks_statistic, s.ks_critical_1pct) {
                println!("KS distance from exponential {ks:.4} (1% critical value {crit:.4})");
            }
            println!("output in {}", out.display());
        }
        Command::Train(args) => {
            let mut over = args.common.overrides(Kind::Train);
            over.train.epochs = args.epochs;
            if args.batch.is_some() {
                over.train.batch = args.batch;
            }
            let (preset, out) = args.common.resolve(over, PresetName::SingleQuadratic)?;
            let resume = args
                .checkpoint
                .as_deref()
                .map(load)
                .transpose()?;
            let started = Instant::now();
            let s = harness::run_training(&preset, &out, resume, |r| {
                eprintln!(
                    "epoch {:>5}  mean reward {:>14.6e}  baseline {:>14.6e}  {:>8.1}s",
                    r.epoch,
                    r.mean_total_reward,
                    r.baseline,
                    started.elapsed().as_secs_f64()
                );
            })?;
            println!(
                "trained epochs {}..{}; checkpoint {}",
                s.start_epoch + 1,
                s.epochs_completed,
                s.final_checkpoint.display()
            );
        }
        Command::Evaluate(args) => {
            let mut over = args.common.overrides(Kind::Evaluate);
            over.evaluate.mode = args.mode.as_deref().map(str::parse::<ActionMode>).transpose()?;
            let (preset, out) = args.common.resolve(over, PresetName::SingleQuadratic)?;
            let ck = load(&args.checkpoint)?;
            let s = harness::run_evaluation(&ck.params, &preset, &out)?;
            println!("initial mean energy {:.4}", s.initial_mean_energy);
            println!("final mean energy   {:.4}", s.final_mean_energy);
            if s.final_mode_means.len() > 1 {
                for (j, (a, b)) in s.initial_mode_means.iter().zip(&s.final_mode_means).enumerate() {
                    println!("  mode {j}: {a:.4} -> {b:.4}");
                }
            }
            println!("runaway trajectories {} of {}", s.n_runaway, s.n_traj);
            println!("output in {}", out.display());
        }
        Command::InspectCheckpoint { checkpoint } => {
            print!("{}", harness::inspect_checkpoint(&load(&checkpoint)?));
        }
    }
    Ok(())
}

fn load(path: &Path) -> Result<harness::Checkpoint> {
    if !path.exists() {
        bail!("checkpoint {} does not exist", path.display());
    }
    harness::load_checkpoint(path).with_context(|| format!("reading {}", path.display()))
}
