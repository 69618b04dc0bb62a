use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use intrinsic_fear::harness::{read_config_file, run, ExperimentConfig, HarnessError, Mode};

#[derive(Parser)]
#[command(name = "ifear", version, about = "Intrinsic-fear DQN experiments and tabular bound checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the fear-penalized agent, one run per seed.
    Train(Common),
    /// Train the fear-penalized agent and the plain DQN baseline.
    Compare(Common),
    /// Check the average-reward chain on random tabular MDPs.
    Theorem1(Common),
    /// Check the imperfect-classifier loss decomposition.
    Theorem2(Common),
    /// Sweep the planning discount and report the loss curve.
    SweepGamma(Common),
}

#[derive(Args)]
struct Common {
    /// adventure-seeker or cartpole.
    #[arg(long)]
    env: Option<String>,
    /// Base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of consecutive seeds starting at the base seed.
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    fear_radius: Option<usize>,
    /// Steps over which the fear factor is phased in.
    #[arg(long)]
    k_lambda: Option<u64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    gamma_plan: Option<f64>,
    /// Number of random tabular instances.
    #[arg(long)]
    instances: Option<usize>,
    /// Flip probability for corrupted lookup classifiers.
    #[arg(long)]
    flip: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML file of dotted keys (`agent.lambda = 40`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run seeds and instances one at a time.
    #[arg(long)]
    sequential: bool,
}

impl Common {
    fn flags(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k.to_string(), v));
            }
        };
        push("env", self.env.clone());
        push("seed", self.seed.map(|v| v.to_string()));
        push("seeds", self.seeds.map(|v| v.to_string()));
        push("episodes", self.episodes.map(|v| v.to_string()));
        push("lambda", self.lambda.map(|v| v.to_string()));
        push("fear_radius", self.fear_radius.map(|v| v.to_string()));
        push("k_lambda", self.k_lambda.map(|v| v.to_string()));
        push("gamma", self.gamma.map(|v| v.to_string()));
        push("gamma_plan", self.gamma_plan.map(|v| v.to_string()));
        push("instances", self.instances.map(|v| v.to_string()));
        push("flip", self.flip.map(|v| v.to_string()));
        push("out", self.out.as_ref().map(|p| p.display().to_string()));
        if self.sequential {
            push("execution", Some("sequential".into()));
        }
        out
    }
}

fn resolve(mode: Mode, common: &Common) -> Result<ExperimentConfig, HarnessError> {
    let file = match &common.config {
        Some(path) => read_config_file(path)?,
        None => Vec::new(),
    };
    ExperimentConfig::resolve(mode, &file, &common.flags())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, common) = match &cli.command {
        Command::Train(c) => (Mode::Train, c),
        Command::Compare(c) => (Mode::Compare, c),
        Command::Theorem1(c) => (Mode::Theorem1, c),
        Command::Theorem2(c) => (Mode::Theorem2, c),
        Command::SweepGamma(c) => (Mode::SweepGamma, c),
    };
    let cfg = match resolve(mode, common) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&cfg).with_context(|| format!("running in {}", cfg.out_dir.display())) {
        Ok(outcome) => {
            print!("{}", outcome.report);
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
