use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use navnet::commands::{cmd_eval, cmd_preprocess, cmd_stream, cmd_synth, cmd_train};
use navnet::config::{load_config, Overrides, Run, RunConfig};
use navnet::parallel::Threads;
use navnet::NavError;

/// Inertial navigation with recurrent networks: synthetic data, training,
/// evaluation and a streaming replay harness.
#[derive(Debug, Parser)]
#[command(name = "navnet", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Experiment config (JSON). Without it every setting takes its default.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic flights described by `synth` in the config.
    Synth,
    /// Trim and reject flights, unify rates, split, normalize and window.
    Preprocess,
    /// Train (or warm-start) a network on the preprocessed windows.
    Train {
        /// Warm-start from this checkpoint; overrides `transfer_from`.
        #[arg(long)]
        transfer_from: Option<PathBuf>,
    },
    /// Per-flight metrics, aggregate summary and path CSVs.
    Eval {
        /// Checkpoint to score (default: <out>/train/model_best.navc).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Also score strapdown dead reckoning on the same flights.
        #[arg(long)]
        baseline: bool,
    },
    /// Replay one flight through the real-time harness and compare with offline inference.
    Stream {
        /// Checkpoint to run (default: <out>/train/model_best.navc).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Flight id from the dataset manifest (default: first validation flight).
        #[arg(long)]
        log: Option<String>,
        /// Bin-boundary jitter bound in milliseconds.
        #[arg(long)]
        jitter_ms: Option<f64>,
        /// 1.0 replays in real time, 0 as fast as possible.
        #[arg(long)]
        replay_speed: Option<f64>,
        /// Per-sensor queue capacity.
        #[arg(long)]
        queue_capacity: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<(), NavError> {
    let cfg = match &cli.global.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    let jobs = cli.global.jobs.unwrap_or_else(|| Threads::available().jobs);
    let mut run = Run::new(cfg, &Overrides { out: cli.global.out, seed: cli.global.seed }, jobs)?;
    match cli.command {
        Command::Synth => cmd_synth(&run).map(drop),
        Command::Preprocess => cmd_preprocess(&run).map(drop),
        Command::Train { transfer_from } => cmd_train(&run, transfer_from.as_deref()).map(drop),
        Command::Eval { checkpoint, baseline } => cmd_eval(&run, checkpoint.as_deref(), baseline).map(drop),
        Command::Stream { checkpoint, log, jitter_ms, replay_speed, queue_capacity } => {
            let s = &mut run.cfg.stream;
            s.jitter_ms = jitter_ms.unwrap_or(s.jitter_ms);
            s.replay_speed = replay_speed.unwrap_or(s.replay_speed);
            s.queue_capacity = queue_capacity.unwrap_or(s.queue_capacity);
            s.validate()?;
            cmd_stream(&run, checkpoint.as_deref(), log.as_deref()).map(drop)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("NAV_LOG_LEVEL", "info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
