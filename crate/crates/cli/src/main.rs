use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mpnet_core::array::Geometry;
use mpnet_core::harness::{
    ensure_writable, run_learning, run_snr_loss, write_learning_outputs, write_snr_loss,
    ExperimentConfig, SampleSource,
};
use mpnet_core::io::read_stream;

/// Channel-estimation experiments with an online-trained unfolded
/// matching-pursuit network.
#[derive(Debug, Parser)]
#[command(name = "mpnet-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Only log errors.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,
    /// More logging (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed given in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// SNR loss of a nominal dictionary over a grid of uncertainty levels.
    SnrLoss(Common),
    /// Online learning run comparing the configured estimators.
    Train(Common),
    /// Learning run with array anomalies (requires [[anomalies]]).
    Anomaly(Common),
    /// Learning run on a planar array (requires geometry = "upa").
    Upa(Common),
    /// Re-runs a learning experiment on a dumped observation file.
    Replay {
        #[command(flatten)]
        common: Common,
        /// Observation record file written with `output.dump_stream`.
        #[arg(long)]
        stream: PathBuf,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn learning(cfg: &ExperimentConfig, out: &Path, source: Option<&Path>) -> Result<()> {
    let mut plan = cfg.learning_plan()?;
    ensure_writable(out)?;
    let source = match source {
        Some(p) => {
            // the record file already holds the observations
            plan.output.dump_stream = false;
            let samples = read_stream(p)?;
            log::info!(
                "replaying {} observations from {}",
                samples.len(),
                p.display()
            );
            SampleSource::Replay(samples)
        }
        None => SampleSource::Generated,
    };
    let outcome = run_learning(&plan, source)?;
    for p in write_learning_outputs(out, &outcome, plan.output.checkpoints)? {
        log::info!("wrote {}", p.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SnrLoss(c) => {
            let cfg = load(&c)?;
            let spec = cfg.snr_loss_spec()?;
            ensure_writable(&c.out)?;
            let cells = run_snr_loss(&cfg.array, spec, cfg.seed)?;
            let p = write_snr_loss(&c.out, &cells)?;
            log::info!("wrote {}", p.display());
        }
        Command::Train(c) => learning(&load(&c)?, &c.out, None)?,
        Command::Anomaly(c) => {
            let cfg = load(&c)?;
            if cfg.anomalies.is_empty() {
                bail!(
                    "{}: the anomaly command needs at least one [[anomalies]] entry",
                    c.config.display()
                );
            }
            learning(&cfg, &c.out, None)?;
        }
        Command::Upa(c) => {
            let cfg = load(&c)?;
            if cfg.array.geometry != Geometry::Upa {
                bail!(
                    "{}: the upa command needs array.geometry = \"upa\"",
                    c.config.display()
                );
            }
            learning(&cfg, &c.out, None)?;
        }
        Command::Replay { common, stream } => {
            let cfg = load(&common)?;
            learning(&cfg, &common.out, Some(&stream))
                .with_context(|| format!("replaying {}", stream.display()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Info,
        (false, 1) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(1)
        }
    }
}
