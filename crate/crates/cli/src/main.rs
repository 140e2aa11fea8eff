use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sentidyn_cli::pipeline::{self, CHECKPOINT_FILE};
use sentidyn_cli::{CliError, PipelineConfig};

#[derive(Parser)]
#[command(name = "sentidyn", version, about = "Train sentiment RNNs and analyze their fixed-point dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration; defaults are used for anything not given.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic corpus as labeled text files.
    Synth(Common),
    /// Train a classifier and write a checkpoint plus per-epoch metrics.
    Train(Common),
    /// Fit the bag-of-words baseline and write the valence lexicon.
    Baseline(Common),
    /// Analyze a checkpoint; tables go to `<out>/analysis`.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Defaults to `<out>/model.sdyn`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Verify an analysis directory and write summary.md into it.
    Report { dir: PathBuf },
}

fn load_config(c: &Common) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &c.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(c) => {
            let cfg = load_config(&c)?;
            pipeline::cmd_synth(&cfg, &cfg.output_dir)
        }
        Command::Train(c) => {
            let cfg = load_config(&c)?;
            let r = pipeline::cmd_train(&cfg, &cfg.output_dir)?;
            println!(
                "best epoch {}: test accuracy {} (bag-of-words {}); checkpoint {}",
                r.log.best_epoch,
                r.log.test_accuracy,
                r.bow_test_accuracy,
                r.checkpoint.display()
            );
            Ok(())
        }
        Command::Baseline(c) => {
            let cfg = load_config(&c)?;
            let r = pipeline::cmd_baseline(&cfg, &cfg.output_dir)?;
            println!("bag-of-words test accuracy {}", r.test_accuracy);
            Ok(())
        }
        Command::Analyze { common, checkpoint } => {
            let cfg = load_config(&common)?;
            let ck = checkpoint.unwrap_or_else(|| cfg.output_dir.join(CHECKPOINT_FILE));
            let out = cfg.output_dir.join("analysis");
            let s = pipeline::cmd_analyze(&cfg, &ck, &out)?;
            for c in &s.checks {
                let v = c.value.map_or("NA".to_string(), |v| v.to_string());
                println!("{} {:<4} {} = {} ({})", if c.pass { "PASS" } else { "FAIL" }, c.criterion, c.description, v, c.threshold);
            }
            println!("artifacts in {}", out.display());
            Ok(())
        }
        Command::Report { dir } => {
            let r = pipeline::cmd_report(&dir)?;
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}", Path::new(&dir).join(pipeline::SUMMARY_FILE).display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
