//! Command-line front end for the review generation experiment.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use revgen::experiment::{Experiment, ExperimentConfig, Stage};

#[derive(Parser, Debug)]
#[command(name = "revgen", version, about = "Attribute-conditioned review generation and evaluation")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(short, long, global = true, default_value = "revgen.toml")]
    config: PathBuf,

    /// Override a config value, e.g. `--set train.epochs=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Output directory; wins over the file and REVGEN_OUTPUT_DIR.
    #[arg(short, long, global = true)]
    output_dir: Option<PathBuf>,

    /// Models trained at once (0 = one per core).
    #[arg(short, long, global = true)]
    workers: Option<usize>,

    /// Log more (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Ingest, filter and split the corpus.
    Prepare,
    /// Train every configured model.
    Train,
    /// Decode TEST bundles and sample the baselines.
    Generate,
    /// BLEU, readability and polarity for every text source.
    EvalNlp,
    /// Rating prediction under every text condition.
    EvalRec,
    /// Merge the evaluations into the metrics report.
    Report,
    /// Run every stage in order.
    Run,
    /// Print the effective configuration and its hash.
    ShowConfig,
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&cli.config, &cli.overrides)
        .with_context(|| format!("loading {}", cli.config.display()))?;
    if let Some(dir) = &cli.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let cfg = load(&cli)?;
    if let Command::ShowConfig = cli.command {
        cfg.validate()?;
        println!("# config {}", cfg.hash());
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    let exp = Experiment::new(cfg)?;
    let stages: Vec<Stage> = match cli.command {
        Command::Prepare => vec![Stage::Prepare],
        Command::Train => vec![Stage::Train],
        Command::Generate => vec![Stage::Generate],
        Command::EvalNlp => vec![Stage::EvalNlp],
        Command::EvalRec => vec![Stage::EvalRec],
        Command::Report => vec![Stage::Report],
        Command::Run => Stage::ALL.to_vec(),
        Command::ShowConfig => unreachable!(),
    };
    for stage in stages {
        let o = exp.run(stage).with_context(|| format!("stage `{}` failed", stage.name()))?;
        println!(
            "{}\t{}\t{}",
            stage.name(),
            if o.skipped { "skipped" } else { "done" },
            exp.stage_dir(stage).display()
        );
    }
    if matches!(cli.command, Command::Report | Command::Run) {
        print!("{}", exp.load_report()?.to_tsv());
    }
    Ok(())
}
