//! Command-line front end: stats, similarity, train, evaluate, sweep.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ketra::config::RunConfig;
use ketra::error::{Error, Result};
use ketra::graph::LiteralPolicy;
use ketra::models::ModelKind;
use ketra::similarity::Encoding;

#[derive(Parser)]
#[command(
    name = "ketra",
    version,
    about = "Knowledge graph embedding via similarity-enriched tensor factorization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Run configuration file (flat key=value lines).
    #[arg(long)]
    config: PathBuf,
    /// Override a config key, e.g. --set model.lambda_s=0.2 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Bound internal parallelism (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Override the output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::from_file(&self.config)?;
        cfg.apply_overrides(self.overrides.iter().map(String::as_str))?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(threads) = self.threads {
            cfg.threads = threads;
        }
        if let Some(dir) = &self.output_dir {
            cfg.output_dir = dir.clone();
        }
        if cfg.threads > 0 {
            // results do not depend on the pool size; this only bounds it
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .build_global();
        }
        Ok(cfg)
    }
}

fn parse_literals(s: &str) -> Result<LiteralPolicy> {
    match s {
        "keep" => Ok(LiteralPolicy::Keep),
        "tag_by_type" => Ok(LiteralPolicy::TagByType),
        other => Err(Error::InvalidArgument(format!(
            "unknown literal policy {other:?} (expected keep or tag_by_type)"
        ))),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Ingest a dataset directory and print its statistics.
    Stats {
        dataset_dir: PathBuf,
        /// Output format: text or csv.
        #[arg(long, default_value = "text")]
        format: String,
        /// Literal handling: keep or tag_by_type.
        #[arg(long, default_value = "keep")]
        literals: String,
    },
    /// Compute a relation-similarity matrix and write it as labeled CSV.
    Similarity {
        dataset_dir: PathBuf,
        /// symmetric, agency, patient, transitivity or reverse_transitivity.
        #[arg(long)]
        encoding: String,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "keep")]
        literals: String,
    },
    /// Fit the configured model; write factor CSVs, trace.csv and manifest.txt.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run the fact-prediction protocol and write report CSVs.
    Evaluate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Score these pre-trained factors instead of training per repeat.
        #[arg(long)]
        factors: Option<PathBuf>,
    },
    /// Density sweep: evaluate at decreasing subject fractions.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated subject fractions in (0, 1].
        #[arg(long, value_delimiter = ',')]
        fractions: Vec<f64>,
        /// Comma-separated model kinds (default: the configured model).
        #[arg(long, value_delimiter = ',')]
        models: Vec<String>,
    },
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Stats {
            dataset_dir,
            format,
            literals,
        } => {
            let csv = match format.as_str() {
                "csv" => true,
                "text" => false,
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown format {other:?} (expected text or csv)"
                    )))
                }
            };
            let (_, text) =
                ketra::commands::run_stats(&dataset_dir, parse_literals(&literals)?, csv)?;
            print!("{text}");
        }
        Command::Similarity {
            dataset_dir,
            encoding,
            out,
            literals,
        } => {
            let encoding: Encoding = encoding.parse()?;
            ketra::commands::run_similarity(
                &dataset_dir,
                encoding,
                &out,
                parse_literals(&literals)?,
            )?;
            println!("wrote {}", out.display());
        }
        Command::Train { config } => {
            let cfg = config.load()?;
            let out = ketra::commands::run_train(&cfg)?;
            println!(
                "wrote factors, trace.csv and manifest.txt to {}",
                out.display()
            );
        }
        Command::Evaluate { config, factors } => {
            let cfg = config.load()?;
            let out = ketra::commands::run_evaluate(&cfg, factors.as_deref())?;
            println!(
                "wrote overall.csv, per_relation.csv and summary.txt to {}",
                out.display()
            );
        }
        Command::Sweep {
            config,
            fractions,
            models,
        } => {
            let cfg = config.load()?;
            if fractions.is_empty() {
                return Err(Error::InvalidArgument("--fractions is required".into()));
            }
            let kinds: Vec<ModelKind> = if models.is_empty() {
                vec![cfg.model]
            } else {
                models
                    .iter()
                    .map(|m| m.parse())
                    .collect::<Result<Vec<_>>>()?
            };
            let out = ketra::commands::run_sweep(&cfg, &fractions, &kinds)?;
            println!("wrote density.csv to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
