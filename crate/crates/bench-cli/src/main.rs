use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use bench_cli::config::{parse_list, BenchConfig, ConfidenceVariant, Estimator};
use bench_cli::records::read_records;
use bench_cli::report::emit_report;
use bench_cli::runner::run_benchmark;
use bench_cli::summary::{render_text, summarize};

#[derive(Parser)]
#[command(name = "bench", about = "Monte Carlo benchmark for output-error identification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo study and write result files.
    Run {
        /// Config file in `key = value` format; overrides the preset.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Base configuration: `desk` (reduced) or `paper` (full size).
        #[arg(long, default_value = "desk")]
        preset: String,
        /// Output directory.
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
        /// Master seed; overrides config and preset.
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated subset of eb,fb,pem-bic,pem-or.
        #[arg(long)]
        estimators: Option<String>,
        /// Comma-separated subset of asymp,lik.
        #[arg(long)]
        variants: Option<String>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Re-summarize a previously written records file.
    Summarize {
        /// Directory containing records.csv.
        #[arg(long = "in")]
        in_dir: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, preset, out, seed, estimators, variants, jobs } => {
            let mut cfg = BenchConfig::preset(&preset)?;
            if let Some(path) = config {
                let text = std::fs::read_to_string(&path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                cfg = BenchConfig::parse_str(&text, cfg)?;
            }
            if let Some(seed) = seed {
                cfg.master_seed = seed;
            }
            if let Some(list) = estimators {
                cfg.estimators = parse_list::<Estimator>(&list)?;
            }
            if let Some(list) = variants {
                cfg.confidence_variants = parse_list::<ConfidenceVariant>(&list)?;
            }
            cfg.validate()?;
            if let Some(jobs) = jobs {
                if jobs == 0 {
                    bail!("--jobs must be positive");
                }
                rayon::ThreadPoolBuilder::new()
                    .num_threads(jobs)
                    .build_global()
                    .context("configuring worker pool")?;
            }
            let output = run_benchmark(&cfg);
            let summary = summarize(&output.records);
            emit_report(&cfg, &output, &summary, &out)?;
            print!("{}", render_text(&summary));
            println!("results written to {}", out.display());
            Ok(())
        }
        Command::Summarize { in_dir } => {
            let path = in_dir.join("records.csv");
            let records = read_records(&path)
                .with_context(|| format!("reading {}", path.display()))?;
            if records.is_empty() {
                bail!("no records in {}", path.display());
            }
            print!("{}", render_text(&summarize(&records)));
            Ok(())
        }
    }
}
