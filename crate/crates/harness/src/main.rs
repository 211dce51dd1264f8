use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use oga_core::envs::build_environment;
use oga_core::{IntraPolicy, MdpModel};
use oga_harness::{bench, csvio, figure1, run_experiment, scores, stats, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "oga",
    version,
    about = "Run and analyse abstraction-MCTS experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid and write one CSV row per episode.
    Run {
        config: PathBuf,
        /// Override the base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (0 = one per core).
        #[arg(long)]
        workers: Option<usize>,
        /// Output CSV (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write 0 for decision times so the CSV is reproducible.
        #[arg(long)]
        no_timing: bool,
    },
    /// Pairings and relative-improvement scores from a results CSV.
    Scores {
        csv: PathBuf,
        /// Compare intra policies only, everything else being part of the task.
        #[arg(long)]
        by_policy: bool,
    },
    /// Query-ratio table and per-cell mean returns from a results CSV.
    Stats {
        csv: PathBuf,
        /// Abstraction variant whose query ratios are tabulated.
        #[arg(long, default_value = "epsilon")]
        variant: String,
    },
    /// Optimal-action visit fractions on the depth-1 fixture per budget.
    Figure1 {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Searches per budget.
        #[arg(long, default_value_t = 100)]
        seeds: usize,
        #[arg(long, value_delimiter = ',', default_value = "1000,10000,100000")]
        budgets: Vec<usize>,
    },
    /// Decision-time overhead of UCT over RANDOM on the config's environments.
    Bench {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_csv(path: &Path) -> anyhow::Result<Vec<csvio::CsvRow>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    csvio::read_rows(file).with_context(|| format!("reading {}", path.display()))
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            workers,
            out,
            no_timing,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.workers = workers.unwrap_or(cfg.workers);
            cfg.record_timing &= !no_timing;
            let result = run_experiment(&cfg)?;
            csvio::write_records(&result.records, output(out.as_deref())?)?;
            for f in &result.failures {
                eprintln!(
                    "cell {}: {} episode(s) failed: {}",
                    f.cell_id, f.episodes_failed, f.message
                );
            }
            if !result.failures.is_empty() && result.records.is_empty() {
                bail!("every episode failed");
            }
        }
        Command::Scores { csv, by_policy } => {
            let rows = read_csv(&csv)?;
            let table = scores::perf_table(&rows, by_policy);
            print!("{}", scores::render_scores(&table)?);
        }
        Command::Stats { csv, variant } => {
            let rows = read_csv(&csv)?;
            println!("mean query ratio ({variant})");
            print!("{}", stats::query_stats_report(&rows, &variant));
            println!();
            println!("mean return +- 99% half-width per cell");
            print!("{}", stats::return_report(&rows));
        }
        Command::Figure1 {
            seed,
            seeds,
            budgets,
        } => {
            println!("{:>8} {:>10} {:>10}", "budget", "UCT", "RANDOM");
            let uct = figure1::visit_fraction_table(IntraPolicy::Uct, &budgets, seeds, seed)?;
            let random = figure1::visit_fraction_table(IntraPolicy::Random, &budgets, seeds, seed)?;
            for ((b, u), (_, r)) in uct.iter().zip(&random) {
                println!("{b:>8} {u:>10.4} {r:>10.4}");
            }
        }
        Command::Bench { config, seed, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let envs = cfg
                .environments
                .iter()
                .map(|e| Ok((e.name.clone(), build_environment(&e.name, &e.params)?)))
                .collect::<anyhow::Result<Vec<(String, Arc<dyn MdpModel>)>>>()?;
            let report = bench::benchmark_overhead(
                &envs,
                &cfg.bench,
                cfg.horizon,
                cfg.recency,
                seed.unwrap_or(cfg.seed),
            )?;
            write!(output(out.as_deref())?, "{}", report.render())?;
        }
    }
    Ok(())
}
