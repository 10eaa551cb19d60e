use clap::Parser;
use std::path::PathBuf;

use tmo_cli::{emit_report, run_experiment, Algorithm, ExperimentSpec};

/// Train and evaluate depth-bounded classification trees on LIBSVM data.
#[derive(Parser, Debug)]
#[command(name = "tmo", version)]
struct Args {
    /// LIBSVM dataset file.
    #[arg(long)]
    dataset: PathBuf,

    /// Learner to run.
    #[arg(long, value_enum)]
    algo: Algorithm,

    /// Depth bound, 1 to 8.
    #[arg(long, default_value_t = 2)]
    depth: usize,

    /// Seeds, comma separated; one full pipeline per seed.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    seeds: Vec<u64>,

    /// Per-slot crossover rate.
    #[arg(long, default_value_t = 0.75)]
    cr: f64,

    /// Population size.
    #[arg(long, default_value_t = 100)]
    pop_size: usize,

    /// Number of generations.
    #[arg(long, default_value_t = 5)]
    generations: usize,

    /// Wall-clock budget per seed, in seconds.
    #[arg(long, default_value_t = 600.0)]
    time_limit: f64,

    /// Pass budget for alternating optimization.
    #[arg(long, default_value_t = 10)]
    tao_passes: usize,

    /// Output rendering.
    #[arg(long, default_value = "full", value_parser = ["records", "table", "full"])]
    format: String,

    /// Write the report to this file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(args: Args) -> Result<(), Box<dyn std::error::Error>> {
    let mut spec = ExperimentSpec::new(args.dataset, args.algo, args.depth, args.seeds);
    spec.cross_rate = args.cr;
    spec.population_size = args.pop_size;
    spec.generations = args.generations;
    spec.time_limit = args.time_limit;
    spec.tao_passes = args.tao_passes;

    let report = run_experiment(&spec)?;
    let text = emit_report(&report, &args.format)?;
    match &args.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Args::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
