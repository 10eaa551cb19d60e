//! Seeded experiment harness: split a LIBSVM dataset, train one of the
//! tree learners per seed, and render the outcome as a machine-readable
//! record stream or a human-readable table.
//!
//! The record stream carries no wall-clock timings, so repeated runs of
//! the same experiment produce byte-identical record output. Timings show
//! up only in the table rendering.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use tmo::{
    grow_greedy_tree, init_population, parse_libsvm, split_dataset, tao_optimize, tmo_run,
    SplitSpec, TmoConfig, Tree,
};

/// Decorrelates the generation stream of a run from the member
/// initialization streams, which are seeded with `seed ^ member_index`.
const RUN_STREAM_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug)]
pub enum CliError {
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    Core(tmo::Error),
    Seed {
        seed: u64,
        source: tmo::Error,
    },
    Spec(String),
    Format(String),
    Parse {
        line: usize,
        message: String,
    },
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Seed { seed, source } => write!(f, "seed {seed}: {source}"),
            CliError::Spec(msg) => write!(f, "invalid experiment: {msg}"),
            CliError::Format(name) => write!(f, "unknown report format {name:?}"),
            CliError::Parse { line, message } => write!(f, "report line {line}: {message}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<tmo::Error> for CliError {
    fn from(e: tmo::Error) -> Self {
        CliError::Core(e)
    }
}

/// Learner selection for one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Algorithm {
    /// Greedy tree on all features, no resampling.
    Cart,
    /// Greedy tree refined by alternating optimization.
    Tao,
    /// Memetic population search.
    Tmo,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Cart => "cart",
            Algorithm::Tao => "tao",
            Algorithm::Tmo => "tmo",
        })
    }
}

impl FromStr for Algorithm {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "cart" => Ok(Algorithm::Cart),
            "tao" => Ok(Algorithm::Tao),
            "tmo" => Ok(Algorithm::Tmo),
            other => Err(CliError::Spec(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// A fully resolved experiment: dataset, learner, and protocol knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub dataset: PathBuf,
    pub algorithm: Algorithm,
    pub max_depth: usize,
    pub seeds: Vec<u64>,
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub cross_rate: f64,
    pub population_size: usize,
    pub generations: usize,
    pub time_limit: f64,
    pub tao_passes: usize,
}

impl ExperimentSpec {
    /// Spec with protocol defaults: 64/16/20 split, crossover rate 0.75,
    /// population 100, 5 generations, 600 s budget, 10 optimization passes.
    pub fn new(dataset: PathBuf, algorithm: Algorithm, max_depth: usize, seeds: Vec<u64>) -> Self {
        ExperimentSpec {
            dataset,
            algorithm,
            max_depth,
            seeds,
            train_fraction: 0.64,
            val_fraction: 0.16,
            test_fraction: 0.20,
            cross_rate: 0.75,
            population_size: 100,
            generations: 5,
            time_limit: 600.0,
            tao_passes: 10,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.seeds.is_empty() {
            return Err(CliError::Spec("no seeds given".into()));
        }
        if !(1..=8).contains(&self.max_depth) {
            return Err(CliError::Spec(format!(
                "depth {} outside [1, 8]",
                self.max_depth
            )));
        }
        // Exercises the fraction checks; the seed is irrelevant here.
        SplitSpec::new(
            self.train_fraction,
            self.val_fraction,
            self.test_fraction,
            0,
        )?;
        if self.algorithm == Algorithm::Tmo {
            self.tmo_config(0).validate()?;
        } else if !self.time_limit.is_finite() || self.time_limit <= 0.0 {
            return Err(CliError::Spec(format!(
                "time limit {} must be positive",
                self.time_limit
            )));
        }
        Ok(())
    }

    fn tmo_config(&self, seed: u64) -> TmoConfig {
        TmoConfig {
            population_size: self.population_size,
            max_depth: self.max_depth,
            cross_rate: self.cross_rate,
            generations: self.generations,
            time_limit: self.time_limit,
            seed: seed ^ RUN_STREAM_SALT,
            tao_passes: self.tao_passes,
        }
    }
}

/// Accuracies and wall time of one seed's pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedResult {
    pub seed: u64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
    pub wall_seconds: f64,
}

/// Everything an experiment produced, plus the resolved spec.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub spec: ExperimentSpec,
    pub results: Vec<SeedResult>,
    pub mean_test: f64,
    pub std_test: f64,
}

impl RunReport {
    /// Aggregates test accuracy as mean and population standard deviation
    /// over the seeds.
    pub fn from_results(spec: ExperimentSpec, results: Vec<SeedResult>) -> Self {
        let n = results.len() as f64;
        let mean_test = results.iter().map(|r| r.test_accuracy).sum::<f64>() / n;
        let variance = results
            .iter()
            .map(|r| (r.test_accuracy - mean_test).powi(2))
            .sum::<f64>()
            / n;
        RunReport {
            spec,
            results,
            mean_test,
            std_test: variance.sqrt(),
        }
    }
}

/// Runs the experiment: per seed, a 64/16/20-style split, training, and
/// evaluation on all three parts. Seeds run in parallel; results are
/// reported in the order the seeds were given. Any seed's failure aborts
/// the whole experiment.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<RunReport, CliError> {
    spec.validate()?;
    let text = fs::read_to_string(&spec.dataset).map_err(|source| CliError::Io {
        path: spec.dataset.clone(),
        source,
    })?;
    let data = parse_libsvm(&text)?;

    let results: Result<Vec<SeedResult>, CliError> = spec
        .seeds
        .par_iter()
        .map(|&seed| {
            let wrap = |source: tmo::Error| CliError::Seed { seed, source };
            let start = Instant::now();
            let split = SplitSpec::new(
                spec.train_fraction,
                spec.val_fraction,
                spec.test_fraction,
                seed,
            )
            .map_err(wrap)?;
            let (train, val, test) = split_dataset(&data, &split).map_err(wrap)?;
            let tree = train_tree(spec, seed, &train).map_err(wrap)?;
            Ok(SeedResult {
                seed,
                train_accuracy: tree.accuracy(&train),
                val_accuracy: tree.accuracy(&val),
                test_accuracy: tree.accuracy(&test),
                wall_seconds: start.elapsed().as_secs_f64(),
            })
        })
        .collect();
    Ok(RunReport::from_results(spec.clone(), results?))
}

fn train_tree(spec: &ExperimentSpec, seed: u64, train: &tmo::Dataset) -> tmo::Result<Tree> {
    let cart = |rng_seed: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        grow_greedy_tree(train, spec.max_depth, None, false, &mut rng)
    };
    match spec.algorithm {
        Algorithm::Cart => cart(seed),
        Algorithm::Tao => Ok(tao_optimize(&cart(seed)?, train, spec.tao_passes)),
        Algorithm::Tmo => {
            let population = init_population(
                train,
                spec.population_size,
                spec.max_depth,
                spec.tao_passes,
                seed,
            )?;
            Ok(tmo_run(train, &spec.tmo_config(seed), population)?.best)
        }
    }
}

/// Renders a report. Formats: `records` (line-delimited key=value stream,
/// no timings, byte-stable across runs), `table` (human-readable, with
/// timings), `full` (records, then the table). Unknown names are errors.
pub fn emit_report(report: &RunReport, format: &str) -> Result<String, CliError> {
    match format {
        "records" => Ok(render_records(report)),
        "table" => Ok(render_table(report)),
        "full" => Ok(format!(
            "{}\n{}",
            render_records(report),
            render_table(report)
        )),
        other => Err(CliError::Format(other.to_string())),
    }
}

fn render_records(report: &RunReport) -> String {
    let s = &report.spec;
    let mut out = format!(
        "run algo={} depth={} cr={} pop_size={} generations={} tao_passes={} time_limit={} \
         split={}/{}/{} std=population seeds={} dataset={}\n",
        s.algorithm,
        s.max_depth,
        s.cross_rate,
        s.population_size,
        s.generations,
        s.tao_passes,
        s.time_limit,
        s.train_fraction,
        s.val_fraction,
        s.test_fraction,
        s.seeds.len(),
        s.dataset.display(),
    );
    for r in &report.results {
        out.push_str(&format!(
            "seed id={} train={} val={} test={}\n",
            r.seed, r.train_accuracy, r.val_accuracy, r.test_accuracy
        ));
    }
    out.push_str(&format!(
        "summary mean_test={} std_test={}\n",
        report.mean_test, report.std_test
    ));
    out
}

fn render_table(report: &RunReport) -> String {
    let s = &report.spec;
    let mut out = String::new();
    out.push_str(&format!("dataset: {}\n", s.dataset.display()));
    out.push_str(&format!(
        "algorithm: {}   depth: {}   cr: {}   pop: {}   generations: {}   tao passes: {}\n\n",
        s.algorithm, s.max_depth, s.cross_rate, s.population_size, s.generations, s.tao_passes
    ));
    out.push_str(&format!(
        "{:>8} {:>9} {:>9} {:>9} {:>9}\n",
        "seed", "train", "val", "test", "seconds"
    ));
    for r in &report.results {
        out.push_str(&format!(
            "{:>8} {:>8.2}% {:>8.2}% {:>8.2}% {:>9.2}\n",
            r.seed,
            100.0 * r.train_accuracy,
            100.0 * r.val_accuracy,
            100.0 * r.test_accuracy,
            r.wall_seconds
        ));
    }
    let total: f64 = report.results.iter().map(|r| r.wall_seconds).sum();
    out.push_str(&format!(
        "\nmean test accuracy: {:.2}% +/- {:.2}% (population std over {} seeds)\n",
        100.0 * report.mean_test,
        100.0 * report.std_test,
        report.results.len()
    ));
    out.push_str(&format!("total wall time: {total:.2}s\n"));
    out
}

/// Parses the `records` rendering back into a report. Wall-clock seconds
/// are not part of the stream and come back as zero.
pub fn parse_report(text: &str) -> Result<RunReport, CliError> {
    let mut spec: Option<ExperimentSpec> = None;
    let mut declared_seeds = 0usize;
    let mut results: Vec<SeedResult> = Vec::new();
    let mut summary: Option<(f64, f64)> = None;

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| CliError::Parse {
            line: lineno,
            message,
        };
        let (kind, rest) = line
            .split_once(' ')
            .ok_or_else(|| bad("truncated record".into()))?;
        match kind {
            "run" => {
                let (head, dataset) = rest
                    .split_once(" dataset=")
                    .ok_or_else(|| bad("run record lacks dataset=".into()))?;
                let mut fields = std::collections::HashMap::new();
                for token in head.split_whitespace() {
                    let (k, v) = token
                        .split_once('=')
                        .ok_or_else(|| bad(format!("expected key=value, found {token:?}")))?;
                    fields.insert(k, v);
                }
                let take = |key: &str| {
                    fields
                        .get(key)
                        .copied()
                        .ok_or_else(|| bad(format!("run record lacks {key}=")))
                };
                let num = |key: &str| -> Result<f64, CliError> {
                    take(key)?
                        .parse()
                        .map_err(|_| bad(format!("unreadable {key}")))
                };
                let int = |key: &str| -> Result<usize, CliError> {
                    take(key)?
                        .parse()
                        .map_err(|_| bad(format!("unreadable {key}")))
                };
                let split_field = take("split")?;
                let parts: Vec<&str> = split_field.split('/').collect();
                if parts.len() != 3 {
                    return Err(bad(format!("unreadable split {split_field:?}")));
                }
                let frac = |i: usize| -> Result<f64, CliError> {
                    parts[i]
                        .parse()
                        .map_err(|_| bad(format!("unreadable split {split_field:?}")))
                };
                if take("std")? != "population" {
                    return Err(bad("unknown std kind".into()));
                }
                declared_seeds = int("seeds")?;
                spec = Some(ExperimentSpec {
                    dataset: PathBuf::from(dataset),
                    algorithm: take("algo")?.parse()?,
                    max_depth: int("depth")?,
                    seeds: Vec::new(),
                    train_fraction: frac(0)?,
                    val_fraction: frac(1)?,
                    test_fraction: frac(2)?,
                    cross_rate: num("cr")?,
                    population_size: int("pop_size")?,
                    generations: int("generations")?,
                    time_limit: num("time_limit")?,
                    tao_passes: int("tao_passes")?,
                });
            }
            "seed" => {
                let mut seed = None;
                let mut acc = [None; 3];
                for token in rest.split_whitespace() {
                    let (k, v) = token
                        .split_once('=')
                        .ok_or_else(|| bad(format!("expected key=value, found {token:?}")))?;
                    match k {
                        "id" => seed = Some(v.parse().map_err(|_| bad("unreadable id".into()))?),
                        "train" | "val" | "test" => {
                            let slot = match k {
                                "train" => 0,
                                "val" => 1,
                                _ => 2,
                            };
                            acc[slot] =
                                Some(v.parse().map_err(|_| bad(format!("unreadable {k}")))?);
                        }
                        other => return Err(bad(format!("unknown field {other:?}"))),
                    }
                }
                let missing = || bad("incomplete seed record".into());
                results.push(SeedResult {
                    seed: seed.ok_or_else(missing)?,
                    train_accuracy: acc[0].ok_or_else(missing)?,
                    val_accuracy: acc[1].ok_or_else(missing)?,
                    test_accuracy: acc[2].ok_or_else(missing)?,
                    wall_seconds: 0.0,
                });
            }
            "summary" => {
                let mut mean = None;
                let mut std = None;
                for token in rest.split_whitespace() {
                    let (k, v) = token
                        .split_once('=')
                        .ok_or_else(|| bad(format!("expected key=value, found {token:?}")))?;
                    let value: f64 = v.parse().map_err(|_| bad(format!("unreadable {k}")))?;
                    match k {
                        "mean_test" => mean = Some(value),
                        "std_test" => std = Some(value),
                        other => return Err(bad(format!("unknown field {other:?}"))),
                    }
                }
                let missing = || bad("incomplete summary record".into());
                summary = Some((mean.ok_or_else(missing)?, std.ok_or_else(missing)?));
            }
            other => return Err(bad(format!("unknown record kind {other:?}"))),
        }
    }

    let mut spec = spec.ok_or(CliError::Parse {
        line: 0,
        message: "no run record".into(),
    })?;
    let (mean_test, std_test) = summary.ok_or(CliError::Parse {
        line: 0,
        message: "no summary record".into(),
    })?;
    if results.len() != declared_seeds {
        return Err(CliError::Parse {
            line: 0,
            message: format!(
                "run record declares {declared_seeds} seeds, found {}",
                results.len()
            ),
        });
    }
    spec.seeds = results.iter().map(|r| r.seed).collect();
    Ok(RunReport {
        spec,
        results,
        mean_test,
        std_test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_dataset(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    /// Classes live on disjoint value ranges ([0, 1] and [100, 101]), so
    /// any split learned from any subset separates every row perfectly.
    fn separable(n: usize) -> String {
        let mut out = String::new();
        for i in 0..n {
            let offset = if i % 2 == 0 { 0.0 } else { 100.0 };
            let x = offset + i as f64 / n as f64;
            out.push_str(&format!("{} 1:{x}\n", i % 2));
        }
        out
    }

    /// Two informative features plus one noise feature; not separable.
    fn noisy(n: usize) -> String {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let mut out = String::new();
        for _ in 0..n {
            let a: f64 = rng.gen_range(-1.0..1.0);
            let b: f64 = rng.gen_range(-1.0..1.0);
            let c: f64 = rng.gen_range(-1.0..1.0);
            let flip = rng.gen::<f64>() < 0.15;
            let label = i32::from((a + 0.5 * b > 0.1) != flip);
            out.push_str(&format!("{label} 1:{a:.6} 2:{b:.6} 3:{c:.6}\n"));
        }
        out
    }

    fn spec_for(path: &std::path::Path, algorithm: Algorithm) -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(path.to_path_buf(), algorithm, 2, vec![1, 2, 3]);
        spec.population_size = 10;
        spec.generations = 2;
        spec.tao_passes = 5;
        spec
    }

    #[test]
    fn spec_validation_catches_bad_fields() {
        let base = ExperimentSpec::new(PathBuf::from("x"), Algorithm::Cart, 2, vec![1]);
        let mut no_seeds = base.clone();
        no_seeds.seeds.clear();
        assert!(no_seeds.validate().is_err());
        for depth in [0, 9] {
            let mut bad = base.clone();
            bad.max_depth = depth;
            assert!(bad.validate().is_err());
        }
        let mut bad_split = base.clone();
        bad_split.train_fraction = 0.9;
        assert!(bad_split.validate().is_err());
        assert!(base.validate().is_ok());
    }

    #[test]
    fn aggregates_match_hand_arithmetic() {
        let spec = ExperimentSpec::new(PathBuf::from("x"), Algorithm::Cart, 2, vec![1, 2]);
        let results = vec![
            SeedResult {
                seed: 1,
                train_accuracy: 0.8,
                val_accuracy: 0.75,
                test_accuracy: 0.70,
                wall_seconds: 0.5,
            },
            SeedResult {
                seed: 2,
                train_accuracy: 0.9,
                val_accuracy: 0.80,
                test_accuracy: 0.72,
                wall_seconds: 0.4,
            },
        ];
        let report = RunReport::from_results(spec, results);
        assert!((report.mean_test - 0.71).abs() < 1e-12);
        assert!((report.std_test - 0.01).abs() < 1e-12);
    }

    #[test]
    fn cart_on_separable_data_is_perfect() {
        let file = write_dataset(&separable(50));
        let spec = spec_for(file.path(), Algorithm::Cart);
        let report = run_experiment(&spec).unwrap();
        for r in &report.results {
            assert_eq!(r.test_accuracy, 1.0);
            assert_eq!(r.train_accuracy, 1.0);
        }
        assert_eq!(report.mean_test, 1.0);
        assert_eq!(report.std_test, 0.0);
    }

    #[test]
    fn tao_never_trails_cart_on_train() {
        let file = write_dataset(&noisy(120));
        let cart = run_experiment(&spec_for(file.path(), Algorithm::Cart)).unwrap();
        let tao = run_experiment(&spec_for(file.path(), Algorithm::Tao)).unwrap();
        for (c, t) in cart.results.iter().zip(&tao.results) {
            assert_eq!(c.seed, t.seed);
            assert!(
                t.train_accuracy >= c.train_accuracy,
                "seed {}: tao {} < cart {}",
                c.seed,
                t.train_accuracy,
                c.train_accuracy
            );
        }
    }

    #[test]
    fn tmo_pipeline_runs_and_reports_every_seed() {
        let file = write_dataset(&noisy(80));
        let report = run_experiment(&spec_for(file.path(), Algorithm::Tmo)).unwrap();
        assert_eq!(report.results.len(), 3);
        assert_eq!(
            report.results.iter().map(|r| r.seed).collect::<Vec<_>>(),
            vec![1, 2, 3]
        );
        for r in &report.results {
            assert!(r.train_accuracy > 0.5);
            assert!(r.wall_seconds > 0.0);
        }
    }

    #[test]
    fn records_are_byte_identical_across_runs() {
        let file = write_dataset(&noisy(80));
        let spec = spec_for(file.path(), Algorithm::Tmo);
        let a = emit_report(&run_experiment(&spec).unwrap(), "records").unwrap();
        let b = emit_report(&run_experiment(&spec).unwrap(), "records").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn emit_rejects_unknown_format() {
        let spec = ExperimentSpec::new(PathBuf::from("x"), Algorithm::Cart, 2, vec![1]);
        let report = RunReport::from_results(
            spec,
            vec![SeedResult {
                seed: 1,
                train_accuracy: 1.0,
                val_accuracy: 1.0,
                test_accuracy: 1.0,
                wall_seconds: 0.1,
            }],
        );
        assert!(matches!(
            emit_report(&report, "yaml"),
            Err(CliError::Format(_))
        ));
        assert!(emit_report(&report, "table").is_ok());
        assert!(emit_report(&report, "full").is_ok());
    }

    #[test]
    fn records_round_trip_to_printed_precision() {
        let file = write_dataset(&noisy(90));
        let spec = spec_for(file.path(), Algorithm::Tao);
        let report = run_experiment(&spec).unwrap();
        let text = emit_report(&report, "records").unwrap();
        let parsed = parse_report(&text).unwrap();

        assert_eq!(parsed.spec, report.spec);
        assert_eq!(parsed.mean_test, report.mean_test);
        assert_eq!(parsed.std_test, report.std_test);
        assert_eq!(parsed.results.len(), report.results.len());
        for (p, r) in parsed.results.iter().zip(&report.results) {
            assert_eq!(p.seed, r.seed);
            assert_eq!(p.train_accuracy, r.train_accuracy);
            assert_eq!(p.val_accuracy, r.val_accuracy);
            assert_eq!(p.test_accuracy, r.test_accuracy);
            assert_eq!(p.wall_seconds, 0.0);
        }
        // Emitting the parsed report reproduces the stream byte for byte.
        assert_eq!(emit_report(&parsed, "records").unwrap(), text);
    }

    #[test]
    fn parse_rejects_malformed_streams() {
        assert!(parse_report("").is_err());
        assert!(parse_report("bogus record\n").is_err());
        let missing_summary = "run algo=cart depth=2 cr=0.75 pop_size=100 generations=5 \
             tao_passes=10 time_limit=600 split=0.64/0.16/0.2 std=population seeds=1 dataset=x\n\
             seed id=1 train=1 val=1 test=1\n";
        assert!(parse_report(missing_summary).is_err());
        let count_mismatch = format!(
            "{missing_summary}summary mean_test=1 std_test=0\nseed id=2 train=1 val=1 test=1\n"
        );
        assert!(parse_report(&count_mismatch).is_err());
    }

    #[test]
    fn experiment_propagates_file_and_seed_errors() {
        let spec = ExperimentSpec::new(
            PathBuf::from("/nonexistent/x.libsvm"),
            Algorithm::Cart,
            2,
            vec![1],
        );
        assert!(matches!(run_experiment(&spec), Err(CliError::Io { .. })));

        // Six rows: the 16% validation part floors to zero and errors.
        let file = write_dataset(&separable(6));
        let spec = ExperimentSpec::new(file.path().to_path_buf(), Algorithm::Cart, 2, vec![1]);
        assert!(matches!(
            run_experiment(&spec),
            Err(CliError::Seed { seed: 1, .. })
        ));
    }
}
