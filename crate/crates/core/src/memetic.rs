//! Population-level memetic search: encoding crossover plus local
//! optimization of every offspring.
//!
//! One run keeps a population of `k` trees. Each generation draws a single
//! bootstrap resample shared by all member updates, then sweeps the
//! population in index order: member `i` picks a uniform partner `j != i`,
//! their encodings are recombined slot by slot, the offspring is decoded,
//! repaired, locally optimized on the bootstrap, and scored on the full
//! training set. The offspring replaces member `i` only on a strict
//! fitness improvement, so per-member fitness never decreases.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

use crate::dataset::{bootstrap_with_rng, Dataset};
use crate::error::{Error, Result};
use crate::tao::tao_optimize;
use crate::tree::{EncodedTree, Slot, Tree};

/// Parameters of a memetic run.
#[derive(Debug, Clone, PartialEq)]
pub struct TmoConfig {
    pub population_size: usize,
    pub max_depth: usize,
    /// Per-slot probability of inheriting from the partner.
    pub cross_rate: f64,
    pub generations: usize,
    /// Wall-clock budget in seconds, checked between member updates.
    pub time_limit: f64,
    pub seed: u64,
    /// Pass budget for each offspring's local optimization.
    pub tao_passes: usize,
}

impl Default for TmoConfig {
    fn default() -> Self {
        TmoConfig {
            population_size: 100,
            max_depth: 2,
            cross_rate: 0.75,
            generations: 5,
            time_limit: 600.0,
            seed: 0,
            tao_passes: 10,
        }
    }
}

impl TmoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::InvalidConfig(format!(
                "population size {} must be at least 2",
                self.population_size
            )));
        }
        if self.max_depth == 0 {
            return Err(Error::InvalidConfig(
                "depth bound must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.cross_rate) {
            return Err(Error::InvalidConfig(format!(
                "crossover rate {} outside [0, 1]",
                self.cross_rate
            )));
        }
        if !self.time_limit.is_finite() || self.time_limit <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "time limit {} must be positive",
                self.time_limit
            )));
        }
        Ok(())
    }
}

/// A population of trees with cached full-training-set fitness.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    members: Vec<Tree>,
    fitness: Vec<f64>,
}

impl Population {
    /// Scores `members` on `train`. Errors on an empty member list.
    pub fn new(members: Vec<Tree>, train: &Dataset) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidConfig("population must not be empty".into()));
        }
        let fitness = members.iter().map(|t| t.accuracy(train)).collect();
        Ok(Population { members, fitness })
    }

    pub(crate) fn from_parts(members: Vec<Tree>, fitness: Vec<f64>) -> Self {
        debug_assert_eq!(members.len(), fitness.len());
        Population { members, fitness }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[Tree] {
        &self.members
    }

    /// Cached fitness values, aligned with [`Population::members`].
    pub fn fitness(&self) -> &[f64] {
        &self.fitness
    }

    /// Index of the fittest member; ties pick the lowest index.
    pub fn best_index(&self) -> usize {
        let mut best = 0;
        for (i, &f) in self.fitness.iter().enumerate() {
            if f > self.fitness[best] {
                best = i;
            }
        }
        best
    }

    pub fn best(&self) -> (&Tree, f64) {
        let i = self.best_index();
        (&self.members[i], self.fitness[i])
    }
}

/// Uniform partner index over `{0, .., k-1} \ {i}`. Requires `k >= 2` and
/// `i < k`.
pub fn sample_partner<R: Rng>(i: usize, k: usize, rng: &mut R) -> usize {
    assert!(k >= 2, "need at least two members to pick a partner");
    assert!(i < k, "member index {i} out of range for population of {k}");
    let draw = rng.gen_range(0..k - 1);
    draw + usize::from(draw >= i)
}

/// Slot-wise recombination: one uniform draw per slot in list order; the
/// slot comes from `partner` when the draw is below `cross_rate`, otherwise
/// from `current`. Errors when the encodings have different depths.
pub fn crossover<R: Rng>(
    current: &EncodedTree,
    partner: &EncodedTree,
    cross_rate: f64,
    rng: &mut R,
) -> Result<EncodedTree> {
    if current.depth() != partner.depth() {
        return Err(Error::DepthMismatch {
            left: current.depth(),
            right: partner.depth(),
        });
    }
    let slots: Vec<Slot> = current
        .slots()
        .iter()
        .zip(partner.slots())
        .map(|(&own, &other)| {
            let draw: f64 = rng.gen();
            if draw < cross_rate {
                other
            } else {
                own
            }
        })
        .collect();
    EncodedTree::new(slots, current.depth())
}

/// Snapshot of one completed generation.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub elapsed_seconds: f64,
    /// Fitness of every member at the end of the generation.
    pub member_fitness: Vec<f64>,
}

/// Per-generation records of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TmoReport {
    pub generations: Vec<GenerationRecord>,
    /// Whether the wall-clock budget cut the run short.
    pub timed_out: bool,
}

/// Result of [`tmo_run`]: the best tree found, the evolved population, and
/// the per-generation report.
#[derive(Debug, Clone)]
pub struct TmoOutcome {
    pub best: Tree,
    pub best_fitness: f64,
    pub population: Population,
    pub report: TmoReport,
}

/// Runs the memetic loop on an already-initialized population.
///
/// Requires `initial.len() == cfg.population_size`; every member must fit
/// `cfg.max_depth` and carry fitness computed on this same `train`. The
/// result is deterministic for fixed inputs whenever the time limit does
/// not trigger.
pub fn tmo_run(train: &Dataset, cfg: &TmoConfig, initial: Population) -> Result<TmoOutcome> {
    cfg.validate()?;
    if initial.len() != cfg.population_size {
        return Err(Error::InvalidConfig(format!(
            "population holds {} members, config says {}",
            initial.len(),
            cfg.population_size
        )));
    }
    if let Some(deep) = initial
        .members()
        .iter()
        .find(|t| t.max_depth() != cfg.max_depth)
    {
        return Err(Error::InvalidConfig(format!(
            "member depth bound {} does not match config depth {}",
            deep.max_depth(),
            cfg.max_depth
        )));
    }

    let k = cfg.population_size;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start = Instant::now();

    let Population {
        mut members,
        mut fitness,
    } = initial;
    let mut best_index = 0;
    for i in 1..k {
        if fitness[i] > fitness[best_index] {
            best_index = i;
        }
    }
    let mut best = members[best_index].clone();
    let mut best_fitness = fitness[best_index];

    let mut records = Vec::with_capacity(cfg.generations);
    let mut timed_out = false;

    'generations: for generation in 0..cfg.generations {
        let boot = bootstrap_with_rng(train, &mut rng);
        for i in 0..k {
            if start.elapsed().as_secs_f64() >= cfg.time_limit {
                timed_out = true;
                break 'generations;
            }
            let j = sample_partner(i, k, &mut rng);
            let offspring_code = crossover(
                &members[i].encode(),
                &members[j].encode(),
                cfg.cross_rate,
                &mut rng,
            )?;
            let offspring = offspring_code.decode_and_repair(train, &mut rng);
            let offspring = tao_optimize(&offspring, &boot, cfg.tao_passes);
            let score = offspring.accuracy(train);
            if score > fitness[i] {
                members[i] = offspring;
                fitness[i] = score;
                if score > best_fitness {
                    best = members[i].clone();
                    best_fitness = score;
                }
            }
        }
        records.push(GenerationRecord {
            generation,
            best_fitness,
            mean_fitness: fitness.iter().sum::<f64>() / k as f64,
            elapsed_seconds: start.elapsed().as_secs_f64(),
            member_fitness: fitness.clone(),
        });
    }

    Ok(TmoOutcome {
        best,
        best_fitness,
        population: Population::from_parts(members, fitness),
        report: TmoReport {
            generations: records,
            timed_out,
        },
    })
}
