//! Memetic optimization of axis-aligned classification trees with a hard
//! depth bound.
//!
//! The pipeline: grow a population of randomized greedy trees
//! ([`greedy::init_population`]), refine each with alternating optimization
//! ([`tao::tao_optimize`]), then evolve the population with
//! encoding-level crossover, structural repair, and local search
//! ([`memetic::tmo_run`]). Single trees can also be trained directly via
//! [`greedy::grow_greedy_tree`] with or without the TAO refinement step.
//!
//! All randomized operations take explicit seeds or `Rng` handles and are
//! deterministic for a fixed seed, dataset, and configuration.

pub mod dataset;
pub mod error;
pub mod greedy;
pub mod memetic;
pub mod tao;
pub mod tree;

pub use dataset::{bootstrap_sample, parse_libsvm, split_dataset, Dataset, SplitSpec};
pub use error::{Error, Result};
pub use greedy::{
    best_axis_split, gini_impurity, grow_greedy_tree, init_population, SplitCandidate,
};
pub use memetic::{
    crossover, sample_partner, tmo_run, GenerationRecord, Population, TmoConfig, TmoOutcome,
    TmoReport,
};
pub use tao::{
    compute_reduced_sets, optimize_internal_node, tao_optimize, tao_optimize_traced, CareLabel,
    ReducedSets,
};
pub use tree::{EncodedTree, Node, Slot, Tree};
