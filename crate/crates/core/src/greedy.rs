//! Greedy tree induction: Gini-impurity splits, depth-bounded recursive
//! growth, and randomized-forest-style population seeding.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::{bootstrap_with_rng, Dataset};
use crate::error::{Error, Result};
use crate::memetic::Population;
use crate::tao::tao_optimize;
use crate::tree::{class_counts, majority_label, partition_rows, Node, Tree};

/// A candidate split and the impurity decrease it achieves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub impurity_decrease: f64,
}

/// Gini impurity `1 - sum((n_c / n)^2)` of a class count vector.
/// Errors when the counts sum to zero.
pub fn gini_impurity(counts: &[usize]) -> Result<f64> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::InvalidConfig(
            "gini impurity of zero samples is undefined".into(),
        ));
    }
    Ok(gini_from(counts, total))
}

fn gini_from(counts: &[usize], total: usize) -> f64 {
    debug_assert!(total > 0);
    let n = total as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let f = c as f64 / n;
            f * f
        })
        .sum::<f64>()
}

/// Finds the axis-aligned split of `rows` with the largest strictly
/// positive Gini impurity decrease, considering only features in `pool`.
///
/// Thresholds are midpoints between consecutive distinct values. Ties are
/// broken toward the lower feature index, then the lower threshold.
/// Returns `None` when no split strictly reduces impurity.
pub fn best_axis_split(data: &Dataset, rows: &[usize], pool: &[usize]) -> Option<SplitCandidate> {
    if rows.is_empty() {
        return None;
    }
    let classes = data.class_count();
    let node_counts = class_counts(data, rows);
    let n = rows.len();
    let parent = gini_from(&node_counts, n);

    let mut features: Vec<usize> = pool.to_vec();
    features.sort_unstable();
    features.dedup();

    let mut best: Option<SplitCandidate> = None;
    let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(n);
    for &feature in &features {
        sorted.clear();
        sorted.extend(
            rows.iter()
                .map(|&i| (data.value(i, feature), data.label(i))),
        );
        sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

        let mut left = vec![0usize; classes];
        let mut right = node_counts.clone();
        let mut n_left = 0usize;
        let mut pos = 0usize;
        // Sweep distinct-value groups from the left; each boundary between
        // groups is one midpoint candidate.
        while pos < n {
            let value = sorted[pos].0;
            while pos < n && sorted[pos].0 == value {
                let label = sorted[pos].1;
                left[label] += 1;
                right[label] -= 1;
                n_left += 1;
                pos += 1;
            }
            if pos == n {
                break;
            }
            let threshold = (value + sorted[pos].0) / 2.0;
            let n_right = n - n_left;
            let weighted = (n_left as f64 * gini_from(&left, n_left)
                + n_right as f64 * gini_from(&right, n_right))
                / n as f64;
            let decrease = parent - weighted;
            if decrease > 0.0 && best.is_none_or(|b| decrease > b.impurity_decrease) {
                best = Some(SplitCandidate {
                    feature,
                    threshold,
                    impurity_decrease: decrease,
                });
            }
        }
    }
    best
}

/// Grows a depth-bounded tree by recursive greedy splitting.
///
/// With `bootstrap` set, growth runs on an `n`-sized resample drawn from
/// `rng` first. With `subspace = Some(m)`, each internal node considers a
/// fresh uniform sample of `m` distinct features (all features when `m >=
/// p`). Recursion stops at the depth bound, on pure nodes, and when no
/// split strictly decreases impurity; leaves take the majority label of
/// their rows, ties toward the smaller class id.
pub fn grow_greedy_tree<R: Rng>(
    train: &Dataset,
    max_depth: usize,
    subspace: Option<usize>,
    bootstrap: bool,
    rng: &mut R,
) -> Result<Tree> {
    if max_depth == 0 {
        return Err(Error::InvalidConfig(
            "depth bound must be at least 1".into(),
        ));
    }
    let resampled;
    let grow_on = if bootstrap {
        resampled = bootstrap_with_rng(train, rng);
        &resampled
    } else {
        train
    };
    let rows: Vec<usize> = (0..grow_on.len()).collect();
    let root = grow_node(grow_on, rows, 0, max_depth, subspace, rng);
    Tree::new(root, max_depth)
}

fn grow_node<R: Rng>(
    data: &Dataset,
    rows: Vec<usize>,
    level: usize,
    max_depth: usize,
    subspace: Option<usize>,
    rng: &mut R,
) -> Node {
    let counts = class_counts(data, &rows);
    let majority = majority_label(&counts);
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    if level == max_depth || pure {
        return Node::Leaf { label: majority };
    }

    let p = data.feature_count();
    let pool: Vec<usize> = match subspace {
        Some(m) if m < p => {
            let mut picked = rand::seq::index::sample(rng, p, m).into_vec();
            picked.sort_unstable();
            picked
        }
        _ => (0..p).collect(),
    };

    match best_axis_split(data, &rows, &pool) {
        None => Node::Leaf { label: majority },
        Some(split) => {
            let (left_rows, right_rows) =
                partition_rows(data, &rows, split.feature, split.threshold);
            debug_assert!(!left_rows.is_empty() && !right_rows.is_empty());
            let left = grow_node(data, left_rows, level + 1, max_depth, subspace, rng);
            let right = grow_node(data, right_rows, level + 1, max_depth, subspace, rng);
            Node::Branch {
                feature: split.feature,
                threshold: split.threshold,
                left: Box::new(left),
                right: Box::new(right),
            }
        }
    }
}

/// Seeds a population of `k` randomized greedy trees, each refined by TAO
/// on `train` and scored by full-training-set accuracy.
///
/// Member `i` draws from an independent stream seeded with
/// `master_seed ^ i`, growing on a bootstrap resample with a fresh
/// `ceil(sqrt(p))`-feature pool per node. Members are built in parallel;
/// results are ordered by member index.
pub fn init_population(
    train: &Dataset,
    k: usize,
    max_depth: usize,
    tao_passes: usize,
    master_seed: u64,
) -> Result<Population> {
    if k == 0 {
        return Err(Error::InvalidConfig(
            "population size must be positive".into(),
        ));
    }
    let m = (train.feature_count() as f64).sqrt().ceil() as usize;
    let members: Result<Vec<Tree>> = (0..k)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(master_seed ^ i as u64);
            let grown = grow_greedy_tree(train, max_depth, Some(m), true, &mut rng)?;
            Ok(tao_optimize(&grown, train, tao_passes))
        })
        .collect();
    Population::new(members?, train)
}
