//! Alternating optimization of a fixed tree structure.
//!
//! One pass sweeps the internal levels from the deepest up to the root.
//! For every internal node the training rows routed through it are split
//! into those that a given child subtree would classify correctly and
//! those it would not; the node's test is then re-fit to send each row
//! toward a correct subtree whenever possible. Rows both subtrees treat
//! the same way carry no signal for the node and are ignored. Each level
//! update is followed by a majority relabel of the leaves, so the training
//! misclassification count never increases from pass to pass.

use crate::dataset::Dataset;
use crate::tree::{class_counts, majority_label, Node, Tree};

/// Routing preference of one row at one internal node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CareLabel {
    /// Only the left subtree classifies the row correctly.
    PreferLeft,
    /// Only the right subtree classifies the row correctly.
    PreferRight,
    /// Both subtrees agree on the row; its routing cannot matter.
    DontCare,
}

/// Rows routed through each node, indexed by heap position (root 0,
/// children of `z` at `2z + 1` and `2z + 2`).
#[derive(Debug, Clone)]
pub struct ReducedSets {
    sets: Vec<Vec<usize>>,
}

impl ReducedSets {
    /// Row indices reaching heap position `node`; empty for absent nodes.
    pub fn rows(&self, node: usize) -> &[usize] {
        &self.sets[node]
    }

    /// Number of heap positions, `2^(d+1) - 1` for depth bound `d`.
    pub fn node_count(&self) -> usize {
        self.sets.len()
    }
}

/// Routes every row of `data` through `t` and records the visited nodes.
pub fn compute_reduced_sets(t: &Tree, data: &Dataset) -> ReducedSets {
    let flat = FlatTree::from_tree(t);
    ReducedSets {
        sets: flat.route(data),
    }
}

/// Re-fits one internal node's `(feature, threshold)` against routing
/// preferences. `care[i]` labels `rows[i]`. Candidates are midpoints
/// between consecutive distinct values of each feature over `rows`; the
/// incumbent is kept unless some candidate has strictly fewer violations,
/// with candidate ties going to the lowest feature, then the lowest
/// threshold.
pub fn optimize_internal_node(
    data: &Dataset,
    rows: &[usize],
    care: &[CareLabel],
    incumbent: (usize, f64),
) -> (usize, f64) {
    assert_eq!(rows.len(), care.len(), "one care label per row");

    let violations = |feature: usize, threshold: f64| -> usize {
        rows.iter()
            .zip(care)
            .filter(|(&i, &c)| match c {
                CareLabel::PreferLeft => data.value(i, feature) > threshold,
                CareLabel::PreferRight => data.value(i, feature) <= threshold,
                CareLabel::DontCare => false,
            })
            .count()
    };

    let mut best = incumbent;
    let mut best_violations = violations(incumbent.0, incumbent.1);
    let prefer_left_total = care.iter().filter(|&&c| c == CareLabel::PreferLeft).count();

    let mut sorted: Vec<(f64, CareLabel)> = Vec::with_capacity(rows.len());
    for feature in 0..data.feature_count() {
        sorted.clear();
        sorted.extend(
            rows.iter()
                .zip(care)
                .map(|(&i, &c)| (data.value(i, feature), c)),
        );
        sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

        // Sweep left over distinct-value groups. With everything routed
        // right, exactly the PreferLeft rows are violated; moving one row
        // left flips its contribution.
        let mut current = prefer_left_total;
        let mut pos = 0;
        while pos < sorted.len() {
            let value = sorted[pos].0;
            while pos < sorted.len() && sorted[pos].0 == value {
                match sorted[pos].1 {
                    CareLabel::PreferLeft => current -= 1,
                    CareLabel::PreferRight => current += 1,
                    CareLabel::DontCare => {}
                }
                pos += 1;
            }
            if pos == sorted.len() {
                break;
            }
            if current < best_violations {
                best = (feature, (value + sorted[pos].0) / 2.0);
                best_violations = current;
            }
        }
    }
    best
}

/// Optimizes `t` on `data` for up to `max_passes` sweeps, stopping early
/// once a pass no longer lowers the misclassification count. Structure is
/// preserved: only node parameters and leaf labels change.
pub fn tao_optimize(t: &Tree, data: &Dataset, max_passes: usize) -> Tree {
    tao_optimize_traced(t, data, max_passes).0
}

/// [`tao_optimize`] plus the misclassification count before any pass and
/// after each completed pass. The returned counts never increase.
pub fn tao_optimize_traced(t: &Tree, data: &Dataset, max_passes: usize) -> (Tree, Vec<usize>) {
    let mut flat = FlatTree::from_tree(t);
    let mut trace = vec![flat.misclassified(data)];

    for _ in 0..max_passes {
        let before = *trace.last().unwrap();
        for level in (0..flat.depth).rev() {
            let sets = flat.route(data);
            let first = (1 << level) - 1;
            let last = (1 << (level + 1)) - 1;
            #[allow(clippy::needless_range_loop)]
            for z in first..last {
                let FlatNode::Branch { feature, threshold } = flat.nodes[z] else {
                    continue;
                };
                let rows = &sets[z];
                if rows.is_empty() {
                    continue;
                }
                let care: Vec<CareLabel> = rows
                    .iter()
                    .map(|&i| flat.care_at(z, data.row(i), data.label(i)))
                    .collect();
                let tuned = optimize_internal_node(data, rows, &care, (feature, threshold));
                flat.nodes[z] = FlatNode::Branch {
                    feature: tuned.0,
                    threshold: tuned.1,
                };
            }
            let sets = flat.route(data);
            flat.relabel_leaves(data, &sets);
        }
        let after = flat.misclassified(data);
        debug_assert!(
            after <= before,
            "pass increased errors: {before} -> {after}"
        );
        trace.push(after);
        if after >= before {
            break;
        }
    }
    (flat.to_tree(), trace)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum FlatNode {
    Absent,
    Branch { feature: usize, threshold: f64 },
    Leaf { label: usize },
}

/// Heap-layout mirror of a tree, convenient for level sweeps.
#[derive(Debug, Clone)]
struct FlatTree {
    nodes: Vec<FlatNode>,
    depth: usize,
}

impl FlatTree {
    fn from_tree(t: &Tree) -> FlatTree {
        let depth = t.max_depth();
        let mut nodes = vec![FlatNode::Absent; (1 << (depth + 1)) - 1];
        fn place(node: &Node, z: usize, nodes: &mut [FlatNode]) {
            match node {
                Node::Leaf { label } => nodes[z] = FlatNode::Leaf { label: *label },
                Node::Branch {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    nodes[z] = FlatNode::Branch {
                        feature: *feature,
                        threshold: *threshold,
                    };
                    place(left, 2 * z + 1, nodes);
                    place(right, 2 * z + 2, nodes);
                }
            }
        }
        place(t.root(), 0, &mut nodes);
        FlatTree { nodes, depth }
    }

    fn to_tree(&self) -> Tree {
        fn build(nodes: &[FlatNode], z: usize) -> Node {
            match nodes[z] {
                FlatNode::Leaf { label } => Node::Leaf { label },
                FlatNode::Branch { feature, threshold } => Node::Branch {
                    feature,
                    threshold,
                    left: Box::new(build(nodes, 2 * z + 1)),
                    right: Box::new(build(nodes, 2 * z + 2)),
                },
                FlatNode::Absent => unreachable!("absent node reached from the root"),
            }
        }
        Tree::new(build(&self.nodes, 0), self.depth)
            .expect("flat tree stays within its depth bound")
    }

    fn predict_from(&self, mut z: usize, x: &[f64]) -> usize {
        loop {
            match self.nodes[z] {
                FlatNode::Leaf { label } => return label,
                FlatNode::Branch { feature, threshold } => {
                    z = if x[feature] <= threshold {
                        2 * z + 1
                    } else {
                        2 * z + 2
                    };
                }
                FlatNode::Absent => unreachable!("routing reached an absent node"),
            }
        }
    }

    fn misclassified(&self, data: &Dataset) -> usize {
        (0..data.len())
            .filter(|&i| self.predict_from(0, data.row(i)) != data.label(i))
            .count()
    }

    /// Row sets per heap position.
    fn route(&self, data: &Dataset) -> Vec<Vec<usize>> {
        let mut sets = vec![Vec::new(); self.nodes.len()];
        for i in 0..data.len() {
            let mut z = 0;
            loop {
                sets[z].push(i);
                match self.nodes[z] {
                    FlatNode::Leaf { .. } => break,
                    FlatNode::Branch { feature, threshold } => {
                        z = if data.value(i, feature) <= threshold {
                            2 * z + 1
                        } else {
                            2 * z + 2
                        };
                    }
                    FlatNode::Absent => unreachable!("routing reached an absent node"),
                }
            }
        }
        sets
    }

    /// Preference of row `x` with class `y` at branch `z`, judged by what
    /// each child subtree would predict.
    fn care_at(&self, z: usize, x: &[f64], y: usize) -> CareLabel {
        let left_ok = self.predict_from(2 * z + 1, x) == y;
        let right_ok = self.predict_from(2 * z + 2, x) == y;
        match (left_ok, right_ok) {
            (true, false) => CareLabel::PreferLeft,
            (false, true) => CareLabel::PreferRight,
            _ => CareLabel::DontCare,
        }
    }

    fn relabel_leaves(&mut self, data: &Dataset, sets: &[Vec<usize>]) {
        for z in 0..self.nodes.len() {
            if !matches!(self.nodes[z], FlatNode::Leaf { .. }) {
                continue;
            }
            let mut node = z;
            // An empty leaf borrows the majority of the nearest ancestor
            // that still sees rows; the root always does.
            while sets[node].is_empty() && node > 0 {
                node = (node - 1) / 2;
            }
            let label = majority_label(&class_counts(data, &sets[node]));
            self.nodes[z] = FlatNode::Leaf { label };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greedy::grow_greedy_tree;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line(xs: &[f64], ys: &[usize]) -> Dataset {
        let rows = xs.iter().map(|&x| vec![x]).collect();
        Dataset::from_rows(rows, ys.to_vec(), 2).unwrap()
    }

    fn stump(feature: usize, threshold: f64, depth: usize) -> Tree {
        Tree::new(
            Node::Branch {
                feature,
                threshold,
                left: Box::new(Node::Leaf { label: 0 }),
                right: Box::new(Node::Leaf { label: 1 }),
            },
            depth,
        )
        .unwrap()
    }

    #[test]
    fn node_moves_to_zero_violation_threshold() {
        let d = line(&[1.0, 2.0, 3.0, 4.0], &[0, 0, 1, 1]);
        let care = [
            CareLabel::PreferLeft,
            CareLabel::PreferLeft,
            CareLabel::PreferRight,
            CareLabel::PreferRight,
        ];
        let (feature, threshold) = optimize_internal_node(&d, &[0, 1, 2, 3], &care, (0, 0.5));
        assert_eq!(feature, 0);
        assert_eq!(threshold, 2.5);
    }

    #[test]
    fn node_keeps_incumbent_when_nothing_beats_it() {
        // Preferences run against the feature order; every midpoint is as
        // bad as the incumbent or worse.
        let d = line(&[1.0, 2.0, 3.0, 4.0], &[0, 0, 1, 1]);
        let care = [
            CareLabel::PreferRight,
            CareLabel::PreferRight,
            CareLabel::PreferLeft,
            CareLabel::PreferLeft,
        ];
        let kept = optimize_internal_node(&d, &[0, 1, 2, 3], &care, (0, 0.5));
        assert_eq!(kept, (0, 0.5));
    }

    #[test]
    fn dont_care_rows_have_no_influence() {
        let d = line(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0, 0, 1, 1, 1]);
        let care = [
            CareLabel::PreferLeft,
            CareLabel::DontCare,
            CareLabel::DontCare,
            CareLabel::DontCare,
            CareLabel::PreferRight,
        ];
        // The incumbent routes the PreferLeft row right, one violation.
        let (_, threshold) = optimize_internal_node(&d, &[0, 1, 2, 3, 4], &care, (0, 0.5));
        // Any midpoint in (1, 5) is optimal; the lowest wins.
        assert_eq!(threshold, 1.5);
    }

    #[test]
    fn reduced_sets_follow_routing() {
        let d = line(&[1.0, 2.0, 3.0, 4.0], &[0, 0, 1, 1]);
        let t = stump(0, 2.5, 2);
        let sets = compute_reduced_sets(&t, &d);
        assert_eq!(sets.node_count(), 7);
        assert_eq!(sets.rows(0), &[0, 1, 2, 3]);
        assert_eq!(sets.rows(1), &[0, 1]);
        assert_eq!(sets.rows(2), &[2, 3]);
        assert!(sets.rows(3).is_empty());
    }

    #[test]
    fn tao_fixes_a_bad_stump() {
        let d = line(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[0, 0, 0, 1, 1, 1]);
        let bad = stump(0, 0.5, 1);
        let (fixed, trace) = tao_optimize_traced(&bad, &d, 10);
        assert_eq!(fixed.misclassified(&d), 0);
        assert_eq!(trace.first().copied(), Some(3));
        assert_eq!(trace.last().copied(), Some(0));
    }

    #[test]
    fn tao_preserves_structure() {
        let d = line(&[1.0, 2.0, 3.0, 4.0], &[0, 1, 0, 1]);
        let t = stump(0, 2.5, 1);
        let optimized = tao_optimize(&t, &d, 10);
        assert_eq!(optimized.depth(), 1);
        assert_eq!(optimized.max_depth(), 1);
    }

    #[test]
    fn tao_zero_passes_is_identity() {
        let d = line(&[1.0, 2.0], &[0, 1]);
        let t = stump(0, 0.25, 1);
        let (same, trace) = tao_optimize_traced(&t, &d, 0);
        assert_eq!(same, t);
        assert_eq!(trace, vec![1]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn tao_never_increases_errors(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 40 + (seed as usize % 40);
            let mut rows = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
                labels.push(usize::from(x[0] * x[1] > 0.0));
                rows.push(x);
            }
            let d = Dataset::from_rows(rows, labels, 2).unwrap();
            let start = grow_greedy_tree(&d, 3, Some(1), true, &mut rng).unwrap();
            let (_, trace) = tao_optimize_traced(&start, &d, 8);
            for pair in trace.windows(2) {
                prop_assert!(pair[1] <= pair[0]);
            }
        }
    }
}
