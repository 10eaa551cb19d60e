//! Axis-aligned decision trees with a hard depth bound, their fixed-length
//! breadth-first encoding, and structural repair of arbitrary encodings.
//!
//! # Encoding
//!
//! A tree with depth bound `d` is encoded as a list of `2^d - 1` slots in
//! breadth-first order, left child first. Slot `z` has children `2z + 1`
//! and `2z + 2`. Internal nodes store their `(feature, threshold)` pair,
//! leaves above the maximum depth occupy a slot without parameters, and
//! absent positions are nil. Leaves at depth `d` exactly fill the level
//! below the last slot level, so they are omitted.
//!
//! # Repair
//!
//! Crossover recombines slot lists, so a decoded list may be structurally
//! inconsistent. [`EncodedTree::decode_and_repair`] resolves slots top-down:
//!
//! * a nil root collapses the whole encoding to a single leaf;
//! * a leaf or nil slot with a direct child slot holding branch parameters
//!   becomes a branch with a random feature and a random threshold drawn
//!   from that feature's observed range (the child subtrees survive);
//! * a nil slot below a branch becomes a leaf;
//! * slots below a resolved leaf are unreachable and ignored;
//! * branches on the last slot level get implicit depth-`d` leaves.
//!
//! Repair of a given encoding consumes randomness in slot order, so results
//! are reproducible for a fixed generator.

use rand::Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// A node of a bounded-depth classification tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Branch {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
    Leaf {
        label: usize,
    },
}

impl Node {
    fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Branch { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Routes `x` through this subtree. Ties on a threshold go left.
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { label } => return *label,
                Node::Branch {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }
}

/// A classification tree together with its depth bound.
///
/// Depth counts edges: a lone leaf has depth 0. The bound is part of the
/// tree's identity because it fixes the encoding length.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    root: Node,
    max_depth: usize,
}

impl Tree {
    /// Requires `max_depth >= 1` and the root's depth within the bound.
    pub fn new(root: Node, max_depth: usize) -> Result<Self> {
        if max_depth == 0 {
            return Err(Error::InvalidTree("depth bound must be at least 1".into()));
        }
        let depth = root.depth();
        if depth > max_depth {
            return Err(Error::InvalidTree(format!(
                "tree depth {depth} exceeds bound {max_depth}"
            )));
        }
        Ok(Tree { root, max_depth })
    }

    /// A single-leaf tree predicting `label`.
    pub fn leaf(label: usize, max_depth: usize) -> Result<Self> {
        Tree::new(Node::Leaf { label }, max_depth)
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    /// Actual depth of the grown tree (edges on the longest path).
    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    /// Routes `x` to a leaf. Ties on the threshold go left: the test is
    /// `x[feature] <= threshold`.
    pub fn predict(&self, x: &[f64]) -> usize {
        self.root.predict(x)
    }

    /// Fraction of rows predicted correctly.
    pub fn accuracy(&self, data: &Dataset) -> f64 {
        let correct = (0..data.len())
            .filter(|&i| self.predict(data.row(i)) == data.label(i))
            .count();
        correct as f64 / data.len() as f64
    }

    /// Number of rows predicted incorrectly.
    pub fn misclassified(&self, data: &Dataset) -> usize {
        (0..data.len())
            .filter(|&i| self.predict(data.row(i)) != data.label(i))
            .count()
    }

    /// Rewrites every leaf label to the majority class of the training rows
    /// routed to it. Ties pick the smallest class id; a leaf reached by no
    /// rows inherits the majority of the nearest ancestor that still has
    /// rows.
    pub fn assign_leaf_labels(&mut self, train: &Dataset) {
        let rows: Vec<usize> = (0..train.len()).collect();
        let counts = class_counts(train, &rows);
        let fallback = majority_label(&counts);
        relabel(&mut self.root, train, rows, fallback);
    }

    /// Encodes the tree as its breadth-first slot list.
    pub fn encode(&self) -> EncodedTree {
        let len = (1usize << self.max_depth) - 1;
        let mut slots = vec![Slot::Nil; len];
        fill_slots(&self.root, 0, &mut slots);
        EncodedTree {
            slots,
            depth: self.max_depth,
        }
    }

    /// Serializes to a line-based text form: a `depth=` header followed by
    /// one `index branch feature=.. threshold=..` or `index leaf label=..`
    /// line per node, indices in heap order.
    pub fn to_text(&self) -> String {
        let mut out = format!("depth={}\n", self.max_depth);
        let mut queue = std::collections::VecDeque::new();
        queue.push_back((&self.root, 0usize));
        while let Some((node, idx)) = queue.pop_front() {
            match node {
                Node::Leaf { label } => {
                    out.push_str(&format!("{idx} leaf label={label}\n"));
                }
                Node::Branch {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    out.push_str(&format!(
                        "{idx} branch feature={feature} threshold={threshold}\n"
                    ));
                    queue.push_back((left, 2 * idx + 1));
                    queue.push_back((right, 2 * idx + 2));
                }
            }
        }
        out
    }

    /// Parses the format produced by [`Tree::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::EmptyInput)?;
        let max_depth: usize = header
            .strip_prefix("depth=")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("expected depth=<n> header, found {header:?}"),
            })?;

        enum Parsed {
            Branch { feature: usize, threshold: f64 },
            Leaf { label: usize },
        }
        let mut nodes: std::collections::HashMap<usize, Parsed> = std::collections::HashMap::new();
        for (lineno, line) in lines {
            let lineno = lineno + 1;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| Error::Parse {
                line: lineno,
                message,
            };
            let mut fields = line.split_whitespace();
            let idx: usize = fields
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad("expected a node index".into()))?;
            let kind = fields
                .next()
                .ok_or_else(|| bad("missing node kind".into()))?;
            let parse_kv = |field: Option<&str>, key: &str| -> Result<String> {
                field
                    .and_then(|f| f.strip_prefix(key))
                    .and_then(|f| f.strip_prefix('='))
                    .map(str::to_owned)
                    .ok_or_else(|| bad(format!("expected {key}=<value>")))
            };
            let parsed = match kind {
                "branch" => {
                    let feature = parse_kv(fields.next(), "feature")?
                        .parse()
                        .map_err(|_| bad("unreadable feature".into()))?;
                    let threshold = parse_kv(fields.next(), "threshold")?
                        .parse()
                        .map_err(|_| bad("unreadable threshold".into()))?;
                    Parsed::Branch { feature, threshold }
                }
                "leaf" => {
                    let label = parse_kv(fields.next(), "label")?
                        .parse()
                        .map_err(|_| bad("unreadable label".into()))?;
                    Parsed::Leaf { label }
                }
                other => return Err(bad(format!("unknown node kind {other:?}"))),
            };
            if fields.next().is_some() {
                return Err(bad("trailing fields".into()));
            }
            if nodes.insert(idx, parsed).is_some() {
                return Err(bad(format!("duplicate node index {idx}")));
            }
        }

        fn build(
            nodes: &std::collections::HashMap<usize, Parsed>,
            idx: usize,
            used: &mut usize,
        ) -> Result<Node> {
            match nodes.get(&idx) {
                None => Err(Error::InvalidTree(format!("missing node at index {idx}"))),
                Some(Parsed::Leaf { label }) => {
                    *used += 1;
                    Ok(Node::Leaf { label: *label })
                }
                Some(Parsed::Branch { feature, threshold }) => {
                    *used += 1;
                    let left = build(nodes, 2 * idx + 1, used)?;
                    let right = build(nodes, 2 * idx + 2, used)?;
                    Ok(Node::Branch {
                        feature: *feature,
                        threshold: *threshold,
                        left: Box::new(left),
                        right: Box::new(right),
                    })
                }
            }
        }
        let mut used = 0;
        let root = build(&nodes, 0, &mut used)?;
        if used != nodes.len() {
            return Err(Error::InvalidTree(format!(
                "{} node lines unreachable from the root",
                nodes.len() - used
            )));
        }
        Tree::new(root, max_depth)
    }
}

fn fill_slots(node: &Node, pos: usize, slots: &mut [Slot]) {
    if pos >= slots.len() {
        // A node past the last slot level is a depth-d leaf; it is implied
        // by its parent branch and not stored.
        debug_assert!(matches!(node, Node::Leaf { .. }));
        return;
    }
    match node {
        Node::Leaf { .. } => slots[pos] = Slot::Leaf,
        Node::Branch {
            feature,
            threshold,
            left,
            right,
        } => {
            slots[pos] = Slot::Branch {
                feature: *feature,
                threshold: *threshold,
            };
            fill_slots(left, 2 * pos + 1, slots);
            fill_slots(right, 2 * pos + 2, slots);
        }
    }
}

fn relabel(node: &mut Node, train: &Dataset, rows: Vec<usize>, inherited: usize) {
    let fallback = if rows.is_empty() {
        inherited
    } else {
        majority_label(&class_counts(train, &rows))
    };
    match node {
        Node::Leaf { label } => *label = fallback,
        Node::Branch {
            feature,
            threshold,
            left,
            right,
        } => {
            let (l, r) = partition_rows(train, &rows, *feature, *threshold);
            relabel(left, train, l, fallback);
            relabel(right, train, r, fallback);
        }
    }
}

pub(crate) fn class_counts(data: &Dataset, rows: &[usize]) -> Vec<usize> {
    let mut counts = vec![0usize; data.class_count()];
    for &i in rows {
        counts[data.label(i)] += 1;
    }
    counts
}

/// Index of the largest count; ties pick the smallest class id.
pub(crate) fn majority_label(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &count) in counts.iter().enumerate() {
        if count > counts[best] {
            best = c;
        }
    }
    best
}

pub(crate) fn partition_rows(
    data: &Dataset,
    rows: &[usize],
    feature: usize,
    threshold: f64,
) -> (Vec<usize>, Vec<usize>) {
    let mut left = Vec::new();
    let mut right = Vec::new();
    for &i in rows {
        if data.value(i, feature) <= threshold {
            left.push(i);
        } else {
            right.push(i);
        }
    }
    (left, right)
}

/// One slot of an encoded tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slot {
    Branch { feature: usize, threshold: f64 },
    Leaf,
    Nil,
}

impl Slot {
    fn is_branch(&self) -> bool {
        matches!(self, Slot::Branch { .. })
    }
}

/// Fixed-length breadth-first encoding of a tree with depth bound `depth`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedTree {
    slots: Vec<Slot>,
    depth: usize,
}

impl EncodedTree {
    /// Requires `depth >= 1` and exactly `2^depth - 1` slots.
    pub fn new(slots: Vec<Slot>, depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidEncoding("depth must be at least 1".into()));
        }
        let expected = (1usize << depth) - 1;
        if slots.len() != expected {
            return Err(Error::InvalidEncoding(format!(
                "{} slots for depth {depth}, expected {expected}",
                slots.len()
            )));
        }
        Ok(EncodedTree { slots, depth })
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Decodes the slot list into a valid tree, repairing inconsistencies
    /// as described in the module docs, then labels leaves by training-set
    /// majority. `train` must be nonempty and cover every feature index
    /// used by the slots.
    pub fn decode_and_repair<R: Rng>(&self, train: &Dataset, rng: &mut R) -> Tree {
        let m = self.slots.len();
        let mut resolved = vec![ResolvedSlot::Unreached; m];
        resolved[0] = if self.slots[0] == Slot::Nil {
            ResolvedSlot::Leaf
        } else {
            self.resolve(0, train, rng)
        };
        for z in 1..m {
            if let ResolvedSlot::Branch(..) = resolved[(z - 1) / 2] {
                resolved[z] = self.resolve(z, train, rng);
            }
        }

        fn build(resolved: &[ResolvedSlot], z: usize) -> Node {
            if z >= resolved.len() {
                return Node::Leaf { label: 0 };
            }
            match resolved[z] {
                ResolvedSlot::Branch(feature, threshold) => Node::Branch {
                    feature,
                    threshold,
                    left: Box::new(build(resolved, 2 * z + 1)),
                    right: Box::new(build(resolved, 2 * z + 2)),
                },
                ResolvedSlot::Leaf => Node::Leaf { label: 0 },
                ResolvedSlot::Unreached => unreachable!("child of a leaf slot"),
            }
        }

        let mut tree = Tree {
            root: build(&resolved, 0),
            max_depth: self.depth,
        };
        tree.assign_leaf_labels(train);
        tree
    }

    /// Kind of a slot after repair, given its raw children. A leaf or nil
    /// slot whose direct child carries branch parameters must itself become
    /// a branch to keep that subtree reachable; its parameters are drawn at
    /// random.
    fn resolve<R: Rng>(&self, z: usize, train: &Dataset, rng: &mut R) -> ResolvedSlot {
        match self.slots[z] {
            Slot::Branch { feature, threshold } => ResolvedSlot::Branch(feature, threshold),
            Slot::Leaf | Slot::Nil => {
                let left = 2 * z + 1;
                let right = 2 * z + 2;
                let rescued = left < self.slots.len()
                    && (self.slots[left].is_branch() || self.slots[right].is_branch());
                if rescued {
                    let feature = rng.gen_range(0..train.feature_count());
                    let (lo, hi) = train.feature_range(feature);
                    let threshold = if lo < hi { rng.gen_range(lo..hi) } else { lo };
                    ResolvedSlot::Branch(feature, threshold)
                } else {
                    ResolvedSlot::Leaf
                }
            }
        }
    }
}

#[derive(Clone, Copy)]
enum ResolvedSlot {
    Unreached,
    Branch(usize, f64),
    Leaf,
}
