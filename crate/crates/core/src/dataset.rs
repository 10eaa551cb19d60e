//! Dense classification datasets, LIBSVM parsing, and seeded resampling.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A dense classification dataset with `n` rows, `p` features, and `C`
/// classes. Labels are contiguous class ids in `[0, C-1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Vec<f64>,
    labels: Vec<usize>,
    rows: usize,
    cols: usize,
    classes: usize,
}

impl Dataset {
    /// Builds a dataset from a row-major value buffer.
    ///
    /// Requires `n >= 1`, `p >= 1`, `C >= 2`, `values.len() == n * p`, and
    /// every label in `[0, C-1]`.
    pub fn new(
        values: Vec<f64>,
        labels: Vec<usize>,
        rows: usize,
        cols: usize,
        classes: usize,
    ) -> Result<Self> {
        if rows == 0 {
            return Err(Error::InvalidDataset("dataset has no rows".into()));
        }
        if cols == 0 {
            return Err(Error::InvalidDataset("dataset has no features".into()));
        }
        if classes < 2 {
            return Err(Error::InvalidDataset(format!(
                "need at least two classes, found {classes}"
            )));
        }
        if values.len() != rows * cols {
            return Err(Error::InvalidDataset(format!(
                "value buffer holds {} entries, expected {} ({rows} rows x {cols} features)",
                values.len(),
                rows * cols
            )));
        }
        if labels.len() != rows {
            return Err(Error::InvalidDataset(format!(
                "{} labels for {rows} rows",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::InvalidDataset(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
        Ok(Dataset {
            values,
            labels,
            rows,
            cols,
            classes,
        })
    }

    /// Builds a dataset from per-row feature vectors.
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::InvalidDataset(format!(
                "row {bad} has {} features, expected {p}",
                rows[bad].len()
            )));
        }
        let values = rows.into_iter().flatten().collect();
        Dataset::new(values, labels, n, p, classes)
    }

    /// Number of rows `n`.
    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    /// Number of features `p`.
    pub fn feature_count(&self) -> usize {
        self.cols
    }

    /// Number of classes `C`.
    pub fn class_count(&self) -> usize {
        self.classes
    }

    /// Feature vector of row `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    /// Value of feature `j` in row `i`.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    /// Class id of row `i`.
    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Observed (min, max) of feature `j`.
    pub fn feature_range(&self, j: usize) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.rows {
            let v = self.value(i, j);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// New dataset holding the given rows (repeats allowed). Class count is
    /// inherited even when some class no longer occurs.
    pub(crate) fn subset(&self, rows: &[usize]) -> Dataset {
        let mut values = Vec::with_capacity(rows.len() * self.cols);
        let mut labels = Vec::with_capacity(rows.len());
        for &i in rows {
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            values,
            labels,
            rows: rows.len(),
            cols: self.cols,
            classes: self.classes,
        }
    }
}

/// Parses LIBSVM-format text: one `label idx:value ...` record per line,
/// 1-based feature indices strictly increasing within a line. Missing
/// indices are zeros; the feature count is the largest index seen. Raw
/// labels are mapped to class ids by ascending numeric order.
pub fn parse_libsvm(text: &str) -> Result<Dataset> {
    let mut raw_labels: Vec<f64> = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_index = 0usize;

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let mut fields = line.split_whitespace();
        let Some(label_field) = fields.next() else {
            continue; // blank line
        };
        let label: f64 = label_field.parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("unreadable label {label_field:?}"),
        })?;
        if !label.is_finite() {
            return Err(Error::Parse {
                line: lineno,
                message: format!("non-finite label {label_field:?}"),
            });
        }

        let mut entries = Vec::new();
        let mut prev_index = 0usize;
        for field in fields {
            let Some((idx_part, val_part)) = field.split_once(':') else {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected index:value, found {field:?}"),
                });
            };
            let index: usize = idx_part.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("unreadable feature index {idx_part:?}"),
            })?;
            if index == 0 {
                return Err(Error::Parse {
                    line: lineno,
                    message: "feature indices are 1-based".into(),
                });
            }
            if index <= prev_index {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("feature index {index} not strictly increasing"),
                });
            }
            let value: f64 = val_part.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("unreadable value {val_part:?}"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("non-finite value {val_part:?}"),
                });
            }
            prev_index = index;
            entries.push((index, value));
        }
        max_index = max_index.max(prev_index);
        raw_labels.push(label);
        rows.push(entries);
    }

    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }

    let mut distinct = raw_labels.clone();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    let labels = raw_labels
        .iter()
        .map(|l| distinct.partition_point(|d| d < l))
        .collect();

    let n = rows.len();
    let p = max_index;
    let mut values = vec![0.0; n * p];
    for (i, entries) in rows.iter().enumerate() {
        for &(index, value) in entries {
            values[i * p + (index - 1)] = value;
        }
    }
    Dataset::new(values, labels, n, p, distinct.len())
}

/// Fractions and seed for a deterministic train/validation/test split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    /// Fractions must be non-negative and sum to 1 within 1e-9.
    pub fn new(train: f64, val: f64, test: f64, seed: u64) -> Result<Self> {
        for (name, f) in [("train", train), ("val", val), ("test", test)] {
            if !f.is_finite() || f < 0.0 {
                return Err(Error::InvalidSplit(format!(
                    "{name} fraction {f} must be a non-negative number"
                )));
            }
        }
        let sum = train + val + test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSplit(format!(
                "fractions sum to {sum}, not 1"
            )));
        }
        Ok(SplitSpec {
            train_fraction: train,
            val_fraction: val,
            test_fraction: test,
            seed,
        })
    }
}

/// Splits rows into train/validation/test parts by a seeded permutation.
///
/// Sizes are `floor(f_train * n)`, `floor(f_val * n)`, and the remainder.
/// Errors if any part would be empty.
pub fn split_dataset(data: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    let n = data.len();
    let n_train = (spec.train_fraction * n as f64).floor() as usize;
    let n_val = (spec.val_fraction * n as f64).floor() as usize;
    let n_test = n - n_train - n_val;
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(Error::InvalidSplit(format!(
            "parts ({n_train}, {n_val}, {n_test}) of {n} rows: every part must be nonempty"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    // Fisher-Yates via rand's shuffle keeps the permutation tied to the seed.
    use rand::seq::SliceRandom;
    order.shuffle(&mut rng);

    let train = data.subset(&order[..n_train]);
    let val = data.subset(&order[n_train..n_train + n_val]);
    let test = data.subset(&order[n_train + n_val..]);
    Ok((train, val, test))
}

/// Draws `n` rows with replacement using a fresh generator for `seed`.
pub fn bootstrap_sample(data: &Dataset, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    bootstrap_with_rng(data, &mut rng)
}

/// Bootstrap resample driven by a caller-owned generator.
pub(crate) fn bootstrap_with_rng<R: Rng>(data: &Dataset, rng: &mut R) -> Dataset {
    let n = data.len();
    let rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
    data.subset(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy(n: usize, p: usize) -> Dataset {
        let values = (0..n * p).map(|v| v as f64).collect();
        let labels = (0..n).map(|i| i % 2).collect();
        Dataset::new(values, labels, n, p, 2).unwrap()
    }

    #[test]
    fn parse_example_two_rows() {
        let d = parse_libsvm("+1 1:0.5 3:2.0\n-1 2:1.0").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.feature_count(), 3);
        assert_eq!(d.class_count(), 2);
        assert_eq!(d.row(0), &[0.5, 0.0, 2.0]);
        assert_eq!(d.row(1), &[0.0, 1.0, 0.0]);
        // -1 sorts before +1, so +1 gets id 1.
        assert_eq!(d.labels(), &[1, 0]);
    }

    #[test]
    fn parse_maps_labels_in_ascending_order() {
        let d = parse_libsvm("3 1:1\n1 1:2\n2 1:3\n1 1:4").unwrap();
        assert_eq!(d.labels(), &[2, 0, 1, 0]);
        assert_eq!(d.class_count(), 3);
    }

    #[test]
    fn parse_skips_blank_lines() {
        let d = parse_libsvm("\n+1 1:0.5\n\n-1 1:1.5\n").unwrap();
        assert_eq!(d.len(), 2);
    }

    #[test]
    fn parse_rejects_zero_index() {
        let err = parse_libsvm("+1 0:0.5").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn parse_rejects_non_increasing_indices() {
        let err = parse_libsvm("+1 2:0.5 2:1.0").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_libsvm("+1 3:0.5 1:1.0").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn parse_rejects_garbage_fields() {
        assert!(parse_libsvm("abc 1:0.5").is_err());
        assert!(parse_libsvm("+1 1=0.5").is_err());
        assert!(parse_libsvm("+1 1:x").is_err());
    }

    #[test]
    fn parse_rejects_single_class() {
        let err = parse_libsvm("+1 1:0.5\n+1 1:1.5").unwrap_err();
        assert!(matches!(err, Error::InvalidDataset(_)));
    }

    #[test]
    fn parse_rejects_empty_input() {
        assert_eq!(parse_libsvm("").unwrap_err(), Error::EmptyInput);
        assert_eq!(parse_libsvm("\n  \n").unwrap_err(), Error::EmptyInput);
    }

    #[test]
    fn dataset_invariants_enforced() {
        assert!(Dataset::new(vec![], vec![], 0, 1, 2).is_err());
        assert!(Dataset::new(vec![1.0], vec![0], 1, 1, 1).is_err());
        assert!(Dataset::new(vec![1.0, 2.0], vec![0, 2], 2, 1, 2).is_err());
        assert!(Dataset::new(vec![1.0, 2.0, 3.0], vec![0, 1], 2, 1, 2).is_err());
    }

    #[test]
    fn split_sizes_follow_floors() {
        let spec = SplitSpec::new(0.64, 0.16, 0.20, 7).unwrap();
        let (tr, va, te) = split_dataset(&toy(100, 3), &spec).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (64, 16, 20));

        let (tr, va, te) = split_dataset(&toy(10, 3), &spec).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (6, 1, 3));
    }

    #[test]
    fn split_rejects_empty_parts() {
        let spec = SplitSpec::new(0.64, 0.16, 0.20, 7).unwrap();
        assert!(matches!(
            split_dataset(&toy(3, 2), &spec),
            Err(Error::InvalidSplit(_))
        ));
    }

    #[test]
    fn split_spec_validates_fractions() {
        assert!(SplitSpec::new(0.5, 0.3, 0.1, 0).is_err());
        assert!(SplitSpec::new(0.5, -0.1, 0.6, 0).is_err());
        assert!(SplitSpec::new(0.64, 0.16, 0.2 + 5e-10, 0).is_ok());
    }

    #[test]
    fn split_is_deterministic_per_seed() {
        let d = toy(50, 4);
        let spec = SplitSpec::new(0.64, 0.16, 0.20, 11).unwrap();
        let a = split_dataset(&d, &spec).unwrap();
        let b = split_dataset(&d, &spec).unwrap();
        assert_eq!(a, b);
        let other = SplitSpec::new(0.64, 0.16, 0.20, 12).unwrap();
        assert_ne!(a, split_dataset(&d, &other).unwrap());
    }

    #[test]
    fn bootstrap_keeps_shape_and_class_count() {
        let d = parse_libsvm("1 1:1\n1 1:2\n2 1:3\n3 1:4").unwrap();
        let b = bootstrap_sample(&d, 5);
        assert_eq!(b.len(), d.len());
        assert_eq!(b.feature_count(), d.feature_count());
        assert_eq!(b.class_count(), 3);
    }

    #[test]
    fn bootstrap_distinct_fraction_matches_theory() {
        // E[distinct rows] / n -> 1 - 1/e ~ 0.632 for n = 1000.
        let d = toy(1000, 1);
        let draws = 10_000;
        let mut total = 0usize;
        for seed in 0..draws {
            let b = bootstrap_sample(&d, seed);
            let mut seen = vec![false; 1000];
            for i in 0..b.len() {
                seen[b.value(i, 0) as usize] = true;
            }
            total += seen.iter().filter(|&&s| s).count();
        }
        let mean_fraction = total as f64 / (draws as f64 * 1000.0);
        assert!(
            (mean_fraction - 0.632).abs() < 0.03,
            "mean distinct fraction {mean_fraction}"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn split_parts_are_disjoint_and_cover(n in 5usize..120, seed in 0u64..1_000) {
            // Unique feature values let us trace which part each row went to.
            let d = toy(n, 1);
            let spec = SplitSpec::new(0.64, 0.16, 0.20, seed).unwrap();
            prop_assume!((0.64 * n as f64).floor() as usize >= 1);
            prop_assume!((0.16 * n as f64).floor() as usize >= 1);
            let (tr, va, te) = split_dataset(&d, &spec).unwrap();
            prop_assert_eq!(tr.len() + va.len() + te.len(), n);
            let mut seen = vec![0u8; n];
            for part in [&tr, &va, &te] {
                for i in 0..part.len() {
                    seen[part.value(i, 0) as usize] += 1;
                }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }
    }
}
