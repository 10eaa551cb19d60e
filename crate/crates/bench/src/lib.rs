//! Shared input generation for the pipeline benchmarks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tmo::Dataset;

/// Two-class task with axis-aligned structure and 10% label noise.
pub fn synthetic(n: usize, p: usize, seed: u64) -> Dataset {
    assert!(p >= 4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..p).map(|_| rng.gen::<f64>()).collect();
        let clean = if x[0] > 0.55 {
            x[1] > 0.4
        } else {
            x[2] + x[3] > 1.0
        };
        let flip = rng.gen::<f64>() < 0.1;
        labels.push(usize::from(clean != flip));
        rows.push(x);
    }
    Dataset::from_rows(rows, labels, 2).unwrap()
}
