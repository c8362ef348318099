use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::function::gamma::digamma;

use super::kdtree::KdTree;
use super::stats::mean_and_se;
use super::EstimatorReport;
use crate::error::{Error, Result};
use crate::geometry::Velocity;

/// Copies `sample`, moving every exact repeat by a seeded offset of size
/// `1e-12` times the sample scale. Returns the copy and the number moved.
pub fn jitter_duplicates(sample: &[Velocity], seed: u64) -> Result<(Vec<Velocity>, usize)> {
    let n = sample.len();
    if n == 0 {
        return Err(Error::Estimator("empty sample".into()));
    }
    let mean = sample.iter().fold(Velocity::ZERO, |a, &v| a + v) / n as f64;
    let scale = (sample.iter().map(|&v| (v - mean).norm_sq()).sum::<f64>() / n as f64).sqrt();
    if !(scale > 0.0) {
        return Err(Error::Estimator("degenerate sample: all points coincide".into()));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let key = |v: Velocity| [v.x, v.y, v.z];
    idx.sort_by(|&a, &b| {
        let (ka, kb) = (key(sample[a]), key(sample[b]));
        ka[0]
            .total_cmp(&kb[0])
            .then(ka[1].total_cmp(&kb[1]))
            .then(ka[2].total_cmp(&kb[2]))
            .then(a.cmp(&b))
    });
    let mut out = sample.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x6a17);
    let mut moved = 0;
    for w in idx.windows(2) {
        if sample[w[0]] == sample[w[1]] {
            let d = Velocity::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            out[w[1]] = sample[w[1]] + d * (2e-12 * scale);
            moved += 1;
        }
    }
    Ok((out, moved))
}

/// Kozachenko-Leonenko estimate of the differential entropy
/// `-int f ln f` from the `k`-th neighbour distances.
///
/// The standard error is the delta-method value `3 sd(ln r_k) / sqrt(n)`.
pub fn entropy_knn(sample: &[Velocity], k: usize, seed: u64) -> Result<EstimatorReport> {
    let n = sample.len();
    if k == 0 || n < k + 1 {
        return Err(Error::Estimator(format!("entropy needs n >= k + 1 (n = {n}, k = {k})")));
    }
    let (pts, moved) = jitter_duplicates(sample, seed)?;
    let tree = KdTree::new(&pts);
    let logs: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| 0.5 * tree.nearest(pts[i], k, Some(i))[k - 1].0.ln())
        .collect();
    let (mean_log, se_log) = mean_and_se(&logs);
    let h = digamma(n as f64) - digamma(k as f64) + (4.0 * PI / 3.0).ln() + 3.0 * mean_log;
    Ok(EstimatorReport::new("entropy_knn", h, 3.0 * se_log, n)
        .with("k", k as f64)
        .with("jittered", moved as f64))
}
