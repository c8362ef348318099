use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::mean_and_se;
use super::EstimatorReport;
use crate::error::{Error, Result};
use crate::geometry::Velocity;

/// Largest size accepted by the exact solver.
pub const EXACT_LIMIT: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum W2Method {
    /// Optimal matching of equal-size samples.
    ExactAssignment,
    /// Average of one-dimensional distances over random directions,
    /// rescaled by `sqrt(3)` so that translations and isotropic dilations
    /// are reported at their true `W2`.
    Sliced { projections: usize, seed: u64 },
}

impl W2Method {
    pub fn sliced() -> Self {
        W2Method::Sliced { projections: 128, seed: 0 }
    }
}

/// Minimum-cost perfect matching of an `n x n` cost matrix (row-major),
/// by shortest augmenting paths with dual potentials. Returns the column
/// assigned to each row.
pub fn assignment(n: usize, cost: &[f64]) -> Vec<usize> {
    assert_eq!(cost.len(), n * n);
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![inf; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        minv.iter_mut().for_each(|m| *m = inf);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let row = &cost[(i0 - 1) * n..i0 * n];
            let ui = u[i0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = row[j - 1] - ui - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=n {
        out[p[j] - 1] = j - 1;
    }
    out
}

/// Wasserstein-2 distance between the empirical measures of two samples.
pub fn w2_distance(a: &[Velocity], b: &[Velocity], method: &W2Method) -> Result<EstimatorReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Estimator("W2 needs non-empty samples".into()));
    }
    match *method {
        W2Method::ExactAssignment => {
            let n = a.len();
            if b.len() != n {
                return Err(Error::Estimator(format!("exact W2 needs equal sizes, got {} and {}", n, b.len())));
            }
            if n > EXACT_LIMIT {
                return Err(Error::Estimator(format!("exact W2 supports n <= {EXACT_LIMIT}, got {n}")));
            }
            let cost: Vec<f64> = (0..n * n).map(|c| (a[c / n] - b[c % n]).norm_sq()).collect();
            let m = assignment(n, &cost);
            let total: f64 = m.iter().enumerate().map(|(i, &j)| (a[i] - b[j]).norm_sq()).sum();
            Ok(EstimatorReport::new("w2_exact", (total / n as f64).sqrt(), 0.0, n))
        }
        W2Method::Sliced { projections, seed } => {
            if projections < 2 {
                return Err(Error::Estimator("sliced W2 needs at least two projections".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dirs: Vec<Velocity> = (0..projections)
                .map(|_| loop {
                    let g = Velocity::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
                    let r = g.norm();
                    if r > 1e-12 {
                        break g / r;
                    }
                })
                .collect();
            let per: Vec<f64> = dirs.par_iter().map(|&d| 3.0 * w2_sq_1d(a, b, d)).collect();
            let (m, se) = mean_and_se(&per);
            let w = m.max(0.0).sqrt();
            let se_w = if w > 0.0 { se / (2.0 * w) } else { 0.0 };
            Ok(EstimatorReport::new("w2_sliced", w, se_w, a.len().max(b.len()))
                .with("projections", projections as f64)
                .with("seed", seed as f64))
        }
    }
}

/// Squared `W2` of the projections on `d`, matching quantile functions.
fn w2_sq_1d(a: &[Velocity], b: &[Velocity], d: Velocity) -> f64 {
    let mut x: Vec<f64> = a.iter().map(|v| v.dot(d)).collect();
    let mut y: Vec<f64> = b.iter().map(|v| v.dot(d)).collect();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    if n == m {
        return x.iter().zip(&y).map(|(p, q)| (p - q).powi(2)).sum::<f64>() / n as f64;
    }
    // merge the two step quantile functions over their joint breakpoints
    let (mut i, mut j) = (0, 0);
    let (mut s, mut last) = (0.0, 0.0);
    while i < n && j < m {
        let ta = (i + 1) as f64 / n as f64;
        let tb = (j + 1) as f64 / m as f64;
        let t = ta.min(tb);
        s += (t - last) * (x[i] - y[j]).powi(2);
        last = t;
        if ta <= t {
            i += 1;
        }
        if tb <= t {
            j += 1;
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss(n: usize, s: f64, shift: Velocity, seed: u64) -> Vec<Velocity> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Velocity::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)) * s + shift)
            .collect()
    }

    #[test]
    fn assignment_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=7 {
            let cost: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>()).collect();
            let m = assignment(n, &cost);
            let got: f64 = m.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
            let mut perm: Vec<usize> = (0..n).collect();
            let mut best = f64::INFINITY;
            permute(&mut perm, 0, &mut |p| {
                best = best.min(p.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum());
            });
            assert!((got - best).abs() < 1e-12, "n={n}");
        }
    }

    fn permute(p: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
        if k == p.len() {
            f(p);
            return;
        }
        for i in k..p.len() {
            p.swap(k, i);
            permute(p, k + 1, f);
            p.swap(k, i);
        }
    }

    #[test]
    fn translation_identity_exact() {
        let a = gauss(500, 1.0, Velocity::ZERO, 1);
        let u = Velocity::new(0.3, -1.1, 0.25);
        let b: Vec<Velocity> = a.iter().map(|&v| v + u).collect();
        let r = w2_distance(&a, &b, &W2Method::ExactAssignment).unwrap();
        assert!((r.value - u.norm()).abs() < 1e-10, "{}", r.value);
        assert_eq!(w2_distance(&a, &a, &W2Method::ExactAssignment).unwrap().value, 0.0);
        let s = w2_distance(&a, &b, &W2Method::sliced()).unwrap();
        assert!((s.value - u.norm()).abs() < 0.1 * u.norm());
    }

    #[test]
    fn exact_is_symmetric_and_separates() {
        let a = gauss(200, 1.0, Velocity::ZERO, 4);
        let b = gauss(200, 1.3, Velocity::ZERO, 5);
        let ab = w2_distance(&a, &b, &W2Method::ExactAssignment).unwrap().value;
        let ba = w2_distance(&b, &a, &W2Method::ExactAssignment).unwrap().value;
        assert!((ab - ba).abs() < 1e-12);
        assert!(ab > 0.0);
        assert!(w2_distance(&a, &b[..100], &W2Method::ExactAssignment).is_err());
    }

    #[test]
    fn sliced_calibrated_against_exact() {
        // separations well above the n = 512 sampling floor of the exact
        // distance, which the sliced distance does not share
        let cases = [
            (1.0, Velocity::new(1.5, 0.0, 0.0)),
            (2.0, Velocity::ZERO),
            (0.5, Velocity::new(0.6, 0.8, -0.6)),
        ];
        for (k, (s, shift)) in cases.into_iter().enumerate() {
            let a = gauss(512, 1.0, Velocity::ZERO, 10 + k as u64);
            let b = gauss(512, s, shift, 20 + k as u64);
            let ex = w2_distance(&a, &b, &W2Method::ExactAssignment).unwrap().value;
            let sl = w2_distance(&a, &b, &W2Method::sliced()).unwrap().value;
            assert!((sl - ex).abs() < 0.15 * ex, "case {k}: sliced {sl} exact {ex}");
        }
    }

    #[test]
    fn sliced_handles_unequal_sizes() {
        let a = gauss(300, 1.0, Velocity::ZERO, 1);
        let u = Velocity::new(0.0, 0.0, 2.0);
        let b: Vec<Velocity> = a.iter().chain(&a).map(|&v| v + u).collect();
        let r = w2_distance(&a, &b, &W2Method::Sliced { projections: 64, seed: 3 }).unwrap();
        assert!((r.value - 2.0).abs() < 0.25, "{}", r.value);
    }
}
