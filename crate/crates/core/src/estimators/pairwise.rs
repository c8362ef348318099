use rayon::prelude::*;

use super::stats::mean_and_se;
use super::EstimatorReport;
use crate::error::{Error, Result};
use crate::geometry::Velocity;

/// U-statistic `(2/(n(n-1))) sum_{i<j} |v_i - v_j|^a` for `a` in `(-2, 0)`.
///
/// Exactly coincident pairs are left out of the average and their count is
/// reported as the parameter `coincident`. The standard error comes from the
/// first-order (Hoeffding) projection, `2 sd(row means) / sqrt(n)`.
pub fn pairwise_singular_moment(sample: &[Velocity], a: f64) -> Result<EstimatorReport> {
    if !(a > -2.0 && a < 0.0) {
        return Err(Error::Estimator(format!("exponent a = {a} must lie in (-2, 0)")));
    }
    let n = sample.len();
    if n < 2 {
        return Err(Error::Estimator("pairwise moment needs n >= 2".into()));
    }
    // row i sums over all j != i so each row mean is a projection sample
    let rows: Vec<(f64, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut s = 0.0;
            let mut hits = 0;
            for (j, &w) in sample.iter().enumerate() {
                if j == i {
                    continue;
                }
                let r2 = (sample[i] - w).norm_sq();
                if r2 == 0.0 {
                    hits += 1;
                } else {
                    s += r2.powf(0.5 * a);
                }
            }
            (s, hits)
        })
        .collect();
    let coincident: usize = rows.iter().map(|r| r.1).sum::<usize>() / 2;
    let pairs = n * (n - 1) / 2 - coincident;
    if pairs == 0 {
        return Err(Error::Estimator("all pairs coincide".into()));
    }
    let total: f64 = rows.iter().map(|r| r.0).sum::<f64>() / 2.0;
    let row_means: Vec<f64> = rows
        .iter()
        .map(|r| if n - 1 > r.1 { r.0 / (n - 1 - r.1) as f64 } else { 0.0 })
        .collect();
    let se = if n > 2 { 2.0 * mean_and_se(&row_means).1 } else { 0.0 };
    Ok(EstimatorReport::new("pairwise_singular_moment", total / pairs as f64, se, n)
        .with("a", a)
        .with("coincident", coincident as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn g(rng: &mut ChaCha8Rng) -> Velocity {
        Velocity::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal))
    }

    #[test]
    fn two_points() {
        let r = pairwise_singular_moment(&[Velocity::new(1.0, 0.0, 0.0), Velocity::new(-1.0, 0.0, 0.0)], -1.0).unwrap();
        assert_eq!(r.value, 0.5);
        assert!(pairwise_singular_moment(&[Velocity::ZERO; 3], -0.5).is_err());
        assert!(pairwise_singular_moment(&[Velocity::ZERO; 3], -2.0).is_err());
    }

    #[test]
    fn coincident_pairs_counted() {
        let v = [Velocity::ZERO, Velocity::ZERO, Velocity::new(0.0, 0.0, 2.0)];
        let r = pairwise_singular_moment(&v, -1.0).unwrap();
        assert_eq!(r.parameters["coincident"], 1.0);
        assert_eq!(r.value, 0.5);
    }

    #[test]
    fn gaussian_against_independent_pair_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let sample: Vec<Velocity> = (0..3000).map(|_| g(&mut rng)).collect();
        let est = pairwise_singular_moment(&sample, -1.0).unwrap();
        let m = 10_000_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..m {
            let x = 1.0 / (g(&mut rng) - g(&mut rng)).norm();
            s += x;
            s2 += x * x;
        }
        let mean = s / m as f64;
        let se = ((s2 / m as f64 - mean * mean) / m as f64).sqrt();
        let tol = 3.0 * (est.std_error.powi(2) + se * se).sqrt();
        assert!((est.value - mean).abs() < tol, "{} vs {mean} (tol {tol})", est.value);
        // and the closed form E|Z|^-1 = 1/sqrt(pi) for Z ~ N(0, 2 I)
        assert!((mean - 1.0 / std::f64::consts::PI.sqrt()).abs() < 4.0 * se);
    }
}
