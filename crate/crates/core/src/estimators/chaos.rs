use super::EstimatorReport;
use crate::error::{Error, Result};
use crate::weakform::{EmpiricalFlow, TestFunction};

const MIN_REPLICAS: usize = 30;

/// Per-replica `(S, Q) = (sum phi(V_i), sum phi(V_i)^2)` at time `t`.
fn sums(flows: &[EmpiricalFlow], phi: &dyn TestFunction, t: f64) -> Result<Vec<(f64, f64)>> {
    if flows.len() < MIN_REPLICAS {
        return Err(Error::Estimator(format!(
            "chaos covariance needs at least {MIN_REPLICAS} replicas, got {}",
            flows.len()
        )));
    }
    let n = flows[0].n_particles();
    flows
        .iter()
        .map(|f| {
            if f.n_particles() != n {
                return Err(Error::Estimator("replicas differ in particle count".into()));
            }
            let k = f.index_of(t)?;
            let (mut s, mut q) = (0.0, 0.0);
            for &v in &f.snapshots[k] {
                let x = phi.value(v);
                s += x;
                q += x * x;
            }
            Ok((s, q))
        })
        .collect()
}

/// `E[phi(V1) phi(V2)] - E[phi(V1)] E[phi(V2)]` from per-replica sums: the
/// first term by the within-replica off-diagonal average, the second by the
/// across-replica U-statistic product of replica means.
fn cov_from(sq: &[(f64, f64)], n: f64, skip: Option<usize>) -> f64 {
    let mut a = 0.0;
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    let mut r = 0.0;
    for (idx, &(s, q)) in sq.iter().enumerate() {
        if Some(idx) == skip {
            continue;
        }
        a += (s * s - q) / (n * (n - 1.0));
        let m = s / n;
        m1 += m;
        m2 += m * m;
        r += 1.0;
    }
    a / r - (m1 * m1 - m2) / (r * (r - 1.0))
}

fn jackknife(stat: impl Fn(Option<usize>) -> f64, r: usize) -> (f64, f64) {
    let full = stat(None);
    let loo: Vec<f64> = (0..r).map(|k| stat(Some(k))).collect();
    let mean = loo.iter().sum::<f64>() / r as f64;
    let var = (r as f64 - 1.0) / r as f64 * loo.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    (full, var.sqrt())
}

/// Two-particle covariance `Cov(phi(V1_t), phi(V2_t))` across replicas,
/// with a delete-one-replica jackknife standard error.
pub fn chaos_covariance(flows: &[EmpiricalFlow], phi: &dyn TestFunction, t: f64) -> Result<EstimatorReport> {
    let sq = sums(flows, phi, t)?;
    let n = flows[0].n_particles() as f64;
    let (v, se) = jackknife(|skip| cov_from(&sq, n, skip), sq.len());
    Ok(EstimatorReport::new("chaos_covariance", v, se, flows.len())
        .with("n_particles", n)
        .with("t", t))
}

/// Change of the two-particle covariance between `t0` and `t`, estimated
/// replica by replica so that fluctuations common to both times cancel.
/// With i.i.d. data at `t0` this is the covariance at `t`.
pub fn chaos_covariance_paired(flows: &[EmpiricalFlow], phi: &dyn TestFunction, t: f64, t0: f64) -> Result<EstimatorReport> {
    let sq = sums(flows, phi, t)?;
    let sq0 = sums(flows, phi, t0)?;
    let n = flows[0].n_particles() as f64;
    let (v, se) = jackknife(|skip| cov_from(&sq, n, skip) - cov_from(&sq0, n, skip), sq.len());
    Ok(EstimatorReport::new("chaos_covariance_paired", v, se, flows.len())
        .with("n_particles", n)
        .with("t", t)
        .with("t0", t0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Velocity;
    use crate::weakform::KineticEnergy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn iid_flows(r: usize, n: usize, seed: u64) -> Vec<EmpiricalFlow> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..r)
            .map(|_| {
                let s: Vec<Velocity> = (0..n)
                    .map(|_| Velocity::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)))
                    .collect();
                EmpiricalFlow::new(vec![0.0], vec![s]).unwrap()
            })
            .collect()
    }

    #[test]
    fn iid_covariance_is_zero_within_three_sigma() {
        let flows = iid_flows(200, 64, 1);
        let r = chaos_covariance(&flows, &KineticEnergy, 0.0).unwrap();
        assert!(r.value.abs() < 3.0 * r.std_error, "{r:?}");
        assert!(chaos_covariance(&flows[..10], &KineticEnergy, 0.0).is_err());
    }

    #[test]
    fn exchangeable_negative_correlation_is_detected() {
        // sampling without replacement from a fixed urn: Cov = -Var/(N-1)
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let urn: Vec<f64> = (0..400).map(|_| rng.random::<f64>() * 3.0).collect();
        let mu = urn.iter().sum::<f64>() / 400.0;
        let var = urn.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / 400.0;
        let n = 40;
        let flows: Vec<EmpiricalFlow> = (0..2000)
            .map(|_| {
                let mut idx: Vec<usize> = (0..400).collect();
                rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), &mut rng);
                let s = idx[..n].iter().map(|&i| Velocity::new(urn[i].sqrt(), 0.0, 0.0)).collect();
                EmpiricalFlow::new(vec![0.0], vec![s]).unwrap()
            })
            .collect();
        let r = chaos_covariance(&flows, &KineticEnergy, 0.0).unwrap();
        let want = -var / 399.0;
        assert!(
            (r.value - want).abs() < 3.0 * r.std_error,
            "{} vs {want} ({})",
            r.value,
            r.std_error
        );
    }
}
