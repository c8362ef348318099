use crate::engine::CompensatedSum;
use crate::error::{Error, Result};
use crate::geometry::Velocity;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    pub mean: Velocity,
    /// `(1/n) sum |v_i|^2`
    pub m2: f64,
    /// `(1/n) sum |v_i|^4`
    pub m4: f64,
}

/// Empirical mean and raw second and fourth speed moments.
pub fn moments(sample: &[Velocity]) -> Result<Moments> {
    if sample.len() < 2 {
        return Err(Error::Estimator(format!("moments need n >= 2, got {}", sample.len())));
    }
    let mut s = [CompensatedSum::default(); 5];
    for v in sample {
        let r2 = v.norm_sq();
        s[0].add(v.x);
        s[1].add(v.y);
        s[2].add(v.z);
        s[3].add(r2);
        s[4].add(r2 * r2);
    }
    let n = sample.len() as f64;
    Ok(Moments {
        mean: Velocity::new(s[0].value(), s[1].value(), s[2].value()) / n,
        m2: s[3].value() / n,
        m4: s[4].value() / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::InitialCondition;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn normalized_sample_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let vs = InitialCondition::standard_gaussian().sample(200_000, &mut rng).unwrap();
        let m = moments(&vs).unwrap();
        assert!(m.mean.norm() < 1e-14);
        assert!((m.m2 - 3.0).abs() < 1e-12);
        assert!((m.m4 - 15.0).abs() < 0.2, "{}", m.m4);
        assert!(moments(&vs[..1]).is_err());
    }
}
