//! Entropy, Fisher information, singular pairwise moment and W2 on
//! Gaussian samples, next to their closed forms.

use kacsim::benchmarks::maxwellian;
use kacsim::estimators::{entropy_knn, fisher_estimate, pairwise_singular_moment, w2_distance, FisherMethod, W2Method};
use kacsim::Velocity;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian(n: usize, seed: u64) -> Vec<Velocity> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Velocity::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect()
}

fn main() -> kacsim::Result<()> {
    let x = gaussian(50_000, 1);
    let h = entropy_knn(&x, 4, 0)?;
    println!(
        "entropy  {:.5} +- {:.5}   closed form {:.5}",
        h.value,
        h.std_error,
        -maxwellian::h_functional()
    );
    let i = fisher_estimate(&x, &FisherMethod::default(), 0)?;
    println!(
        "fisher   {:.5} +- {:.5}   closed form {:.5}",
        i.value,
        i.std_error,
        maxwellian::FISHER
    );
    let p = pairwise_singular_moment(&x[..5000], -1.0)?;
    println!(
        "E|V1-V2|^-1 {:.5} +- {:.5}   closed form {:.5}",
        p.value,
        p.std_error,
        1.0 / std::f64::consts::PI.sqrt()
    );

    let a = gaussian(512, 2);
    let u = Velocity::new(0.3, -0.4, 1.2);
    let shifted: Vec<Velocity> = a.iter().map(|&v| v + u).collect();
    let exact = w2_distance(&a, &shifted, &W2Method::ExactAssignment)?;
    println!("W2 under translation by |u| = {:.6}: {:.12}", u.norm(), exact.value);
    let b = gaussian(512, 3);
    let e = w2_distance(&a, &b, &W2Method::ExactAssignment)?;
    let s = w2_distance(&a, &b, &W2Method::sliced())?;
    println!("W2 between two samples: exact {:.5}, sliced {:.5}", e.value, s.value);
    Ok(())
}
