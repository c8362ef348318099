//! Two-particle covariance of |v|^2 at t = 1 across particle counts.

use kacsim::benchmarks::chaos_scaling_study;
use kacsim::engine::{EngineConfig, InitialCondition};
use kacsim::kernel::{BetaForm, KernelSpec};
use kacsim::weakform::KineticEnergy;

fn main() -> kacsim::Result<()> {
    let kernel = KernelSpec::new(-1.0, 0.25, 0.05, BetaForm::PowerLaw)?;
    let template = EngineConfig::new(128, kernel, 1.0, 5).with_init(InitialCondition::scale_mixture(0.8, 0.5, 3.0).normalized(false));
    let r = chaos_scaling_study(&template, &[64, 256, 1024], 1.0, 100, &KineticEnergy)?;
    for (n, c) in r.n.iter().zip(&r.covariance) {
        println!("N {n:>5}: cov {:+.4e} +- {:.2e}", c.value, c.std_error);
    }
    println!("successive ratios {:?}", r.ratios);
    Ok(())
}
