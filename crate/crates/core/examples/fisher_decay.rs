//! Fisher information of the one-particle marginal along a run from a
//! two-bump start, pooled over replicas.

use kacsim::benchmarks::{fisher_decay_study, is_nonincreasing};
use kacsim::engine::{EngineConfig, InitialCondition};
use kacsim::estimators::FisherMethod;
use kacsim::kernel::{BetaForm, KernelSpec};

fn main() -> kacsim::Result<()> {
    let kernel = KernelSpec::new(-1.0, 0.25, 0.05, BetaForm::PowerLaw)?;
    let config = EngineConfig::new(512, kernel, 2.0, 3)
        .with_snapshot_every(0.5)
        .with_init(InitialCondition::two_bump(2.4, 0.5));
    let series = fisher_decay_study(&config, 16, &FisherMethod::default())?;
    for r in &series {
        println!("t {:>4.1}: I = {:.4} +- {:.4}", r.parameters["t"], r.value, r.std_error);
    }
    println!("nonincreasing within 2 se: {}", is_nonincreasing(&series, 2.0));
    Ok(())
}
