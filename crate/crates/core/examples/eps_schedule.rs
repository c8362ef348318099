//! Distances between marginals at successive regularization levels.

use kacsim::benchmarks::epsilon_schedule_study;
use kacsim::engine::{EngineConfig, InitialCondition};
use kacsim::estimators::W2Method;
use kacsim::kernel::{BetaForm, KernelSpec};

fn main() -> kacsim::Result<()> {
    let kernel = KernelSpec::new(-1.0, 0.25, 0.2, BetaForm::PowerLaw)?;
    let template = EngineConfig::new(512, kernel, 1.0, 21).with_init(InitialCondition::two_bump(2.4, 0.5));
    let r = epsilon_schedule_study(&template, &[0.2, 0.1, 0.05], 1.0, 8, &W2Method::ExactAssignment)?;
    for d in &r.distances {
        println!(
            "W2(eps {} -> {}) = {:.5} +- {:.5}",
            d.parameters["eps_from"], d.parameters["eps_to"], d.value, d.std_error
        );
    }
    println!("nonincreasing within 2 se: {}", r.is_decreasing(2.0));
    Ok(())
}
