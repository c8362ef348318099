//! The pair operator applied to test functions, and the weak-form
//! residual of a short simulated flow.

use kacsim::engine::{run, EngineConfig, InitialCondition};
use kacsim::kernel::{BetaForm, KernelSpec};
use kacsim::weakform::{
    weak_residual_path, Constant, GaussianBump, KineticEnergy, Linear, PairBudget, QuarticNorm, TestFunction, WeakOperator,
};
use kacsim::Velocity;

fn main() -> kacsim::Result<()> {
    let kernel = KernelSpec::new(-1.0, 0.25, 0.05, BetaForm::PowerLaw)?;
    let op = WeakOperator::new(&kernel);
    let (v, w) = (Velocity::new(1.0, 0.0, 0.0), Velocity::new(-1.0, 0.0, 0.0));
    let bump = GaussianBump::new(Velocity::new(0.5, 0.0, 0.0), 1.0)?;
    let phis: [&dyn TestFunction; 5] = [&Constant(1.0), &Linear::component(0), &KineticEnergy, &QuarticNorm, &bump];
    println!("{:>14} {:>16} {:>16}", "phi", "A_bar phi", "A phi");
    for phi in phis {
        println!(
            "{:>14} {:>+16.8e} {:>+16.8e}",
            phi.name(),
            op.a_bar(phi, v, w)?,
            op.a_sym(phi, v, w)?
        );
    }

    let config = EngineConfig::new(256, kernel, 1.0, 3)
        .with_snapshot_every(0.1)
        .with_init(InitialCondition::two_bump(2.4, 0.5));
    let flow = run(&config)?.flow;
    let path = weak_residual_path(&flow, &bump, &op, PairBudget::default())?;
    println!("\n{:>6} {:>14} {:>14} {:>14}", "t", "increment", "compensator", "residual");
    for r in path.iter().step_by(2) {
        println!(
            "{:>6.2} {:>+14.6e} {:>+14.6e} {:>+14.6e}",
            r.t, r.increment, r.compensator, r.residual
        );
    }
    Ok(())
}
