//! One run of the particle system with conservation audits.

use kacsim::engine::{run, EngineConfig, InitialCondition};
use kacsim::estimators::moments;
use kacsim::kernel::{BetaForm, KernelSpec};

fn main() -> kacsim::Result<()> {
    let kernel = KernelSpec::new(-1.0, 0.25, 0.05, BetaForm::PowerLaw)?;
    let mut config = EngineConfig::new(1024, kernel, 4.0, 7)
        .with_snapshot_every(0.5)
        .with_init(InitialCondition::two_bump(2.4, 0.5));
    config.audit_every = 10_000;
    let out = run(&config)?;
    println!("proposal rate {:.4e}", out.proposal_rate);
    println!(
        "{:>6} {:>10} {:>10} {:>12} {:>12} {:>12}",
        "t", "m2", "m4", "collisions", "drift_p", "drift_e"
    );
    for (a, s) in out.audits.iter().zip(&out.flow.snapshots) {
        let m = moments(s)?;
        println!(
            "{:>6.2} {:>10.6} {:>10.5} {:>12} {:>12.3e} {:>12.3e}",
            a.t, m.m2, m.m4, a.n_collisions, a.momentum_drift, a.energy_drift
        );
    }
    println!("{} proposals, {} accepted", out.state.n_proposals, out.state.n_collisions);
    Ok(())
}
