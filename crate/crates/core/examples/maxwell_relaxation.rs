//! Fourth-moment relaxation for Maxwell molecules against the closure rate.

use kacsim::benchmarks::{maxwell_m4_relaxation_rate, maxwell_rate_study};
use kacsim::engine::{EngineConfig, InitialCondition};
use kacsim::kernel::{BetaForm, KernelSpec};

fn main() -> kacsim::Result<()> {
    let kernel = KernelSpec::new(
        0.0,
        0.25,
        0.05,
        BetaForm::CutoffUniform {
            beta0: BetaForm::DEFAULT_BETA0,
        },
    )?;
    println!("closure rate {:.6}", maxwell_m4_relaxation_rate(&kernel)?);
    let config = EngineConfig::new(4096, kernel, 8.0, 11)
        .with_snapshot_every(0.5)
        .with_init(InitialCondition::scale_mixture(0.8, 0.5, 3.0));
    let r = maxwell_rate_study(&config, 16)?;
    for ((t, m), s) in r.times.iter().zip(&r.m4_mean).zip(&r.m4_se) {
        println!("{t:>5.2} {m:>9.4} +- {s:.4}");
    }
    println!(
        "fitted {:.5} +- {:.5}, predicted {:.5}, relative error {:.4}",
        r.fitted.value, r.fitted.std_error, r.predicted, r.relative_error
    );
    Ok(())
}
