//! End-to-end acceptance run. Each criterion prints one PASS/FAIL line and
//! the process exits nonzero if any fails.

use std::path::{Path, PathBuf};
use std::time::Instant;

use kacsim::benchmarks::{
    chaos_scaling_study, epsilon_schedule_study, fisher_decay_study, is_nonincreasing, maxwell_rate_study, maxwellian,
    weak_residual_scaling,
};
use kacsim::cli::simulate;
use kacsim::engine::{run, EngineConfig, InitialCondition};
use kacsim::estimators::{entropy_knn, fisher_estimate, pairwise_singular_moment, w2_distance, FisherMethod, W2Method};
use kacsim::io::RunConfig;
use kacsim::kernel::{BetaForm, KernelSpec};
use kacsim::verify::kernel_suite;
use kacsim::weakform::{GaussianBump, KineticEnergy};
use kacsim::Velocity;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = kacsim::Result<(bool, String)>;
type Criterion = (&'static str, fn() -> Outcome);

fn soft(gamma: f64, eps: f64) -> KernelSpec {
    KernelSpec::new(gamma, 0.25, eps, BetaForm::PowerLaw).unwrap()
}

fn two_bump() -> InitialCondition {
    InitialCondition::two_bump(2.4, 0.5)
}

fn gaussian(n: usize, rng: &mut ChaCha8Rng) -> Vec<Velocity> {
    (0..n)
        .map(|_| Velocity::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect()
}

fn max_drift(config: &EngineConfig) -> kacsim::Result<(f64, u64, u64)> {
    let out = run(config)?;
    let (p, e) = out.state.drift();
    let audit = out.audits.iter().map(|a| a.momentum_drift.max(a.energy_drift)).fold(0.0, f64::max);
    Ok((audit.max(p).max(e), out.state.n_collisions, out.state.n_proposals))
}

fn conservation() -> Outcome {
    let mut c = EngineConfig::new(1024, soft(-1.0, 0.05), 4.0, 1);
    c.audit_every = 1000;
    let (drift, collisions, proposals) = max_drift(&c)?;
    // same system run long enough to pass 1e5 accepted collisions
    let mut long = c.clone();
    long.t_final = 10.0;
    long.snapshot_times = vec![0.0, 10.0];
    let (drift_long, collisions_long, _) = max_drift(&long)?;
    let pass = drift <= 1e-9 && drift_long <= 1e-9 && proposals >= 100_000 && collisions_long >= 100_000;
    Ok((
        pass,
        format!(
            "T=4: max drift {drift:.2e}, {collisions} collisions of {proposals} proposals; T=10: max drift {drift_long:.2e}, {collisions_long} collisions"
        ),
    ))
}

fn kernel_identities() -> Outcome {
    let rows = kernel_suite(&[-0.5, -1.0, -1.5], &[0.5, 1.0, 2.0], 0.25, 0.05)?;
    let worst = |prefix: &str| {
        rows.iter()
            .filter(|r| r.name.starts_with(prefix))
            .map(|r| r.error)
            .fold(0.0, f64::max)
    };
    let failed = rows.iter().filter(|r| !r.pass).count();
    Ok((
        failed == 0 && rows.len() == 63,
        format!(
            "{} checks, {failed} failed; worst second_moment {:.1e}, pv_drift {:.1e}, invariant {:.1e}",
            rows.len(),
            worst("second_moment"),
            worst("pv_drift"),
            worst("invariant")
        ),
    ))
}

fn fisher_monotonicity() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for gamma in [0.0, -1.0] {
        let c = EngineConfig::new(1024, soft(gamma, 0.05), 4.0, 3)
            .with_snapshot_every(0.5)
            .with_init(two_bump());
        let series = fisher_decay_study(&c, 32, &FisherMethod::default())?;
        let ok = series.len() == 9 && is_nonincreasing(&series, 2.0);
        pass &= ok;
        let values: Vec<String> = series.iter().map(|r| format!("{:.3}({:.3})", r.value, r.std_error)).collect();
        detail.push(format!(
            "gamma {gamma}: {} [{}]",
            if ok { "ok" } else { "violated" },
            values.join(" ")
        ));
    }
    Ok((pass, detail.join("; ")))
}

fn maxwell_relaxation() -> Outcome {
    let kernel = KernelSpec::new(
        0.0,
        0.25,
        0.05,
        BetaForm::CutoffUniform {
            beta0: BetaForm::DEFAULT_BETA0,
        },
    )?;
    let c = EngineConfig::new(4096, kernel, 8.0, 11)
        .with_snapshot_every(0.25)
        .with_init(InitialCondition::scale_mixture(0.8, 0.5, 3.0));
    let r = maxwell_rate_study(&c, 32)?;
    Ok((
        r.relative_error <= 0.05 && r.failed_replicas == 0,
        format!(
            "fitted {:.5} +- {:.5} (32 replicas), predicted {:.5}, relative error {:.2}%",
            r.fitted.value,
            r.fitted.std_error,
            r.predicted,
            100.0 * r.relative_error
        ),
    ))
}

fn chaos_rate() -> Outcome {
    let template =
        EngineConfig::new(128, soft(-1.0, 0.05), 1.0, 5).with_init(InitialCondition::scale_mixture(0.8, 0.5, 3.0).normalized(false));
    let r = chaos_scaling_study(&template, &[128, 512, 2048], 1.0, 200, &KineticEnergy)?;
    let covs: Vec<String> = r
        .covariance
        .iter()
        .map(|c| format!("{:.3e}({:.1e})", c.value, c.std_error))
        .collect();
    let pass = r.ratios.len() == 2 && r.ratios.iter().all(|x| (2.0..=8.0).contains(x));
    Ok((
        pass,
        format!("cov at N=128,512,2048: {}; ratios {:.2?} (200 replicas)", covs.join(" "), r.ratios),
    ))
}

fn weak_residual() -> Outcome {
    let template = EngineConfig::new(128, soft(-1.0, 0.05), 2.0, 6)
        .with_snapshot_every(0.1)
        .with_init(two_bump());
    let bump = GaussianBump::new(Velocity::new(0.5, 0.0, 0.0), 1.0)?;
    let r = weak_residual_scaling(&template, &[128, 512, 2048], &bump, 2.0, 16, 20_000)?;
    let pass = is_nonincreasing(&r, 2.0) && r[2].value < r[0].value;
    let rms: Vec<String> = r.iter().map(|x| format!("{:.3e}({:.1e})", x.value, x.std_error)).collect();
    Ok((
        pass,
        format!("rms residual at t=2, N=128,512,2048: {} (16 replicas)", rms.join(" ")),
    ))
}

fn estimator_calibration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = gaussian(100_000, &mut rng);
    let h_true = -maxwellian::h_functional();
    let h = entropy_knn(&x, 4, 0)?;
    let h_rel = (h.value - h_true).abs() / h_true;
    let i = fisher_estimate(&x, &FisherMethod::default(), 0)?;
    let i_rel = (i.value - maxwellian::FISHER).abs() / maxwellian::FISHER;

    let a = gaussian(512, &mut rng);
    let u = Velocity::new(0.7, -1.1, 0.4);
    let b: Vec<Velocity> = a.iter().map(|&v| v + u).collect();
    let w2_err = (w2_distance(&a, &b, &W2Method::ExactAssignment)?.value - u.norm()).abs();

    let s = gaussian(4000, &mut rng);
    let p = pairwise_singular_moment(&s, -1.0)?;
    let m = 10_000_000;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..m {
        let v = Velocity::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
        let w = Velocity::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
        let y = 1.0 / (v - w).norm();
        sum += y;
        sum_sq += y * y;
    }
    let oracle = sum / m as f64;
    let oracle_se = ((sum_sq / m as f64 - oracle * oracle) / m as f64).sqrt();
    let z = (p.value - oracle).abs() / (p.std_error.powi(2) + oracle_se.powi(2)).sqrt();

    let pass = h_rel <= 0.01 && i_rel <= 0.05 && w2_err <= 1e-10 && z <= 3.0;
    Ok((
        pass,
        format!(
            "entropy rel err {:.2}%, Fisher {:.3} rel err {:.2}%, W2 translation err {w2_err:.1e}, pairwise {:.5} vs oracle {oracle:.5} ({z:.2} sigma)",
            100.0 * h_rel,
            i.value,
            100.0 * i_rel,
            p.value
        ),
    ))
}

fn eps_schedule() -> Outcome {
    let template = EngineConfig::new(1024, soft(-1.0, 0.2), 1.0, 21).with_init(two_bump());
    let r = epsilon_schedule_study(&template, &[0.2, 0.1, 0.05], 1.0, 8, &W2Method::ExactAssignment)?;
    let d: Vec<String> = r.distances.iter().map(|x| format!("{:.5}({:.5})", x.value, x.std_error)).collect();
    Ok((
        r.distances.len() == 2 && r.failed_runs == 0 && r.is_decreasing(2.0),
        format!("W2 between successive eps marginals: {} (8 replicas)", d.join(" ")),
    ))
}

const GOLDEN_CONFIG: &str = "n = 256\nt_final = 0.5\nsnapshot_every = 0.25\nseed = 9\nreplicas = 2\nevent_log = true\n\
[init]\nkind = \"two_bump\"\nseparation = 2.4\nmix = 0.5\n";

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(files(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

fn simulate_into(dir: &Path) -> kacsim::Result<Vec<(PathBuf, Vec<u8>)>> {
    let mut cfg = RunConfig::from_toml(GOLDEN_CONFIG)?;
    cfg.output_dir = dir.to_path_buf();
    simulate(&cfg)?;
    Ok(files(dir)
        .into_iter()
        .map(|p| (p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()))
        .collect())
}

fn determinism() -> Outcome {
    // config.toml records the output path, so both runs share one
    let dir = tempfile::tempdir().unwrap();
    let first = simulate_into(dir.path())?;
    std::fs::remove_dir_all(dir.path()).unwrap();
    let second = simulate_into(dir.path())?;
    let identical = first == second;
    let golden_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/simulate_diagnostics.tsv");
    let produced = &first.iter().find(|(p, _)| p == Path::new("replica_000/diagnostics.tsv")).unwrap().1;
    if std::env::var_os("KACSIM_BLESS").is_some() {
        std::fs::write(&golden_path, produced).unwrap();
    }
    let golden = std::fs::read(&golden_path).unwrap_or_default();
    let matches = &golden == produced;
    Ok((
        identical && matches,
        format!(
            "{} files byte-identical across runs: {identical}; diagnostics match golden file: {matches}",
            first.len()
        ),
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("conservation", conservation),
        ("kernel identities", kernel_identities),
        ("Fisher monotonicity", fisher_monotonicity),
        ("Maxwell moment relaxation", maxwell_relaxation),
        ("chaos rate", chaos_rate),
        ("weak-form residual", weak_residual),
        ("estimator calibration", estimator_calibration),
        ("eps schedule", eps_schedule),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!(
            "{} criterion {} {name} ({:.1} s): {detail}",
            if pass { "PASS" } else { "FAIL" },
            k + 1,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
