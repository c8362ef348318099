//! The `kacsim` command-line tool. Each subcommand prints a table, writes
//! its artifacts under the output directory and reports whether every
//! tolerance held.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::benchmarks::{chaos_scaling_study, epsilon_schedule_study, equilibrium_w2_study, maxwell_rate_study, ChaosScalingReport};
use crate::engine::{replica_seed, run_replicas, EngineConfig, InitialCondition, InitialKind};
use crate::error::{Error, Result};
use crate::estimators::{chaos_covariance, diagnose, EstimatorReport, W2Method};
use crate::io::{
    emit_diagnostics, num, read_flow, snapshot_path, write_event_log, write_snapshot, write_text, ArtifactHeader, BenchmarkSelector,
    ConfigOverrides, RunConfig,
};
use crate::kernel::KernelSpec;
use crate::verify::{kernel_suite, table_header, weakform_suite, Check};
use crate::weakform::{weak_residual_path, GaussianBump, KineticEnergy, PairBudget, WeakOperator};
use crate::Velocity;

#[derive(Debug, Parser)]
#[command(
    name = "kacsim",
    version,
    about = "Exact simulation and diagnostics of the regularized Kac particle system"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run replicas and write snapshots and per-snapshot diagnostics.
    Simulate(ConfigOverrides),
    /// Check the kernel moment identities and collision invariants by quadrature.
    VerifyKernel(VerifyKernelArgs),
    /// Check weak-form residuals on snapshots written by `simulate`.
    VerifyWeakform(VerifyWeakformArgs),
    /// Maxwell-molecule moment relaxation, approach to equilibrium, eps schedule.
    Benchmark(ConfigOverrides),
    /// Two-particle covariance of |v|^2 across particle counts.
    ChaosStudy(ConfigOverrides),
}

#[derive(Debug, Args)]
pub struct VerifyKernelArgs {
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-0.5, -1.0, -1.5])]
    pub gamma: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0])]
    pub speed: Vec<f64>,
    #[arg(long, default_value_t = 0.25)]
    pub nu: f64,
    /// Regularization used for the collision-invariant rows.
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
}

#[derive(Debug, Args)]
pub struct VerifyWeakformArgs {
    /// A replica directory holding `snapshot_*.bin`, or a run directory
    /// whose `replica_*` subdirectories are all checked.
    #[arg(long)]
    pub run_dir: PathBuf,
    /// The config the snapshots were produced with.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub bump_width: f64,
    /// Largest admissible |residual| in units of its realized increment spread.
    #[arg(long, default_value_t = 4.0)]
    pub z_max: f64,
    #[arg(long, default_value_t = 1 << 17)]
    pub pair_cap: usize,
}

/// Whether all tolerances held.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Breach,
}

impl Outcome {
    fn from_pass(pass: bool) -> Self {
        if pass {
            Outcome::Pass
        } else {
            Outcome::Breach
        }
    }
}

pub fn execute(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Simulate(o) => simulate(&load_single(&o)?),
        Command::VerifyKernel(a) => verify_kernel(&a),
        Command::VerifyWeakform(a) => verify_weakform(&a),
        Command::Benchmark(o) => benchmark(&RunConfig::load(&o)?),
        Command::ChaosStudy(o) => chaos_study(&RunConfig::load(&o)?),
    }
}

fn load_single(o: &ConfigOverrides) -> Result<RunConfig> {
    if o.n.len() > 1 {
        return Err(Error::Config("simulate takes a single --n".into()));
    }
    RunConfig::load(o)
}

pub fn simulate(cfg: &RunConfig) -> Result<Outcome> {
    let engine = cfg.engine_config()?;
    let hash = cfg.hash()?;
    let dir = &cfg.output_dir;
    write_text(&dir.join("config.toml"), &cfg.to_toml()?)?;
    let mut outs = Vec::with_capacity(cfg.replicas);
    for (k, o) in run_replicas(&engine, cfg.replicas).into_iter().enumerate() {
        match o {
            Ok(o) => outs.push(o),
            Err(e @ Error::Conservation { .. }) => {
                eprintln!("replica {k}: {e}");
                return Ok(Outcome::Breach);
            }
            Err(e) => return Err(e),
        }
    }
    let times = engine.snapshot_times.clone();
    let chaos: Vec<Option<EstimatorReport>> = if outs.len() >= 30 {
        let flows: Vec<_> = outs.iter().map(|o| o.flow.clone()).collect();
        times.iter().map(|&t| chaos_covariance(&flows, &KineticEnergy, t).ok()).collect()
    } else {
        vec![None; times.len()]
    };
    let op = WeakOperator::new(&engine.kernel);
    let mut summary = None;
    for (k, out) in outs.iter().enumerate() {
        let rdir = dir.join(format!("replica_{k:03}"));
        let rcfg = EngineConfig {
            seed: out.seed,
            ..engine.clone()
        };
        let residuals = if cfg.residual_bump_width > 0.0 && times.len() >= 2 {
            let bump = GaussianBump::new(Velocity::ZERO, cfg.residual_bump_width)?;
            let budget = PairBudget {
                cap: PairBudget::default().cap,
                seed: out.seed,
            };
            Some(weak_residual_path(&out.flow, &bump, &op, budget)?)
        } else {
            None
        };
        let mut params = cfg.diagnostics.clone();
        params.seed = replica_seed(cfg.diagnostics.seed, k as u64);
        let mut records = Vec::with_capacity(times.len());
        for (m, (&t, s)) in times.iter().zip(&out.flow.snapshots).enumerate() {
            let mut r = diagnose(s, t, &params)?;
            r.chaos_cov = chaos[m].clone();
            r.weak_residual = residuals.as_ref().map(|w| w[m].residual);
            records.push(r);
            write_snapshot(&snapshot_path(&rdir, m), &ArtifactHeader::new("snapshot", &hash, &rcfg), t, s)?;
        }
        emit_diagnostics(
            &records,
            &ArtifactHeader::new("diagnostics", &hash, &rcfg),
            &rdir.join("diagnostics.tsv"),
        )?;
        if let Some(ev) = &out.events {
            write_event_log(ev, &ArtifactHeader::new("events", &hash, &rcfg), &rdir.join("events.csv"))?;
        }
        if k == 0 {
            summary = Some(records);
        }
    }
    println!(
        "{} replica(s), N = {}, proposal rate {:.6e}, config hash {}",
        outs.len(),
        cfg.n,
        outs[0].proposal_rate,
        &hash[..16]
    );
    println!(
        "{:>8} {:>10} {:>10} {:>18} {:>18} {:>12} {:>12}",
        "t", "m2", "m4", "H", "I", "drift_p", "drift_e"
    );
    for (r, a) in summary.unwrap().iter().zip(&outs[0].audits) {
        println!(
            "{:>8.3} {:>10.6} {:>10.5} {:>10.5}+-{:<7.4} {:>10.5}+-{:<7.4} {:>12.3e} {:>12.3e}",
            r.t, r.m2, r.m4, r.entropy.value, r.entropy.std_error, r.fisher.value, r.fisher.std_error, a.momentum_drift, a.energy_drift
        );
    }
    let collisions: u64 = outs.iter().map(|o| o.state.n_collisions).sum();
    let proposals: u64 = outs.iter().map(|o| o.state.n_proposals).sum();
    println!("{proposals} proposals, {collisions} collisions; output in {}", dir.display());
    Ok(Outcome::Pass)
}

fn print_checks(rows: &[Check]) -> bool {
    println!("{}", table_header());
    for r in rows {
        println!("{r}");
    }
    let failed = rows.iter().filter(|r| !r.pass).count();
    println!("{} checks, {} failed", rows.len(), failed);
    failed == 0
}

pub fn verify_kernel(a: &VerifyKernelArgs) -> Result<Outcome> {
    let rows = kernel_suite(&a.gamma, &a.speed, a.nu, a.eps)?;
    Ok(Outcome::from_pass(print_checks(&rows)))
}

pub fn verify_weakform(a: &VerifyWeakformArgs) -> Result<Outcome> {
    let text = std::fs::read_to_string(&a.config).map_err(|e| Error::io(&a.config, e))?;
    let cfg = RunConfig::from_toml(&text)?;
    let kernel = cfg.kernel()?;
    let hash = cfg.hash()?;
    let mut dirs: Vec<PathBuf> = if snapshot_path(&a.run_dir, 0).exists() {
        vec![a.run_dir.clone()]
    } else {
        std::fs::read_dir(&a.run_dir)
            .map_err(|e| Error::io(&a.run_dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("replica_")))
            .collect()
    };
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::InvalidInput(format!("no snapshots under {}", a.run_dir.display())));
    }
    let mut all = Vec::new();
    for d in &dirs {
        let (header, flow) = read_flow(d)?;
        if header.config_hash != hash {
            return Err(Error::Format {
                path: d.display().to_string(),
                reason: format!("snapshots carry config hash {} but the config hashes to {hash}", header.config_hash),
            });
        }
        let budget = PairBudget {
            cap: a.pair_cap,
            seed: header.seed,
        };
        all.extend(weakform_suite(&flow, &kernel, a.bump_width, a.z_max, budget)?);
    }
    Ok(Outcome::from_pass(print_checks(&all)))
}

fn report_line(out: &mut String, cells: &[String]) {
    let _ = writeln!(out, "{}", cells.join("\t"));
}

fn benchmark_header(kind: &str, cfg: &RunConfig, engine: &EngineConfig) -> Result<String> {
    Ok(ArtifactHeader::new(kind, &cfg.hash()?, engine).render())
}

pub fn benchmark(cfg: &RunConfig) -> Result<Outcome> {
    let which = cfg.benchmark;
    let mut pass = true;
    let dir = &cfg.output_dir;
    let replicas = cfg.replicas.max(16);
    let non_equilibrium = |init: &InitialCondition| match init.kind {
        InitialKind::StandardGaussian => InitialCondition::scale_mixture(0.8, 0.5, 3.0),
        _ => init.clone(),
    };

    if matches!(which, BenchmarkSelector::MaxwellRate | BenchmarkSelector::All) {
        let kernel = KernelSpec::new(0.0, cfg.nu, cfg.eps, cfg.beta)?;
        let engine = EngineConfig::new(cfg.n, kernel, 8.0, cfg.seed)
            .with_snapshot_every(0.25)
            .with_init(non_equilibrium(&cfg.init));
        let r = maxwell_rate_study(&engine, replicas)?;
        let ok = r.relative_error <= 0.05;
        pass &= ok;
        println!(
            "maxwell_rate: fitted {:.5} +- {:.5}, closure {:.5}, relative error {:.4} (tol 0.05) {}",
            r.fitted.value,
            r.fitted.std_error,
            r.predicted,
            r.relative_error,
            if ok { "PASS" } else { "FAIL" }
        );
        let mut out = benchmark_header("benchmark_maxwell_rate", cfg, &engine)?;
        let _ = writeln!(
            out,
            "# fitted_rate {} +- {}\n# closure_rate {}",
            num(r.fitted.value),
            num(r.fitted.std_error),
            num(r.predicted)
        );
        report_line(&mut out, &["t".into(), "m4".into(), "m4_err".into()]);
        for ((t, m), s) in r.times.iter().zip(&r.m4_mean).zip(&r.m4_se) {
            report_line(&mut out, &[num(*t), num(*m), num(*s)]);
        }
        write_text(&dir.join("benchmark_maxwell_rate.tsv"), &out)?;
    }

    if matches!(which, BenchmarkSelector::Equilibrium | BenchmarkSelector::All) {
        let engine = EngineConfig::new(cfg.n, cfg.kernel()?, 8.0, cfg.seed)
            .with_snapshot_every(1.0)
            .with_init(non_equilibrium(&cfg.init));
        let method = if cfg.n <= cfg.diagnostics.w2_exact_max {
            W2Method::ExactAssignment
        } else {
            W2Method::sliced()
        };
        let r = equilibrium_w2_study(&engine, replicas, &method)?;
        let last = r.w2.last().unwrap();
        let gap = (last.value - r.floor.value).abs();
        let tol = 3.0 * (last.std_error.powi(2) + r.floor.std_error.powi(2)).sqrt();
        let ok = gap <= tol && last.value < r.w2[0].value;
        pass &= ok;
        println!(
            "equilibrium: W2(t=8) {:.5} +- {:.5}, sampling floor {:.5} +- {:.5}, W2(0) {:.5} {}",
            last.value,
            last.std_error,
            r.floor.value,
            r.floor.std_error,
            r.w2[0].value,
            if ok { "PASS" } else { "FAIL" }
        );
        let mut out = benchmark_header("benchmark_equilibrium", cfg, &engine)?;
        let _ = writeln!(out, "# floor {} +- {}", num(r.floor.value), num(r.floor.std_error));
        report_line(&mut out, &["t".into(), "w2".into(), "w2_err".into()]);
        for (t, w) in r.times.iter().zip(&r.w2) {
            report_line(&mut out, &[num(*t), num(w.value), num(w.std_error)]);
        }
        write_text(&dir.join("benchmark_equilibrium.tsv"), &out)?;
    }

    if matches!(which, BenchmarkSelector::EpsSchedule | BenchmarkSelector::All) {
        let engine = cfg.engine_config()?;
        let method = if cfg.n <= 4096 {
            W2Method::ExactAssignment
        } else {
            W2Method::sliced()
        };
        let r = epsilon_schedule_study(&engine, &cfg.eps_schedule, 1.0, replicas, &method)?;
        let ok = r.is_decreasing(2.0) && r.failed_runs == 0;
        pass &= ok;
        let mut out = benchmark_header("benchmark_eps_schedule", cfg, &engine)?;
        report_line(&mut out, &["eps_from".into(), "eps_to".into(), "w2".into(), "w2_err".into()]);
        for d in &r.distances {
            let (a, b) = (d.parameters["eps_from"], d.parameters["eps_to"]);
            println!("eps_schedule: W2(eps {a} -> {b}) at t = 1: {:.5} +- {:.5}", d.value, d.std_error);
            report_line(&mut out, &[num(a), num(b), num(d.value), num(d.std_error)]);
        }
        println!(
            "eps_schedule: successive distances nonincreasing within 2 se: {}",
            if ok { "PASS" } else { "FAIL" }
        );
        write_text(&dir.join("benchmark_eps_schedule.tsv"), &out)?;
    }
    Ok(Outcome::from_pass(pass))
}

/// Whether every successive covariance ratio lies in `[2, 8]`.
pub fn chaos_ratios_ok(r: &ChaosScalingReport) -> bool {
    !r.ratios.is_empty() && r.ratios.iter().all(|q| (2.0..=8.0).contains(q))
}

pub fn chaos_study(cfg: &RunConfig) -> Result<Outcome> {
    let engine = cfg.engine_config()?;
    let replicas = cfg.replicas.max(100);
    let r = chaos_scaling_study(&engine, &cfg.chaos_n, cfg.chaos_t, replicas, &KineticEnergy)?;
    let ok = chaos_ratios_ok(&r);
    let mut out = benchmark_header("chaos_study", cfg, &engine)?;
    report_line(
        &mut out,
        &[
            "n".into(),
            "cov".into(),
            "cov_err".into(),
            "cov_direct".into(),
            "cov_direct_err".into(),
            "ratio".into(),
        ],
    );
    println!("phi = |v|^2, t = {}, {} replicas per N", cfg.chaos_t, replicas);
    println!("{:>6} {:>24} {:>24} {:>8}", "N", "cov (paired)", "cov (direct)", "ratio");
    for (k, (c, d)) in r.covariance.iter().zip(&r.covariance_direct).enumerate() {
        let ratio = if k > 0 { r.ratios[k - 1] } else { f64::NAN };
        println!(
            "{:>6} {:>+12.4e} +- {:<9.2e} {:>+12.4e} +- {:<9.2e} {:>8.3}",
            r.n[k], c.value, c.std_error, d.value, d.std_error, ratio
        );
        report_line(
            &mut out,
            &[
                r.n[k].to_string(),
                num(c.value),
                num(c.std_error),
                num(d.value),
                num(d.std_error),
                num(ratio),
            ],
        );
    }
    println!("ratios in [2, 8]: {}", if ok { "PASS" } else { "FAIL" });
    write_text(&cfg.output_dir.join("chaos_study.tsv"), &out)?;
    Ok(Outcome::from_pass(ok))
}

/// Location of the diagnostics table of replica `k` under a run directory.
pub fn diagnostics_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("replica_{k:03}")).join("diagnostics.tsv")
}
