//! Reference values with closed forms: the unit-temperature Maxwellian and
//! the fourth-moment relaxation of Maxwell molecules, plus the studies that
//! compare simulations against them.
//!
//! For `gamma = 0` the collision average of `|v|^4` is a quadratic form in
//! the pair. Over an i.i.d. pair with second-moment matrix `S`,
//!
//! ```text
//! E A|v|^4 = -lambda (M4 - 2 m2^2 + tr S^2),   lambda = pi int sin^2(t) beta(t) dt
//! ```
//!
//! so an isotropic law with `m2 = 3` relaxes as `M4 - 15 ~ exp(-lambda t)`.
//! Among `N` exchangeable particles with exactly conserved energy the same
//! identity holds for the empirical moments, with `lambda N/(N-1)`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{normalize, replica_seed, run_replica, run_replicas, EngineConfig};
use crate::error::{Error, Result};
use crate::estimators::{
    chaos_covariance, chaos_covariance_paired, fisher_estimate_grouped, moments, w2_distance, EstimatorReport, FisherMethod, W2Method,
};
use crate::geometry::Velocity;
use crate::kernel::KernelSpec;
use crate::weakform::{mean_sd, weak_residual, EmpiricalFlow, PairBudget, TestFunction, WeakOperator};

/// `(2 pi)^(-3/2) exp(-|v|^2 / 2)`
pub fn equilibrium_density(v: Velocity) -> f64 {
    (2.0 * PI).powf(-1.5) * (-0.5 * v.norm_sq()).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSolution {
    GaussianEquilibrium,
    MaxwellMomentRelaxation { rate: f64 },
}

/// Functionals of the unit-temperature Maxwellian.
pub mod maxwellian {
    use std::f64::consts::{E, PI};

    pub const M2: f64 = 3.0;
    pub const M4: f64 = 15.0;
    pub const FISHER: f64 = 3.0;

    /// `int f ln f = -(3/2) ln(2 pi e)`
    pub fn h_functional() -> f64 {
        -1.5 * (2.0 * PI * E).ln()
    }
}

/// Relaxation rate `lambda` of `E|v|^4 - 15` for Maxwell molecules,
/// `pi int_0^pi sin^2(t) beta_eff(t) dt`, by the kernel's angular rule.
pub fn maxwell_m4_relaxation_rate(kernel: &KernelSpec) -> Result<f64> {
    if kernel.gamma != 0.0 {
        return Err(Error::Config(format!(
            "the fourth-moment closure holds for Maxwell molecules only (gamma = 0), got gamma = {}",
            kernel.gamma
        )));
    }
    Ok(PI * kernel.theta_rule().apply(|t| t.sin().powi(2)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub rate: f64,
    pub amplitude: f64,
    pub residual_rms: f64,
}

/// Least-squares fit of `y(t) = target + A exp(-rate t)` with the asymptote
/// held fixed. `A` is eliminated in closed form and the rate located by
/// golden-section search on a log scale.
pub fn fit_exponential_rate(t: &[f64], y: &[f64], target: f64) -> Result<RateFit> {
    if t.len() != y.len() || t.len() < 3 {
        return Err(Error::InvalidInput("rate fit needs at least three (t, y) pairs".into()));
    }
    let d: Vec<f64> = y.iter().map(|v| v - target).collect();
    let sse = |rate: f64| {
        let e: Vec<f64> = t.iter().map(|&s| (-rate * s).exp()).collect();
        let ee: f64 = e.iter().map(|x| x * x).sum();
        let a = e.iter().zip(&d).map(|(x, y)| x * y).sum::<f64>() / ee;
        let r: f64 = e.iter().zip(&d).map(|(x, y)| (y - a * x).powi(2)).sum();
        (r, a)
    };
    // coarse scan then golden section on ln(rate)
    let grid: Vec<f64> = (0..=120).map(|k| (-6.0 + 0.1 * k as f64) * std::f64::consts::LN_10 / 2.0).collect();
    let best = grid
        .iter()
        .enumerate()
        .min_by(|a, b| sse(a.1.exp()).0.total_cmp(&sse(b.1.exp()).0))
        .map(|(k, _)| k)
        .unwrap();
    let (mut lo, mut hi) = (grid[best.saturating_sub(1)], grid[(best + 1).min(grid.len() - 1)]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (sse(x1.exp()).0, sse(x2.exp()).0);
    for _ in 0..200 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = sse(x1.exp()).0;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = sse(x2.exp()).0;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    let rate = (0.5 * (lo + hi)).exp();
    let (r, a) = sse(rate);
    Ok(RateFit {
        rate,
        amplitude: a,
        residual_rms: (r / t.len() as f64).sqrt(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxwellRateReport {
    /// Closure rate for the simulated system, `lambda N/(N-1)`.
    pub predicted: f64,
    pub fitted: EstimatorReport,
    pub relative_error: f64,
    pub times: Vec<f64>,
    /// Replica mean and standard error of `M4(t)`.
    pub m4_mean: Vec<f64>,
    pub m4_se: Vec<f64>,
    pub failed_replicas: usize,
}

/// Simulates `replicas` runs of `config` (which must have `gamma = 0`),
/// fits the decay rate of the replica-mean `M4(t)` toward 15 and compares
/// it with the closure rate. The error bar is a delete-one-replica jackknife.
pub fn maxwell_rate_study(config: &EngineConfig, replicas: usize) -> Result<MaxwellRateReport> {
    let lambda = maxwell_m4_relaxation_rate(&config.kernel)?;
    let n = config.n_particles as f64;
    let predicted = lambda * n / (n - 1.0);
    let outs = run_replicas(config, replicas);
    let failed = outs.iter().filter(|o| o.is_err()).count();
    let curves: Vec<Vec<f64>> = outs
        .into_iter()
        .filter_map(|o| o.ok())
        .map(|o| {
            o.flow
                .snapshots
                .iter()
                .map(|s| moments(s).map(|m| m.m4))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let r = curves.len();
    if r < 2 {
        return Err(Error::Estimator(format!("only {r} replicas succeeded")));
    }
    let times = config.snapshot_times.clone();
    let column = |k: usize, skip: Option<usize>| -> Vec<f64> {
        curves
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != skip)
            .map(|(_, c)| c[k])
            .collect()
    };
    let mean_curve = |skip: Option<usize>| -> Vec<f64> {
        (0..times.len())
            .map(|k| {
                let c = column(k, skip);
                c.iter().sum::<f64>() / c.len() as f64
            })
            .collect()
    };
    let full = fit_exponential_rate(&times, &mean_curve(None), maxwellian::M4)?;
    let loo: Vec<f64> = (0..r)
        .into_par_iter()
        .map(|i| fit_exponential_rate(&times, &mean_curve(Some(i)), maxwellian::M4).map(|f| f.rate))
        .collect::<Result<_>>()?;
    let lm = loo.iter().sum::<f64>() / r as f64;
    let se = ((r as f64 - 1.0) / r as f64 * loo.iter().map(|x| (x - lm).powi(2)).sum::<f64>()).sqrt();
    let (m4_mean, m4_se): (Vec<f64>, Vec<f64>) = (0..times.len())
        .map(|k| {
            let (m, sd) = mean_sd(&column(k, None));
            (m, sd / (r as f64).sqrt())
        })
        .unzip();
    Ok(MaxwellRateReport {
        predicted,
        fitted: EstimatorReport::new("m4_relaxation_rate", full.rate, se, r)
            .with("n_particles", n)
            .with("amplitude", full.amplitude),
        relative_error: (full.rate - predicted).abs() / predicted,
        times,
        m4_mean,
        m4_se,
        failed_replicas: failed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsScheduleReport {
    pub eps: Vec<f64>,
    pub t: f64,
    /// `W2(f^{eps_k}_t, f^{eps_{k+1}}_t)`, replica mean and standard error.
    pub distances: Vec<EstimatorReport>,
    pub failed_runs: usize,
}

impl EpsScheduleReport {
    /// Whether each distance is below its predecessor up to
    /// `slack * sqrt(se_k^2 + se_{k+1}^2)`.
    pub fn is_decreasing(&self, slack: f64) -> bool {
        is_nonincreasing(&self.distances, slack)
    }
}

/// Runs `template` at each `eps` with matched replica seeds (hence matched
/// initial data) and measures `W2` between successive marginals at `t`.
pub fn epsilon_schedule_study(template: &EngineConfig, eps: &[f64], t: f64, replicas: usize, w2: &W2Method) -> Result<EpsScheduleReport> {
    if eps.iter().any(|&e| !(e > 0.0)) || eps.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Config("eps list must be positive and strictly decreasing".into()));
    }
    if eps.len() < 2 {
        return Ok(EpsScheduleReport {
            eps: eps.to_vec(),
            t,
            distances: vec![],
            failed_runs: 0,
        });
    }
    let mut failed = 0;
    let mut marginals: Vec<Vec<Option<Vec<Velocity>>>> = Vec::with_capacity(eps.len());
    for &e in eps {
        let mut c = template.clone();
        c.kernel = template.kernel.with_eps(e)?;
        c.t_final = t;
        c.snapshot_times = vec![t];
        let outs = run_replicas(&c, replicas);
        marginals.push(
            outs.into_iter()
                .map(|o| match o {
                    Ok(o) => Some(o.flow.snapshots[0].clone()),
                    Err(_) => {
                        failed += 1;
                        None
                    }
                })
                .collect(),
        );
    }
    let mut distances = Vec::with_capacity(eps.len() - 1);
    for k in 0..eps.len() - 1 {
        let d: Vec<f64> = (0..replicas)
            .into_par_iter()
            .filter_map(|r| match (&marginals[k][r], &marginals[k + 1][r]) {
                (Some(a), Some(b)) => Some(w2_distance(a, b, w2).map(|x| x.value)),
                _ => None,
            })
            .collect::<Result<_>>()?;
        if d.len() < 2 {
            return Err(Error::Estimator("fewer than two matched replica pairs".into()));
        }
        let (m, sd) = mean_sd(&d);
        distances.push(
            EstimatorReport::new("w2_successive_eps", m, sd / (d.len() as f64).sqrt(), d.len())
                .with("eps_from", eps[k])
                .with("eps_to", eps[k + 1]),
        );
    }
    Ok(EpsScheduleReport {
        eps: eps.to_vec(),
        t,
        distances,
        failed_runs: failed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub times: Vec<f64>,
    /// Replica-mean `W2` to an independent Maxwellian sample at each time.
    pub w2: Vec<EstimatorReport>,
    /// Same statistic for a normalized i.i.d. Maxwellian sample.
    pub floor: EstimatorReport,
}

/// `W2` between simulated marginals and fresh Maxwellian samples over time,
/// next to the pure-sampling floor at the same size.
pub fn equilibrium_w2_study(config: &EngineConfig, replicas: usize, w2: &W2Method) -> Result<EquilibriumReport> {
    let outs: Vec<_> = run_replicas(config, replicas).into_iter().collect::<Result<_>>()?;
    let n = config.n_particles;
    let reference = |r: usize, salt: u64| -> Vec<Velocity> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
        rng.set_stream(salt * 1_000_003 + r as u64);
        (0..n)
            .map(|_| Velocity::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect()
    };
    let summarize = |name: &str, d: Vec<f64>| {
        let (m, sd) = mean_sd(&d);
        EstimatorReport::new(name, m, sd / (d.len() as f64).sqrt(), d.len())
    };
    let mut series = Vec::with_capacity(config.snapshot_times.len());
    for (k, &t) in config.snapshot_times.iter().enumerate() {
        let d: Vec<f64> = (0..outs.len())
            .into_par_iter()
            .map(|r| w2_distance(&outs[r].flow.snapshots[k], &reference(r, 1 + k as u64), w2).map(|x| x.value))
            .collect::<Result<_>>()?;
        series.push(summarize("w2_to_maxwellian", d).with("t", t));
    }
    let floor: Vec<f64> = (0..outs.len())
        .into_par_iter()
        .map(|r| {
            let mut a = reference(r, 0);
            normalize(&mut a)?;
            w2_distance(&a, &reference(r, 1 << 20), w2).map(|x| x.value)
        })
        .collect::<Result<_>>()?;
    Ok(EquilibriumReport {
        times: config.snapshot_times.clone(),
        w2: series,
        floor: summarize("w2_sampling_floor", floor),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChaosScalingReport {
    pub t: f64,
    pub n: Vec<usize>,
    /// `Cov_t - Cov_0` per replica pair of times, which equals `Cov_t` for
    /// i.i.d. initial data and cancels the initial sampling noise.
    pub covariance: Vec<EstimatorReport>,
    /// The direct across-replica estimate at `t`.
    pub covariance_direct: Vec<EstimatorReport>,
    /// `|cov(N_k)| / |cov(N_{k+1})|`
    pub ratios: Vec<f64>,
}

/// Two-particle covariance of `phi` at time `t` for each `N`, from
/// `replicas` runs of `template` resized to `N`.
pub fn chaos_scaling_study(
    template: &EngineConfig,
    n_list: &[usize],
    t: f64,
    replicas: usize,
    phi: &dyn TestFunction,
) -> Result<ChaosScalingReport> {
    let mut covariance = Vec::with_capacity(n_list.len());
    let mut direct = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let mut c = template.clone();
        c.n_particles = n;
        c.t_final = t;
        c.snapshot_times = if t > 0.0 { vec![0.0, t] } else { vec![0.0] };
        let flows: Vec<EmpiricalFlow> = run_replicas(&c, replicas)
            .into_iter()
            .map(|o| o.map(|o| o.flow))
            .collect::<Result<_>>()?;
        covariance.push(chaos_covariance_paired(&flows, phi, t, 0.0)?);
        direct.push(chaos_covariance(&flows, phi, t)?);
    }
    let ratios = covariance.windows(2).map(|w| w[0].value.abs() / w[1].value.abs()).collect();
    Ok(ChaosScalingReport {
        t,
        n: n_list.to_vec(),
        covariance,
        covariance_direct: direct,
        ratios,
    })
}

/// Root-mean-square over replicas of the weak-form residual of `phi` at
/// `t`, for each `N`. The template's snapshot grid is kept.
pub fn weak_residual_scaling(
    template: &EngineConfig,
    n_list: &[usize],
    phi: &dyn TestFunction,
    t: f64,
    replicas: usize,
    pair_cap: usize,
) -> Result<Vec<EstimatorReport>> {
    let op = WeakOperator::new(&template.kernel);
    n_list
        .iter()
        .map(|&n| {
            let mut c = template.clone();
            c.n_particles = n;
            let res: Vec<f64> = (0..replicas)
                .map(|r| {
                    let flow = run_replica(&c, r as u64)?.flow;
                    let budget = PairBudget {
                        cap: pair_cap,
                        seed: replica_seed(c.seed, r as u64),
                    };
                    Ok(weak_residual(&flow, phi, &op, t, budget)?.residual)
                })
                .collect::<Result<_>>()?;
            let sq: Vec<f64> = res.iter().map(|x| x * x).collect();
            let (ms, sd) = mean_sd(&sq);
            let rms = ms.sqrt();
            let se = if rms > 0.0 {
                sd / (replicas as f64).sqrt() / (2.0 * rms)
            } else {
                0.0
            };
            let (mean, _) = mean_sd(&res);
            Ok(EstimatorReport::new("weak_residual_rms", rms, se, replicas)
                .with("n_particles", n as f64)
                .with("t", t)
                .with("mean_residual", mean)
                .with("pair_cap", pair_cap as f64))
        })
        .collect()
}

/// Fisher information of the one-particle marginal at each snapshot time,
/// estimated from the pooled replica samples with replica-clustered errors.
pub fn fisher_decay_study(config: &EngineConfig, replicas: usize, method: &FisherMethod) -> Result<Vec<EstimatorReport>> {
    let flows: Vec<EmpiricalFlow> = run_replicas(config, replicas)
        .into_iter()
        .map(|o| o.map(|o| o.flow))
        .collect::<Result<_>>()?;
    config
        .snapshot_times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let pooled: Vec<Velocity> = flows.iter().flat_map(|f| f.snapshots[k].iter().copied()).collect();
            Ok(fisher_estimate_grouped(&pooled, method, config.seed ^ k as u64, Some(config.n_particles))?.with("t", t))
        })
        .collect()
}

/// Whether `x_{k+1} <= x_k + slack sqrt(se_k^2 + se_{k+1}^2)` at every step.
pub fn is_nonincreasing(series: &[EstimatorReport], slack: f64) -> bool {
    series
        .windows(2)
        .all(|w| w[1].value <= w[0].value + slack * (w[0].std_error.powi(2) + w[1].std_error.powi(2)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::InitialCondition;
    use crate::kernel::BetaForm;
    use crate::quadrature::integrate;
    use crate::weakform::{KineticEnergy, QuarticNorm};

    #[test]
    fn density_value_and_mass() {
        assert!((equilibrium_density(Velocity::ZERO) - 0.063_493_635_934_240_97).abs() < 1e-15);
        // radial mass 4 pi int r^2 f(r) dr
        let m = integrate(
            |r| 4.0 * PI * r * r * equilibrium_density(Velocity::new(r, 0.0, 0.0)),
            0.0,
            40.0,
            1e-14,
            1e-13,
            200,
        )
        .unwrap();
        assert!((m.value - 1.0).abs() < 1e-8);
        assert!((maxwellian::h_functional() + 4.256_815_599_614_018).abs() < 1e-12);
    }

    #[test]
    fn cutoff_rate_scales_with_angular_mass() {
        let b0 = BetaForm::DEFAULT_BETA0;
        let k1 = KernelSpec::new(0.0, 0.25, 0.01, BetaForm::CutoffUniform { beta0: b0 }).unwrap();
        let k2 = KernelSpec::new(0.0, 0.25, 0.01, BetaForm::CutoffUniform { beta0: 2.0 * b0 }).unwrap();
        let l1 = maxwell_m4_relaxation_rate(&k1).unwrap();
        let l2 = maxwell_m4_relaxation_rate(&k2).unwrap();
        assert!((l1 - 0.25).abs() < 1e-13);
        assert!((l2 - 2.0 * l1).abs() < 1e-13);
        let pl = KernelSpec::new(0.0, 0.25, 0.05, BetaForm::PowerLaw).unwrap();
        assert!(maxwell_m4_relaxation_rate(&pl).unwrap() > 0.0);
        assert!(maxwell_m4_relaxation_rate(&KernelSpec::new(-1.0, 0.25, 0.05, BetaForm::PowerLaw).unwrap()).is_err());
    }

    /// Monte Carlo over i.i.d. pairs from an isotropic scale mixture of
    /// the pair operator applied to |v|^4, against -lambda (M4 - 15).
    #[test]
    fn closure_rate_matches_pair_average_of_collision_operator() {
        for kernel in [
            KernelSpec::new(
                0.0,
                0.25,
                0.05,
                BetaForm::CutoffUniform {
                    beta0: BetaForm::DEFAULT_BETA0,
                },
            )
            .unwrap(),
            KernelSpec::new(0.0, 0.25, 0.05, BetaForm::PowerLaw).unwrap(),
            KernelSpec::new(0.0, 0.6, 0.0, BetaForm::PowerLaw).unwrap(),
        ] {
            let lambda = maxwell_m4_relaxation_rate(&kernel).unwrap();
            let op = WeakOperator::new(&kernel);
            // per-coordinate variances 0.5 (w 0.8) and 3 (w 0.2): m2 = 3, M4 = 15 (0.8*0.25 + 0.2*9) = 30
            let (mix, v1, v2) = (0.8, 0.5, 3.0);
            let m4 = 15.0 * (mix * v1 * v1 + (1.0 - mix) * v2 * v2);
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let mut draw = || {
                let g = Velocity::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
                g * if rng.random::<f64>() < mix { v1 } else { v2 }.sqrt()
            };
            let m = 400_000;
            let vals: Vec<f64> = (0..m)
                .map(|_| (draw(), draw()))
                .collect::<Vec<_>>()
                .into_par_iter()
                .map(|(v, w)| op.a_sym(&QuarticNorm, v, w).unwrap())
                .collect();
            let (mean, sd) = mean_sd(&vals);
            let se = sd / (m as f64).sqrt();
            let want = -lambda * (m4 - 15.0);
            assert!((mean - want).abs() < 4.0 * se, "lambda {lambda}: {mean} +- {se} vs {want}");
        }
    }

    #[test]
    fn rate_fit_recovers_noiseless_decay() {
        let t: Vec<f64> = (0..30).map(|k| 0.25 * k as f64).collect();
        let y: Vec<f64> = t.iter().map(|s| 15.0 + 12.0 * (-0.37 * s).exp()).collect();
        let f = fit_exponential_rate(&t, &y, 15.0).unwrap();
        assert!((f.rate - 0.37).abs() < 1e-9 && (f.amplitude - 12.0).abs() < 1e-7);
    }

    #[test]
    fn schedule_edge_cases() {
        let k = KernelSpec::new(-1.0, 0.25, 0.2, BetaForm::PowerLaw).unwrap();
        let c = EngineConfig::new(16, k, 0.1, 0);
        let r = epsilon_schedule_study(&c, &[0.1], 0.1, 2, &W2Method::ExactAssignment).unwrap();
        assert!(r.distances.is_empty());
        assert!(epsilon_schedule_study(&c, &[0.1, 0.2], 0.1, 2, &W2Method::ExactAssignment).is_err());
    }

    #[test]
    fn maxwell_eps_beyond_saturation_changes_nothing() {
        // with a cutoff kernel, eps < 1/beta0 leaves the dynamics identical
        let k = KernelSpec::new(
            0.0,
            0.25,
            0.2,
            BetaForm::CutoffUniform {
                beta0: BetaForm::DEFAULT_BETA0,
            },
        )
        .unwrap();
        let c = EngineConfig::new(64, k, 0.5, 3).with_init(InitialCondition::two_bump(2.4, 0.5));
        let r = epsilon_schedule_study(&c, &[0.2, 0.1, 0.05], 0.5, 3, &W2Method::ExactAssignment).unwrap();
        assert!(r.distances.iter().all(|d| d.value == 0.0), "{:?}", r.distances);
    }

    #[test]
    fn scaling_studies_report_one_entry_per_size() {
        let k = KernelSpec::new(-1.0, 0.25, 0.1, BetaForm::PowerLaw).unwrap();
        let c = EngineConfig::new(16, k, 0.2, 1)
            .with_snapshot_every(0.1)
            .with_init(InitialCondition::scale_mixture(0.8, 0.5, 3.0).normalized(false));
        let r = chaos_scaling_study(&c, &[16, 32], 0.2, 30, &KineticEnergy).unwrap();
        assert_eq!((r.covariance.len(), r.ratios.len()), (2, 1));
        assert!(r.covariance.iter().all(|c| c.std_error > 0.0));
        let w = weak_residual_scaling(&c, &[16, 32], &KineticEnergy, 0.2, 3, 1000).unwrap();
        // |v|^2 is collision invariant: the residual vanishes identically
        assert!(w.iter().all(|e| e.value < 1e-12), "{w:?}");
    }
}
