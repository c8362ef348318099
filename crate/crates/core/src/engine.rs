//! Exact event-driven simulation of the regularized Kac particle system.
//!
//! Proposals arrive at the constant rate `Lambda = (N/2) eps^gamma m_eps`,
//! where `m_eps` is the angular mass of the capped kernel. Each proposal
//! picks an ordered pair `i != j` uniformly and is accepted with probability
//! `alpha_eps(|v_i - v_j|) / eps^gamma`. The deflection angle is drawn only
//! for accepted proposals since it does not enter the acceptance test.
//!
//! Random numbers come from two ChaCha8 streams of the run seed: stream 0
//! for the initial condition and stream 1 for the dynamics. Within an event
//! the draw order is: waiting time, `i`, `j`, acceptance (skipped when
//! `gamma = 0`), `theta`, `phi`.

use std::f64::consts::PI;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{build_frame, post_collide, Velocity};
use crate::kernel::KernelSpec;
use crate::weakform::EmpiricalFlow;

/// Relative drift of the conserved sums that aborts a run.
pub const CONSERVATION_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialKind {
    /// i.i.d. standard normal velocities.
    StandardGaussian,
    /// Two isotropic Gaussians centred at `+-separation/2` on the x axis,
    /// weight `mix` on the positive one. The common variance is chosen so
    /// that the balanced mixture has `E|v|^2 = 3`.
    TwoBump { separation: f64, mix: f64 },
    /// Isotropic centred Gaussians with per-coordinate variances `var1`
    /// (weight `mix`) and `var2`.
    ScaleMixture { mix: f64, var1: f64, var2: f64 },
    /// Whitespace-separated rows of three numbers, one per particle.
    CustomSamples { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    #[serde(flatten)]
    pub kind: InitialKind,
    /// Shift to zero mean and rescale to `(1/N) sum |v_i|^2 = 3`.
    #[serde(default = "default_true")]
    pub normalize: bool,
}

fn default_true() -> bool {
    true
}

impl InitialCondition {
    pub fn standard_gaussian() -> Self {
        InitialCondition {
            kind: InitialKind::StandardGaussian,
            normalize: true,
        }
    }

    pub fn two_bump(separation: f64, mix: f64) -> Self {
        InitialCondition {
            kind: InitialKind::TwoBump { separation, mix },
            normalize: true,
        }
    }

    pub fn scale_mixture(mix: f64, var1: f64, var2: f64) -> Self {
        InitialCondition {
            kind: InitialKind::ScaleMixture { mix, var1, var2 },
            normalize: true,
        }
    }

    pub fn custom_samples(path: impl Into<PathBuf>) -> Self {
        InitialCondition {
            kind: InitialKind::CustomSamples { path: path.into() },
            normalize: true,
        }
    }

    pub fn normalized(mut self, normalize: bool) -> Self {
        self.normalize = normalize;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            InitialKind::StandardGaussian | InitialKind::CustomSamples { .. } => Ok(()),
            InitialKind::TwoBump { separation, mix } => {
                let half = 0.5 * separation;
                if !(separation >= 0.0 && half * half < 3.0) {
                    return Err(Error::Config(format!(
                        "two_bump separation {separation} must lie in [0, 2 sqrt(3))"
                    )));
                }
                check_mix(mix)
            }
            InitialKind::ScaleMixture { mix, var1, var2 } => {
                if !(var1 > 0.0 && var2 > 0.0 && var1.is_finite() && var2.is_finite()) {
                    return Err(Error::Config("scale_mixture variances must be positive".into()));
                }
                check_mix(mix)
            }
        }
    }

    /// Draws `n` velocities.
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Result<Vec<Velocity>> {
        self.validate()?;
        let mut vs: Vec<Velocity> = match &self.kind {
            InitialKind::StandardGaussian => (0..n).map(|_| gaussian(rng)).collect(),
            InitialKind::TwoBump { separation, mix } => {
                let half = 0.5 * separation;
                let s = ((3.0 - half * half) / 3.0).sqrt();
                let mut out = Vec::with_capacity(n);
                for _ in 0..n {
                    let g = gaussian(rng) * s;
                    let side = if rng.random::<f64>() < *mix { half } else { -half };
                    out.push(g + Velocity::new(side, 0.0, 0.0));
                }
                out
            }
            InitialKind::ScaleMixture { mix, var1, var2 } => {
                let (s1, s2) = (var1.sqrt(), var2.sqrt());
                let mut out = Vec::with_capacity(n);
                for _ in 0..n {
                    let g = gaussian(rng);
                    let s = if rng.random::<f64>() < *mix { s1 } else { s2 };
                    out.push(g * s);
                }
                out
            }
            InitialKind::CustomSamples { path } => {
                let vs = read_velocity_table(path)?;
                if vs.len() != n {
                    return Err(Error::Config(format!(
                        "{} holds {} velocities, config asks for {n}",
                        path.display(),
                        vs.len()
                    )));
                }
                vs
            }
        };
        if self.normalize {
            normalize(&mut vs)?;
        }
        Ok(vs)
    }
}

fn gaussian(rng: &mut impl Rng) -> Velocity {
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    let z: f64 = rng.sample(StandardNormal);
    Velocity::new(x, y, z)
}

fn check_mix(mix: f64) -> Result<()> {
    if (0.0..=1.0).contains(&mix) {
        Ok(())
    } else {
        Err(Error::Config(format!("mixture weight {mix} outside [0, 1]")))
    }
}

/// Parses a text table of velocities (`#` starts a comment).
pub fn read_velocity_table(path: &std::path::Path) -> Result<Vec<Velocity>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let nums: Vec<f64> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format {
                path: path.display().to_string(),
                reason: format!("line {}: {e}", ln + 1),
            })?;
        if nums.len() != 3 || nums.iter().any(|x| !x.is_finite()) {
            return Err(Error::Format {
                path: path.display().to_string(),
                reason: format!("line {}: expected three finite numbers", ln + 1),
            });
        }
        out.push(Velocity::new(nums[0], nums[1], nums[2]));
    }
    Ok(out)
}

/// Shifts to zero mean and scales to mean square speed 3.
pub fn normalize(vs: &mut [Velocity]) -> Result<()> {
    let n = vs.len() as f64;
    let (p, _) = conserved_sums(vs);
    let mean = p / n;
    for v in vs.iter_mut() {
        *v -= mean;
    }
    let (_, e) = conserved_sums(vs);
    if !(e > 0.0) {
        return Err(Error::InvalidInput("cannot normalize a sample with zero spread".into()));
    }
    let s = (3.0 * n / e).sqrt();
    for v in vs.iter_mut() {
        *v = *v * s;
    }
    Ok(())
}

/// Neumaier-compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    c: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.c
    }
}

/// Compensated `(sum v_i, sum |v_i|^2)`.
pub fn conserved_sums(vs: &[Velocity]) -> (Velocity, f64) {
    let mut px = CompensatedSum::default();
    let mut py = CompensatedSum::default();
    let mut pz = CompensatedSum::default();
    let mut e = CompensatedSum::default();
    for v in vs {
        px.add(v.x);
        py.add(v.y);
        pz.add(v.z);
        e.add(v.x * v.x);
        e.add(v.y * v.y);
        e.add(v.z * v.z);
    }
    (Velocity::new(px.value(), py.value(), pz.value()), e.value())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub n_particles: usize,
    pub kernel: KernelSpec,
    pub t_final: f64,
    pub seed: u64,
    pub snapshot_times: Vec<f64>,
    pub init: InitialCondition,
    /// Keep a record of every proposal.
    #[serde(default)]
    pub event_log: bool,
    /// Audit conservation every this many accepted collisions, besides the
    /// audits at snapshots. 0 disables the extra audits.
    #[serde(default)]
    pub audit_every: u64,
}

impl EngineConfig {
    pub fn new(n_particles: usize, kernel: KernelSpec, t_final: f64, seed: u64) -> Self {
        EngineConfig {
            n_particles,
            kernel,
            t_final,
            seed,
            snapshot_times: vec![0.0, t_final],
            init: InitialCondition::standard_gaussian(),
            event_log: false,
            audit_every: 0,
        }
    }

    /// Snapshots at `0, dt, 2 dt, ...` up to `t_final`.
    pub fn with_snapshot_every(mut self, dt: f64) -> Self {
        let k = (self.t_final / dt + 1e-9).floor() as usize;
        let mut times: Vec<f64> = (0..=k).map(|m| m as f64 * dt).collect();
        if self.t_final - times[k] > 1e-9 * dt {
            times.push(self.t_final);
        } else {
            times[k] = self.t_final;
        }
        self.snapshot_times = times;
        self
    }

    pub fn with_init(mut self, init: InitialCondition) -> Self {
        self.init = init;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::Config(format!("n = {} must be at least 2", self.n_particles)));
        }
        if !(self.kernel.eps > 0.0) {
            return Err(Error::Config(
                "eps must be > 0: only the regularized system (bounded jump rate) is simulated".into(),
            ));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config(format!("t_final = {} must be finite and >= 0", self.t_final)));
        }
        if self.snapshot_times.is_empty() {
            return Err(Error::Config("at least one snapshot time is required".into()));
        }
        if self.snapshot_times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("snapshot times must increase strictly".into()));
        }
        if self.snapshot_times[0] < 0.0 || *self.snapshot_times.last().unwrap() > self.t_final {
            return Err(Error::Config(format!("snapshot times must lie in [0, t_final = {}]", self.t_final)));
        }
        self.init.validate()
    }
}

/// `Lambda = (N/2) eps^gamma m_eps`, the constant proposal rate.
pub fn total_proposal_rate(config: &EngineConfig) -> f64 {
    let k = &config.kernel;
    0.5 * config.n_particles as f64 * k.derived.alpha_sup * k.derived.angular_mass_eps
}

/// Seed of replica `k`: the master seed itself for `k = 0`, otherwise a
/// SplitMix64 finalization of `master + k * 0x9E3779B97F4A7C15`.
pub fn replica_seed(master: u64, k: u64) -> u64 {
    if k == 0 {
        return master;
    }
    let mut z = master.wrapping_add(k.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemState {
    pub velocities: Vec<Velocity>,
    pub t: f64,
    pub n_proposals: u64,
    pub n_collisions: u64,
    pub momentum0: Velocity,
    pub energy0: f64,
}

impl SystemState {
    pub fn new(velocities: Vec<Velocity>) -> Result<Self> {
        if velocities.len() < 2 {
            return Err(Error::InvalidInput("a Kac system needs N >= 2".into()));
        }
        if let Some(v) = velocities.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite initial velocity {v}")));
        }
        let (momentum0, energy0) = conserved_sums(&velocities);
        Ok(SystemState {
            velocities,
            t: 0.0,
            n_proposals: 0,
            n_collisions: 0,
            momentum0,
            energy0,
        })
    }

    /// Relative drifts `(|P - P0| / sqrt(N E0), |E - E0| / E0)`.
    ///
    /// Momentum is scaled by `sqrt(N E0)`, the Cauchy-Schwarz bound on
    /// `|sum v_i|`, since `P0` itself vanishes for normalized data.
    pub fn drift(&self) -> (f64, f64) {
        let (p, e) = conserved_sums(&self.velocities);
        let n = self.velocities.len() as f64;
        let pscale = (n * self.energy0).sqrt().max(f64::MIN_POSITIVE);
        let escale = self.energy0.max(f64::MIN_POSITIVE);
        ((p - self.momentum0).norm() / pscale, (e - self.energy0).abs() / escale)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t: f64,
    pub i: u32,
    pub j: u32,
    /// NaN for rejected proposals, whose angles are never drawn.
    pub theta: f64,
    pub phi: f64,
    pub accepted: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub t: f64,
    pub n_proposals: u64,
    pub n_collisions: u64,
    pub momentum_drift: f64,
    pub energy_drift: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub seed: u64,
    pub flow: EmpiricalFlow,
    pub audits: Vec<AuditRecord>,
    pub events: Option<Vec<EventRecord>>,
    pub state: SystemState,
    pub proposal_rate: f64,
}

/// A running simulation.
pub struct Engine {
    config: EngineConfig,
    state: SystemState,
    rng: ChaCha8Rng,
    waiting: Exp<f64>,
    rate: f64,
    events: Option<Vec<EventRecord>>,
}

impl Engine {
    /// Validates the config and draws the initial condition.
    pub fn new(config: EngineConfig) -> Result<Self> {
        config.validate()?;
        let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
        init_rng.set_stream(0);
        let vs = config.init.sample(config.n_particles, &mut init_rng)?;
        Engine::with_velocities(config, vs)
    }

    /// Starts from the given velocities instead of the configured initial condition.
    pub fn with_velocities(config: EngineConfig, velocities: Vec<Velocity>) -> Result<Self> {
        config.validate()?;
        if velocities.len() != config.n_particles {
            return Err(Error::InvalidInput(format!(
                "{} velocities for n = {}",
                velocities.len(),
                config.n_particles
            )));
        }
        let state = SystemState::new(velocities)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1);
        let rate = total_proposal_rate(&config);
        let waiting = Exp::new(rate).map_err(|e| Error::Config(format!("proposal rate {rate}: {e}")))?;
        let events = config.event_log.then(Vec::new);
        Ok(Engine {
            config,
            state,
            rng,
            waiting,
            rate,
            events,
        })
    }

    pub fn state(&self) -> &SystemState {
        &self.state
    }

    pub fn proposal_rate(&self) -> f64 {
        self.rate
    }

    /// Advances by one proposal, accepted or not.
    pub fn step(&mut self) -> Result<EventRecord> {
        let dt = self.waiting.sample(&mut self.rng);
        self.fire(self.state.t + dt)
    }

    fn fire(&mut self, t: f64) -> Result<EventRecord> {
        let n = self.state.velocities.len();
        let i = self.rng.random_range(0..n);
        let j = self.rng.random_range(0..n - 1);
        let j = if j >= i { j + 1 } else { j };
        self.state.t = t;
        self.state.n_proposals += 1;
        let (vi, vj) = (self.state.velocities[i], self.state.velocities[j]);
        let z = vi - vj;
        let k = &self.config.kernel;
        let accepted = k.gamma == 0.0 || self.rng.random::<f64>() < k.acceptance(z.norm());
        let mut rec = EventRecord {
            t,
            i: i as u32,
            j: j as u32,
            theta: f64::NAN,
            phi: f64::NAN,
            accepted,
        };
        if accepted {
            let theta = k.sample_theta(self.rng.random::<f64>());
            let phi = 2.0 * PI * self.rng.random::<f64>();
            rec.theta = theta;
            rec.phi = phi;
            self.state.n_collisions += 1;
            // a coincident pair is a fixed point of every collision
            if z.norm_sq() > 0.0 {
                let frame = build_frame(z)?;
                let (a, b) = post_collide(vi, vj, frame.sigma(theta, phi));
                if !(a.is_finite() && b.is_finite()) {
                    return Err(Error::NonFinite {
                        event: self.state.n_proposals,
                        detail: format!("{rec:?}: ({vi}, {vj}) -> ({a}, {b})"),
                    });
                }
                self.state.velocities[i] = a;
                self.state.velocities[j] = b;
            }
        }
        if let Some(ev) = self.events.as_mut() {
            ev.push(rec);
        }
        Ok(rec)
    }

    fn audit(&self) -> Result<AuditRecord> {
        let (dp, de) = self.state.drift();
        let rec = AuditRecord {
            t: self.state.t,
            n_proposals: self.state.n_proposals,
            n_collisions: self.state.n_collisions,
            momentum_drift: dp,
            energy_drift: de,
        };
        if !(dp <= CONSERVATION_TOL && de <= CONSERVATION_TOL) {
            return Err(Error::Conservation {
                t: rec.t,
                momentum_drift: dp,
                energy_drift: de,
            });
        }
        Ok(rec)
    }

    /// Simulates to `t_final`, copying the state at each snapshot time.
    pub fn run(mut self) -> Result<RunOutput> {
        let times = self.config.snapshot_times.clone();
        let mut snaps = Vec::with_capacity(times.len());
        let mut audits = Vec::with_capacity(times.len());
        let mut next = 0;
        let mut last_audit = 0;
        loop {
            let t_next = self.state.t + self.waiting.sample(&mut self.rng);
            while next < times.len() && times[next] < t_next {
                snaps.push(self.state.velocities.clone());
                let mut a = self.audit()?;
                a.t = times[next];
                audits.push(a);
                next += 1;
            }
            if t_next > self.config.t_final {
                break;
            }
            self.fire(t_next)?;
            let every = self.config.audit_every;
            if every > 0 && self.state.n_collisions >= last_audit + every {
                last_audit = self.state.n_collisions;
                self.audit()?;
            }
        }
        let flow = EmpiricalFlow::new(times, snaps)?;
        Ok(RunOutput {
            seed: self.config.seed,
            flow,
            audits,
            events: self.events,
            state: self.state,
            proposal_rate: self.rate,
        })
    }
}

/// One run from the configured seed.
pub fn run(config: &EngineConfig) -> Result<RunOutput> {
    Engine::new(config.clone())?.run()
}

/// Replica `k` of a replica set: the same config with seed
/// `replica_seed(config.seed, k)`.
pub fn run_replica(config: &EngineConfig, k: u64) -> Result<RunOutput> {
    let mut c = config.clone();
    c.seed = replica_seed(config.seed, k);
    run(&c)
}

/// Independent replicas run in parallel; failures stay with their replica.
pub fn run_replicas(config: &EngineConfig, n_replicas: usize) -> Vec<Result<RunOutput>> {
    (0..n_replicas as u64).into_par_iter().map(|k| run_replica(config, k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::angle_between;
    use crate::kernel::BetaForm;

    fn soft(eps: f64) -> KernelSpec {
        KernelSpec::new(-1.0, 0.25, eps, BetaForm::PowerLaw).unwrap()
    }

    #[test]
    fn normalization_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for init in [
            InitialCondition::standard_gaussian(),
            InitialCondition::two_bump(2.4, 0.3),
            InitialCondition::scale_mixture(0.8, 0.5, 3.0),
        ] {
            let vs = init.sample(777, &mut rng).unwrap();
            let (p, e) = conserved_sums(&vs);
            assert!(p.norm() < 1e-12);
            assert!((e / 777.0 - 3.0).abs() < 1e-13);
        }
        let mut flat = vec![Velocity::new(1.0, 1.0, 1.0); 4];
        assert!(normalize(&mut flat).is_err());
        assert!(InitialCondition::two_bump(4.0, 0.5).validate().is_err());
        assert!(InitialCondition::scale_mixture(1.5, 1.0, 1.0).validate().is_err());
    }

    #[test]
    fn config_validation() {
        let k = soft(0.05);
        assert!(EngineConfig::new(1, k.clone(), 1.0, 0).validate().is_err());
        assert!(EngineConfig::new(10, soft(0.0), 1.0, 0).validate().is_err());
        let mut c = EngineConfig::new(10, k.clone(), 1.0, 0);
        c.snapshot_times = vec![0.0, 2.0];
        assert!(c.validate().is_err());
        c.snapshot_times = vec![0.5, 0.5];
        assert!(c.validate().is_err());
        let c = EngineConfig::new(10, k, 1.0, 0).with_snapshot_every(0.3);
        assert_eq!(c.snapshot_times, vec![0.0, 0.3, 0.6, 0.8999999999999999, 1.0]);
    }

    #[test]
    fn proposal_rate_formula() {
        let m = BetaForm::DEFAULT_BETA0;
        let k = KernelSpec::new(0.0, 0.25, 0.05, BetaForm::CutoffUniform { beta0: m }).unwrap();
        let c = EngineConfig::new(100, k.clone(), 1.0, 0);
        let mass = k.derived.angular_mass_eps;
        assert!((mass - 1.0).abs() < 1e-15);
        assert!((total_proposal_rate(&c) - 100.0 * mass / 2.0).abs() < 1e-12);
        let c2 = EngineConfig::new(200, k, 1.0, 0);
        assert_eq!(total_proposal_rate(&c2), 2.0 * total_proposal_rate(&c));
        let s = soft(0.1);
        let c = EngineConfig::new(2, s.clone(), 1.0, 0);
        assert!((total_proposal_rate(&c) - s.derived.angular_mass_eps / 0.1).abs() < 1e-10);
    }

    #[test]
    fn two_particle_proposal_count_is_poisson() {
        let k = soft(0.1);
        let t = 50.0;
        let c = EngineConfig::new(2, k, t, 11);
        let out = run(&c).unwrap();
        let mean = out.proposal_rate * t;
        let got = out.state.n_proposals as f64;
        assert!((got - mean).abs() < 3.0 * mean.sqrt(), "{got} vs {mean}");
    }

    #[test]
    fn zero_horizon_keeps_initial_state() {
        let mut c = EngineConfig::new(64, soft(0.05), 0.0, 3);
        c.snapshot_times = vec![0.0];
        let out = run(&c).unwrap();
        assert_eq!(out.flow.times, vec![0.0]);
        assert_eq!(out.state.n_proposals, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        rng.set_stream(0);
        assert_eq!(out.flow.snapshots[0], c.init.sample(64, &mut rng).unwrap());
    }

    #[test]
    fn collision_displacement_and_acceptance() {
        let k = soft(0.05);
        assert_eq!(k.acceptance(0.0), 1.0);
        let mut e = Engine::new(EngineConfig::new(32, k, 1.0, 5)).unwrap();
        let mut seen = 0;
        while seen < 200 {
            let before = e.state().velocities.clone();
            let r = e.step().unwrap();
            if !r.accepted {
                continue;
            }
            seen += 1;
            let (i, j) = (r.i as usize, r.j as usize);
            let after = &e.state().velocities;
            let z = before[i] - before[j];
            let d = (after[i] - before[i]).norm();
            assert!((d - (0.5 * r.theta).sin() * z.norm()).abs() < 1e-12 * (1.0 + z.norm()));
            let zp = after[i] - after[j];
            assert!((angle_between(z, zp) - r.theta).abs() < 1e-7);
        }
    }

    #[test]
    fn coincident_pair_collision_is_noop() {
        let k = KernelSpec::new(0.0, 0.25, 0.05, BetaForm::PowerLaw).unwrap();
        let v = Velocity::new(0.5, -0.5, 1.0);
        let mut e = Engine::with_velocities(EngineConfig::new(2, k, 1.0, 1), vec![v, v]).unwrap();
        for _ in 0..10 {
            assert!(e.step().unwrap().accepted);
        }
        assert_eq!(e.state().velocities, vec![v, v]);
    }

    #[test]
    fn replica_seeds() {
        assert_eq!(replica_seed(42, 0), 42);
        let s: std::collections::HashSet<u64> = (0..1000).map(|k| replica_seed(42, k)).collect();
        assert_eq!(s.len(), 1000);
    }

    #[test]
    fn deterministic_and_replica_independent_of_order() {
        let c = EngineConfig::new(50, soft(0.1), 0.5, 9).with_snapshot_every(0.25);
        let a = run(&c).unwrap();
        let b = run(&c).unwrap();
        assert_eq!(a.flow, b.flow);
        let reps = run_replicas(&c, 3);
        let third = run_replica(&c, 2).unwrap();
        assert_eq!(reps[2].as_ref().unwrap().flow, third.flow);
        assert_eq!(reps[0].as_ref().unwrap().flow, a.flow);
        assert_ne!(reps[1].as_ref().unwrap().flow, a.flow);
    }

    #[test]
    fn event_log_records_every_proposal() {
        let mut c = EngineConfig::new(20, soft(0.1), 0.3, 2);
        c.event_log = true;
        let out = run(&c).unwrap();
        let ev = out.events.unwrap();
        assert_eq!(ev.len() as u64, out.state.n_proposals);
        assert_eq!(ev.iter().filter(|e| e.accepted).count() as u64, out.state.n_collisions);
        assert!(ev.windows(2).all(|w| w[1].t > w[0].t));
        assert!(ev.iter().all(|e| e.i != e.j && e.t <= 0.3));
    }

    #[test]
    fn compensated_sum_recovers_cancellation() {
        let mut s = CompensatedSum::default();
        for x in [1e16, 1.0, -1e16, 1.0] {
            s.add(x);
        }
        assert_eq!(s.value(), 2.0);
    }
}
