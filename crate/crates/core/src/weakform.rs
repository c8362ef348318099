//! Weak collision operators and residuals of empirical flows.
//!
//! For a test function `phi` the one-sided operator is
//!
//! ```text
//! A_bar phi(v, w) = int (phi(v') - phi(v) - (v' - v).grad phi(v)) B dsigma
//!                   - b |v - w|^gamma (v - w).grad phi(v)
//! ```
//!
//! and `A phi(v, w) = (A_bar phi(v, w) + A_bar phi(w, v)) / 2`. Both use the
//! kernel they are given: with `eps > 0` that is the regularized kernel with
//! `alpha_eps`, the `1/eps` cap and `b_eps`, so that the identities below are
//! exact for the simulated particle system.
//!
//! The azimuthal average of `phi(v')` is taken first, in closed form where
//! available. What is left over `theta` is `O(theta^2) beta(theta)` and is
//! integrated with the kernel's graded rule.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{build_frame, Velocity};
use crate::kernel::KernelSpec;
use crate::quadrature::FixedRule;

/// A `C^2` test function with its gradient.
pub trait TestFunction: Send + Sync {
    fn value(&self, v: Velocity) -> f64;
    fn gradient(&self, v: Velocity) -> Velocity;
    /// Sup norm of the second derivatives; infinite when unbounded.
    fn hessian_bound(&self) -> f64;
    fn name(&self) -> String;

    /// Mean of `phi` over the circle `center + radius (i cos t + j sin t)`.
    ///
    /// The default is a 16-point trapezoid rule, exact for trigonometric
    /// polynomials of degree below 16.
    fn circle_average(&self, center: Velocity, radius: f64, i: Velocity, j: Velocity) -> f64 {
        const M: usize = 16;
        let mut s = 0.0;
        for k in 0..M {
            let (sn, cs) = (2.0 * PI * k as f64 / M as f64).sin_cos();
            s += self.value(center + (i * cs + j * sn) * radius);
        }
        s / M as f64
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Constant(pub f64);

impl TestFunction for Constant {
    fn value(&self, _: Velocity) -> f64 {
        self.0
    }
    fn gradient(&self, _: Velocity) -> Velocity {
        Velocity::ZERO
    }
    fn hessian_bound(&self) -> f64 {
        0.0
    }
    fn name(&self) -> String {
        format!("const({})", self.0)
    }
    fn circle_average(&self, _: Velocity, _: f64, _: Velocity, _: Velocity) -> f64 {
        self.0
    }
}

/// `phi(v) = v . direction`
#[derive(Clone, Copy, Debug)]
pub struct Linear(pub Velocity);

impl Linear {
    pub fn component(k: usize) -> Self {
        Linear(Velocity::unit(k))
    }
}

impl TestFunction for Linear {
    fn value(&self, v: Velocity) -> f64 {
        v.dot(self.0)
    }
    fn gradient(&self, _: Velocity) -> Velocity {
        self.0
    }
    fn hessian_bound(&self) -> f64 {
        0.0
    }
    fn name(&self) -> String {
        format!("linear{}", self.0)
    }
    fn circle_average(&self, c: Velocity, _: f64, _: Velocity, _: Velocity) -> f64 {
        c.dot(self.0)
    }
}

/// `phi(v) = |v|^2`
#[derive(Clone, Copy, Debug)]
pub struct KineticEnergy;

impl TestFunction for KineticEnergy {
    fn value(&self, v: Velocity) -> f64 {
        v.norm_sq()
    }
    fn gradient(&self, v: Velocity) -> Velocity {
        v * 2.0
    }
    fn hessian_bound(&self) -> f64 {
        2.0
    }
    fn name(&self) -> String {
        "energy".into()
    }
    fn circle_average(&self, c: Velocity, r: f64, _: Velocity, _: Velocity) -> f64 {
        c.norm_sq() + r * r
    }
}

/// `phi(v) = |v|^4`
#[derive(Clone, Copy, Debug)]
pub struct QuarticNorm;

impl TestFunction for QuarticNorm {
    fn value(&self, v: Velocity) -> f64 {
        v.norm_sq().powi(2)
    }
    fn gradient(&self, v: Velocity) -> Velocity {
        v * (4.0 * v.norm_sq())
    }
    fn hessian_bound(&self) -> f64 {
        f64::INFINITY
    }
    fn name(&self) -> String {
        "quartic".into()
    }
    fn circle_average(&self, c: Velocity, r: f64, i: Velocity, j: Velocity) -> f64 {
        let (a, b) = (c.dot(i), c.dot(j));
        let m = c.norm_sq() + r * r;
        m * m + 2.0 * r * r * (a * a + b * b)
    }
}

/// `phi(v) = exp(-|v - center|^2 / (2 width^2))`
#[derive(Clone, Copy, Debug)]
pub struct GaussianBump {
    pub center: Velocity,
    pub width: f64,
}

impl GaussianBump {
    pub fn new(center: Velocity, width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) || !center.is_finite() {
            return Err(Error::InvalidInput(format!("bad bump center {center} / width {width}")));
        }
        Ok(GaussianBump { center, width })
    }
}

impl TestFunction for GaussianBump {
    fn value(&self, v: Velocity) -> f64 {
        (-(v - self.center).norm_sq() / (2.0 * self.width * self.width)).exp()
    }
    fn gradient(&self, v: Velocity) -> Velocity {
        let s2 = self.width * self.width;
        (v - self.center) * (-self.value(v) / s2)
    }
    fn hessian_bound(&self) -> f64 {
        1.0 / (self.width * self.width)
    }
    fn name(&self) -> String {
        format!("bump(center={}, width={})", self.center, self.width)
    }
    fn circle_average(&self, c: Velocity, r: f64, i: Velocity, j: Velocity) -> f64 {
        let p = c - self.center;
        let s2 = self.width * self.width;
        let rho = p.dot(i).hypot(p.dot(j));
        let x = r * rho / s2;
        (-(p.norm_sq() + r * r - 2.0 * r * rho) / (2.0 * s2)).exp() * bessel_i0_scaled(x)
    }
}

/// `exp(-x) I_0(x)` for `x >= 0`.
pub fn bessel_i0_scaled(x: f64) -> f64 {
    let x = x.abs();
    if x < 25.0 {
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        while term > 1e-17 * sum {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
        }
        sum * (-x).exp()
    } else {
        let e = 8.0 * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..12 {
            let odd = (2 * k - 1) as f64;
            term *= odd * odd / (k as f64 * e);
            sum += term;
        }
        sum / (2.0 * PI * x).sqrt()
    }
}

/// `A_bar` and `A` for a fixed kernel, with the angular rule built once.
#[derive(Clone, Debug)]
pub struct WeakOperator {
    kernel: KernelSpec,
    rule: FixedRule,
}

impl WeakOperator {
    pub fn new(kernel: &KernelSpec) -> Self {
        WeakOperator {
            kernel: kernel.clone(),
            rule: kernel.theta_rule(),
        }
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn a_bar(&self, phi: &dyn TestFunction, v: Velocity, w: Velocity) -> Result<f64> {
        let z = v - w;
        let g = z.norm();
        if g == 0.0 {
            if self.kernel.eps == 0.0 && self.kernel.gamma < 0.0 {
                return Err(Error::Coincident(v));
            }
            return Ok(0.0);
        }
        let frame = build_frame(z)?;
        let half = 0.5 * g;
        let mid = (v + w) * 0.5;
        let drift = z.dot(phi.gradient(v));
        let at_v = phi.value(v);
        let mut jump = 0.0;
        for (&theta, &wt) in self.rule.nodes.iter().zip(&self.rule.weights) {
            let (st, ct) = theta.sin_cos();
            let s_half = (0.5 * theta).sin();
            let avg = phi.circle_average(mid + frame.axis * (half * ct), half * st, frame.i, frame.j);
            jump += wt * (avg - at_v + s_half * s_half * drift);
        }
        Ok(self.kernel.alpha_eps(g) * (2.0 * PI * jump - self.kernel.derived.b_eps * drift))
    }

    pub fn a_sym(&self, phi: &dyn TestFunction, v: Velocity, w: Velocity) -> Result<f64> {
        Ok(0.5 * (self.a_bar(phi, v, w)? + self.a_bar(phi, w, v)?))
    }
}

/// One-shot `A_bar phi(v, w)`.
pub fn a_bar(phi: &dyn TestFunction, v: Velocity, w: Velocity, kernel: &KernelSpec) -> Result<f64> {
    WeakOperator::new(kernel).a_bar(phi, v, w)
}

/// One-shot `A phi(v, w)`.
pub fn a_sym(phi: &dyn TestFunction, v: Velocity, w: Velocity, kernel: &KernelSpec) -> Result<f64> {
    WeakOperator::new(kernel).a_sym(phi, v, w)
}

/// Snapshots of an `N`-particle system on an increasing time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalFlow {
    pub times: Vec<f64>,
    pub snapshots: Vec<Vec<Velocity>>,
}

impl EmpiricalFlow {
    pub fn new(times: Vec<f64>, snapshots: Vec<Vec<Velocity>>) -> Result<Self> {
        if times.len() != snapshots.len() || times.is_empty() {
            return Err(Error::InvalidInput(format!(
                "{} times for {} snapshots",
                times.len(),
                snapshots.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("snapshot times must increase strictly".into()));
        }
        let n = snapshots[0].len();
        if snapshots.iter().any(|s| s.len() != n) {
            return Err(Error::InvalidInput("snapshots differ in particle count".into()));
        }
        Ok(EmpiricalFlow { times, snapshots })
    }

    pub fn n_particles(&self) -> usize {
        self.snapshots[0].len()
    }

    /// Index of the snapshot at time `t` (to within 1e-9).
    pub fn index_of(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-9 * (1.0 + t.abs()))
            .ok_or_else(|| Error::InvalidInput(format!("no snapshot at t = {t}")))
    }

    /// `<mu_t, phi>` at snapshot `k`.
    pub fn mean(&self, phi: &dyn TestFunction, k: usize) -> f64 {
        let s = &self.snapshots[k];
        s.iter().map(|&v| phi.value(v)).sum::<f64>() / s.len() as f64
    }
}

/// How the off-diagonal double sums are evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairBudget {
    /// Above this many unordered pairs the sum is replaced by a uniform
    /// sample of `cap` pairs.
    pub cap: usize,
    pub seed: u64,
}

impl Default for PairBudget {
    fn default() -> Self {
        PairBudget { cap: 1 << 17, seed: 0 }
    }
}

/// `<mu (.) mu, A phi> = (1/(N(N-1))) sum_{i != j} A phi(v_i, v_j)`, exact or
/// subsampled per `budget`. Reduction order is fixed, so results do not
/// depend on the thread count.
pub fn pair_average(op: &WeakOperator, phi: &dyn TestFunction, vs: &[Velocity], budget: PairBudget, salt: u64) -> Result<f64> {
    let n = vs.len();
    if n < 2 {
        return Err(Error::InvalidInput("pair average needs N >= 2".into()));
    }
    let pairs = n * (n - 1) / 2;
    if pairs <= budget.cap {
        let rows: Vec<f64> = (0..n - 1)
            .into_par_iter()
            .map(|i| {
                let mut s = 0.0;
                for j in i + 1..n {
                    s += op.a_sym(phi, vs[i], vs[j])?;
                }
                Ok(s)
            })
            .collect::<Result<_>>()?;
        Ok(rows.iter().sum::<f64>() / pairs as f64)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
        rng.set_stream(salt);
        let drawn: Vec<(usize, usize)> = (0..budget.cap)
            .map(|_| {
                let i = rng.random_range(0..n);
                let j = rng.random_range(0..n - 1);
                (i, if j >= i { j + 1 } else { j })
            })
            .collect();
        let parts: Vec<f64> = drawn
            .par_chunks(4096)
            .map(|c| {
                let mut s = 0.0;
                for &(i, j) in c {
                    s += op.a_sym(phi, vs[i], vs[j])?;
                }
                Ok(s)
            })
            .collect::<Result<_>>()?;
        Ok(parts.iter().sum::<f64>() / budget.cap as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeakResidual {
    pub t: f64,
    /// `<mu_t, phi> - <mu_0, phi>`
    pub increment: f64,
    /// Trapezoid integral of `<mu_s (.) mu_s, A phi>` over `[t_0, t]`.
    pub compensator: f64,
    pub residual: f64,
}

/// Weak-form residual of the flow at snapshot time `t`.
pub fn weak_residual(flow: &EmpiricalFlow, phi: &dyn TestFunction, op: &WeakOperator, t: f64, budget: PairBudget) -> Result<WeakResidual> {
    if flow.times.len() < 2 {
        return Err(Error::InvalidInput("weak residual needs at least two snapshots".into()));
    }
    let k = flow.index_of(t)?;
    let mut integrand = Vec::with_capacity(k + 1);
    for m in 0..=k {
        integrand.push(pair_average(op, phi, &flow.snapshots[m], budget, m as u64)?);
    }
    let compensator = trapezoid(&flow.times[..=k], &integrand);
    let increment = flow.mean(phi, k) - flow.mean(phi, 0);
    Ok(WeakResidual {
        t,
        increment,
        compensator,
        residual: increment - compensator,
    })
}

/// Weak-form residuals at every snapshot time, sharing the pair averages.
pub fn weak_residual_path(
    flow: &EmpiricalFlow,
    phi: &dyn TestFunction,
    op: &WeakOperator,
    budget: PairBudget,
) -> Result<Vec<WeakResidual>> {
    let mut integrand = Vec::with_capacity(flow.times.len());
    for (m, s) in flow.snapshots.iter().enumerate() {
        integrand.push(pair_average(op, phi, s, budget, m as u64)?);
    }
    let base = flow.mean(phi, 0);
    Ok((0..flow.times.len())
        .map(|k| {
            let compensator = trapezoid(&flow.times[..=k], &integrand[..=k]);
            let increment = flow.mean(phi, k) - base;
            WeakResidual {
                t: flow.times[k],
                increment,
                compensator,
                residual: increment - compensator,
            }
        })
        .collect())
}

fn trapezoid(t: &[f64], f: &[f64]) -> f64 {
    t.windows(2)
        .zip(f.windows(2))
        .map(|(t, f)| 0.5 * (t[1] - t[0]) * (f[0] + f[1]))
        .sum()
}

/// A weight that depends on a particle's history up to snapshot `s_index`.
pub trait PastWeight: Send + Sync {
    fn weight(&self, flow: &EmpiricalFlow, particle: usize, s_index: usize) -> Result<f64>;
}

/// `w = 1`
#[derive(Clone, Copy, Debug)]
pub struct UnitWeight;

impl PastWeight for UnitWeight {
    fn weight(&self, _: &EmpiricalFlow, _: usize, _: usize) -> Result<f64> {
        Ok(1.0)
    }
}

/// `w = phi(V_i(at))` with `at` no later than the left end of the increment.
pub struct PastValue<P: TestFunction> {
    pub phi: P,
    pub at: f64,
}

impl<P: TestFunction> PastWeight for PastValue<P> {
    fn weight(&self, flow: &EmpiricalFlow, particle: usize, s_index: usize) -> Result<f64> {
        let k = flow.index_of(self.at)?;
        if k > s_index {
            return Err(Error::InvalidInput(format!(
                "weight reads t = {} after the increment start {}",
                self.at, flow.times[s_index]
            )));
        }
        Ok(self.phi.value(flow.snapshots[k][particle]))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MartingaleResidual {
    /// Mean over replicas of the per-replica particle average.
    pub mean: f64,
    pub std_error: f64,
    pub per_replica: Vec<f64>,
}

/// Replica estimate of `E[w (M_t - M_s)]` for the single-particle martingale
///
/// ```text
/// M_t = phi(V_i(t)) - int_0^t (1/(N-1)) sum_{j != i} A_bar phi(V_i, V_j) du
/// ```
///
/// averaged over the first `tracked` particles of each replica.
pub fn martingale_residual(
    flows: &[EmpiricalFlow],
    phi: &dyn TestFunction,
    op: &WeakOperator,
    s: f64,
    t: f64,
    weight: &dyn PastWeight,
    tracked: usize,
) -> Result<MartingaleResidual> {
    if flows.len() < 2 {
        return Err(Error::InvalidInput("martingale residual needs at least two replicas".into()));
    }
    if !(s < t) {
        return Err(Error::InvalidInput(format!("need s < t, got s = {s}, t = {t}")));
    }
    let per_replica: Vec<f64> = flows
        .par_iter()
        .map(|flow| {
            if flow.times.len() < 2 {
                return Err(Error::InvalidInput("martingale residual needs at least two snapshots".into()));
            }
            let (a, b) = (flow.index_of(s)?, flow.index_of(t)?);
            let n = flow.n_particles();
            let m = tracked.clamp(1, n);
            let mut acc = 0.0;
            for i in 0..m {
                let mut rate = Vec::with_capacity(b - a + 1);
                for k in a..=b {
                    let vs = &flow.snapshots[k];
                    let mut r = 0.0;
                    for (j, &w) in vs.iter().enumerate() {
                        if j != i {
                            r += op.a_bar(phi, vs[i], w)?;
                        }
                    }
                    rate.push(r / (n - 1) as f64);
                }
                let dm = phi.value(flow.snapshots[b][i]) - phi.value(flow.snapshots[a][i]) - trapezoid(&flow.times[a..=b], &rate);
                acc += weight.weight(flow, i, a)? * dm;
            }
            Ok(acc / m as f64)
        })
        .collect::<Result<_>>()?;
    let (mean, sd) = mean_sd(&per_replica);
    Ok(MartingaleResidual {
        mean,
        std_error: sd / (per_replica.len() as f64).sqrt(),
        per_replica,
    })
}

pub(crate) fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, v.sqrt())
}
