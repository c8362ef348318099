//! Collision kernel `B(z, sigma) sin(theta) = alpha(|z|) beta(theta)` with
//! `alpha(r) = r^gamma` and `beta(theta) = theta^(-1-nu)`, its
//! regularization by `eps`, and the constants the rest of the crate needs.
//!
//! The regularized kernel replaces `alpha` by `(eps^2 + r^2)^(gamma/2)` and
//! `beta` by `min(beta, 1/eps)`. One `eps` drives both.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{build_frame, post_collide, Velocity};
use crate::quadrature::{integrate, FixedRule};

/// Convention recorded in every output header: the two-sided bounds on
/// `beta` are collapsed to `c1 = c2 = 1`.
pub const BETA_CONVENTION: &str = "c1=c2=1";

/// Series/quadrature split point for the power-law angular integrals.
const SERIES_SPLIT: f64 = 0.5;
/// Smallest panel angle of unregularized sphere rules. Below it the
/// integrand is taken as quadratic in theta and folded into one endpoint
/// node, leaving an error O(THETA_FLOOR^(4-nu)) while keeping roundoff in
/// `F(theta)` from being amplified by `theta^(-1-nu)`.
const THETA_FLOOR: f64 = 1e-6;
const PANEL_ORDER: usize = 12;
const QUAD_TOL: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BetaForm {
    /// `beta(theta) = theta^(-1-nu)`.
    PowerLaw,
    /// `beta(theta) = beta0`, a Grad-cutoff kernel for the Maxwell benchmark.
    CutoffUniform { beta0: f64 },
}

impl BetaForm {
    /// Constant giving unit angular mass `2 pi^2 beta0 = 1`.
    pub const DEFAULT_BETA0: f64 = 1.0 / (2.0 * PI * PI);

    pub fn name(&self) -> &'static str {
        match self {
            BetaForm::PowerLaw => "power_law",
            BetaForm::CutoffUniform { .. } => "cutoff_uniform",
        }
    }
}

/// Constants derived once at construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelConstants {
    /// `pi int_0^pi (1 - cos t) beta(t) dt`
    pub b: f64,
    /// Same integral with the capped angular function; equals `b` when `eps = 0`.
    pub b_eps: f64,
    /// `sup_r alpha_eps(r) = eps^gamma`; 1 for Maxwell molecules.
    pub alpha_sup: f64,
    /// `2 pi int_0^pi min(beta, 1/eps) dt`; infinite for the unregularized power law.
    pub angular_mass_eps: f64,
    /// Angle below which the cap is active; 0 when there is no cap.
    pub theta_c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub gamma: f64,
    pub nu: f64,
    pub eps: f64,
    pub beta_form: BetaForm,
    pub derived: KernelConstants,
}

impl KernelSpec {
    pub fn new(gamma: f64, nu: f64, eps: f64, beta_form: BetaForm) -> Result<Self> {
        if !(gamma > -2.0 && gamma <= 0.0) {
            return Err(Error::Config(format!(
                "gamma = {gamma} outside (-2, 0]: the model covers moderately soft potentials gamma in (-2, 0) plus Maxwell molecules gamma = 0"
            )));
        }
        if !(nu > 0.0 && nu < 1.0) {
            return Err(Error::Config(format!(
                "nu = {nu} outside (0, 1): the angular singularity beta ~ theta^(-1-nu) needs nu in (0, 1)"
            )));
        }
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::Config(format!("eps = {eps} must be finite and >= 0")));
        }
        if let BetaForm::CutoffUniform { beta0 } = beta_form {
            if !(beta0 > 0.0 && beta0.is_finite()) {
                return Err(Error::Config(format!("beta0 = {beta0} must be positive")));
            }
        }
        let mut spec = KernelSpec {
            gamma,
            nu,
            eps,
            beta_form,
            derived: KernelConstants {
                b: 0.0,
                b_eps: 0.0,
                alpha_sup: 0.0,
                angular_mass_eps: 0.0,
                theta_c: 0.0,
            },
        };
        let b = compute_b(&spec)?;
        let b_eps = if eps > 0.0 { b_regularized(&spec)? } else { b };
        spec.derived = KernelConstants {
            b,
            b_eps,
            alpha_sup: if gamma == 0.0 { 1.0 } else { eps.powf(gamma) },
            angular_mass_eps: spec.angular_mass(),
            theta_c: spec.cap_angle(),
        };
        Ok(spec)
    }

    /// Physical inverse-power-law family: force `~ 1/r^s` gives
    /// `gamma = (s-5)/(s-1)` and `nu = 2/(s-1)`.
    pub fn from_force_exponent(s: f64, eps: f64) -> Result<Self> {
        if !(s > 2.0 && s.is_finite()) {
            return Err(Error::Config(format!("force exponent s = {s} must lie in (2, inf)")));
        }
        KernelSpec::new((s - 5.0) / (s - 1.0), 2.0 / (s - 1.0), eps, BetaForm::PowerLaw)
    }

    /// Copy with a different `eps`, constants recomputed.
    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        KernelSpec::new(self.gamma, self.nu, eps, self.beta_form)
    }

    pub fn is_maxwell(&self) -> bool {
        self.gamma == 0.0
    }

    /// Whether `(gamma, nu)` sits on the inverse-power-law curve for some `s`.
    pub fn is_physical_family(&self, tol: f64) -> bool {
        // nu = 2/(s-1)  =>  s = 1 + 2/nu
        let s = 1.0 + 2.0 / self.nu;
        ((s - 5.0) / (s - 1.0) - self.gamma).abs() <= tol
    }

    /// Unregularized angular function.
    #[inline]
    pub fn beta(&self, theta: f64) -> f64 {
        match self.beta_form {
            BetaForm::PowerLaw => theta.powf(-1.0 - self.nu),
            BetaForm::CutoffUniform { beta0 } => beta0,
        }
    }

    /// Angular function after the `1/eps` cap (uncapped when `eps = 0`).
    #[inline]
    pub fn beta_eff(&self, theta: f64) -> f64 {
        let b = self.beta(theta);
        if self.eps > 0.0 {
            b.min(1.0 / self.eps)
        } else {
            b
        }
    }

    fn cap_angle(&self) -> f64 {
        if self.eps <= 0.0 {
            return 0.0;
        }
        match self.beta_form {
            BetaForm::PowerLaw => self.eps.powf(1.0 / (1.0 + self.nu)).min(PI),
            BetaForm::CutoffUniform { beta0 } => {
                if beta0 * self.eps >= 1.0 {
                    PI
                } else {
                    0.0
                }
            }
        }
    }

    fn angular_mass(&self) -> f64 {
        match self.beta_form {
            BetaForm::CutoffUniform { .. } => 2.0 * PI * PI * self.beta_eff(1.0),
            BetaForm::PowerLaw => {
                if self.eps <= 0.0 {
                    return f64::INFINITY;
                }
                let tc = self.cap_angle();
                let capped = tc / self.eps;
                let tail = if tc < PI {
                    (tc.powf(-self.nu) - PI.powf(-self.nu)) / self.nu
                } else {
                    0.0
                };
                2.0 * PI * (capped + tail)
            }
        }
    }

    /// `(eps^2 + r^2)^(gamma/2)`; `r^gamma` when `eps = 0`.
    #[inline]
    pub fn alpha_eps(&self, r: f64) -> f64 {
        if self.gamma == 0.0 {
            1.0
        } else {
            (self.eps * self.eps + r * r).powf(0.5 * self.gamma)
        }
    }

    /// Thinning acceptance `alpha_eps(r) / eps^gamma = (1 + r^2/eps^2)^(gamma/2)`.
    #[inline]
    pub fn acceptance(&self, r: f64) -> f64 {
        if self.gamma == 0.0 {
            1.0
        } else {
            let q = r / self.eps;
            (1.0 + q * q).powf(0.5 * self.gamma)
        }
    }

    /// CDF of the normalized capped angular density on `(0, pi]`.
    pub fn theta_cdf(&self, theta: f64) -> f64 {
        let theta = theta.clamp(0.0, PI);
        match self.beta_form {
            BetaForm::CutoffUniform { .. } => theta / PI,
            BetaForm::PowerLaw => {
                assert!(self.eps > 0.0, "angular law needs eps > 0");
                let tc = self.derived.theta_c;
                let total = self.derived.angular_mass_eps / (2.0 * PI);
                let partial = if theta <= tc {
                    theta / self.eps
                } else {
                    tc / self.eps + (tc.powf(-self.nu) - theta.powf(-self.nu)) / self.nu
                };
                partial / total
            }
        }
    }

    /// Maps `u` in `[0, 1)` to a deflection angle with density proportional
    /// to `min(beta, 1/eps)` on `(0, pi]`, by exact inversion of the CDF.
    pub fn sample_theta(&self, u: f64) -> f64 {
        // 1 - u lies in (0, 1], keeping theta off 0
        let u = 1.0 - u;
        match self.beta_form {
            BetaForm::CutoffUniform { .. } => PI * u,
            BetaForm::PowerLaw => {
                debug_assert!(self.eps > 0.0);
                let tc = self.derived.theta_c;
                let mass = u * self.derived.angular_mass_eps / (2.0 * PI);
                let capped = tc / self.eps;
                if mass <= capped {
                    mass * self.eps
                } else {
                    let t = (tc.powf(-self.nu) - self.nu * (mass - capped)).powf(-1.0 / self.nu);
                    t.min(PI)
                }
            }
        }
    }

    /// Quadrature rule for `int_0^pi F(theta) beta_eff(theta) dtheta`, the
    /// angular factor folded into the weights. Accurate for integrands
    /// `F(theta) = O(theta^2)` at the origin.
    pub fn theta_rule(&self) -> FixedRule {
        let mut rule = FixedRule::default();
        match self.beta_form {
            BetaForm::CutoffUniform { .. } => {
                for k in 0..4 {
                    let a = PI * k as f64 / 4.0;
                    rule.push_panel(a, a + PI / 4.0, PANEL_ORDER);
                }
            }
            BetaForm::PowerLaw => {
                let tc = self.derived.theta_c;
                if tc > 0.0 {
                    let panels = if tc >= PI { 4 } else { 1 };
                    for k in 0..panels {
                        let w = tc / panels as f64;
                        rule.push_panel(k as f64 * w, (k + 1) as f64 * w, PANEL_ORDER);
                    }
                    if tc < PI {
                        rule.push_graded(tc, PI, 2.0, PANEL_ORDER);
                    }
                } else {
                    rule.push_graded(THETA_FLOOR, PI, 2.0, PANEL_ORDER);
                }
            }
        }
        for (w, &t) in rule.weights.iter_mut().zip(&rule.nodes) {
            *w *= self.beta_eff(t);
        }
        if self.derived.theta_c == 0.0 && self.beta_form == BetaForm::PowerLaw {
            // int_0^f (t/f)^2 t^(-1-nu) dt
            rule.nodes.push(THETA_FLOOR);
            rule.weights.push(THETA_FLOOR.powf(-self.nu) / (2.0 - self.nu));
        }
        rule
    }

    /// Same as [`theta_rule`](Self::theta_rule) restricted to `theta > eta`.
    pub fn theta_rule_truncated(&self, eta: f64) -> FixedRule {
        let mut rule = FixedRule::default();
        let tc = self.derived.theta_c;
        if eta < tc {
            rule.push_panel(eta, tc.min(PI), PANEL_ORDER);
        }
        let lo = eta.max(tc);
        if lo < PI {
            match self.beta_form {
                BetaForm::CutoffUniform { .. } => rule.push_panel(lo, PI, PANEL_ORDER),
                BetaForm::PowerLaw => rule.push_graded(lo, PI, 2.0, PANEL_ORDER),
            }
        }
        for (w, &t) in rule.weights.iter_mut().zip(&rule.nodes) {
            *w *= self.beta_eff(t);
        }
        rule
    }
}

/// `int_0^x (1 - cos t) t^(-1-nu) dt` by its alternating power series.
fn power_law_head(x: f64, nu: f64) -> f64 {
    let mut sum = 0.0;
    let mut fact = 1.0; // (2k)!
    let x2 = x * x;
    let mut pow = 1.0; // x^(2k)
    for k in 1..40 {
        let kk = 2 * k;
        fact *= (kk - 1) as f64 * kk as f64;
        pow *= x2;
        let term = pow / (fact * (kk as f64 - nu));
        if k % 2 == 1 {
            sum += term;
        } else {
            sum -= term;
        }
        if term < 1e-18 * sum.abs() {
            break;
        }
    }
    sum * x.powf(-nu)
}

/// `int_a^pi (1 - cos t) t^(-1-nu) dt` for `a >= 0`.
fn power_law_tail(a: f64, nu: f64) -> Result<f64> {
    let f = |t: f64| (1.0 - t.cos()) * t.powf(-1.0 - nu);
    if a < SERIES_SPLIT {
        let head = power_law_head(SERIES_SPLIT, nu) - if a > 0.0 { power_law_head(a, nu) } else { 0.0 };
        let rest = integrate(f, SERIES_SPLIT, PI, 0.0, QUAD_TOL, 500)?;
        Ok(head + rest.value)
    } else {
        Ok(integrate(f, a, PI, 0.0, QUAD_TOL, 500)?.value)
    }
}

/// `t - sin t`, accurate for small `t`.
fn t_minus_sin(t: f64) -> f64 {
    if t < 1e-2 {
        let t2 = t * t;
        t * t2 / 6.0 * (1.0 - t2 / 20.0 * (1.0 - t2 / 42.0))
    } else {
        t - t.sin()
    }
}

/// `b = pi int_0^pi (1 - cos t) beta(t) dt` for the unregularized kernel.
///
/// The power-law integrand behaves like `t^(1-nu)/2` at the origin; the
/// head `[0, 1/2]` is summed from the series of `1 - cos t` and the rest is
/// integrated adaptively to relative accuracy 1e-13.
pub fn compute_b(spec: &KernelSpec) -> Result<f64> {
    match spec.beta_form {
        BetaForm::CutoffUniform { beta0 } => Ok(PI * PI * beta0),
        BetaForm::PowerLaw => Ok(PI * power_law_tail(0.0, spec.nu)?),
    }
}

/// `b_eps = pi int_0^pi (1 - cos t) min(beta(t), 1/eps) dt`.
pub fn b_regularized(spec: &KernelSpec) -> Result<f64> {
    if !(spec.eps > 0.0) {
        return Err(Error::InvalidInput("b_eps needs eps > 0".into()));
    }
    match spec.beta_form {
        BetaForm::CutoffUniform { beta0 } => Ok(PI * PI * beta0.min(1.0 / spec.eps)),
        BetaForm::PowerLaw => {
            let tc = spec.eps.powf(1.0 / (1.0 + spec.nu));
            if tc >= PI {
                return Ok(PI * PI / spec.eps);
            }
            let capped = t_minus_sin(tc) / spec.eps;
            Ok(PI * (capped + power_law_tail(tc, spec.nu)?))
        }
    }
}

/// `int_{S^2} |v' - v|^2 B(v - v_star, sigma) dsigma` by product quadrature
/// over the polar angles of `sigma`. Uses the kernel as given, so pass
/// `eps = 0` for the unregularized identity `b |v - v_star|^(gamma+2)`.
pub fn kernel_second_moment(spec: &KernelSpec, v: Velocity, v_star: Velocity) -> Result<f64> {
    let z = v - v_star;
    let g = z.norm();
    if g == 0.0 {
        return Err(Error::Coincident(v));
    }
    let frame = build_frame(z)?;
    let rule = spec.theta_rule();
    let n_phi = 8;
    let inner = rule.apply(|theta| {
        let mut acc = 0.0;
        for k in 0..n_phi {
            let phi = 2.0 * PI * k as f64 / n_phi as f64;
            let (vp, _) = post_collide(v, v_star, frame.sigma(theta, phi));
            acc += (vp - v).norm_sq();
        }
        2.0 * PI * acc / n_phi as f64
    });
    Ok(spec.alpha_eps(g) * inner)
}

/// Principal value `lim_{eta -> 0} int (v' - v) B 1{theta > eta} dsigma`.
///
/// Evaluated at truncations `eta, eta/2, eta/4` and extrapolated with the
/// truncation-error exponents of the kernel (`2 - nu` then `4 - nu` for the
/// power law, `3` then `5` below a cap). The azimuthal average is done
/// numerically on the true post-collision velocities.
pub fn pv_drift_integral(spec: &KernelSpec, v: Velocity, v_star: Velocity, eta: f64) -> Result<Velocity> {
    let z = v - v_star;
    let g = z.norm();
    if g == 0.0 {
        return Err(Error::Coincident(v));
    }
    if !(eta > 0.0 && eta < PI / 4.0) {
        return Err(Error::InvalidInput(format!("truncation eta = {eta} outside (0, pi/4)")));
    }
    let frame = build_frame(z)?;
    let n_phi = 8;
    let truncated = |eta: f64| -> Velocity {
        let rule = spec.theta_rule_truncated(eta);
        let mut acc = Velocity::ZERO;
        for (&theta, &w) in rule.nodes.iter().zip(&rule.weights) {
            let mut avg = Velocity::ZERO;
            for k in 0..n_phi {
                let phi = 2.0 * PI * k as f64 / n_phi as f64;
                let (vp, _) = post_collide(v, v_star, frame.sigma(theta, phi));
                avg += vp - v;
            }
            acc += avg * (2.0 * PI * w / n_phi as f64);
        }
        acc * spec.alpha_eps(g)
    };
    let capped = eta < spec.derived.theta_c || matches!(spec.beta_form, BetaForm::CutoffUniform { .. });
    let (p1, p2) = if capped { (3.0, 5.0) } else { (2.0 - spec.nu, 4.0 - spec.nu) };
    let i0 = truncated(eta);
    let i1 = truncated(eta / 2.0);
    let i2 = truncated(eta / 4.0);
    let r1 = |a: Velocity, b: Velocity, p: f64| {
        let f = 2f64.powf(p);
        (b * f - a) / (f - 1.0)
    };
    let e01 = r1(i0, i1, p1);
    let e12 = r1(i1, i2, p1);
    Ok(r1(e01, e12, p2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pl(gamma: f64, nu: f64, eps: f64) -> KernelSpec {
        KernelSpec::new(gamma, nu, eps, BetaForm::PowerLaw).unwrap()
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        assert!(KernelSpec::new(-2.5, 0.25, 0.05, BetaForm::PowerLaw).is_err());
        assert!(KernelSpec::new(0.5, 0.25, 0.05, BetaForm::PowerLaw).is_err());
        assert!(KernelSpec::new(-1.0, 1.0, 0.05, BetaForm::PowerLaw).is_err());
        assert!(KernelSpec::new(-1.0, 0.5, -1.0, BetaForm::PowerLaw).is_err());
        let msg = KernelSpec::new(-2.5, 0.25, 0.05, BetaForm::PowerLaw).unwrap_err().to_string();
        assert!(msg.contains("moderately soft"), "{msg}");
    }

    #[test]
    fn cutoff_b_is_closed_form() {
        let beta0 = 1.0 / (4.0 * PI);
        let s = KernelSpec::new(0.0, 0.5, 0.0, BetaForm::CutoffUniform { beta0 }).unwrap();
        assert!((s.derived.b - beta0 * PI * PI).abs() < 1e-15);
        // cap never active once 1/eps exceeds beta0
        let s = s.with_eps(1.0).unwrap();
        assert_eq!(s.derived.b_eps, s.derived.b);
        let q = integrate(|t: f64| PI * (1.0 - t.cos()) * beta0, 0.0, PI, 0.0, 1e-14, 100).unwrap();
        assert!((q.value - s.derived.b).abs() < 1e-13);
    }

    #[test]
    fn b_eps_increases_to_b() {
        let base = pl(-1.0, 0.25, 0.0);
        let mut prev = 0.0;
        for eps in [0.4, 0.2, 0.1, 0.05, 0.01, 1e-3, 1e-5] {
            let be = b_regularized(&base.with_eps(eps).unwrap()).unwrap();
            assert!(be > prev && be <= base.derived.b);
            prev = be;
        }
        assert!((prev - base.derived.b).abs() < 1e-3 * base.derived.b);
        assert!(b_regularized(&base).is_err());
    }

    #[test]
    fn alpha_examples() {
        let s = pl(-1.0, 0.25, 0.05);
        assert!((s.alpha_eps(0.0) - 0.05f64.powf(-1.0)).abs() < 1e-12);
        assert!(s.alpha_eps(3.0) <= s.derived.alpha_sup);
        let m = KernelSpec::new(0.0, 0.25, 0.05, BetaForm::PowerLaw).unwrap();
        assert_eq!(m.alpha_eps(7.0), 1.0);
        let raw = pl(-1.0, 0.25, 0.0);
        assert!((raw.alpha_eps(2.0) - 0.5).abs() < 1e-15);
        assert_eq!(s.acceptance(0.0), 1.0);
    }

    #[test]
    fn physical_family() {
        let s = KernelSpec::from_force_exponent(4.0, 0.1).unwrap();
        assert!((s.gamma + 1.0 / 3.0).abs() < 1e-15 && (s.nu - 2.0 / 3.0).abs() < 1e-15);
        assert!(s.is_physical_family(1e-12));
        assert!(!pl(-1.0, 0.25, 0.1).is_physical_family(1e-6));
        // s = 2.5 gives gamma = -5/3 but nu = 4/3, outside (0, 1)
        assert!(KernelSpec::from_force_exponent(2.5, 0.1).is_err());
    }

    #[test]
    fn sampler_endpoints_and_cdf_inverse() {
        let s = pl(-1.0, 0.25, 0.05);
        for u in [0.0, 0.1, 0.37, 0.5, 0.9, 0.999999] {
            let t = s.sample_theta(u);
            assert!(t > 0.0 && t <= PI);
            assert!((s.theta_cdf(t) - (1.0 - u)).abs() < 1e-12, "u={u}");
        }
        let c = KernelSpec::new(0.0, 0.25, 0.05, BetaForm::CutoffUniform { beta0: 0.1 }).unwrap();
        assert!((c.sample_theta(0.25) - 0.75 * PI).abs() < 1e-15);
    }

    #[test]
    fn theta_rule_reproduces_b() {
        for (nu, eps) in [(0.25, 0.0), (0.5, 0.0), (0.75, 0.0), (0.25, 0.05), (0.5, 0.2), (0.25, 5.0)] {
            let s = pl(-1.0, nu, eps);
            let q = PI * s.theta_rule().apply(|t| 2.0 * (0.5 * t).sin().powi(2));
            assert!(
                (q - s.derived.b_eps).abs() < 1e-11 * s.derived.b_eps,
                "nu={nu} eps={eps}: {q} vs {}",
                s.derived.b_eps
            );
            let m = 2.0 * PI * s.theta_rule().apply(|_| 1.0);
            if eps > 0.0 {
                assert!((m - s.derived.angular_mass_eps).abs() < 1e-10 * m);
            }
        }
    }
}
