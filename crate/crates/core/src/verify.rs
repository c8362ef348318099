//! Tolerance-checked identity suites shared by the command-line tool and
//! the test suite.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::Velocity;
use crate::kernel::{kernel_second_moment, pv_drift_integral, BetaForm, KernelSpec};
use crate::weakform::{
    weak_residual_path, Constant, EmpiricalFlow, GaussianBump, KineticEnergy, Linear, PairBudget, TestFunction, WeakOperator,
};

/// Relative tolerance of the kernel moment identities.
pub const KERNEL_IDENTITY_TOL: f64 = 1e-6;
/// Scaled absolute tolerance for collision invariants.
pub const INVARIANT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub gamma: f64,
    pub speed: f64,
    pub computed: f64,
    pub expected: f64,
    /// Relative or scaled error, per the check.
    pub error: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &str, gamma: f64, speed: f64, computed: f64, expected: f64, error: f64, tol: f64) -> Self {
        Check {
            name: name.to_string(),
            gamma,
            speed,
            computed,
            expected,
            error,
            tol,
            pass: error <= tol,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<22} {:>6.2} {:>6.2} {:>+14.8e} {:>+14.8e} {:>9.2e} {:>8.1e}  {}",
            self.name,
            self.gamma,
            self.speed,
            self.computed,
            self.expected,
            self.error,
            self.tol,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

pub fn table_header() -> String {
    format!(
        "{:<22} {:>6} {:>6} {:>15} {:>15} {:>9} {:>8}  result",
        "check", "gamma", "|z|", "computed", "expected", "error", "tol"
    )
}

/// A fixed, non-axis-aligned pair with `|v - v_star| = speed`.
fn pair(speed: f64) -> (Velocity, Velocity) {
    let dir = Velocity::new(0.48, -0.6, 0.64);
    let v_star = Velocity::new(-0.3, 0.2, 0.5);
    (v_star + dir * speed, v_star)
}

/// For each `(gamma, |z|)`: the second-moment identity
/// `int |v' - v|^2 B = b |z|^(gamma+2)` and the principal-value drift
/// `int (v' - v) B = b |z|^gamma (v_star - v)`, both for the unregularized
/// power-law kernel; and `A phi = 0` for `phi` in `{1, v_k, |v|^2}` with the
/// regularized kernel at `eps`.
pub fn kernel_suite(gammas: &[f64], speeds: &[f64], nu: f64, eps: f64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for &gamma in gammas {
        let exact = KernelSpec::new(gamma, nu, 0.0, BetaForm::PowerLaw)?;
        let regular = KernelSpec::new(gamma, nu, eps, BetaForm::PowerLaw)?;
        let b = exact.derived.b;
        let op = WeakOperator::new(&regular);
        for &g in speeds {
            let (v, w) = pair(g);
            let m2 = kernel_second_moment(&exact, v, w)?;
            let want = b * g.powf(gamma + 2.0);
            out.push(Check::new(
                "second_moment",
                gamma,
                g,
                m2,
                want,
                (m2 - want).abs() / want,
                KERNEL_IDENTITY_TOL,
            ));

            let drift = pv_drift_integral(&exact, v, w, 0.05)?;
            let want = (w - v) * (b * g.powf(gamma));
            let err = (drift - want).norm() / want.norm();
            out.push(Check::new(
                "pv_drift",
                gamma,
                g,
                drift.norm(),
                want.norm(),
                err,
                KERNEL_IDENTITY_TOL,
            ));

            let scale = regular.derived.b_eps * regular.alpha_eps(g) * g * g * (1.0 + v.norm_sq() + w.norm_sq());
            let invariants: [(&str, &dyn TestFunction); 5] = [
                ("invariant_one", &Constant(1.0)),
                ("invariant_vx", &Linear::component(0)),
                ("invariant_vy", &Linear::component(1)),
                ("invariant_vz", &Linear::component(2)),
                ("invariant_energy", &KineticEnergy),
            ];
            for (name, phi) in invariants {
                let a = op.a_sym(phi, v, w)?;
                out.push(Check::new(name, gamma, g, a, 0.0, a.abs() / scale, INVARIANT_TOL));
            }
        }
    }
    Ok(out)
}

/// Weak-form residuals at the last snapshot of a stored flow. Collision
/// invariants must vanish to rounding; for a Gaussian bump the residual is
/// a martingale value, compared against `z_max` times the realized
/// standard deviation of its increments.
pub fn weakform_suite(flow: &EmpiricalFlow, kernel: &KernelSpec, bump_width: f64, z_max: f64, budget: PairBudget) -> Result<Vec<Check>> {
    let op = WeakOperator::new(kernel);
    let last = flow.times.len() - 1;
    let t = flow.times[last];
    let mut out = Vec::new();
    let invariants: [(&str, &dyn TestFunction); 3] = [
        ("residual_one", &Constant(1.0)),
        ("residual_vx", &Linear::component(0)),
        ("residual_energy", &KineticEnergy),
    ];
    for (name, phi) in invariants {
        let r = weak_residual_path(flow, phi, &op, budget)?;
        let scale = 1.0 + flow.mean(&KineticEnergy, 0);
        let res = r[last].residual;
        out.push(Check::new(name, kernel.gamma, t, res, 0.0, res.abs() / scale, INVARIANT_TOL));
    }
    let bump = GaussianBump::new(Velocity::ZERO, bump_width)?;
    let r = weak_residual_path(flow, &bump, &op, budget)?;
    let mut rv = 0.0;
    for k in 1..r.len() {
        let step = r[k].residual - r[k - 1].residual;
        rv += step * step;
    }
    let res = r[last].residual;
    let z = if rv > 0.0 {
        res.abs() / rv.sqrt()
    } else if res == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    out.push(Check::new("residual_bump", kernel.gamma, t, res, 0.0, z, z_max));
    Ok(out)
}
