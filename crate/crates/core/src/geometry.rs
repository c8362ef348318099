//! Binary collision geometry.
//!
//! A collision between velocities `v` and `v_star` with scattering direction
//! `sigma` on the unit sphere produces
//!
//! ```text
//! v'  = (v + v_star)/2 + |v - v_star| sigma / 2
//! v'* = (v + v_star)/2 - |v - v_star| sigma / 2
//! ```
//!
//! The deflection angle `theta` is the angle between `v - v_star` and `sigma`.
//! [`DeflectionFrame`] gives the polar parametrization of `sigma` around that
//! axis used by the sampler and by every sphere quadrature in the crate.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A velocity (or any 3-vector) in dimensionless units.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Velocity {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Velocity {
    pub const ZERO: Velocity = Velocity { x: 0.0, y: 0.0, z: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Velocity { x, y, z }
    }

    #[inline]
    pub fn from_array(a: [f64; 3]) -> Self {
        Velocity::new(a[0], a[1], a[2])
    }

    #[inline]
    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    #[inline]
    pub fn dot(self, o: Velocity) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Velocity) -> Velocity {
        Velocity::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    #[inline]
    pub fn component(self, k: usize) -> f64 {
        match k {
            0 => self.x,
            1 => self.y,
            2 => self.z,
            _ => panic!("component index {k} out of range"),
        }
    }

    pub fn unit(k: usize) -> Velocity {
        let mut a = [0.0; 3];
        a[k] = 1.0;
        Velocity::from_array(a)
    }
}

impl fmt::Display for Velocity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

impl Add for Velocity {
    type Output = Velocity;
    #[inline]
    fn add(self, o: Velocity) -> Velocity {
        Velocity::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Velocity {
    type Output = Velocity;
    #[inline]
    fn sub(self, o: Velocity) -> Velocity {
        Velocity::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl AddAssign for Velocity {
    #[inline]
    fn add_assign(&mut self, o: Velocity) {
        *self = *self + o;
    }
}

impl SubAssign for Velocity {
    #[inline]
    fn sub_assign(&mut self, o: Velocity) {
        *self = *self - o;
    }
}

impl Neg for Velocity {
    type Output = Velocity;
    #[inline]
    fn neg(self) -> Velocity {
        Velocity::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Velocity {
    type Output = Velocity;
    #[inline]
    fn mul(self, s: f64) -> Velocity {
        Velocity::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Velocity> for f64 {
    type Output = Velocity;
    #[inline]
    fn mul(self, v: Velocity) -> Velocity {
        v * self
    }
}

impl Div<f64> for Velocity {
    type Output = Velocity;
    #[inline]
    fn div(self, s: f64) -> Velocity {
        Velocity::new(self.x / s, self.y / s, self.z / s)
    }
}

/// Right-handed orthonormal triad `(axis, i, j)` with `axis` along the
/// relative velocity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeflectionFrame {
    pub axis: Velocity,
    pub i: Velocity,
    pub j: Velocity,
}

impl DeflectionFrame {
    /// Largest deviation from orthonormality over the six defining relations.
    pub fn orthonormality_defect(&self) -> f64 {
        let dots = [
            self.axis.dot(self.i),
            self.axis.dot(self.j),
            self.i.dot(self.j),
            self.axis.norm() - 1.0,
            self.i.norm() - 1.0,
            self.j.norm() - 1.0,
        ];
        dots.iter().fold(0.0f64, |m, d| m.max(d.abs()))
    }

    /// Point `axis cos(theta) + (i cos(phi) + j sin(phi)) sin(theta)` on the sphere.
    #[inline]
    pub fn sigma(&self, theta: f64, phi: f64) -> Velocity {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        self.axis * ct + (self.i * cp + self.j * sp) * st
    }
}

/// Builds the polar frame around `z`.
///
/// The helper vector is the coordinate axis along which `z` has its
/// smallest-magnitude component (first index on ties), so the frame is a
/// deterministic function of the direction of `z`.
pub fn build_frame(z: Velocity) -> Result<DeflectionFrame> {
    let n = z.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::InvalidInput(format!("cannot build a deflection frame around {z}")));
    }
    let axis = z / n;
    let a = [axis.x.abs(), axis.y.abs(), axis.z.abs()];
    let mut k = 0;
    if a[1] < a[k] {
        k = 1;
    }
    if a[2] < a[k] {
        k = 2;
    }
    let helper = Velocity::unit(k);
    let i_raw = helper - axis * axis.dot(helper);
    let i = i_raw / i_raw.norm();
    let j = axis.cross(i);
    Ok(DeflectionFrame { axis, i, j })
}

/// Scattering direction at polar angles `(theta, phi)` in `frame`.
#[inline]
pub fn sigma_from_angles(frame: &DeflectionFrame, theta: f64, phi: f64) -> Velocity {
    frame.sigma(theta, phi)
}

/// Post-collision pair `(v', v'_*)`.
#[inline]
pub fn post_collide(v: Velocity, v_star: Velocity, sigma: Velocity) -> (Velocity, Velocity) {
    let center = (v + v_star) * 0.5;
    let half = sigma * (0.5 * (v - v_star).norm());
    (center + half, center - half)
}

/// `|v' - v| = sin(theta/2) |v - v_star|`.
#[inline]
pub fn deflection_distance(v: Velocity, v_star: Velocity, theta: f64) -> f64 {
    (0.5 * theta).sin() * (v - v_star).norm()
}

/// Angle between two nonzero vectors, computed with `atan2` for accuracy
/// near 0 and pi.
pub fn angle_between(a: Velocity, b: Velocity) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: Velocity, b: Velocity, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn head_on_collision_rotates_pair() {
        let (vp, vsp) = post_collide(
            Velocity::new(1.0, 0.0, 0.0),
            Velocity::new(-1.0, 0.0, 0.0),
            Velocity::new(0.0, 1.0, 0.0),
        );
        assert_eq!(vp, Velocity::new(0.0, 1.0, 0.0));
        assert_eq!(vsp, Velocity::new(0.0, -1.0, 0.0));
        assert_eq!(vp.norm_sq() + vsp.norm_sq(), 2.0);
    }

    #[test]
    fn grazing_and_antipodal_directions() {
        let v = Velocity::new(0.3, -1.2, 2.0);
        let w = Velocity::new(-0.7, 0.4, 0.1);
        let u = (v - w) / (v - w).norm();
        let (a, b) = post_collide(v, w, u);
        assert!(close(a, v, 1e-14) && close(b, w, 1e-14));
        let (a, b) = post_collide(v, w, -u);
        assert!(close(a, w, 1e-14) && close(b, v, 1e-14));
    }

    #[test]
    fn coincident_pair_is_fixed() {
        let v = Velocity::new(0.5, 0.25, -1.0);
        let (a, b) = post_collide(v, v, Velocity::new(0.0, 0.0, 1.0));
        assert_eq!(a, v);
        assert_eq!(b, v);
    }

    #[test]
    fn frame_examples() {
        let f = build_frame(Velocity::new(0.0, 0.0, 2.0)).unwrap();
        assert_eq!(f.axis, Velocity::new(0.0, 0.0, 1.0));
        assert_eq!(f.i, Velocity::new(1.0, 0.0, 0.0));
        assert_eq!(f.j, Velocity::new(0.0, 1.0, 0.0));
        let z = Velocity::new(0.3, -2.0, 0.7);
        assert_eq!(build_frame(z).unwrap(), build_frame(z * 2.0).unwrap());
        assert!(build_frame(Velocity::ZERO).is_err());
    }

    #[test]
    fn sigma_special_angles() {
        let f = build_frame(Velocity::new(1.0, 2.0, -0.5)).unwrap();
        for phi in [0.0, 1.0, 4.0] {
            assert!(close(f.sigma(0.0, phi), f.axis, 1e-15));
        }
        assert!(close(f.sigma(PI / 2.0, 0.0), f.i, 1e-15));
    }

    #[test]
    fn deflection_examples() {
        let v = Velocity::new(1.0, 0.0, 0.0);
        let w = Velocity::new(-1.0, 0.0, 0.0);
        assert!((deflection_distance(v, w, PI) - 2.0).abs() < 1e-15);
        assert_eq!(deflection_distance(v, w, 0.0), 0.0);
    }
}
