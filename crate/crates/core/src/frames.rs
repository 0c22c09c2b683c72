//! Stationary abc to rotating dq transforms and angle helpers.
//!
//! The dq projection is the amplitude-invariant (2/3-scaled) transform
//! evaluated at `theta - pi/2`, so that a grid voltage
//! `V (sin wt, sin(wt - 2pi/3), sin(wt + 2pi/3))` seen through a frame at
//! angle `theta = wt + phi` reads `V (cos phi, sin phi)`. With this
//! convention the instantaneous active power is `3/2 (v_d i_d + v_q i_q)`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix2, Vector2};

/// A vector in the rotating dq frame.
pub type DqVec = Vector2<f64>;

/// A 2x2 rotation matrix `e^{J alpha}`.
pub type Rot2 = Matrix2<f64>;

const TWO_PI_3: f64 = 2.0 * PI / 3.0;

/// Instantaneous per-phase values in the stationary abc frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ThreePhase {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ThreePhase {
    pub const ZERO: ThreePhase = ThreePhase { a: 0.0, b: 0.0, c: 0.0 };

    pub const fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    pub fn sum(&self) -> f64 {
        self.a + self.b + self.c
    }

    pub fn norm(&self) -> f64 {
        (self.a * self.a + self.b * self.b + self.c * self.c).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite()
    }

    /// `self + k * other`
    pub fn scaled_add(&self, k: f64, other: &ThreePhase) -> ThreePhase {
        ThreePhase::new(self.a + k * other.a, self.b + k * other.b, self.c + k * other.c)
    }
}

impl Add for ThreePhase {
    type Output = ThreePhase;
    fn add(self, o: ThreePhase) -> ThreePhase {
        ThreePhase::new(self.a + o.a, self.b + o.b, self.c + o.c)
    }
}

impl Sub for ThreePhase {
    type Output = ThreePhase;
    fn sub(self, o: ThreePhase) -> ThreePhase {
        ThreePhase::new(self.a - o.a, self.b - o.b, self.c - o.c)
    }
}

impl Mul<f64> for ThreePhase {
    type Output = ThreePhase;
    fn mul(self, k: f64) -> ThreePhase {
        ThreePhase::new(self.a * k, self.b * k, self.c * k)
    }
}

impl Neg for ThreePhase {
    type Output = ThreePhase;
    fn neg(self) -> ThreePhase {
        ThreePhase::new(-self.a, -self.b, -self.c)
    }
}

/// The quarter-turn generator `J = [[0, -1], [1, 0]]`.
pub fn j() -> Matrix2<f64> {
    Matrix2::new(0.0, -1.0, 1.0, 0.0)
}

/// `J x`, without building the matrix.
#[inline]
pub fn j_mul(x: &DqVec) -> DqVec {
    DqVec::new(-x.y, x.x)
}

/// Rotation by `alpha`: `[[cos a, -sin a], [sin a, cos a]]`.
pub fn rot(alpha: f64) -> Rot2 {
    let (s, c) = alpha.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Cosines and sines of the three phase-shifted projection angles.
#[inline]
fn basis(theta: f64) -> ([f64; 3], [f64; 3]) {
    let delta = theta - FRAC_PI_2;
    let (s, c) = delta.sin_cos();
    let (s3, c3) = TWO_PI_3.sin_cos();
    // cos(d -+ 2pi/3), sin(d -+ 2pi/3) by angle addition
    let cos = [c, c * c3 + s * s3, c * c3 - s * s3];
    let sin = [s, s * c3 - c * s3, s * c3 + c * s3];
    (cos, sin)
}

/// Park transform `T(theta - pi/2) s`; any zero-sequence component is dropped.
pub fn park(s: &ThreePhase, theta: f64) -> DqVec {
    let (cos, sin) = basis(theta);
    let k = 2.0 / 3.0;
    DqVec::new(
        k * (cos[0] * s.a + cos[1] * s.b + cos[2] * s.c),
        k * (sin[0] * s.a + sin[1] * s.b + sin[2] * s.c),
    )
}

/// Right inverse of [`park`] onto the zero-sum subspace.
pub fn inv_park(d: &DqVec, theta: f64) -> ThreePhase {
    let (cos, sin) = basis(theta);
    ThreePhase::new(
        cos[0] * d.x + sin[0] * d.y,
        cos[1] * d.x + sin[1] * d.y,
        cos[2] * d.x + sin[2] * d.y,
    )
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    // rem_euclid can round up to TAU for tiny negative inputs
    if w >= PI {
        w - TAU
    } else {
        w
    }
}

/// Projects a 2x2 matrix onto the nearest rotation (polar factor).
pub fn nearest_rotation(m: &Matrix2<f64>) -> Rot2 {
    // For 2x2 the nearest rotation is rot(atan2(m21 - m12, m11 + m22)).
    rot((m[(1, 0)] - m[(0, 1)]).atan2(m[(0, 0)] + m[(1, 1)]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn balanced(a: f64, b: f64) -> ThreePhase {
        ThreePhase::new(a, b, -a - b)
    }

    fn grid(v: f64, angle: f64) -> ThreePhase {
        ThreePhase::new(
            v * angle.sin(),
            v * (angle - TWO_PI_3).sin(),
            v * (angle + TWO_PI_3).sin(),
        )
    }

    #[test]
    fn rot_special_angles() {
        assert_abs_diff_eq!(rot(0.0), Matrix2::identity(), epsilon = 1e-15);
        assert_abs_diff_eq!(rot(FRAC_PI_2), j(), epsilon = 1e-15);
        assert_abs_diff_eq!(rot(PI) * DqVec::new(1.0, 0.0), DqVec::new(-1.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn park_of_aligned_grid_is_amplitude_on_d() {
        let wt = 0.731;
        let d = park(&grid(310.2687, wt), wt);
        assert_abs_diff_eq!(d, DqVec::new(310.2687, 0.0), epsilon = 1e-10);
        assert_eq!(park(&ThreePhase::ZERO, 1.3), DqVec::zeros());
    }

    #[test]
    fn inverse_round_trips() {
        let s = ThreePhase::new(1.0, -0.5, -0.5);
        let back = inv_park(&park(&s, 0.3), 0.3);
        assert_abs_diff_eq!(back.a, s.a, epsilon = 1e-14);
        assert_abs_diff_eq!(back.b, s.b, epsilon = 1e-14);
        assert_abs_diff_eq!(back.c, s.c, epsilon = 1e-14);

        assert_eq!(inv_park(&DqVec::zeros(), 2.0), ThreePhase::ZERO);
        let d = DqVec::new(1.0, 2.0);
        assert_abs_diff_eq!(park(&inv_park(&d, 0.7), 0.7), d, epsilon = 1e-14);
        assert_abs_diff_eq!(inv_park(&DqVec::new(5.0, -3.0), 1.1).sum(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn zero_sequence_is_dropped() {
        let s = balanced(2.0, -0.3);
        let shifted = s + ThreePhase::new(7.0, 7.0, 7.0);
        assert_abs_diff_eq!(park(&s, 0.4), park(&shifted, 0.4), epsilon = 1e-13);
    }

    #[test]
    fn wrap_angle_cases() {
        assert_eq!(wrap_angle(0.0), 0.0);
        assert_abs_diff_eq!(wrap_angle(1.5 * PI), -FRAC_PI_2, epsilon = 1e-15);
        assert_eq!(wrap_angle(-PI), -PI);
        assert_eq!(wrap_angle(PI), -PI);
        assert!(wrap_angle(-1e-18) < PI);
        assert_abs_diff_eq!(wrap_angle(7.0 * TAU + 0.25), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn nearest_rotation_recovers_angle() {
        let r = rot(0.9) * 1.001 + Matrix2::new(1e-4, 0.0, 0.0, -1e-4);
        let p = nearest_rotation(&r);
        assert_abs_diff_eq!(p.transpose() * p, Matrix2::identity(), epsilon = 1e-14);
        assert_abs_diff_eq!(p, rot(0.9), epsilon = 1e-3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn rotations_compose(a in -20.0f64..20.0, b in -20.0f64..20.0) {
            let lhs = rot(a) * rot(b);
            let rhs = rot(a + b);
            prop_assert!((lhs - rhs).amax() < 1e-13);
        }

        #[test]
        fn park_round_trip_on_balanced(a in -500.0f64..500.0, b in -500.0f64..500.0, th in -50.0f64..50.0) {
            let s = balanced(a, b);
            let back = inv_park(&park(&s, th), th);
            let scale = 1.0f64.max(s.norm());
            prop_assert!((back - s).norm() / scale < 1e-12);
        }

        #[test]
        fn park_preserves_magnitude(a in -5.0f64..5.0, b in -5.0f64..5.0, t1 in -10.0f64..10.0, t2 in -10.0f64..10.0) {
            let s = balanced(a, b);
            prop_assert!((park(&s, t1).norm() - park(&s, t2).norm()).abs() < 1e-12);
        }

        #[test]
        fn park_is_frame_covariant(a in -5.0f64..5.0, b in -5.0f64..5.0, th in -10.0f64..10.0, d in -3.0f64..3.0) {
            let s = balanced(a, b);
            let lhs = park(&s, th);
            let rhs = rot(-d) * park(&s, th + d);
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }

        #[test]
        fn park_of_grid_voltage_reads_error_angle(
            v in 1.0f64..1000.0, w in 200.0f64..400.0, t in 0.0f64..5.0, phi in -3.0f64..3.0,
        ) {
            let d = park(&grid(v, w * t), w * t + phi);
            let expect = DqVec::new(phi.cos(), phi.sin()) * v;
            prop_assert!((d - expect).norm() < 1e-10 * v);
        }
    }
}
