//! Parameter estimation-based observer for the scaled grid voltage
//! `x = v_g_dq / L_g`.
//!
//! With `zeta = -z + J y12` and the fundamental matrix `Phi` of `u1 J`,
//! every solution with constant grid frequency satisfies
//! `x(t) = [zeta(t) | Phi(t)] theta` for the constant
//! `theta = (omega, x(0) - omega zeta(0))`. Filtering both sides through
//! `lambda / (p + lambda)` gives the regression `Y = Omega theta` (plus an
//! exponentially vanishing term) built from measured currents and voltages
//! only, without differentiating any of them.

use nalgebra::{Matrix2, Matrix2x3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::frames::{j, j_mul, nearest_rotation, DqVec};
use crate::plant::PlantParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterParams {
    /// Pole of the first-order filter (1/s).
    pub lambda: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self { lambda: 1000.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverState {
    /// Dynamic extension.
    pub z: DqVec,
    /// Fundamental matrix of `u1 J`, a rotation by the accumulated frame angle.
    pub phi: Matrix2<f64>,
    /// Filter state for `F[y12]`.
    pub w_y: DqVec,
    /// Filter state for `F[(u1 J - r_g/L_g) y12 + y34 / L_g]`.
    pub w_g: DqVec,
    /// Filter state for `F[[zeta | Phi]]`.
    pub w_omega: Matrix2x3<f64>,
}

impl Default for ObserverState {
    fn default() -> Self {
        Self {
            z: DqVec::zeros(),
            phi: Matrix2::identity(),
            w_y: DqVec::zeros(),
            w_g: DqVec::zeros(),
            w_omega: Matrix2x3::zeros(),
        }
    }
}

impl ObserverState {
    pub fn scaled_add(&self, k: f64, d: &ObserverState) -> ObserverState {
        ObserverState {
            z: self.z + d.z * k,
            phi: self.phi + d.phi * k,
            w_y: self.w_y + d.w_y * k,
            w_g: self.w_g + d.w_g * k,
            w_omega: self.w_omega + d.w_omega * k,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.z.iter().all(|v| v.is_finite())
            && self.phi.iter().all(|v| v.is_finite())
            && self.w_y.iter().all(|v| v.is_finite())
            && self.w_g.iter().all(|v| v.is_finite())
            && self.w_omega.iter().all(|v| v.is_finite())
    }

    /// `zeta = -z + J y12`.
    pub fn zeta(&self, y12: &DqVec) -> DqVec {
        -self.z + j_mul(y12)
    }

    /// The unfiltered regressor `[zeta | Phi]`.
    pub fn basis(&self, y12: &DqVec) -> Matrix2x3<f64> {
        let zeta = self.zeta(y12);
        Matrix2x3::new(
            zeta.x, self.phi[(0, 0)], self.phi[(0, 1)],
            zeta.y, self.phi[(1, 0)], self.phi[(1, 1)],
        )
    }

    /// Deviation of `Phi` from the rotation group, `|Phi^T Phi - I|` (max entry).
    pub fn phi_drift(&self) -> f64 {
        (self.phi.transpose() * self.phi - Matrix2::identity()).amax()
    }

    /// Replaces `Phi` with its nearest rotation.
    pub fn renormalize(&mut self) {
        self.phi = nearest_rotation(&self.phi);
    }
}

/// The filtered linear regression `Y = Omega theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regressor {
    pub y: DqVec,
    pub omega: Matrix2x3<f64>,
}

impl Regressor {
    pub fn residual(&self, theta: &Vector3<f64>) -> DqVec {
        self.y - self.omega * theta
    }
}

pub fn observer_deriv(
    o: &ObserverState,
    y12: &DqVec,
    y34: &DqVec,
    u1: f64,
    p: &PlantParams,
    f: &FilterParams,
) -> ObserverState {
    let lam = f.lambda;
    let a = p.r_g / p.l_g;
    let b = 1.0 / p.l_g;
    let jy12 = j_mul(y12);
    let g_in = jy12 * u1 - y12 * a + y34 * b;
    ObserverState {
        z: j_mul(&o.z) * u1 - jy12 * a + j_mul(y34) * b,
        phi: j() * o.phi * u1,
        w_y: (y12 - o.w_y) * lam,
        w_g: (g_in - o.w_g) * lam,
        w_omega: (o.basis(y12) - o.w_omega) * lam,
    }
}

/// Reads `Y` and `Omega` off the filter states. `pF[y12]` is realized as
/// `lambda (y12 - F[y12])`.
pub fn regressor(o: &ObserverState, y12: &DqVec, f: &FilterParams) -> Regressor {
    Regressor {
        y: (y12 - o.w_y) * f.lambda - o.w_g,
        omega: -o.w_omega,
    }
}

/// `x_hat = [zeta | Phi] theta_hat`.
pub fn estimate_x(o: &ObserverState, y12: &DqVec, theta_hat: &Vector3<f64>) -> DqVec {
    o.zeta(y12) * theta_hat[0] + o.phi * DqVec::new(theta_hat[1], theta_hat[2])
}

/// The parameter vector that makes `x = [zeta | Phi] theta` exact from the
/// current observer state on, for a grid at constant `omega` and the present
/// scaled grid voltage `x`. Only meaningful when `Phi` is the identity, or
/// after mapping through `Phi^T`.
pub fn parameters_from_state(o: &ObserverState, y12: &DqVec, x: &DqVec, omega: f64) -> Vector3<f64> {
    let c = o.phi.transpose() * (x - o.zeta(y12) * omega);
    Vector3::new(omega, c.x, c.y)
}

/// Grid quantities implied by an estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridEstimate {
    pub omega: f64,
    pub freq: f64,
    pub v_g: f64,
}

pub fn recover_grid(theta_hat: &Vector3<f64>, x_hat: &DqVec, p: &PlantParams) -> GridEstimate {
    GridEstimate {
        omega: theta_hat[0],
        freq: theta_hat[0] / TAU,
        v_g: p.l_g * x_hat.norm(),
    }
}
