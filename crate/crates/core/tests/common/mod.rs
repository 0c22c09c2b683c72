#![allow(dead_code)]

use apll_core::engine::rk4_step;
use apll_core::frames::{rot, DqVec};
use apll_core::gpebo::Regressor;
use apll_core::lsff::{estimator_deriv, EstimatorGains, EstimatorState};
use nalgebra::{DMatrix, DVector, Matrix2x3, Vector3};
use std::convert::Infallible;

pub const OMEGA0: f64 = 100.0 * std::f64::consts::PI;

/// A persistently exciting regressor: `[e1 | rot(w t)]`.
pub fn pe_regressor(t: f64, w: f64) -> Matrix2x3<f64> {
    let r = rot(w * t);
    Matrix2x3::new(1.0, r[(0, 0)], r[(0, 1)], 0.0, r[(1, 0)], r[(1, 1)])
}

/// Integrates the estimator on `Y = Omega theta` with the synthetic regressor.
pub fn run_estimator(
    theta: &Vector3<f64>,
    theta0: &Vector3<f64>,
    g: &EstimatorGains,
    t_end: f64,
    dt: f64,
    scale: f64,
) -> EstimatorState {
    let mut e = EstimatorState::new(*theta0, g);
    let n = (t_end / dt).round() as usize;
    for k in 0..n {
        let t = k as f64 * dt;
        // rk4_step evaluates at t, t + dt/2, t + dt/2, t + dt in that order
        let mut stage = 0usize;
        let deriv = |s: &EstimatorState| -> Result<EstimatorState, Infallible> {
            let tau = t + dt * [0.0, 0.5, 0.5, 1.0][stage.min(3)];
            stage += 1;
            let om = pe_regressor(tau, OMEGA0) * scale;
            Ok(estimator_deriv(s, &Regressor { y: om * theta, omega: om }, g))
        };
        e = rk4_step(&e, dt, deriv).unwrap();
        e.symmetrize();
    }
    e
}

/// Newton's method with a forward-difference Jacobian.
pub fn newton(f: impl Fn(&DVector<f64>) -> DVector<f64>, x0: DVector<f64>, tol: f64) -> Option<DVector<f64>> {
    let n = x0.len();
    let mut x = x0;
    for _ in 0..100 {
        let fx = f(&x);
        if fx.norm() < tol {
            return Some(x);
        }
        let mut jac = DMatrix::zeros(fx.len(), n);
        for c in 0..n {
            let h = 1e-7 * x[c].abs().max(1.0);
            let mut xp = x.clone();
            xp[c] += h;
            jac.set_column(c, &((f(&xp) - &fx) / h));
        }
        let dx = jac.lu().solve(&(-fx))?;
        x += dx;
    }
    None
}

pub fn dq(v: &DVector<f64>, i: usize) -> DqVec {
    DqVec::new(v[i], v[i + 1])
}
