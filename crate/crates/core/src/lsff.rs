//! Continuous-time least squares with forgetting factor and a gain-norm cap,
//! plus the windowed excitation monitor for the regressor.

use std::collections::VecDeque;

use nalgebra::{Matrix2x3, Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gpebo::Regressor;

/// Matrix norm used for the `|F| <= M` test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainNorm {
    #[default]
    Frobenius,
    /// Largest singular value.
    Spectral,
}

impl GainNorm {
    pub fn of(&self, f: &Matrix3<f64>) -> f64 {
        match self {
            GainNorm::Frobenius => f.norm(),
            GainNorm::Spectral => f.singular_values().max(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorGains {
    /// Adaptation gain.
    pub alpha: f64,
    /// Forgetting factor (1/s).
    pub beta: f64,
    /// Cap on the gain norm; above it the gain is frozen.
    #[serde(rename = "M")]
    pub m_cap: f64,
    /// Inverse initial gain, `F(0) = I / f0`.
    pub f0: f64,
    #[serde(default)]
    pub norm: GainNorm,
}

impl Default for EstimatorGains {
    fn default() -> Self {
        Self {
            alpha: 600.0,
            beta: 500.0,
            m_cap: 100.0,
            f0: 1.0,
            norm: GainNorm::Frobenius,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorState {
    pub theta_hat: Vector3<f64>,
    pub f: Matrix3<f64>,
}

impl EstimatorState {
    pub fn new(theta0: Vector3<f64>, g: &EstimatorGains) -> Self {
        Self {
            theta_hat: theta0,
            f: Matrix3::identity() / g.f0,
        }
    }

    pub fn scaled_add(&self, k: f64, d: &EstimatorState) -> EstimatorState {
        EstimatorState {
            theta_hat: self.theta_hat + d.theta_hat * k,
            f: self.f + d.f * k,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.theta_hat.iter().chain(self.f.iter()).all(|v| v.is_finite())
    }

    pub fn gain_norm(&self, g: &EstimatorGains) -> f64 {
        g.norm.of(&self.f)
    }

    /// True when the gain update is switched off (`|F| > M`).
    pub fn is_frozen(&self, g: &EstimatorGains) -> bool {
        self.gain_norm(g) > g.m_cap
    }

    pub fn symmetrize(&mut self) {
        self.f = (self.f + self.f.transpose()) * 0.5;
    }
}

/// Estimator dynamics with the freeze test evaluated on `e.f`.
pub fn estimator_deriv(e: &EstimatorState, r: &Regressor, g: &EstimatorGains) -> EstimatorState {
    estimator_deriv_gated(e, r, g, e.is_frozen(g))
}

/// Estimator dynamics with an externally supplied freeze decision.
pub fn estimator_deriv_gated(
    e: &EstimatorState,
    r: &Regressor,
    g: &EstimatorGains,
    frozen: bool,
) -> EstimatorState {
    let ft_omega_t = e.f * r.omega.transpose();
    let theta_dot = ft_omega_t * r.residual(&e.theta_hat) * g.alpha;
    let f_dot = if frozen {
        Matrix3::zeros()
    } else {
        -ft_omega_t * r.omega * e.f * g.alpha + e.f * g.beta
    };
    EstimatorState { theta_hat: theta_dot, f: f_dot }
}

#[derive(Debug, Error, PartialEq)]
pub enum PeError {
    #[error("insufficient regressor history: need {needed} samples, have {have}")]
    InsufficientHistory { needed: usize, have: usize },
}

/// Smallest eigenvalue of the trapezoidal integral of `Omega^T Omega` over
/// the trailing `window` seconds of a uniformly sampled history.
pub fn pe_metric(history: &[Matrix2x3<f64>], sample_period: f64, window: f64) -> Result<f64, PeError> {
    let intervals = (window / sample_period).round();
    if intervals.is_nan() || intervals < 1.0 {
        return Err(PeError::InsufficientHistory { needed: 2, have: history.len() });
    }
    let intervals = intervals as usize;
    if history.len() < intervals + 1 {
        return Err(PeError::InsufficientHistory { needed: intervals + 1, have: history.len() });
    }
    let tail = &history[history.len() - intervals - 1..];
    let gram = |m: &Matrix2x3<f64>| m.transpose() * m;
    let mut acc = (gram(&tail[0]) + gram(&tail[intervals])) * 0.5;
    for m in &tail[1..intervals] {
        acc += gram(m);
    }
    acc *= sample_period;
    Ok(min_eigenvalue(&acc))
}

pub(crate) fn min_eigenvalue(m: &Matrix3<f64>) -> f64 {
    SymmetricEigen::new(*m).eigenvalues.min()
}

/// Sliding buffer of regressor samples feeding [`pe_metric`].
#[derive(Debug, Clone)]
pub struct PeMonitor {
    sample_period: f64,
    window: f64,
    buf: VecDeque<Matrix2x3<f64>>,
}

impl PeMonitor {
    pub fn new(sample_period: f64, window: f64) -> Self {
        let cap = (window / sample_period).round() as usize + 1;
        Self { sample_period, window, buf: VecDeque::with_capacity(cap + 1) }
    }

    pub fn push(&mut self, omega: Matrix2x3<f64>) {
        let cap = (self.window / self.sample_period).round() as usize + 1;
        if self.buf.len() == cap {
            self.buf.pop_front();
        }
        self.buf.push_back(omega);
    }

    /// Windowed metric, or `None` until a full window has been seen.
    pub fn metric(&mut self) -> Option<f64> {
        pe_metric(self.buf.make_contiguous(), self.sample_period, self.window).ok()
    }
}
