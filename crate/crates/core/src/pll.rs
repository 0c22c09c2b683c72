//! Phase detectors and the PI-plus-integrator loop that generates the frame
//! angle.
//!
//! A detector compares the direction of a dq vector with the commanded phase
//! shift `phi_ref`. Its sign is chosen so that with `u1 = -K_P e - K_I x_c`
//! and `d(theta)/dt = u1` the loop is attracted to `angle(s) = phi_ref`:
//! a vector leading its reference by `+d` gives `e ~ +d`, which slows the frame.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::{wrap_angle, DqVec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorMode {
    /// Synchronous reference frame: the quadrature component of `s` w.r.t. `phi_ref`.
    Srf,
    /// Arctangent: the wrapped angle of `s` minus `phi_ref`.
    #[default]
    Atan,
}

/// Which vector drives the detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PllVariant {
    /// The observer's reconstruction of the grid voltage.
    #[default]
    Adaptive,
    /// The measured PCC voltage, taken as a proxy for the grid voltage.
    Baseline,
}

/// Loop gains and modes. The phase shift reference comes from the
/// operating-point references at run time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PllConfig {
    #[serde(rename = "K_P")]
    pub k_p: f64,
    #[serde(rename = "K_I")]
    pub k_i: f64,
    pub detector: DetectorMode,
    pub variant: PllVariant,
}

impl Default for PllConfig {
    fn default() -> Self {
        Self {
            k_p: 200.0,
            k_i: 5000.0,
            detector: DetectorMode::Atan,
            variant: PllVariant::Adaptive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PllState {
    /// Integral of the detector output.
    pub x_c: f64,
    /// Frame angle, unwrapped.
    pub theta: f64,
}

impl PllState {
    pub fn scaled_add(&self, k: f64, d: &PllState) -> PllState {
        PllState { x_c: self.x_c + k * d.x_c, theta: self.theta + k * d.theta }
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum DetectorError {
    #[error("phase detector input is the zero vector; direction undefined")]
    UndefinedDirection,
}

pub fn phase_detector(s: &DqVec, phi_ref: f64, mode: DetectorMode) -> Result<f64, DetectorError> {
    match mode {
        DetectorMode::Srf => {
            let (sr, cr) = phi_ref.sin_cos();
            Ok(cr * s.y - sr * s.x)
        }
        DetectorMode::Atan => {
            if s.x == 0.0 && s.y == 0.0 {
                return Err(DetectorError::UndefinedDirection);
            }
            Ok(wrap_angle(s.y.atan2(s.x) - phi_ref))
        }
    }
}

/// Returns `(dx_c/dt, u1)`; the engine integrates `d(theta)/dt = u1`.
pub fn pll_deriv(p: &PllState, e_phi: f64, g: &PllConfig) -> (f64, f64) {
    (e_phi, -g.k_p * e_phi - g.k_i * p.x_c)
}

/// The conventional loop feeds the measured PCC voltage straight to the detector.
pub fn baseline_source(v_dq: &DqVec) -> DqVec {
    *v_dq
}
