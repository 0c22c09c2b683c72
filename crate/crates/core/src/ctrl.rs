//! dq current controller and the steady-state reference calculator.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::{j_mul, rot, DqVec};
use crate::plant::PlantParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurrentGains {
    #[serde(rename = "K_P")]
    pub k_p: f64,
    #[serde(rename = "K_I")]
    pub k_i: f64,
}

impl Default for CurrentGains {
    fn default() -> Self {
        Self { k_p: 1250.0, k_i: 50000.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CurrentCtrlState {
    /// Integrated current error (A s).
    pub xi: DqVec,
}

/// PI on the converter current with feed-forward of the PCC voltage and
/// the frame-rotation coupling. Returns `(u23, dxi/dt)` where
/// `u23 = V_dc m_dq`.
pub fn current_pi(
    c: &CurrentCtrlState,
    i_dq: &DqVec,
    i_ref: &DqVec,
    v_dq: &DqVec,
    u1: f64,
    p: &PlantParams,
    g: &CurrentGains,
) -> (DqVec, DqVec) {
    let e = i_ref - i_dq;
    let u23 = v_dq - j_mul(i_dq) * (p.l * u1) + e * g.k_p + c.xi * g.k_i;
    (u23, e)
}

/// How the steady-state power-flow problem is closed besides `P = P_ref`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "closure")]
pub enum PowerFlowClosure {
    /// PCC voltage magnitude held at the reference; reactive power follows.
    #[default]
    PccVoltage,
    /// Reactive power into the grid branch held at `q_ref`; PCC magnitude follows.
    ReactivePower { q_ref: f64 },
}

/// Operating-point references in the gauge `v_dq = (|v|, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct References {
    /// Converter current reference (A).
    pub i_dq_ref: DqVec,
    /// Angle of the grid voltage in the frame (rad).
    pub phi_ref: f64,
    /// PCC voltage at the operating point (V).
    pub v_dq_ref: DqVec,
    /// Grid-branch current at the operating point (A).
    pub i_g_dq_ref: DqVec,
    /// Active power into the grid branch (W).
    pub p: f64,
    /// Reactive power into the grid branch (var).
    pub q: f64,
}

impl References {
    /// The same operating point described in a frame rotated by `-delta`,
    /// i.e. with every angle advanced by `delta`.
    pub fn rotated(&self, delta: f64) -> References {
        let r = rot(delta);
        References {
            i_dq_ref: r * self.i_dq_ref,
            phi_ref: self.phi_ref + delta,
            v_dq_ref: r * self.v_dq_ref,
            i_g_dq_ref: r * self.i_g_dq_ref,
            p: self.p,
            q: self.q,
        }
    }

    /// Angle of the PCC voltage in the frame (0 in the default gauge).
    pub fn pcc_angle(&self) -> f64 {
        self.v_dq_ref.y.atan2(self.v_dq_ref.x)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CtrlError {
    #[error("no real power-flow solution for P_ref = {p_ref} W with the given grid impedance")]
    Infeasible { p_ref: f64 },
    #[error("invalid reference: {0}")]
    InvalidReference(String),
}

/// Amplitude of the phase voltage for a line-to-line RMS value.
pub fn phase_amplitude(v_ll_rms: f64) -> f64 {
    v_ll_rms * (2.0f64 / 3.0).sqrt()
}

/// Solves the steady state of the dq circuit at frame speed `omega` for the
/// active power `p_ref` delivered into the grid branch, with grid amplitude
/// `v_g` and `omega` taken as nominal.
pub fn compute_references(
    p_ref: f64,
    v_ref_ll: f64,
    v_g: f64,
    omega: f64,
    p: &PlantParams,
    closure: PowerFlowClosure,
) -> Result<References, CtrlError> {
    if !(p_ref.is_finite() && p_ref >= 0.0) {
        return Err(CtrlError::InvalidReference(format!("P_ref must be >= 0, got {p_ref}")));
    }
    if !(v_g.is_finite() && v_g > 0.0 && omega.is_finite() && omega > 0.0) {
        return Err(CtrlError::InvalidReference("nominal grid amplitude and frequency must be > 0".into()));
    }
    let x = omega * p.l_g;
    let r = p.r_g;
    let (v_a, i_g) = match closure {
        PowerFlowClosure::PccVoltage => {
            let v_a = phase_amplitude(v_ref_ll);
            if !(v_a.is_finite() && v_a > 0.0) {
                return Err(CtrlError::InvalidReference(format!("V_ref must be > 0, got {v_ref_ll}")));
            }
            let i_d = 2.0 * p_ref / (3.0 * v_a);
            // |(A - X q, B - r q)| = V_g, quadratic in the quadrature current q
            let a_ = v_a - r * i_d;
            let b_ = x * i_d;
            let qa = x * x + r * r;
            let qb = a_ * x + b_ * r;
            let qc = a_ * a_ + b_ * b_ - v_g * v_g;
            let disc = qb * qb - qa * qc;
            if disc < 0.0 {
                return Err(CtrlError::Infeasible { p_ref });
            }
            // smaller-magnitude root, in the cancellation-free form
            let denom = qb + qb.signum() * disc.sqrt();
            let q = if denom == 0.0 { 0.0 } else { qc / denom };
            (v_a, DqVec::new(i_d, q))
        }
        PowerFlowClosure::ReactivePower { q_ref } => {
            let a = 2.0 / 3.0 * (r * p_ref - x * q_ref);
            let b = 2.0 / 3.0 * (x * p_ref + r * q_ref);
            let lin = 2.0 * a + v_g * v_g;
            let disc = lin * lin - 4.0 * (a * a + b * b);
            if disc < 0.0 {
                return Err(CtrlError::Infeasible { p_ref });
            }
            let v_a = ((lin + disc.sqrt()) / 2.0).sqrt();
            if v_a.is_nan() || v_a <= 0.0 {
                return Err(CtrlError::Infeasible { p_ref });
            }
            (v_a, DqVec::new(p_ref, -q_ref) * (2.0 / (3.0 * v_a)))
        }
    };
    let v = DqVec::new(v_a, 0.0);
    // steady grid branch: v_g = v - r_g i_g + omega L_g J i_g
    let v_g_dq = v - i_g * r + j_mul(&i_g) * x;
    // steady capacitor: i = i_g - omega C J v
    let i = i_g - j_mul(&v) * (omega * p.c);
    Ok(References {
        i_dq_ref: i,
        phi_ref: v_g_dq.y.atan2(v_g_dq.x),
        v_dq_ref: v,
        i_g_dq_ref: i_g,
        p: 1.5 * v.dot(&i_g),
        q: 1.5 * (v.y * i_g.x - v.x * i_g.y),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    const W: f64 = 100.0 * PI;
    const VG: f64 = 310.2687;

    #[test]
    fn feed_forward_only_when_error_is_zero() {
        let p = PlantParams::default();
        let i = DqVec::new(1.2, -0.4);
        let v = DqVec::new(300.0, 5.0);
        let (u, de) = current_pi(&CurrentCtrlState::default(), &i, &i, &v, W, &p, &CurrentGains::default());
        assert_eq!(de, DqVec::zeros());
        assert_abs_diff_eq!(u, v - j_mul(&i) * (p.l * W), epsilon = 1e-12);
    }

    #[test]
    fn proportional_action() {
        let p = PlantParams::default();
        let z = DqVec::zeros();
        let (u, _) = current_pi(&CurrentCtrlState::default(), &z, &DqVec::new(1.0, 0.0), &z, 0.0, &p, &CurrentGains::default());
        assert_abs_diff_eq!(u, DqVec::new(1250.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn phase_amplitude_of_380v() {
        assert_abs_diff_eq!(phase_amplitude(380.0), 310.2687, epsilon = 1e-4);
    }

    #[test]
    fn zero_power_reference_is_analytic() {
        let p = PlantParams::default();
        let r = compute_references(0.0, 380.0, phase_amplitude(380.0), W, &p, PowerFlowClosure::PccVoltage).unwrap();
        assert_abs_diff_eq!(r.i_g_dq_ref, DqVec::zeros(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.phi_ref, 0.0, epsilon = 1e-12);
        let i_q = -W * p.c * phase_amplitude(380.0);
        assert_abs_diff_eq!(r.i_dq_ref, DqVec::new(0.0, i_q), epsilon = 1e-12);
        assert_abs_diff_eq!(i_q, -0.4484, epsilon = 1e-4);
    }

    #[test]
    fn negative_power_rejected() {
        let p = PlantParams::default();
        assert!(matches!(
            compute_references(-1.0, 380.0, VG, W, &p, PowerFlowClosure::PccVoltage),
            Err(CtrlError::InvalidReference(_))
        ));
    }

    #[test]
    fn excessive_power_is_infeasible() {
        let p = PlantParams::default();
        for closure in [PowerFlowClosure::PccVoltage, PowerFlowClosure::ReactivePower { q_ref: 0.0 }] {
            assert_eq!(
                compute_references(5000.0, 380.0, VG, W, &p, closure),
                Err(CtrlError::Infeasible { p_ref: 5000.0 })
            );
        }
    }

    #[test]
    fn reactive_closure_hits_q_and_p() {
        let p = PlantParams::default();
        let r = compute_references(600.0, 380.0, VG, W, &p, PowerFlowClosure::ReactivePower { q_ref: 0.0 }).unwrap();
        assert_abs_diff_eq!(r.q, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.p, 600.0, epsilon = 1e-9);
        // the grid source behind the impedance has the nominal amplitude
        let z = r.v_dq_ref - r.i_g_dq_ref * p.r_g + j_mul(&r.i_g_dq_ref) * (W * p.l_g);
        assert_abs_diff_eq!(z.norm(), VG, epsilon = 1e-9);
        // high-voltage root: close to the grid amplitude, not near zero
        assert!(r.v_dq_ref.x > 0.5 * VG);
    }

    #[test]
    fn rotated_gauge_keeps_powers() {
        let p = PlantParams::default();
        let r = compute_references(600.0, 380.0, VG, W, &p, PowerFlowClosure::PccVoltage).unwrap();
        let s = r.rotated(0.7);
        let pw = 1.5 * s.v_dq_ref.dot(&s.i_g_dq_ref);
        let qw = 1.5 * (s.v_dq_ref.y * s.i_g_dq_ref.x - s.v_dq_ref.x * s.i_g_dq_ref.y);
        assert_abs_diff_eq!(pw, r.p, epsilon = 1e-9);
        assert_abs_diff_eq!(qw, r.q, epsilon = 1e-9);
        assert_abs_diff_eq!(s.pcc_angle(), 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(s.phi_ref - s.pcc_angle(), r.phi_ref, epsilon = 1e-12);
    }
}
