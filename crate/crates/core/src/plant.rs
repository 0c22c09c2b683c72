//! Thevenin grid source and the averaged converter circuit, in abc and dq
//! coordinates.
//!
//! The circuit is a phase reactor (L, r) feeding a shunt filter capacitor C
//! at the point of common coupling, which connects to an ideal source
//! through the grid impedance (L_g, r_g).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::frames::{j_mul, DqVec, ThreePhase};

const TWO_PI_3: f64 = 2.0 * PI / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantParams {
    /// Phase reactor inductance (H).
    #[serde(rename = "L")]
    pub l: f64,
    /// Phase reactor resistance (ohm).
    pub r: f64,
    /// Grid inductance (H).
    #[serde(rename = "L_g")]
    pub l_g: f64,
    /// Grid resistance (ohm).
    pub r_g: f64,
    /// Filter capacitance (F).
    #[serde(rename = "C")]
    pub c: f64,
    /// DC-link voltage (V).
    #[serde(rename = "V_dc")]
    pub v_dc: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            l: 9.5e-3,
            r: 0.64,
            l_g: 0.282,
            r_g: 12.8,
            c: 4.6e-6,
            v_dc: 700.0,
        }
    }
}

impl PlantParams {
    /// Returns the name of the first non-positive (or non-finite) parameter.
    pub fn first_invalid(&self) -> Option<&'static str> {
        [
            ("L", self.l),
            ("r", self.r),
            ("L_g", self.l_g),
            ("r_g", self.r_g),
            ("C", self.c),
            ("V_dc", self.v_dc),
        ]
        .into_iter()
        .find(|(_, v)| !(v.is_finite() && *v > 0.0))
        .map(|(k, _)| k)
    }
}

/// The hidden grid source: amplitude, frequency and accumulated phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridTruth {
    pub v_g: f64,
    pub omega: f64,
    pub phase: f64,
}

impl GridTruth {
    /// Grid voltage in the dq frame at angle `theta`: `V_g e^{J(theta - phase)} e1`.
    pub fn v_g_dq(&self, theta: f64) -> DqVec {
        let (s, c) = (theta - self.phase).sin_cos();
        DqVec::new(c, s) * self.v_g
    }
}

/// `V_g (sin p, sin(p - 2pi/3), sin(p + 2pi/3))` at the accumulated phase `p`.
pub fn grid_voltage(g: &GridTruth) -> ThreePhase {
    let p = g.phase;
    ThreePhase::new(
        g.v_g * p.sin(),
        g.v_g * (p - TWO_PI_3).sin(),
        g.v_g * (p + TWO_PI_3).sin(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantStateAbc {
    pub i_g: ThreePhase,
    pub i: ThreePhase,
    pub v: ThreePhase,
}

impl PlantStateAbc {
    pub fn scaled_add(&self, k: f64, d: &PlantStateAbc) -> PlantStateAbc {
        PlantStateAbc {
            i_g: self.i_g.scaled_add(k, &d.i_g),
            i: self.i.scaled_add(k, &d.i),
            v: self.v.scaled_add(k, &d.v),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.i_g.is_finite() && self.i.is_finite() && self.v.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantStateDq {
    pub i_g: DqVec,
    pub v: DqVec,
    pub i: DqVec,
}

impl PlantStateDq {
    pub fn scaled_add(&self, k: f64, d: &PlantStateDq) -> PlantStateDq {
        PlantStateDq {
            i_g: self.i_g + d.i_g * k,
            v: self.v + d.v * k,
            i: self.i + d.i * k,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.i_g, self.v, self.i].iter().all(|x| x.iter().all(|c| c.is_finite()))
    }

    pub fn norm(&self) -> f64 {
        (self.i_g.norm_squared() + self.v.norm_squared() + self.i.norm_squared()).sqrt()
    }
}

/// abc circuit dynamics driven by the modulation indices `m`.
pub fn deriv_abc(s: &PlantStateAbc, m: &ThreePhase, g: &GridTruth, p: &PlantParams) -> PlantStateAbc {
    let v_g = grid_voltage(g);
    PlantStateAbc {
        i_g: (s.i_g * -p.r_g + s.v - v_g) * (1.0 / p.l_g),
        i: (s.i * -p.r + *m * p.v_dc - s.v) * (1.0 / p.l),
        v: (s.i - s.i_g) * (1.0 / p.c),
    }
}

/// dq circuit dynamics in a frame rotating at `u1`, with `u23 = V_dc m_dq`
/// and the unknown state `x = v_g_dq / L_g`.
pub fn deriv_dq(s: &PlantStateDq, u1: f64, u23: &DqVec, x: &DqVec, p: &PlantParams) -> PlantStateDq {
    PlantStateDq {
        i_g: (-s.i_g * p.r_g + s.v) / p.l_g + j_mul(&s.i_g) * u1 - x,
        v: (s.i - s.i_g) / p.c + j_mul(&s.v) * u1,
        i: (-s.v - s.i * p.r + u23) / p.l + j_mul(&s.i) * u1,
    }
}

/// `(u1 - omega) J x`: the scaled grid voltage seen from a frame rotating at `u1`.
pub fn unknown_state_deriv(x: &DqVec, u1: f64, omega: f64) -> DqVec {
    j_mul(x) * (u1 - omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{inv_park, park, rot};
    use approx::assert_abs_diff_eq;

    fn table_grid(phase: f64) -> GridTruth {
        GridTruth { v_g: 310.2687, omega: 100.0 * PI, phase }
    }

    #[test]
    fn grid_voltage_values() {
        let v = grid_voltage(&table_grid(PI / 2.0));
        assert_abs_diff_eq!(v.a, 310.2687, epsilon = 1e-12);
        assert_abs_diff_eq!(v.b, -155.13435, epsilon = 1e-10);
        assert_abs_diff_eq!(v.c, -155.13435, epsilon = 1e-10);
        for k in 0..50 {
            let v = grid_voltage(&table_grid(0.37 * k as f64));
            assert_abs_diff_eq!(v.sum(), 0.0, epsilon = 1e-10);
        }
        let zero = grid_voltage(&GridTruth { v_g: 0.0, omega: 1.0, phase: 0.4 });
        assert_eq!(zero, ThreePhase::ZERO);
    }

    #[test]
    fn abc_derivative_at_rest_is_grid_driven() {
        let p = PlantParams::default();
        let g = table_grid(0.8);
        let d = deriv_abc(&PlantStateAbc::default(), &ThreePhase::ZERO, &g, &p);
        let vg = grid_voltage(&g);
        assert_abs_diff_eq!(d.i_g.a, -vg.a / p.l_g, epsilon = 1e-12);
        assert_abs_diff_eq!(d.i_g.b, -vg.b / p.l_g, epsilon = 1e-12);
        assert_eq!(d.i, ThreePhase::ZERO);
        assert_eq!(d.v, ThreePhase::ZERO);
    }

    #[test]
    fn equal_branch_currents_hold_capacitor_voltage() {
        let p = PlantParams::default();
        let cur = ThreePhase::new(1.0, -2.0, 1.0);
        let s = PlantStateAbc { i_g: cur, i: cur, v: ThreePhase::new(3.0, 0.0, -3.0) };
        let d = deriv_abc(&s, &ThreePhase::new(0.1, 0.2, -0.3), &table_grid(0.1), &p);
        assert_eq!(d.v, ThreePhase::ZERO);
    }

    #[test]
    fn dq_derivative_basic_cases() {
        let p = PlantParams::default();
        let zero = deriv_dq(&PlantStateDq::default(), 0.0, &DqVec::zeros(), &DqVec::zeros(), &p);
        assert_eq!(zero, PlantStateDq::default());

        let x = DqVec::new(3.0, -4.0);
        let d = deriv_dq(&PlantStateDq::default(), 0.0, &DqVec::zeros(), &x, &p);
        assert_eq!(d.i_g, -x);
        assert_eq!(d.v, DqVec::zeros());
        assert_eq!(d.i, DqVec::zeros());
    }

    #[test]
    fn decoupling_input_freezes_converter_current() {
        let p = PlantParams::default();
        let s = PlantStateDq {
            i_g: DqVec::new(1.0, 0.2),
            v: DqVec::new(300.0, -20.0),
            i: DqVec::new(1.3, -0.4),
        };
        let u1 = 314.0;
        let u23 = s.v + s.i * p.r - j_mul(&s.i) * (u1 * p.l);
        let d = deriv_dq(&s, u1, &u23, &DqVec::new(1000.0, 0.0), &p);
        assert_abs_diff_eq!(d.i, DqVec::zeros(), epsilon = 1e-9);
    }

    #[test]
    fn dq_model_is_the_park_image_of_abc_model() {
        // d/dt park(s, theta) = park(ds/dt, theta) + u1 J park(s, theta)
        let p = PlantParams::default();
        let theta = 0.41;
        let u1 = 290.0;
        let g = table_grid(0.13);
        let abc = PlantStateAbc {
            i_g: inv_park(&DqVec::new(1.2, 0.1), theta),
            i: inv_park(&DqVec::new(1.3, -0.35), theta),
            v: inv_park(&DqVec::new(305.0, 12.0), theta),
        };
        let m_dq = DqVec::new(0.42, 0.07);
        let d_abc = deriv_abc(&abc, &inv_park(&m_dq, theta), &g, &p);
        let dq = PlantStateDq {
            i_g: park(&abc.i_g, theta),
            v: park(&abc.v, theta),
            i: park(&abc.i, theta),
        };
        let x = g.v_g_dq(theta) / p.l_g;
        let d_dq = deriv_dq(&dq, u1, &(m_dq * p.v_dc), &x, &p);
        let image = |s: &ThreePhase, y: &DqVec| park(s, theta) + j_mul(y) * u1;
        assert_abs_diff_eq!(image(&d_abc.i_g, &dq.i_g), d_dq.i_g, epsilon = 1e-8);
        assert_abs_diff_eq!(image(&d_abc.v, &dq.v), d_dq.v, epsilon = 1e-3);
        assert_abs_diff_eq!(image(&d_abc.i, &dq.i), d_dq.i, epsilon = 1e-8);
    }

    #[test]
    fn unknown_state_cases() {
        let x = DqVec::new(1.0, 0.0);
        assert_eq!(unknown_state_deriv(&x, 314.0, 314.0), DqVec::zeros());
        assert_eq!(unknown_state_deriv(&x, 2.0, 1.0), DqVec::new(0.0, 1.0));
    }

    #[test]
    fn grid_dq_vector_matches_park() {
        let g = table_grid(1.7);
        let theta = 2.1;
        assert_abs_diff_eq!(park(&grid_voltage(&g), theta), g.v_g_dq(theta), epsilon = 1e-10);
        assert_abs_diff_eq!(g.v_g_dq(theta), rot(theta - g.phase) * DqVec::new(g.v_g, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn invalid_params_are_named() {
        assert_eq!(PlantParams::default().first_invalid(), None);
        let p = PlantParams { c: 0.0, ..PlantParams::default() };
        assert_eq!(p.first_invalid(), Some("C"));
    }
}
