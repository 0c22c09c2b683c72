//! Simulation configuration with validated defaults.
//!
//! Every section and key is optional; omitted values fall back to the
//! nominal converter and grid data (L = 9.5 mH, r = 0.64 ohm, C = 4.6 uF,
//! L_g = 282 mH, r_g = 12.8 ohm, V_g = 310.2687 V, 50 Hz) and the nominal
//! loop gains.

use std::f64::consts::TAU;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ctrl::{CurrentGains, PowerFlowClosure};
use crate::gpebo::FilterParams;
use crate::lsff::{EstimatorGains, GainNorm};
use crate::plant::PlantParams;
use crate::pll::PllConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridNominal {
    /// Phase voltage amplitude (V).
    #[serde(rename = "V_g")]
    pub v_g: f64,
    /// Frequency (Hz).
    pub f: f64,
}

impl Default for GridNominal {
    fn default() -> Self {
        Self { v_g: 310.2687, f: 50.0 }
    }
}

impl GridNominal {
    pub fn omega(&self) -> f64 {
        TAU * self.f
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSection {
    pub alpha: f64,
    pub beta: f64,
    #[serde(rename = "M")]
    pub m_cap: f64,
    pub f0: f64,
    pub norm: GainNorm,
    /// Initial parameter estimate.
    pub theta0: [f64; 3],
}

impl Default for EstimatorSection {
    fn default() -> Self {
        let g = EstimatorGains::default();
        Self {
            alpha: g.alpha,
            beta: g.beta,
            m_cap: g.m_cap,
            f0: g.f0,
            norm: g.norm,
            theta0: [0.0; 3],
        }
    }
}

impl EstimatorSection {
    pub fn gains(&self) -> EstimatorGains {
        EstimatorGains {
            alpha: self.alpha,
            beta: self.beta,
            m_cap: self.m_cap,
            f0: self.f0,
            norm: self.norm,
        }
    }

    pub fn theta0(&self) -> Vector3<f64> {
        Vector3::from(self.theta0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosureKind {
    #[default]
    PccVoltage,
    ReactivePower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSection {
    /// Rated active power (W).
    #[serde(rename = "P_ref")]
    pub p_ref: f64,
    /// Line-to-line RMS voltage reference (V).
    #[serde(rename = "V_ref")]
    pub v_ref: f64,
    pub closure: ClosureKind,
    /// Reactive power for the `reactive_power` closure (var).
    #[serde(rename = "Q_ref")]
    pub q_ref: f64,
}

impl Default for ReferenceSection {
    fn default() -> Self {
        Self { p_ref: 600.0, v_ref: 380.0, closure: ClosureKind::PccVoltage, q_ref: 0.0 }
    }
}

impl ReferenceSection {
    pub fn closure(&self) -> PowerFlowClosure {
        match self.closure {
            ClosureKind::PccVoltage => PowerFlowClosure::PccVoltage,
            ClosureKind::ReactivePower => PowerFlowClosure::ReactivePower { q_ref: self.q_ref },
        }
    }
}

/// Which circuit model is integrated as ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlantModel {
    #[default]
    Abc,
    Dq,
}

/// Initial condition of plant and controller states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Start {
    /// Everything at rest, frame and grid angles at zero.
    #[default]
    Rest,
    /// Circuit, current controller and PLL at the operating point of the
    /// scenario's initial power; observer and estimator at their defaults.
    Equilibrium,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    /// Integration step (s).
    pub dt: f64,
    /// Length of built-in scenarios (s).
    pub duration: f64,
    /// Settling interval before the first built-in event (s).
    pub warmup: f64,
    /// Trace sampling rate (Hz).
    pub output_rate: f64,
    pub plant_model: PlantModel,
    pub start: Start,
    /// Period of the projection of `Phi` onto the rotations (s); 0 disables it.
    pub phi_renorm_period: f64,
    /// Trailing window of the excitation monitor (s).
    pub pe_window: f64,
    /// Sample period of the excitation monitor (s).
    pub pe_sample_period: f64,
    /// Excitation level below which a warning is counted.
    pub pe_threshold: f64,
    /// Count steps where `|m_dq| > 1`.
    pub modulation_warning: bool,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            dt: 1e-5,
            duration: 3.0,
            warmup: 1.0,
            output_rate: 1000.0,
            plant_model: PlantModel::Abc,
            start: Start::Rest,
            phi_renorm_period: 0.01,
            pe_window: 0.1,
            pe_sample_period: 1e-4,
            pe_threshold: 1e-6,
            modulation_warning: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub plant: PlantParams,
    pub grid: GridNominal,
    pub pll: PllConfig,
    pub current: CurrentGains,
    pub observer: FilterParams,
    pub estimator: EstimatorSection,
    pub reference: ReferenceSection,
    pub sim: SimSection,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid value for '{key}': {reason}")]
pub struct ConfigError {
    pub key: String,
    pub reason: String,
}

fn check(key: &str, ok: bool, reason: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError { key: key.to_string(), reason: reason.to_string() })
    }
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    check(key, v.is_finite() && v > 0.0, &format!("must be > 0, got {v}"))
}

fn non_negative(key: &str, v: f64) -> Result<(), ConfigError> {
    check(key, v.is_finite() && v >= 0.0, &format!("must be >= 0, got {v}"))
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(k) = self.plant.first_invalid() {
            return Err(ConfigError { key: format!("plant.{k}"), reason: "must be > 0".into() });
        }
        positive("grid.V_g", self.grid.v_g)?;
        positive("grid.f", self.grid.f)?;
        positive("pll.K_P", self.pll.k_p)?;
        positive("pll.K_I", self.pll.k_i)?;
        positive("current.K_P", self.current.k_p)?;
        non_negative("current.K_I", self.current.k_i)?;
        positive("observer.lambda", self.observer.lambda)?;
        positive("estimator.alpha", self.estimator.alpha)?;
        non_negative("estimator.beta", self.estimator.beta)?;
        positive("estimator.M", self.estimator.m_cap)?;
        positive("estimator.f0", self.estimator.f0)?;
        check(
            "estimator.theta0",
            self.estimator.theta0.iter().all(|v| v.is_finite()),
            "must be finite",
        )?;
        non_negative("reference.P_ref", self.reference.p_ref)?;
        positive("reference.V_ref", self.reference.v_ref)?;
        check("reference.Q_ref", self.reference.q_ref.is_finite(), "must be finite")?;
        let s = &self.sim;
        positive("sim.dt", s.dt)?;
        check("sim.dt", s.dt <= 1e-3, "must be <= 1e-3 s")?;
        positive("sim.duration", s.duration)?;
        non_negative("sim.warmup", s.warmup)?;
        check("sim.warmup", s.warmup + 0.5 <= s.duration, "warmup + 0.5 s must fit in the duration")?;
        positive("sim.output_rate", s.output_rate)?;
        check("sim.output_rate", s.output_rate * s.dt <= 1.0, "must not exceed 1/dt")?;
        non_negative("sim.phi_renorm_period", s.phi_renorm_period)?;
        positive("sim.pe_window", s.pe_window)?;
        positive("sim.pe_sample_period", s.pe_sample_period)?;
        check("sim.pe_sample_period", s.pe_sample_period >= s.dt, "must be >= dt")?;
        check("sim.pe_window", s.pe_window >= s.pe_sample_period, "must be >= pe_sample_period")?;
        non_negative("sim.pe_threshold", s.pe_threshold)?;
        Ok(())
    }
}
