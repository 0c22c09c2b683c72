//! Scripted scenarios: timed parameter steps applied between integration steps.

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::pll::PllVariant;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    /// Switch to the references precomputed at nominal conditions for this
    /// active power (W).
    SetPower { p: f64 },
    /// Step the grid frequency (Hz). The grid phase stays continuous.
    GridFrequency { hz: f64 },
    /// Step the grid amplitude (V).
    GridAmplitude { v_g: f64 },
    /// Override the current reference directly (A).
    CurrentRef { i_d: f64, i_q: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub duration: f64,
    /// Active power whose references are active from t = 0 (W).
    pub initial_power: f64,
    #[serde(default)]
    pub pll_variant: PllVariant,
    #[serde(default)]
    pub events: Vec<Event>,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(format!("scenario '{}': duration must be > 0", self.name));
        }
        if !(self.initial_power.is_finite() && self.initial_power >= 0.0) {
            return Err(format!("scenario '{}': initial_power must be >= 0", self.name));
        }
        let mut last = f64::NEG_INFINITY;
        for ev in &self.events {
            if !(ev.time.is_finite() && ev.time >= 0.0 && ev.time <= self.duration) {
                return Err(format!("scenario '{}': event at t = {} outside [0, {}]", self.name, ev.time, self.duration));
            }
            if ev.time <= last {
                return Err(format!("scenario '{}': event times must be strictly increasing", self.name));
            }
            last = ev.time;
            let ok = match ev.kind {
                EventKind::SetPower { p } => p.is_finite() && p >= 0.0,
                EventKind::GridFrequency { hz } => hz.is_finite() && hz > 0.0,
                EventKind::GridAmplitude { v_g } => v_g.is_finite() && v_g > 0.0,
                EventKind::CurrentRef { i_d, i_q } => i_d.is_finite() && i_q.is_finite(),
            };
            if !ok {
                return Err(format!("scenario '{}': invalid event value at t = {}", self.name, ev.time));
            }
        }
        Ok(())
    }

    /// Time of the first event, if any.
    pub fn first_event(&self) -> Option<f64> {
        self.events.first().map(|e| e.time)
    }

    /// Time of the first event matching `pred`.
    pub fn event_time(&self, pred: impl Fn(&EventKind) -> bool) -> Option<f64> {
        self.events.iter().find(|e| pred(&e.kind)).map(|e| e.time)
    }

    /// Step index of each event for the step `dt`, and the distance it was moved.
    pub fn snapped_events(&self, dt: f64) -> Vec<(u64, f64)> {
        self.events
            .iter()
            .map(|ev| {
                let n = (ev.time / dt).round() as u64;
                (n, (n as f64 * dt - ev.time).abs())
            })
            .collect()
    }

    /// Every power level the scenario may switch to, including the initial one.
    pub fn power_levels(&self) -> Vec<f64> {
        let mut out = vec![self.initial_power];
        for ev in &self.events {
            if let EventKind::SetPower { p } = ev.kind {
                if !out.contains(&p) {
                    out.push(p);
                }
            }
        }
        out
    }
}

pub const BUILTIN_NAMES: [&str; 4] = ["power-step", "comparison", "freq-step", "vg-step"];

/// Grid amplitude after the voltage sag (V).
pub const SAGGED_AMPLITUDE: f64 = 248.215;
/// Grid frequency after the frequency step (Hz).
pub const STEPPED_FREQUENCY: f64 = 52.0;

/// The built-in scenarios; `comparison` yields an adaptive/baseline pair.
pub fn builtin(name: &str, cfg: &SimConfig) -> Option<Vec<Scenario>> {
    let t0 = cfg.sim.warmup;
    let dur = cfg.sim.duration;
    let full = cfg.reference.p_ref;
    let half = full / 2.0;
    let one = |name: &str, initial_power: f64, events: Vec<Event>| Scenario {
        name: name.to_string(),
        duration: dur,
        initial_power,
        pll_variant: cfg.pll.variant,
        events,
    };
    let sc = match name {
        "power-step" => vec![one(
            "power-step",
            half,
            vec![Event { time: t0, kind: EventKind::SetPower { p: full } }],
        )],
        "freq-step" => vec![one(
            "freq-step",
            full,
            vec![Event { time: t0, kind: EventKind::GridFrequency { hz: STEPPED_FREQUENCY } }],
        )],
        "vg-step" => vec![one(
            "vg-step",
            full,
            vec![Event { time: t0, kind: EventKind::GridAmplitude { v_g: SAGGED_AMPLITUDE } }],
        )],
        "comparison" => {
            let events = vec![
                Event { time: t0, kind: EventKind::SetPower { p: full } },
                Event { time: t0 + 0.5, kind: EventKind::GridAmplitude { v_g: SAGGED_AMPLITUDE } },
            ];
            [PllVariant::Adaptive, PllVariant::Baseline]
                .into_iter()
                .map(|variant| Scenario {
                    name: match variant {
                        PllVariant::Adaptive => "comparison-adaptive".into(),
                        PllVariant::Baseline => "comparison-baseline".into(),
                    },
                    duration: dur,
                    initial_power: half,
                    pll_variant: variant,
                    events: events.clone(),
                })
                .collect()
        }
        _ => return None,
    };
    Some(sc)
}
