//! Fixed-step integration of the closed loop: circuit, observer, estimator,
//! PLL and current controller, with scripted parameter steps and a
//! down-sampled trace.

pub mod check;
pub mod rk4;
pub mod scenario;
pub mod trace;

use std::f64::consts::TAU;

use nalgebra::Vector3;
use thiserror::Error;

use crate::config::{ConfigError, PlantModel, SimConfig, Start};
use crate::ctrl::{compute_references, current_pi, CtrlError, CurrentCtrlState, References};
use crate::frames::{inv_park, park, wrap_angle, DqVec};
use crate::gpebo::{estimate_x, observer_deriv, recover_grid, regressor, ObserverState, Regressor};
use crate::lsff::{estimator_deriv_gated, EstimatorGains, EstimatorState, PeMonitor};
use crate::plant::{deriv_abc, deriv_dq, GridTruth, PlantStateAbc, PlantStateDq};
use crate::pll::{baseline_source, phase_detector, pll_deriv, PllState, PllVariant};

pub use rk4::{rk4_step, OdeState};
pub use scenario::{builtin, Event, EventKind, Scenario, BUILTIN_NAMES};
pub use trace::{settling_time, settling_time_by, Band, Channel, Settling, Trace, TraceRecord};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Infeasible(#[from] CtrlError),
    #[error("simulation diverged at t = {time} s")]
    Divergence { time: f64, partial: Box<Trace> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlantStates {
    Abc(PlantStateAbc),
    Dq(PlantStateDq),
}

/// The full continuous state of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState {
    pub plant: PlantStates,
    /// Accumulated grid phase (rad).
    pub grid_phase: f64,
    pub observer: ObserverState,
    pub estimator: EstimatorState,
    pub pll: PllState,
    pub ctrl: CurrentCtrlState,
}

impl OdeState for SimState {
    fn scaled_add(&self, k: f64, d: &SimState) -> SimState {
        let plant = match (&self.plant, &d.plant) {
            (PlantStates::Abc(a), PlantStates::Abc(b)) => PlantStates::Abc(a.scaled_add(k, b)),
            (PlantStates::Dq(a), PlantStates::Dq(b)) => PlantStates::Dq(a.scaled_add(k, b)),
            _ => unreachable!("state and derivative use the same plant model"),
        };
        SimState {
            plant,
            grid_phase: self.grid_phase + k * d.grid_phase,
            observer: self.observer.scaled_add(k, &d.observer),
            estimator: self.estimator.scaled_add(k, &d.estimator),
            pll: self.pll.scaled_add(k, &d.pll),
            ctrl: CurrentCtrlState { xi: self.ctrl.xi + d.ctrl.xi * k },
        }
    }
}

macro_rules! ode_state_via_scaled_add {
    ($($t:ty),*) => {$(
        impl OdeState for $t {
            fn scaled_add(&self, k: f64, d: &Self) -> Self {
                <$t>::scaled_add(self, k, d)
            }
        }
    )*};
}

ode_state_via_scaled_add!(PlantStateAbc, PlantStateDq, ObserverState, EstimatorState, PllState);

impl SimState {
    pub fn is_finite(&self) -> bool {
        let plant_ok = match &self.plant {
            PlantStates::Abc(p) => p.is_finite(),
            PlantStates::Dq(p) => p.is_finite(),
        };
        plant_ok
            && self.grid_phase.is_finite()
            && self.observer.is_finite()
            && self.estimator.is_finite()
            && self.pll.x_c.is_finite()
            && self.pll.theta.is_finite()
            && self.ctrl.xi.iter().all(|v| v.is_finite())
    }

    /// Circuit state seen in the controller frame.
    pub fn plant_dq(&self) -> PlantStateDq {
        match &self.plant {
            PlantStates::Abc(p) => {
                let th = self.pll.theta;
                PlantStateDq { i_g: park(&p.i_g, th), v: park(&p.v, th), i: park(&p.i, th) }
            }
            PlantStates::Dq(p) => *p,
        }
    }
}

/// Quantities derived from a state and the current inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Signals {
    pub meas: PlantStateDq,
    pub x_hat: DqVec,
    pub e_phi: f64,
    /// False when the detector input had no direction and `e_phi` is the held value.
    pub e_fresh: bool,
    pub u1: f64,
    pub u23: DqVec,
    pub dxi: DqVec,
    pub dx_c: f64,
    pub regressor: Regressor,
}

/// Piecewise-constant inputs, changed only between steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inputs {
    pub grid_v_g: f64,
    pub grid_omega: f64,
    pub i_ref: DqVec,
    /// Commanded angle of the grid voltage in the frame.
    pub phi_ref: f64,
    /// Commanded angle of the PCC voltage, used by the baseline loop.
    pub pcc_ref: f64,
    /// Detector output used during the current step.
    pub e_phi: f64,
    pub frozen: bool,
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("non-finite derivative")]
pub struct NonFinite;

/// Counters gathered while stepping.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diagnostics {
    pub freeze_events: usize,
    pub max_phi_drift: f64,
    pub modulation_warnings: usize,
    pub pe_warnings: usize,
}

pub struct Simulator {
    cfg: SimConfig,
    variant: PllVariant,
    gains: EstimatorGains,
    state: SimState,
    inputs: Inputs,
    step: u64,
    renorm_every: u64,
    pe_every: u64,
    pe: PeMonitor,
    diag: Diagnostics,
}

impl Simulator {
    /// Builds a simulator whose references start at `refs`.
    pub fn new(cfg: &SimConfig, variant: PllVariant, refs: &References) -> Simulator {
        let gains = cfg.estimator.gains();
        let omega = cfg.grid.omega();
        let estimator = EstimatorState::new(cfg.estimator.theta0(), &gains);
        let (plant_dq, pll, ctrl) = match cfg.sim.start {
            Start::Rest => (PlantStateDq::default(), PllState::default(), CurrentCtrlState::default()),
            Start::Equilibrium => {
                let pll = PllState { x_c: -omega / cfg.pll.k_i, theta: refs.phi_ref };
                let xi = if cfg.current.k_i > 0.0 {
                    refs.i_dq_ref * (cfg.plant.r / cfg.current.k_i)
                } else {
                    DqVec::zeros()
                };
                let dq = PlantStateDq { i_g: refs.i_g_dq_ref, v: refs.v_dq_ref, i: refs.i_dq_ref };
                (dq, pll, CurrentCtrlState { xi })
            }
        };
        let plant = match cfg.sim.plant_model {
            PlantModel::Dq => PlantStates::Dq(plant_dq),
            PlantModel::Abc => {
                let th = pll.theta;
                PlantStates::Abc(PlantStateAbc {
                    i_g: inv_park(&plant_dq.i_g, th),
                    i: inv_park(&plant_dq.i, th),
                    v: inv_park(&plant_dq.v, th),
                })
            }
        };
        let state = SimState {
            plant,
            grid_phase: 0.0,
            observer: ObserverState::default(),
            estimator,
            pll,
            ctrl,
        };
        let steps = |period: f64| ((period / cfg.sim.dt).round() as u64).max(1);
        Simulator {
            cfg: *cfg,
            variant,
            gains,
            state,
            inputs: Inputs {
                grid_v_g: cfg.grid.v_g,
                grid_omega: omega,
                i_ref: refs.i_dq_ref,
                phi_ref: refs.phi_ref,
                pcc_ref: refs.pcc_angle(),
                e_phi: 0.0,
                frozen: false,
            },
            step: 0,
            renorm_every: if cfg.sim.phi_renorm_period > 0.0 { steps(cfg.sim.phi_renorm_period) } else { 0 },
            pe_every: steps(cfg.sim.pe_sample_period),
            pe: PeMonitor::new(steps(cfg.sim.pe_sample_period) as f64 * cfg.sim.dt, cfg.sim.pe_window),
            diag: Diagnostics::default(),
        }
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut SimState {
        &mut self.state
    }

    pub fn inputs(&self) -> &Inputs {
        &self.inputs
    }

    pub fn inputs_mut(&mut self) -> &mut Inputs {
        &mut self.inputs
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.cfg.sim.dt
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        &self.diag
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// Grid truth at the current state.
    pub fn grid(&self) -> GridTruth {
        GridTruth { v_g: self.inputs.grid_v_g, omega: self.inputs.grid_omega, phase: self.state.grid_phase }
    }

    /// Applies the references computed for some operating point.
    pub fn set_references(&mut self, refs: &References) {
        self.inputs.i_ref = refs.i_dq_ref;
        self.inputs.phi_ref = refs.phi_ref;
        self.inputs.pcc_ref = refs.pcc_angle();
    }

    /// Raw phase-detector output at `s`, or `None` when its input has no direction.
    pub fn detect(&self, s: &SimState) -> Option<f64> {
        let cfg = &self.cfg;
        let meas = s.plant_dq();
        let detected = match self.variant {
            PllVariant::Adaptive => {
                let x_hat = estimate_x(&s.observer, &meas.i_g, &s.estimator.theta_hat);
                phase_detector(&x_hat, self.inputs.phi_ref, cfg.pll.detector)
            }
            PllVariant::Baseline => phase_detector(&baseline_source(&meas.v), self.inputs.pcc_ref, cfg.pll.detector),
        };
        detected.ok()
    }

    /// Signals at `s` with the detector output held for the current step.
    pub fn signals(&self, s: &SimState) -> Signals {
        self.signals_with(s, self.inputs.e_phi, true)
    }

    fn signals_with(&self, s: &SimState, e_phi: f64, e_fresh: bool) -> Signals {
        let cfg = &self.cfg;
        let meas = s.plant_dq();
        let x_hat = estimate_x(&s.observer, &meas.i_g, &s.estimator.theta_hat);
        let (dx_c, u1) = pll_deriv(&s.pll, e_phi, &cfg.pll);
        let (u23, dxi) = current_pi(&s.ctrl, &meas.i, &self.inputs.i_ref, &meas.v, u1, &cfg.plant, &cfg.current);
        Signals {
            meas,
            x_hat,
            e_phi,
            e_fresh,
            u1,
            u23,
            dxi,
            dx_c,
            regressor: regressor(&s.observer, &meas.i_g, &cfg.observer),
        }
    }

    /// Signals at the current state with a freshly sampled detector.
    pub fn current_signals(&self) -> Signals {
        match self.detect(&self.state) {
            Some(e) => self.signals_with(&self.state, e, true),
            None => self.signals_with(&self.state, self.inputs.e_phi, false),
        }
    }

    /// Time derivative of the closed loop at `s`.
    pub fn derivative(&self, s: &SimState) -> Result<SimState, NonFinite> {
        let cfg = &self.cfg;
        let p = &cfg.plant;
        let sig = self.signals(s);
        let theta = s.pll.theta;
        let grid = GridTruth { v_g: self.inputs.grid_v_g, omega: self.inputs.grid_omega, phase: s.grid_phase };
        let plant = match &s.plant {
            PlantStates::Abc(ps) => {
                let m = inv_park(&(sig.u23 / p.v_dc), theta);
                PlantStates::Abc(deriv_abc(ps, &m, &grid, p))
            }
            PlantStates::Dq(ps) => {
                let x = grid.v_g_dq(theta) / p.l_g;
                PlantStates::Dq(deriv_dq(ps, sig.u1, &sig.u23, &x, p))
            }
        };
        let d = SimState {
            plant,
            grid_phase: grid.omega,
            observer: observer_deriv(&s.observer, &sig.meas.i_g, &sig.meas.v, sig.u1, p, &cfg.observer),
            estimator: estimator_deriv_gated(&s.estimator, &sig.regressor, &self.gains, self.inputs.frozen),
            pll: PllState { x_c: sig.dx_c, theta: sig.u1 },
            ctrl: CurrentCtrlState { xi: sig.dxi },
        };
        if d.is_finite() {
            Ok(d)
        } else {
            Err(NonFinite)
        }
    }

    /// Advances one step of `dt`.
    pub fn step(&mut self) -> Result<(), NonFinite> {
        let was_frozen = self.inputs.frozen;
        self.inputs.frozen = self.state.estimator.is_frozen(&self.gains);
        if self.inputs.frozen && !was_frozen {
            self.diag.freeze_events += 1;
        }
        // the detector is sampled once per step and held across the RK4
        // stages, so u1 stays smooth within a step even where the ATAN
        // output wraps or its input passes through zero
        if let Some(e) = self.detect(&self.state) {
            self.inputs.e_phi = e;
        }
        let sig = self.signals(&self.state);
        if self.cfg.sim.modulation_warning && (sig.u23 / self.cfg.plant.v_dc).norm() > 1.0 {
            self.diag.modulation_warnings += 1;
        }
        let mut next = rk4_step(&self.state, self.cfg.sim.dt, |s| self.derivative(s))?;
        next.estimator.symmetrize();
        self.step += 1;
        if self.renorm_every > 0 && self.step.is_multiple_of(self.renorm_every) {
            self.diag.max_phi_drift = self.diag.max_phi_drift.max(next.observer.phi_drift());
            next.observer.renormalize();
        }
        if !next.is_finite() {
            return Err(NonFinite);
        }
        self.state = next;
        if self.step.is_multiple_of(self.pe_every) {
            let s = &self.state;
            self.pe.push(regressor(&s.observer, &s.plant_dq().i_g, &self.cfg.observer).omega);
        }
        Ok(())
    }

    /// Windowed excitation level of the regressor, once a window is full.
    pub fn pe_metric(&mut self) -> Option<f64> {
        self.pe.metric()
    }

    /// Applies a scripted parameter change.
    pub fn apply(&mut self, ev: &EventKind, refs: &[(f64, References)]) {
        match *ev {
            EventKind::SetPower { p } => {
                if let Some((_, r)) = refs.iter().find(|(pw, _)| *pw == p) {
                    self.set_references(r);
                }
            }
            EventKind::GridFrequency { hz } => self.inputs.grid_omega = TAU * hz,
            EventKind::GridAmplitude { v_g } => self.inputs.grid_v_g = v_g,
            EventKind::CurrentRef { i_d, i_q } => self.inputs.i_ref = DqVec::new(i_d, i_q),
        }
    }

    /// Snapshot of the current state as a trace row.
    pub fn record(&mut self) -> TraceRecord {
        let s = self.state;
        let sig = self.current_signals();
        let est = recover_grid(&s.estimator.theta_hat, &sig.x_hat, &self.cfg.plant);
        let phi = s.pll.theta - s.grid_phase;
        let pe = self.pe.metric();
        if let Some(v) = pe {
            if v < self.cfg.sim.pe_threshold {
                self.diag.pe_warnings += 1;
            }
        }
        let th: Vector3<f64> = s.estimator.theta_hat;
        TraceRecord {
            t: self.time(),
            i_d: sig.meas.i.x,
            i_q: sig.meas.i.y,
            i_d_ref: self.inputs.i_ref.x,
            i_q_ref: self.inputs.i_ref.y,
            i_gd: sig.meas.i_g.x,
            i_gq: sig.meas.i_g.y,
            v_d: sig.meas.v.x,
            v_q: sig.meas.v.y,
            phi,
            phi_deg: wrap_angle(phi).to_degrees(),
            phi_ref_deg: wrap_angle(self.inputs.phi_ref).to_degrees(),
            xhat_d: sig.x_hat.x,
            xhat_q: sig.x_hat.y,
            theta_1: th[0],
            theta_2: th[1],
            theta_3: th[2],
            f_hat: est.freq,
            vg_hat: est.v_g,
            f_true: self.inputs.grid_omega / TAU,
            vg_true: self.inputs.grid_v_g,
            e_phi: sig.e_phi,
            u1: sig.u1,
            pe_metric: pe.unwrap_or(f64::NAN),
            f_norm: s.estimator.gain_norm(&self.gains),
            freeze: if s.estimator.is_frozen(&self.gains) { 1.0 } else { 0.0 },
        }
    }
}

/// Settling of one channel after the last scripted event.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSettling {
    pub channel: Channel,
    pub target: f64,
    pub result: Settling,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub scenario: String,
    pub variant: PllVariant,
    pub steps: u64,
    pub final_time: f64,
    /// Time from which settling is measured (last event, or 0).
    pub settle_from: f64,
    pub settling: Vec<ChannelSettling>,
    pub final_current_error: f64,
    pub final_phi_error_deg: f64,
    pub final_freq_error: f64,
    pub final_vg_error: f64,
    /// Distance between each requested event time and its step boundary.
    pub event_snaps: Vec<f64>,
    pub max_event_snap: f64,
    pub min_pe_after_warmup: Option<f64>,
    pub diagnostics: Diagnostics,
    pub frozen_at_end: bool,
}

/// Band used for the summary settling figures.
pub const SUMMARY_BAND: Band = Band::Fraction(0.02);

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Trace,
    pub summary: RunSummary,
    /// References precomputed at nominal conditions, keyed by active power.
    pub references: Vec<(f64, References)>,
}

/// References for every power level the scenario uses, at nominal grid conditions.
pub fn scenario_references(cfg: &SimConfig, sc: &Scenario) -> Result<Vec<(f64, References)>, CtrlError> {
    sc.power_levels()
        .into_iter()
        .map(|p| {
            compute_references(p, cfg.reference.v_ref, cfg.grid.v_g, cfg.grid.omega(), &cfg.plant, cfg.reference.closure())
                .map(|r| (p, r))
        })
        .collect()
}

pub fn run_scenario(cfg: &SimConfig, sc: &Scenario) -> Result<RunOutput, EngineError> {
    cfg.validate()?;
    sc.validate().map_err(EngineError::Scenario)?;
    let refs = scenario_references(cfg, sc)?;
    let dt = cfg.sim.dt;
    let total = (sc.duration / dt).round() as u64;
    let decim = ((1.0 / (cfg.sim.output_rate * dt)).round() as u64).max(1);

    let snaps = sc.snapped_events(dt);
    let schedule: Vec<(u64, EventKind)> = snaps.iter().zip(&sc.events).map(|((n, _), ev)| (*n, ev.kind)).collect();

    let mut sim = Simulator::new(cfg, sc.pll_variant, &refs[0].1);
    let mut trace = Trace { records: Vec::with_capacity((total / decim + 2) as usize) };
    let mut next_event = 0;
    for n in 0..total {
        while next_event < schedule.len() && schedule[next_event].0 == n {
            sim.apply(&schedule[next_event].1, &refs);
            next_event += 1;
        }
        if n % decim == 0 {
            trace.records.push(sim.record());
        }
        if sim.step().is_err() {
            return Err(EngineError::Divergence { time: sim.time(), partial: Box::new(trace) });
        }
    }
    while next_event < schedule.len() {
        sim.apply(&schedule[next_event].1, &refs);
        next_event += 1;
    }
    trace.records.push(sim.record());

    let snaps: Vec<f64> = snaps.into_iter().map(|(_, d)| d).collect();
    let summary = summarize(sc, &sim, &trace, cfg.sim.warmup.min(sc.first_event().unwrap_or(0.0)), snaps);
    Ok(RunOutput { trace, summary, references: refs })
}

fn summarize(sc: &Scenario, sim: &Simulator, trace: &Trace, warm: f64, event_snaps: Vec<f64>) -> RunSummary {
    let last = *trace.last().expect("trace has a final record");
    let settle_from = sc.events.last().map(|e| e.time).unwrap_or(0.0);
    let settling = [
        (Channel::i_d, last.i_d_ref),
        (Channel::i_q, last.i_q_ref),
        (Channel::phi_deg, last.phi_ref_deg),
    ]
    .into_iter()
    .map(|(channel, target)| ChannelSettling {
        channel,
        target,
        result: settling_time(trace, channel, target, SUMMARY_BAND, settle_from),
    })
    .collect();
    let min_pe = trace
        .records
        .iter()
        .filter(|r| r.t >= warm && r.pe_metric.is_finite())
        .map(|r| r.pe_metric)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));
    RunSummary {
        scenario: sc.name.clone(),
        variant: sc.pll_variant,
        steps: sim.steps_taken(),
        final_time: sim.time(),
        settle_from,
        settling,
        final_current_error: ((last.i_d - last.i_d_ref).powi(2) + (last.i_q - last.i_q_ref).powi(2)).sqrt(),
        final_phi_error_deg: wrap_angle((last.phi_deg - last.phi_ref_deg).to_radians()).to_degrees().abs(),
        final_freq_error: (last.f_hat - last.f_true).abs(),
        final_vg_error: (last.vg_hat - last.vg_true).abs(),
        max_event_snap: event_snaps.iter().copied().fold(0.0, f64::max),
        event_snaps,
        min_pe_after_warmup: min_pe,
        diagnostics: *sim.diagnostics(),
        frozen_at_end: last.freeze > 0.5,
    }
}
