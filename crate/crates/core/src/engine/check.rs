//! Diagnostics beyond a plain run: decay of the regression residual and the
//! steady-state residual of the computed references.

use crate::config::{SimConfig, Start};
use crate::ctrl::{compute_references, CtrlError};
use crate::frames::{j_mul, DqVec};
use crate::gpebo::{parameters_from_state, regressor};
use crate::plant::{deriv_dq, PlantStateDq};
use crate::pll::PllVariant;

use super::{EngineError, Simulator};

/// Exponential fit `r(t) ~ r0 e^{-rate t}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub initial: f64,
    /// `r(end) / r(0)`.
    pub final_ratio: f64,
    pub horizon: f64,
}

/// `|Y - Omega theta*|` along a run started at the operating point, with
/// `theta*` built from the initial plant state. The filters start at zero,
/// so the residual starts at `lambda |y12(0)|`.
pub fn lre_residuals(cfg: &SimConfig, horizon: f64) -> Result<Vec<(f64, f64)>, EngineError> {
    let mut cfg = *cfg;
    cfg.sim.start = Start::Equilibrium;
    cfg.validate()?;
    let refs = compute_references(
        cfg.reference.p_ref,
        cfg.reference.v_ref,
        cfg.grid.v_g,
        cfg.grid.omega(),
        &cfg.plant,
        cfg.reference.closure(),
    )?;
    let mut sim = Simulator::new(&cfg, PllVariant::Adaptive, &refs);
    let x0 = sim.grid().v_g_dq(sim.state().pll.theta) / cfg.plant.l_g;
    let th = parameters_from_state(&sim.state().observer, &sim.state().plant_dq().i_g, &x0, cfg.grid.omega());
    let residual = |s: &Simulator| {
        let st = s.state();
        regressor(&st.observer, &st.plant_dq().i_g, &cfg.observer).residual(&th).norm()
    };
    let mut out = vec![(0.0, residual(&sim))];
    let steps = (horizon / cfg.sim.dt).round() as u64;
    for _ in 0..steps {
        if sim.step().is_err() {
            return Err(EngineError::Divergence { time: sim.time(), partial: Box::default() });
        }
        out.push((sim.time(), residual(&sim)));
    }
    Ok(out)
}

/// Least-squares fit of `ln r` against `t`; `None` with fewer than two
/// positive samples.
pub fn fit_decay(points: &[(f64, f64)]) -> Option<DecayFit> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(_, r)| *r > 0.0).map(|(t, r)| (*t, r.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = pts.iter().map(|(t, l)| (t - mt) * (l - ml)).sum();
    let den: f64 = pts.iter().map(|(t, _)| (t - mt).powi(2)).sum();
    if den == 0.0 {
        return None;
    }
    let (first, last) = (points.first()?, points.last()?);
    Some(DecayFit {
        rate: -num / den,
        initial: first.1,
        final_ratio: last.1 / first.1,
        horizon: last.0 - first.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumResidual {
    pub p_ref: f64,
    /// Norm of the dq circuit derivative at the references.
    pub derivative_norm: f64,
    /// `|(3/2) v^T i_g - P_ref| / P_ref` (absolute when `P_ref = 0`).
    pub power_error: f64,
}

/// Substitutes the references for `p_ref` into the dq circuit at nominal frequency.
pub fn equilibrium_residual(cfg: &SimConfig, p_ref: f64) -> Result<EquilibriumResidual, CtrlError> {
    let p = &cfg.plant;
    let w = cfg.grid.omega();
    let r = compute_references(p_ref, cfg.reference.v_ref, cfg.grid.v_g, w, p, cfg.reference.closure())?;
    let x = DqVec::new(r.phi_ref.cos(), r.phi_ref.sin()) * (cfg.grid.v_g / p.l_g);
    // converter voltage that holds the converter current still
    let u23 = r.v_dq_ref + r.i_dq_ref * p.r - j_mul(&r.i_dq_ref) * (w * p.l);
    let s = PlantStateDq { i_g: r.i_g_dq_ref, v: r.v_dq_ref, i: r.i_dq_ref };
    let audit = 1.5 * r.v_dq_ref.dot(&r.i_g_dq_ref) - p_ref;
    Ok(EquilibriumResidual {
        p_ref,
        derivative_norm: deriv_dq(&s, w, &u23, &x, p).norm(),
        power_error: if p_ref > 0.0 { audit.abs() / p_ref } else { audit.abs() },
    })
}
