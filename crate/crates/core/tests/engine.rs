//! Whole-run properties of the scenario engine.

use apll_core::config::SimConfig;
use apll_core::engine::scenario::{SAGGED_AMPLITUDE, STEPPED_FREQUENCY};
use apll_core::engine::{builtin, run_scenario, Channel, EventKind, RunOutput, Settling, BUILTIN_NAMES};
use apll_core::pll::PllVariant;

fn short() -> SimConfig {
    let mut cfg = SimConfig::default();
    cfg.sim.warmup = 0.5;
    cfg.sim.duration = 1.2;
    cfg
}

fn run(cfg: &SimConfig, name: &str) -> Vec<RunOutput> {
    builtin(name, cfg).unwrap().iter().map(|sc| run_scenario(cfg, sc).unwrap()).collect()
}

#[test]
fn builtin_scenarios_carry_the_stated_events() {
    let cfg = SimConfig::default();
    let kinds = |name: &str| -> Vec<(f64, EventKind)> {
        builtin(name, &cfg).unwrap()[0].events.iter().map(|e| (e.time, e.kind)).collect()
    };
    assert_eq!(kinds("power-step"), vec![(1.0, EventKind::SetPower { p: 600.0 })]);
    assert_eq!(builtin("power-step", &cfg).unwrap()[0].initial_power, 300.0);
    assert_eq!(kinds("freq-step"), vec![(1.0, EventKind::GridFrequency { hz: STEPPED_FREQUENCY })]);
    assert_eq!(kinds("vg-step"), vec![(1.0, EventKind::GridAmplitude { v_g: SAGGED_AMPLITUDE })]);
    let pair = builtin("comparison", &cfg).unwrap();
    assert_eq!(pair.len(), 2);
    assert_eq!(pair[0].pll_variant, PllVariant::Adaptive);
    assert_eq!(pair[1].pll_variant, PllVariant::Baseline);
    assert_eq!(pair[0].events, pair[1].events);
    assert_eq!(
        kinds("comparison"),
        vec![(1.0, EventKind::SetPower { p: 600.0 }), (1.5, EventKind::GridAmplitude { v_g: SAGGED_AMPLITUDE })]
    );
    for name in BUILTIN_NAMES {
        assert!(builtin(name, &cfg).is_some());
    }
    assert!(builtin("no-such-scenario", &cfg).is_none());
}

#[test]
fn identical_inputs_give_bit_identical_traces() {
    let cfg = short();
    for name in ["comparison", "freq-step"] {
        let a = run(&cfg, name);
        let b = run(&cfg, name);
        for (x, y) in a.iter().zip(&b) {
            let bits = |o: &RunOutput| -> Vec<u64> {
                o.trace.records.iter().flat_map(|r| r.values()).map(f64::to_bits).collect()
            };
            assert_eq!(bits(x), bits(y));
        }
    }
}

#[test]
fn halving_the_step_barely_moves_the_summary() {
    let cfg = short();
    let mut fine = cfg;
    fine.sim.dt = cfg.sim.dt / 2.0;
    for name in ["power-step", "vg-step"] {
        let a = &run(&cfg, name)[0];
        let b = &run(&fine, name)[0];
        for (sa, sb) in a.summary.settling.iter().zip(&b.summary.settling) {
            match (sa.result, sb.result) {
                (Settling::Settled(x), Settling::Settled(y)) => {
                    // trace resolution is 1 ms; allow 1 % or one sample
                    assert!((x - y).abs() <= (0.01 * x).max(1e-3) + 1e-12, "{name} {}: {x} vs {y}", sa.channel);
                }
                (x, y) => assert_eq!(x, y),
            }
        }
        let (la, lb) = (a.trace.last().unwrap(), b.trace.last().unwrap());
        for c in [Channel::i_d, Channel::i_q, Channel::phi_deg, Channel::f_hat, Channel::vg_hat] {
            let (x, y) = (la.get(c), lb.get(c));
            assert!((x - y).abs() <= 0.01 * x.abs(), "{name} {c}: {x} vs {y}");
        }
        // transient shape, not just the end point
        for c in [Channel::i_d, Channel::phi_deg, Channel::vg_hat] {
            let scale = a.trace.series(c).iter().map(|(_, v)| v.abs()).fold(0.0, f64::max);
            for (ra, rb) in a.trace.records.iter().zip(&b.trace.records) {
                assert!((ra.get(c) - rb.get(c)).abs() < 0.01 * scale, "{name} {c} at t = {}", ra.t);
            }
        }
    }
}

#[test]
fn off_grid_events_snap_to_the_nearest_step() {
    let cfg = short();
    let mut sc = builtin("vg-step", &cfg).unwrap().remove(0);
    sc.events[0].time = 0.5000062;
    let out = run_scenario(&cfg, &sc).unwrap();
    let snap = out.summary.max_event_snap;
    assert!(snap > 0.0 && snap <= cfg.sim.dt / 2.0 + 1e-15, "{snap}");
    assert!((snap - 3.8e-6).abs() < 1e-12, "{snap}");
    // the step is visible from the first trace sample after it
    assert_eq!(out.trace.value_at(Channel::vg_true, 0.5), Some(cfg.grid.v_g));
    assert_eq!(out.trace.value_at(Channel::vg_true, 0.501), Some(SAGGED_AMPLITUDE));
}

#[test]
fn reconstructed_grid_amplitude_is_flat_once_locked() {
    let cfg = short();
    let out = &run(&cfg, "power-step")[0];
    let seg: Vec<f64> = out.trace.records.iter().filter(|r| r.t > 0.3 && r.t < 0.5).map(|r| r.vg_hat).collect();
    let (lo, hi) = seg.iter().fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(*v), b.max(*v)));
    assert!(hi - lo < 1e-3, "{lo}..{hi}");
    assert!((hi - cfg.grid.v_g).abs() < 1e-3);
}

#[test]
fn excitation_is_positive_after_warmup() {
    let cfg = short();
    let out = &run(&cfg, "power-step")[0];
    let pe = out.summary.min_pe_after_warmup.unwrap();
    assert!(pe > cfg.sim.pe_threshold, "{pe}");
    assert_eq!(out.summary.diagnostics.pe_warnings, 0);
}

#[test]
fn without_forgetting_the_gain_only_shrinks() {
    let mut cfg = short();
    cfg.estimator.beta = 0.0;
    let out = &run(&cfg, "power-step")[0];
    let norms: Vec<(f64, f64)> = out.trace.series(Channel::f_norm);
    let after: Vec<f64> = norms.iter().filter(|(t, _)| *t > 0.05).map(|(_, v)| *v).collect();
    assert!(after.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)), "F norm increased");
    assert!(after.last().unwrap() < &norms[0].1);
}

#[test]
fn tiny_cap_freezes_the_gain_for_good() {
    let mut cfg = short();
    cfg.estimator.m_cap = 1e-6;
    let out = &run(&cfg, "power-step")[0];
    assert_eq!(out.summary.diagnostics.freeze_events, 1);
    assert!(out.summary.frozen_at_end);
    assert!(out.trace.records.iter().all(|r| r.freeze == 1.0));
    let f0 = out.trace.records[0].f_norm;
    assert!(out.trace.records.iter().all(|r| r.f_norm == f0));
}

#[test]
fn default_run_never_freezes() {
    let cfg = short();
    for out in run(&cfg, "comparison") {
        assert_eq!(out.summary.diagnostics.freeze_events, 0);
        assert!(out.trace.records.iter().all(|r| r.f_norm <= cfg.estimator.m_cap));
    }
}
