use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::thread;

use apll_core::config::SimConfig;
use apll_core::engine::check::{equilibrium_residual, fit_decay, lre_residuals};
use apll_core::engine::scenario::BUILTIN_NAMES;
use apll_core::engine::{builtin, run_scenario, Channel, EngineError, RunOutput, RunSummary, Scenario, Trace};
use apll_core::pll::PllVariant;

use crate::config_file::{load_config, parse_scenario};
use crate::error::CliError;
use crate::manifest::{content_hash, Manifest, ReferenceEntry, RunRecord, MANIFEST_FILE};
use crate::plot::{emit, find_figure};
use crate::trace_csv::{format_value, read_table, write_trace, write_trace_file};

#[derive(Debug, Clone)]
pub enum ScenarioSource {
    Builtin(String),
    File(PathBuf),
    /// Repeat the runs recorded in a manifest, with its configuration.
    Manifest(PathBuf),
}

pub fn describe_builtin(name: &str) -> &'static str {
    match name {
        "power-step" => "active power 300 W -> 600 W after the warm-up",
        "comparison" => "power step, then grid amplitude 310.2687 V -> 248.215 V 0.5 s later; adaptive and baseline PLL",
        "freq-step" => "grid frequency 50 Hz -> 52 Hz after the warm-up",
        "vg-step" => "grid amplitude 310.2687 V -> 248.215 V after the warm-up",
        _ => "",
    }
}

fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn resolve(config: Option<&Path>, source: &ScenarioSource) -> Result<(SimConfig, Vec<Scenario>), CliError> {
    match source {
        ScenarioSource::Builtin(name) => {
            let cfg = load_config(config)?;
            let scs = builtin(name, &cfg).ok_or_else(|| {
                CliError::Usage(format!("unknown scenario '{name}'; built-in scenarios: {}", BUILTIN_NAMES.join(", ")))
            })?;
            Ok((cfg, scs))
        }
        ScenarioSource::File(path) => Ok((load_config(config)?, vec![parse_scenario(path)?])),
        ScenarioSource::Manifest(path) => {
            if config.is_some() {
                return Err(CliError::Usage("a manifest carries its own configuration; drop --config".into()));
            }
            let m = Manifest::read(path)?;
            Ok((m.config, m.runs.into_iter().map(|r| r.scenario).collect()))
        }
    }
}

pub fn format_summary(s: &RunSummary) -> String {
    let variant = match s.variant {
        PllVariant::Adaptive => "adaptive",
        PllVariant::Baseline => "baseline",
    };
    let mut o = String::new();
    let _ = writeln!(o, "scenario: {} ({variant} PLL)", s.scenario);
    let _ = writeln!(o, "steps: {} (t_end = {:.6} s)", s.steps, s.final_time);
    let _ = writeln!(o, "settling into +-2 % of the final reference, from t = {} s:", s.settle_from);
    for c in &s.settling {
        let _ = writeln!(o, "  {:<8} target {:>12.6}: {}", c.channel.name(), c.target, c.result);
    }
    let _ = writeln!(o, "final |i - i_ref|: {:.3e} A", s.final_current_error);
    let _ = writeln!(o, "final |phi - phi_ref|: {:.3e} deg", s.final_phi_error_deg);
    let _ = writeln!(o, "final |f_hat - f|: {:.3e} Hz", s.final_freq_error);
    let _ = writeln!(o, "final |V_g_hat - V_g|: {:.3e} V", s.final_vg_error);
    match s.min_pe_after_warmup {
        Some(v) => {
            let _ = writeln!(o, "min excitation after warm-up: {v:.4e}");
        }
        None => {
            let _ = writeln!(o, "min excitation after warm-up: n/a (window never filled)");
        }
    }
    let d = &s.diagnostics;
    let _ = writeln!(o, "excitation warnings: {}", d.pe_warnings);
    let _ = writeln!(o, "gain freeze events: {} (frozen at end: {})", d.freeze_events, if s.frozen_at_end { "yes" } else { "no" });
    let _ = writeln!(o, "max Phi drift before projection: {:.3e}", d.max_phi_drift);
    let _ = writeln!(o, "modulation warnings: {}", d.modulation_warnings);
    let _ = writeln!(o, "max event snap: {:.3e} s", s.max_event_snap);
    o
}

fn run_all(cfg: &SimConfig, scenarios: &[Scenario]) -> Vec<Result<RunOutput, EngineError>> {
    // independent runs share nothing mutable
    thread::scope(|scope| {
        let handles: Vec<_> = scenarios.iter().map(|sc| scope.spawn(move || run_scenario(cfg, sc))).collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
    })
}

/// Runs a scenario (or a pair) and writes `<name>.csv`, `<name>.summary.txt`
/// and `manifest.toml` into `out`.
pub fn cmd_run(config: Option<&Path>, source: &ScenarioSource, out: &Path) -> Result<Vec<RunSummary>, CliError> {
    let (cfg, scenarios) = resolve(config, source)?;
    cfg.validate()?;
    for sc in &scenarios {
        sc.validate().map_err(CliError::Usage)?;
    }
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let results = run_all(&cfg, &scenarios);

    let mut manifest = Manifest::new(cfg);
    let mut summaries = Vec::new();
    let mut first_err = None;
    for (sc, res) in scenarios.iter().zip(results) {
        let stem = file_stem(&sc.name);
        match res {
            Ok(run) => {
                let mut bytes = Vec::new();
                write_trace(&mut bytes, &run.trace).expect("in-memory write");
                let trace_path = out.join(format!("{stem}.csv"));
                fs::write(&trace_path, &bytes).map_err(|e| CliError::io(&trace_path, e))?;
                let text = format_summary(&run.summary);
                let sum_path = out.join(format!("{stem}.summary.txt"));
                fs::write(&sum_path, &text).map_err(|e| CliError::io(&sum_path, e))?;
                crate::say(&text);
                manifest.runs.push(RunRecord {
                    trace: format!("{stem}.csv"),
                    trace_hash: content_hash(&bytes),
                    event_snaps: run.summary.event_snaps.clone(),
                    scenario: sc.clone(),
                    references: run.references.iter().map(|(p, r)| ReferenceEntry { power: *p, references: *r }).collect(),
                });
                summaries.push(run.summary);
            }
            Err(EngineError::Divergence { time, partial }) => {
                let path = out.join(format!("{stem}.partial.csv"));
                write_trace_file(&path, &partial)?;
                first_err.get_or_insert(CliError::Divergence { time, partial: path });
            }
            Err(e) => {
                first_err.get_or_insert(CliError::from_engine(e));
            }
        }
    }
    if let Some(e) = first_err {
        return Err(e);
    }
    let path = out.join(MANIFEST_FILE);
    fs::write(&path, manifest.to_toml()).map_err(|e| CliError::io(&path, e))?;
    Ok(summaries)
}

/// Emits the plot data of `figure` from trace files; returns the files written.
pub fn cmd_plotdata(traces: &[PathBuf], figure: &str, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let fig = find_figure(figure)?;
    let mut tables = Vec::new();
    for p in traces {
        let label = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        tables.push((file_stem(&label), read_table(p)?));
    }
    emit(fig, &tables, out, traces)
}

/// Earliest trace time from which `values` never increases again.
fn non_increasing_from(trace: &Trace, c: Channel) -> f64 {
    let s = trace.series(c);
    let mut k = s.len().saturating_sub(1);
    while k > 0 && s[k].1 <= s[k - 1].1 {
        k -= 1;
    }
    s.get(k).map(|p| p.0).unwrap_or(0.0)
}

/// Runs the nominal operating point and reports excitation, gain and freeze
/// history, the regression-residual decay and the steady-state residuals.
pub fn cmd_check(config: Option<&Path>, out: Option<&Path>) -> Result<String, CliError> {
    let cfg = load_config(config)?;
    let sc = Scenario {
        name: "nominal".into(),
        duration: cfg.sim.duration,
        initial_power: cfg.reference.p_ref,
        pll_variant: cfg.pll.variant,
        events: vec![],
    };
    let run = match run_scenario(&cfg, &sc) {
        Ok(r) => r,
        Err(EngineError::Divergence { time, .. }) => {
            return Err(CliError::Divergence { time, partial: PathBuf::new() });
        }
        Err(e) => return Err(CliError::from_engine(e)),
    };
    let trace = &run.trace;
    let mut o = String::new();
    let _ = writeln!(o, "nominal run: P_ref = {} W, {} s at dt = {} s", cfg.reference.p_ref, cfg.sim.duration, cfg.sim.dt);

    let _ = writeln!(o, "\nexcitation (min eigenvalue over the trailing {} s):", cfg.sim.pe_window);
    let every = ((0.1 * cfg.sim.output_rate).round() as usize).max(1);
    for r in trace.records.iter().step_by(every) {
        if r.pe_metric.is_finite() {
            let _ = writeln!(o, "  t = {:>6.3} s  {:.4e}", r.t, r.pe_metric);
        }
    }
    match run.summary.min_pe_after_warmup {
        Some(v) => {
            let verdict = if v > cfg.sim.pe_threshold { "above" } else { "BELOW" };
            let _ = writeln!(o, "  minimum after warm-up: {v:.4e} ({verdict} threshold {:.1e})", cfg.sim.pe_threshold);
        }
        None => {
            let _ = writeln!(o, "  window never filled");
        }
    }

    let norms = trace.series(Channel::f_norm);
    let (lo, hi) = norms.iter().fold((f64::MAX, f64::MIN), |(a, b), (_, v)| (a.min(*v), b.max(*v)));
    let _ = writeln!(o, "\ngain norm: start {:.4}, end {:.4}, range [{:.4}, {:.4}], cap M = {}", norms[0].1, norms.last().unwrap().1, lo, hi, cfg.estimator.m_cap);
    let _ = writeln!(o, "  non-increasing from t = {:.3} s", non_increasing_from(trace, Channel::f_norm));
    let mut events = Vec::new();
    let mut prev = 0.0;
    for r in &trace.records {
        if r.freeze != prev {
            events.push((r.t, r.freeze > 0.5));
            prev = r.freeze;
        }
    }
    if events.is_empty() {
        let _ = writeln!(o, "  freeze events: none");
    }
    for (k, (t, on)) in events.iter().enumerate() {
        let until = events.get(k + 1).map(|e| format!("until t = {:.3} s", e.0)).unwrap_or_else(|| "until the end".into());
        if *on {
            let _ = writeln!(o, "  frozen at t = {t:.3} s, {until}");
        }
    }

    let horizon = 0.02;
    let pts = lre_residuals(&cfg, horizon).map_err(CliError::from_engine)?;
    let _ = writeln!(o, "\nregression residual |Y - Omega theta*| over {horizon} s from the operating point:");
    match fit_decay(&pts) {
        Some(f) => {
            let _ = writeln!(
                o,
                "  initial {:.4e}, fitted decay rate {:.2} 1/s (lambda = {}), ratio at end {:.3e}",
                f.initial, f.rate, cfg.observer.lambda, f.final_ratio
            );
        }
        None => {
            let _ = writeln!(o, "  residual identically zero");
        }
    }

    let _ = writeln!(o, "\nsteady-state residuals of the references:");
    for p in [cfg.reference.p_ref / 2.0, cfg.reference.p_ref] {
        let e = equilibrium_residual(&cfg, p)?;
        let _ = writeln!(o, "  P = {:>8.2} W: |dx/dt| = {:.3e}, power audit {:.3e}", e.p_ref, e.derivative_norm, e.power_error);
    }

    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let path = dir.join("check.txt");
        fs::write(&path, &o).map_err(|e| CliError::io(&path, e))?;
        let mut pe = String::from("# t[s] pe_metric[1]\n");
        for r in trace.records.iter().filter(|r| r.pe_metric.is_finite()) {
            let _ = writeln!(pe, "{} {}", format_value(r.t), format_value(r.pe_metric));
        }
        let path = dir.join("check_pe.dat");
        fs::write(&path, pe).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(o)
}
