//! Plot data: one two-column `t value` file per curve, plus a legend.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;
use crate::trace_csv::{format_value, Table};

pub struct Figure {
    pub name: &'static str,
    pub title: &'static str,
    pub channels: &'static [&'static str],
    /// Number of traces the figure overlays.
    pub traces: usize,
}

pub const FIGURES: &[Figure] = &[
    Figure { name: "p-step", title: "dq currents and angle, active-power step", channels: &["i_d", "i_q", "phi_deg"], traces: 1 },
    Figure { name: "f-step", title: "dq currents and angle, grid-frequency step", channels: &["i_d", "i_q", "phi_deg"], traces: 1 },
    Figure { name: "f-estimate", title: "estimate of f", channels: &["f_hat"], traces: 1 },
    Figure { name: "vg-step", title: "dq currents and angle, grid-voltage step", channels: &["i_d", "i_q", "phi_deg"], traces: 1 },
    Figure { name: "vg-estimate", title: "estimate of V_g", channels: &["vg_hat"], traces: 1 },
    Figure { name: "comparison", title: "angle, adaptive against baseline PLL", channels: &["phi_deg", "i_d", "i_q"], traces: 2 },
    Figure { name: "pe", title: "windowed excitation of the regressor", channels: &["pe_metric"], traces: 1 },
    Figure { name: "gain", title: "estimator gain norm and freeze flag", channels: &["f_norm", "freeze"], traces: 1 },
];

pub fn figure_names() -> Vec<&'static str> {
    FIGURES.iter().map(|f| f.name).collect()
}

pub fn find_figure(name: &str) -> Result<&'static Figure, CliError> {
    FIGURES
        .iter()
        .find(|f| f.name == name)
        .ok_or_else(|| CliError::Usage(format!("unknown figure '{name}'; valid figures: {}", figure_names().join(", "))))
}

fn unit(channel: &str) -> &'static str {
    match channel {
        c if c.starts_with("i_") => "A",
        c if c.starts_with("v") => "V",
        c if c.ends_with("_deg") => "deg",
        "phi" | "e_phi" => "rad",
        "f_hat" | "f_true" => "Hz",
        "u1" => "rad/s",
        _ => "1",
    }
}

/// Writes the curves of `fig` for the labelled tables into `out`; returns
/// the files written, legend last.
pub fn emit(fig: &Figure, tables: &[(String, Table)], out: &Path, sources: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    if tables.len() != fig.traces {
        return Err(CliError::Usage(format!("figure '{}' needs {} trace file(s), got {}", fig.name, fig.traces, tables.len())));
    }
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut written = Vec::new();
    let mut legend = format!("# figure {}: {}\n# file\tlabel\tunit\n", fig.name, fig.title);
    for ((label, table), src) in tables.iter().zip(sources) {
        let t = table
            .column("t")
            .ok_or_else(|| CliError::BadTrace { path: src.clone(), message: "missing column: t".into() })?;
        for ch in fig.channels {
            let v = table
                .column(ch)
                .ok_or_else(|| CliError::BadTrace { path: src.clone(), message: format!("missing column: {ch}") })?;
            let file = if fig.traces == 1 { format!("{}_{ch}.dat", fig.name) } else { format!("{}_{label}_{ch}.dat", fig.name) };
            let mut body = format!("# t[s] {ch}[{}]\n", unit(ch));
            for (a, b) in t.iter().zip(&v) {
                let _ = writeln!(body, "{} {}", format_value(*a), format_value(*b));
            }
            let path = out.join(&file);
            fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
            let shown = if fig.traces == 1 { ch.to_string() } else { format!("{ch} ({label})") };
            let _ = writeln!(legend, "{file}\t{shown}\t{}", unit(ch));
            written.push(path);
        }
    }
    let path = out.join(format!("{}.legend", fig.name));
    fs::write(&path, legend).map_err(|e| CliError::io(&path, e))?;
    written.push(path);
    Ok(written)
}
