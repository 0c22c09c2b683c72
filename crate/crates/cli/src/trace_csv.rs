//! CSV trace files: a format comment line, a header row of channel names,
//! then one row per sample with 17 significant digits, so that reading a
//! file back reproduces the trace bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use apll_core::engine::trace::TRACE_FORMAT;
use apll_core::engine::{Channel, Trace, TraceRecord};

use crate::error::CliError;

pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

pub fn write_trace<W: Write>(w: W, trace: &Trace) -> Result<(), csv::Error> {
    let mut w = BufWriter::new(w);
    writeln!(w, "# {TRACE_FORMAT}")?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(Channel::ALL.iter().map(|c| c.name()))?;
    for r in &trace.records {
        out.write_record(r.values().into_iter().map(format_value))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_trace_file(path: &Path, trace: &Trace) -> Result<(), CliError> {
    let f = File::create(path).map_err(|e| CliError::io(path, e))?;
    write_trace(f, trace).map_err(|e| CliError::io(path, std::io::Error::other(e)))
}

/// Column-oriented view of a trace file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

pub fn read_table(path: &Path) -> Result<Table, CliError> {
    let bad = |message: String| CliError::BadTrace { path: path.to_path_buf(), message };
    let f = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::MissingFile { path: path.to_path_buf() },
        _ => CliError::io(path, e),
    })?;
    let mut reader = BufReader::new(f);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| CliError::io(path, e))?;
    if first.trim_end() != format!("# {TRACE_FORMAT}") {
        return Err(bad(format!("expected '# {TRACE_FORMAT}' on the first line")));
    }
    let mut csv = csv::Reader::from_reader(reader);
    let columns: Vec<String> = csv.headers().map_err(|e| bad(e.to_string()))?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (k, rec) in csv.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| bad(format!("data row {}: {e}", k + 1)))?;
        rows.push(row);
    }
    Ok(Table { columns, rows })
}

pub fn read_trace(path: &Path) -> Result<Trace, CliError> {
    let table = read_table(path)?;
    let missing: Vec<&str> = Channel::ALL.iter().map(|c| c.name()).filter(|n| !table.columns.iter().any(|c| c == n)).collect();
    if !missing.is_empty() {
        return Err(CliError::BadTrace { path: path.to_path_buf(), message: format!("missing columns: {}", missing.join(", ")) });
    }
    let idx: Vec<usize> = Channel::ALL.iter().map(|c| table.columns.iter().position(|n| n == c.name()).unwrap()).collect();
    let records = table
        .rows
        .iter()
        .map(|row| {
            let v: Vec<f64> = idx.iter().map(|&k| row[k]).collect();
            TraceRecord::from_values(&v).expect("one value per channel")
        })
        .collect();
    Ok(Trace { records })
}
