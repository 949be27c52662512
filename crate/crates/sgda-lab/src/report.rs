//! File outputs: atomic replacement, run traces, sweep rows, bound tables.
//!
//! Every writer goes through [`atomic_write`] (write to a temp file in the
//! target directory, then rename), so a crashed run never leaves a partial
//! file behind. Floats are formatted with Rust's shortest-round-trip
//! `Display`, which makes reruns byte-identical.

use crate::bounds::BoundReport;
use crate::engine::Trajectory;
use crate::error::{Error, Result};
use crate::linalg::l2_norm;
use crate::stability::DeltaRecord;
use serde::Serialize;
use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

/// Writes bytes via temp-then-rename in the destination directory.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Pretty JSON plus trailing newline, written atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

fn fmt_opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Trajectory trace with the coupled-run sensitivity merged in: one `step`
/// row per (t, k) plus one `comm` row per round carrying the post-gossip
/// sensitivity.
pub fn write_trace_csv(path: &Path, traj: &Trajectory, deltas: &[DeltaRecord]) -> Result<()> {
    let mut by_step: HashMap<(usize, usize), f64> = HashMap::new();
    let mut by_comm: HashMap<usize, f64> = HashMap::new();
    for d in deltas {
        match d.k {
            Some(k) => {
                by_step.insert((d.t, k), d.delta);
            }
            None => {
                by_comm.insert(d.t, d.delta);
            }
        }
    }
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["phase", "t", "k", "rate", "consensus", "avg_x_norm", "avg_y_norm", "delta"])?;
    for r in &traj.records {
        wtr.write_record([
            "step".to_string(),
            r.t.to_string(),
            r.k.to_string(),
            r.rate.to_string(),
            r.consensus.to_string(),
            l2_norm(&r.avg_x).to_string(),
            l2_norm(&r.avg_y).to_string(),
            fmt_opt(by_step.get(&(r.t, r.k)).copied()),
        ])?;
    }
    let post: HashMap<usize, f64> = traj.post_comm_consensus.iter().copied().collect();
    for t in 1..=traj.rounds {
        let Some(delta) = by_comm.get(&t) else { continue };
        wtr.write_record([
            "comm".to_string(),
            t.to_string(),
            String::new(),
            String::new(),
            fmt_opt(post.get(&t).copied()),
            String::new(),
            String::new(),
            delta.to_string(),
        ])?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::Config(format!("csv buffer: {e}")))?;
    atomic_write(path, &bytes)
}

/// One sweep-cell measurement row; the stable CSV schema of `sweep` outputs.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct OutputRow {
    /// Sweep axis name.
    pub axis: String,
    /// Axis level, numeric or topology name.
    pub value: String,
    /// Mixing constant of the cell's topology.
    pub lambda: f64,
    pub measure: String,
    /// Seeds that contributed (successful repeats).
    pub seeds: usize,
    pub mean: f64,
    pub std: f64,
    /// Matching theoretical bound, when one applies to the cell.
    pub bound: Option<f64>,
    /// Whether every premise of that bound held.
    pub bound_valid: Option<bool>,
    /// Diverged or failed repeats.
    pub failures: usize,
    /// Failure detail for all-failed cells; empty otherwise.
    pub note: String,
}

impl OutputRow {
    /// Numeric fields must be finite and the spread nonnegative.
    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() || !self.mean.is_finite() || !self.std.is_finite() {
            return Err(Error::invalid("row", format!("non-finite numeric field in {self:?}")));
        }
        if self.std < 0.0 {
            return Err(Error::invalid("row", "std must be nonnegative"));
        }
        if let Some(b) = self.bound {
            if !b.is_finite() {
                return Err(Error::invalid("row", "bound must be finite when present"));
            }
        }
        Ok(())
    }
}

/// Validates and writes sweep rows with the fixed header.
pub fn write_rows_csv(path: &Path, rows: &[OutputRow]) -> Result<()> {
    for row in rows {
        row.validate()?;
    }
    let mut wtr = csv::Writer::from_writer(Vec::new());
    for row in rows {
        wtr.serialize(row)?;
    }
    if rows.is_empty() {
        wtr.write_record([
            "axis", "value", "lambda", "measure", "seeds", "mean", "std", "bound",
            "bound_valid", "failures", "note",
        ])?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::Config(format!("csv buffer: {e}")))?;
    atomic_write(path, &bytes)
}

/// Reads rows back; plots regenerate from this, never from live runs.
pub fn read_rows_csv(path: &Path) -> Result<Vec<OutputRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for record in rdr.deserialize() {
        let row: OutputRow = record?;
        rows.push(row);
    }
    Ok(rows)
}

/// Bound table as CSV: name, value, premise flags, error note.
pub fn write_bound_csv(path: &Path, report: &BoundReport) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["name", "value", "valid", "flags", "note"])?;
    for entry in &report.entries {
        let flags = entry
            .flags
            .iter()
            .map(|(name, ok)| format!("{name}={ok}"))
            .collect::<Vec<_>>()
            .join("; ");
        let valid = entry.value.is_some() && entry.flags.iter().all(|(_, ok)| *ok);
        wtr.write_record([
            entry.name.to_string(),
            fmt_opt(entry.value),
            valid.to_string(),
            flags,
            entry.note.clone().unwrap_or_default(),
        ])?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::Config(format!("csv buffer: {e}")))?;
    atomic_write(path, &bytes)
}

/// Human-readable bound table for stdout.
pub fn format_bound_table(report: &BoundReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<38} {:>14}  {}\n", "bound", "value", "premises"));
    for entry in &report.entries {
        let value = match entry.value {
            Some(v) => format!("{v:.6e}"),
            None => "-".to_string(),
        };
        let detail = if let Some(note) = &entry.note {
            format!("unavailable: {note}")
        } else if entry.flags.is_empty() {
            "ok".to_string()
        } else {
            entry
                .flags
                .iter()
                .map(|(name, ok)| format!("{}[{name}]", if *ok { "ok" } else { "VIOLATED" }))
                .collect::<Vec<_>>()
                .join(" ")
        };
        out.push_str(&format!("{:<38} {:>14}  {detail}\n", entry.name, value));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn sample_row() -> OutputRow {
        OutputRow {
            axis: "learning_rate".into(),
            value: "0.01".into(),
            lambda: 0.5,
            measure: "argument_stability".into(),
            seeds: 20,
            mean: 0.03,
            std: 0.004,
            bound: Some(0.9),
            bound_valid: Some(true),
            failures: 0,
            note: String::new(),
        }
    }

    #[test]
    fn rows_round_trip_through_csv() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        let mut none_bound = sample_row();
        none_bound.bound = None;
        none_bound.bound_valid = None;
        let rows = vec![sample_row(), none_bound];
        write_rows_csv(&path, &rows).unwrap();
        let back = read_rows_csv(&path).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn non_finite_rows_are_rejected() {
        let mut row = sample_row();
        row.mean = f64::NAN;
        assert!(row.validate().is_err());
        let mut row = sample_row();
        row.std = -1.0;
        assert!(row.validate().is_err());
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("a.txt");
        atomic_write(&path, b"first").unwrap();
        atomic_write(&path, b"second").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"second");
    }
}
