//! Lane-change event files: `v_lead_mps,range_m,ttc_s`, one event per row.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use acceval_core::scenario::segment_of;
use acceval_core::LaneChangeEvent;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

pub const HEADER: [&str; 3] = ["v_lead_mps", "range_m", "ttc_s"];

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    v_lead_mps: f64,
    range_m: f64,
    ttc_s: f64,
}

pub fn write_events<W: Write>(out: W, events: &[LaneChangeEvent]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    for e in events {
        w.serialize(Row {
            v_lead_mps: e.v_lead_mps,
            range_m: e.range_m,
            ttc_s: e.ttc_s,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_events(path: &Path, events: &[LaneChangeEvent]) -> Result<()> {
    let file = File::create(path).map_err(|e| AppError::io(path, e))?;
    write_events(BufWriter::new(file), events).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> AppError {
    let line = e.position().map(|p| p.line());
    match (e.kind(), line) {
        (csv::ErrorKind::Io(_), _) => match e.into_kind() {
            csv::ErrorKind::Io(io) => AppError::io(path, io),
            _ => unreachable!(),
        },
        (_, Some(line)) => AppError::Row {
            path: path.to_path_buf(),
            line,
            message: e.to_string(),
        },
        (_, None) => AppError::format(path, e),
    }
}

fn row_error(path: &Path, line: u64, message: String) -> AppError {
    AppError::Row {
        path: path.to_path_buf(),
        line,
        message,
    }
}

/// Parses an event file. `range_m` must be positive and finite, `ttc_s`
/// positive (`inf` for an opening gap) and `v_lead_mps` inside a speed
/// segment.
pub fn read_events<R: Read>(path: &Path, input: R) -> Result<Vec<LaneChangeEvent>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().ne(HEADER) {
        return Err(row_error(
            path,
            1,
            format!("expected header \"{}\"", HEADER.join(",")),
        ));
    }
    let mut events = Vec::new();
    let mut rec = csv::StringRecord::new();
    while rdr.read_record(&mut rec).map_err(|e| csv_error(path, e))? {
        let line = rec.position().map_or(0, |p| p.line());
        let row: Row = rec
            .deserialize(Some(&header))
            .map_err(|e| row_error(path, line, e.to_string()))?;
        if !(row.range_m > 0.0 && row.range_m.is_finite()) {
            return Err(row_error(
                path,
                line,
                format!("range_m must be positive and finite, got {}", row.range_m),
            ));
        }
        if !(row.ttc_s > 0.0) {
            return Err(row_error(
                path,
                line,
                format!("ttc_s must be positive, got {}", row.ttc_s),
            ));
        }
        if segment_of(row.v_lead_mps).is_none() {
            return Err(row_error(
                path,
                line,
                format!(
                    "v_lead_mps {} is outside every speed segment",
                    row.v_lead_mps
                ),
            ));
        }
        events.push(LaneChangeEvent {
            v_lead_mps: row.v_lead_mps,
            range_m: row.range_m,
            ttc_s: row.ttc_s,
        });
    }
    Ok(events)
}

pub fn load_events(path: &Path) -> Result<Vec<LaneChangeEvent>> {
    let file = File::open(path).map_err(|e| AppError::io(path, e))?;
    read_events(path, file)
}
