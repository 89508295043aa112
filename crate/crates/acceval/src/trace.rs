//! Trace outputs: CE iterations as JSON lines and per-batch convergence CSV.

use std::io::Write;

use acceval_core::cross_entropy::{CeRun, CeWarning};
use acceval_core::montecarlo::TraceRow;
use serde::{Deserialize, Serialize};

use crate::json::{ext_f64, ext_f64_vec, Meta};

pub const CONVERGENCE_HEADER: &str = "n,estimate,ci_lo,ci_hi,rel_half_width";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableRecord {
    pub name: String,
    #[serde(with = "ext_f64_vec")]
    pub truncations: Vec<f64>,
    pub shift: f64,
    pub hits_per_piece: Vec<usize>,
    pub sampled_theta: Vec<f64>,
    pub sampled_weights: Vec<f64>,
    pub theta: Vec<f64>,
    pub proposal_weights: Vec<f64>,
    pub fallback: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub segment: usize,
    pub iteration: usize,
    pub level: f64,
    /// Relaxed range threshold in metres.
    pub t_range_m: f64,
    /// Relaxed TTC threshold in seconds.
    pub t_ttc_s: f64,
    pub sample_size: usize,
    pub hits: usize,
    pub level_probability: f64,
    #[serde(with = "ext_f64")]
    pub max_change: f64,
    pub warnings: Vec<String>,
    pub variables: Vec<VariableRecord>,
}

/// One line of a CE trace file; the first line is the header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceLine {
    Header { meta: Meta, family: String },
    Iteration(IterationRecord),
}

fn warning_text(w: &CeWarning) -> String {
    match w {
        CeWarning::SampleSizeIncreased { to } => format!("sample size increased to {to}"),
        CeWarning::TruncationShift { variable, step } => {
            format!("variable {variable} truncations shifted by {step}")
        }
        CeWarning::SampleSizeCapReached { hits } => {
            format!("sample size cap reached with {hits} hits")
        }
    }
}

pub fn iteration_records(segment: usize, run: &CeRun) -> Vec<IterationRecord> {
    run.states
        .iter()
        .map(|s| IterationRecord {
            segment,
            iteration: s.iteration,
            level: s.level,
            t_range_m: s.thresholds[0],
            t_ttc_s: s.thresholds[1],
            sample_size: s.sample_size,
            hits: s.hits,
            level_probability: s.level_probability,
            max_change: s.max_change,
            warnings: s.warnings.iter().map(warning_text).collect(),
            variables: s
                .variables
                .iter()
                .zip(&run.variables)
                .map(|(u, v)| VariableRecord {
                    name: v.name.to_string(),
                    truncations: u.truncations.clone(),
                    shift: u.shift,
                    hits_per_piece: u.hits_per_piece.clone(),
                    sampled_theta: u.sampled_theta.clone(),
                    sampled_weights: u.sampled_weights.clone(),
                    theta: u.theta.clone(),
                    proposal_weights: u.proposal_weights.clone(),
                    fallback: u.fallback.clone(),
                })
                .collect(),
        })
        .collect()
}

pub fn write_jsonl<W: Write>(mut out: W, lines: &[TraceLine]) -> std::io::Result<()> {
    for line in lines {
        serde_json::to_writer(&mut out, line)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn parse_jsonl(text: &str) -> serde_json::Result<Vec<TraceLine>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

#[derive(Serialize)]
struct ConvergenceRow {
    n: u64,
    estimate: f64,
    ci_lo: f64,
    ci_hi: f64,
    rel_half_width: f64,
}

/// Per-batch running estimates; infinite half-widths are written as `inf`.
pub fn write_convergence<W: Write>(out: W, rows: &[TraceRow]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .has_headers(false)
        .from_writer(out);
    w.write_record(CONVERGENCE_HEADER.split(','))?;
    for r in rows {
        w.serialize(ConvergenceRow {
            n: r.n,
            estimate: r.estimate,
            ci_lo: r.ci_lo,
            ci_hi: r.ci_hi,
            rel_half_width: r.rel_half_width,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct CdfRow {
    x: f64,
    empirical_cdf: f64,
    fitted_cdf: f64,
}

/// Empirical and fitted CDF at up to `points` order statistics of `sorted`.
pub fn write_cdf_curve<W: Write, F: Fn(f64) -> f64>(
    out: W,
    sorted: &[f64],
    fitted_cdf: F,
    points: usize,
) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let n = sorted.len();
    let stride = n.div_ceil(points.max(1)).max(1);
    let mut idx: Vec<usize> = (0..n).step_by(stride).collect();
    if n > 0 && idx.last() != Some(&(n - 1)) {
        idx.push(n - 1);
    }
    for i in idx {
        let x = sorted[i];
        // Fraction of observations <= x, counting ties.
        let le = sorted.partition_point(|&y| y <= x);
        w.serialize(CdfRow {
            x,
            empirical_cdf: le as f64 / n as f64,
            fitted_cdf: fitted_cdf(x),
        })?;
    }
    w.flush()?;
    Ok(())
}
