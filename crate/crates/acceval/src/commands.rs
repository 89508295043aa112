//! The `synth`, `fit`, `ce` and `eval` commands.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use acceval_core::fitting::{fit_piecewise, PieceReport, PiecewiseFit};
use acceval_core::montecarlo::{EstimateReport, Method};
use acceval_core::scenario::{
    generate_events, optimize_proposals, segment_of, synthetic_ground_truth, ProposalFamily,
    ScenarioExperiment, SPEED_SEGMENTS,
};
use acceval_core::{Dataset, EmpiricalDistribution, LaneChangeModel, PieceFamily};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{AppError, Result};
use crate::events;
use crate::json::{self, Meta, ModelDoc, ProposalDoc, ReportDoc, SegmentProposalDoc};
use crate::parallel::{estimate_parallel, thread_pool, RelaxedCrude};
use crate::trace::{self, TraceLine};

pub const EVENTS_FILE: &str = "events.csv";
pub const TRUTH_FILE: &str = "truth-model.json";
pub const MODEL_FILE: &str = "model.json";
pub const FIT_REPORT_FILE: &str = "fit-report.json";

/// Files written by a command and a one-line summary for the terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

fn out_dir(config: &RunConfig) -> Result<&Path> {
    let dir = config.out.as_path();
    fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    Ok(dir)
}

pub fn proposal_file(family: &str) -> String {
    format!("proposal-{family}.json")
}

pub fn ce_trace_file(family: &str) -> String {
    format!("ce-trace-{family}.jsonl")
}

pub fn report_file(tag: &str) -> String {
    format!("report-{tag}.json")
}

pub fn convergence_file(tag: &str) -> String {
    format!("convergence-{tag}.csv")
}

/// Draws `count` events from the synthetic ground truth and writes them
/// together with the truth model.
pub fn cmd_synth(config: &RunConfig) -> Result<Outcome> {
    let dir = out_dir(config)?;
    let (model, _) = synthetic_ground_truth();
    let evs = generate_events(&model, config.count, config.seed)?;
    let csv_path = dir.join(EVENTS_FILE);
    events::save_events(&csv_path, &evs)?;
    let model_path = dir.join(TRUTH_FILE);
    json::write(&model_path, &ModelDoc::new(config.meta("synth"), &model))?;
    Ok(Outcome {
        summary: format!("wrote {} events", evs.len()),
        files: vec![csv_path, model_path],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceReportDoc {
    pub index: usize,
    pub family: String,
    pub count: usize,
    pub weight: f64,
    pub skipped: bool,
    pub at_bound: bool,
    pub em_iterations: Option<usize>,
    pub em_converged: Option<bool>,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableReportDoc {
    pub variable: String,
    pub segment: Option<usize>,
    pub observations: usize,
    pub log_likelihood: f64,
    pub pieces: Vec<PieceReportDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReportDoc {
    pub meta: Meta,
    pub events: usize,
    pub variables: Vec<VariableReportDoc>,
}

fn family_name(f: PieceFamily) -> String {
    match f {
        PieceFamily::Exponential => "exponential".into(),
        PieceFamily::Normal => "normal".into(),
        PieceFamily::NormalMixture { components } => format!("normal_mixture({components})"),
    }
}

fn variable_report(
    variable: &str,
    segment: Option<usize>,
    n: usize,
    fit: &PiecewiseFit,
) -> VariableReportDoc {
    let piece = |p: &PieceReport| PieceReportDoc {
        index: p.index,
        family: family_name(p.family),
        count: p.count,
        weight: p.weight,
        skipped: p.skipped,
        at_bound: p.at_bound,
        em_iterations: p.em_iterations,
        em_converged: p.em_converged,
        log_likelihood: p.log_likelihood,
    };
    VariableReportDoc {
        variable: variable.to_string(),
        segment,
        observations: n,
        log_likelihood: fit.log_likelihood,
        pieces: fit.pieces.iter().map(piece).collect(),
    }
}

fn write_cdf(path: &Path, data: &Dataset, fit: &PiecewiseFit, points: usize) -> Result<()> {
    let mut sorted = data.values().to_vec();
    sorted.sort_by(f64::total_cmp);
    let file = File::create(path).map_err(|e| AppError::io(path, e))?;
    trace::write_cdf_curve(BufWriter::new(file), &sorted, |x| fit.model.cdf(x), points)
        .map_err(|e| AppError::format(path, e))
}

/// Fits the lane-change model to an event file: `R⁻¹` over all events and
/// `TTC⁻¹` per speed segment, with the lead speed kept empirical.
pub fn cmd_fit(config: &RunConfig) -> Result<Outcome> {
    let events_path = config.input("events", &config.events)?;
    let evs = events::load_events(&events_path)?;
    if evs.is_empty() {
        return Err(AppError::format(&events_path, "no events"));
    }
    let dir = out_dir(config)?;
    let speeds: Vec<f64> = evs.iter().map(|e| e.v_lead_mps).collect();
    let speed = EmpiricalDistribution::from_observations(&speeds)?;

    let range_data = Dataset::new(evs.iter().map(|e| e.range_inv()).collect())?;
    let range_fit = fit_piecewise(&range_data, &config.fit.fit_config(&config.fit.range_inv))?;
    let mut reports = vec![variable_report(
        "range_inv",
        None,
        range_data.len(),
        &range_fit,
    )];
    let mut files = Vec::new();
    let path = dir.join("cdf-range-inv.csv");
    write_cdf(&path, &range_data, &range_fit, config.fit.cdf_points)?;
    files.push(path);

    let mut ttc_models = Vec::new();
    for seg in 0..SPEED_SEGMENTS.len() {
        let values: Vec<f64> = evs
            .iter()
            .filter(|e| segment_of(e.v_lead_mps) == Some(seg))
            .map(|e| e.ttc_inv())
            .collect();
        let data = Dataset::new(values)?.with_segment(seg);
        let fit = fit_piecewise(&data, &config.fit.fit_config(&config.fit.ttc_inv))?;
        reports.push(variable_report("ttc_inv", Some(seg), data.len(), &fit));
        let path = dir.join(format!("cdf-ttc-inv-seg{}.csv", seg + 1));
        write_cdf(&path, &data, &fit, config.fit.cdf_points)?;
        files.push(path);
        ttc_models.push(fit.model);
    }

    let model = LaneChangeModel::new(speed, range_fit.model, ttc_models)?;
    let model_path = dir.join(MODEL_FILE);
    json::write(&model_path, &ModelDoc::new(config.meta("fit"), &model))?;
    let report_path = dir.join(FIT_REPORT_FILE);
    let report = FitReportDoc {
        meta: config.meta("fit"),
        events: evs.len(),
        variables: reports,
    };
    json::write(&report_path, &report)?;
    files.splice(0..0, [model_path, report_path]);
    Ok(Outcome {
        summary: format!("fitted {} events", evs.len()),
        files,
    })
}

/// Tunes one proposal per speed segment with the cross-entropy method.
pub fn cmd_ce(config: &RunConfig) -> Result<Outcome> {
    let model_path = config.input("model", &config.model)?;
    let model = json::read_model(&model_path)?;
    let dir = out_dir(config)?;
    let family = config.ce.family;
    let pf: ProposalFamily = family.into();
    let (proposals, runs) = optimize_proposals(
        &model,
        &config.controller(),
        pf,
        &config.ce.ce_config(config.seed),
    )?;

    let meta = config.meta("ce");
    let mut lines = vec![TraceLine::Header {
        meta: meta.clone(),
        family: family.as_str().to_string(),
    }];
    let mut segments = Vec::new();
    for (seg, run) in runs.iter().enumerate() {
        lines.extend(
            trace::iteration_records(seg, run)
                .into_iter()
                .map(TraceLine::Iteration),
        );
        let (lo, hi) = SPEED_SEGMENTS[seg];
        segments.push(SegmentProposalDoc {
            segment: seg,
            speed_range_mps: [lo, hi],
            range_inv: (&proposals.range_inv[seg]).into(),
            ttc_inv: (&proposals.ttc_inv[seg]).into(),
            ce_iterations: run.states.len(),
            ce_converged: run.converged,
        });
    }
    let doc = ProposalDoc {
        meta,
        family: family.as_str().to_string(),
        method: pf.method().as_str().to_string(),
        segments,
    };
    let proposal_path = dir.join(proposal_file(family.as_str()));
    json::write(&proposal_path, &doc)?;
    let trace_path = dir.join(ce_trace_file(family.as_str()));
    let file = File::create(&trace_path).map_err(|e| AppError::io(&trace_path, e))?;
    trace::write_jsonl(BufWriter::new(file), &lines).map_err(|e| AppError::io(&trace_path, e))?;

    let converged = runs.iter().filter(|r| r.converged).count();
    Ok(Outcome {
        summary: format!(
            "{} proposals for {} segments ({converged} converged within {} iterations)",
            family.as_str(),
            runs.len(),
            config.ce.max_iterations
        ),
        files: vec![proposal_path, trace_path],
    })
}

fn write_report(
    dir: &Path,
    tag: &str,
    doc: &ReportDoc,
    report: &EstimateReport,
) -> Result<Vec<PathBuf>> {
    let report_path = dir.join(report_file(tag));
    json::write(&report_path, doc)?;
    let csv_path = dir.join(convergence_file(tag));
    let file = File::create(&csv_path).map_err(|e| AppError::io(&csv_path, e))?;
    trace::write_convergence(BufWriter::new(file), report.convergence_trace())
        .map_err(|e| AppError::format(&csv_path, e))?;
    Ok(vec![report_path, csv_path])
}

/// Estimates the crash probability with the given proposal (and optionally
/// a second one on the same seed, and crude Monte Carlo).
pub fn cmd_eval(config: &RunConfig) -> Result<Outcome> {
    let model = json::read_model(&config.input("model", &config.model)?)?;
    let rule = config.eval.rule();
    rule.validate()?;
    let controller = config.controller();
    controller.validate()?;
    let pool = thread_pool(config.workers).map_err(|e| AppError::Config(e.to_string()))?;
    let workers = pool.current_num_threads();
    let dir = out_dir(config)?;
    let meta = config.meta("eval");

    let mut inputs = vec![config.input("proposal", &config.proposal)?];
    if config.compare.is_some() {
        inputs.push(config.input("compare", &config.compare)?);
    }
    let mut files = Vec::new();
    let mut summary = Vec::new();
    let mut tags: Vec<String> = Vec::new();
    for path in &inputs {
        let doc: ProposalDoc = json::read(path)?;
        let method = doc.method()?;
        if method == Method::Crude {
            return Err(AppError::Config(format!(
                "{}: proposal method cannot be crude",
                path.display()
            )));
        }
        let proposals = doc.to_proposals()?;
        let exp = ScenarioExperiment {
            model: &model,
            proposals: &proposals,
            controller,
        };
        let report = estimate_parallel(&pool, &exp, method, &rule, config.seed)?;
        let mut tag = method.as_str().to_string();
        if tags.contains(&tag) {
            tag.push_str("-compare");
        }
        files.extend(write_report(
            dir,
            &tag,
            &ReportDoc::new(meta.clone(), &report, workers),
            &report,
        )?);
        summary.push(format!(
            "{tag}: {:.4e} after {} samples",
            report.estimate, report.samples
        ));
        tags.push(tag);
    }
    if config.eval.crude {
        let exp = RelaxedCrude {
            model: &model,
            controller,
            level: config.eval.crude_level,
        };
        let report = estimate_parallel(&pool, &exp, Method::Crude, &rule, config.seed)?;
        let mut doc = ReportDoc::new(meta, &report, workers);
        doc.level = config.eval.crude_level;
        files.extend(write_report(dir, "crude", &doc, &report)?);
        summary.push(format!(
            "crude: {:.4e} after {} samples",
            report.estimate, report.samples
        ));
    }
    Ok(Outcome {
        summary: summary.join("; "),
        files,
    })
}
