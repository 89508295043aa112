//! Crude and importance-sampling Monte Carlo estimation with normal
//! confidence intervals and a relative half-width stopping rule.
//!
//! Samples are drawn in fixed-size batches; batch `b` always uses stream `b`
//! of the master seed, and batches are folded into the running estimate in
//! index order. Whoever evaluates the batches (one thread or many), the
//! report is the same.

use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

use crate::cross_entropy::{CeVariable, RareEvent};
use crate::math::{ceil, exp, sqrt};
use crate::special::two_sided_z;
use crate::stream_rng;
use crate::tilting::TiltError;

/// Hits required before the relative half-width may stop a run.
pub const MIN_HITS_TO_STOP: u64 = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error("non-finite importance weight {value} in batch {batch}")]
    NonFiniteWeight { batch: u64, value: f64 },
    #[error("probability {0} must lie strictly between 0 and 1")]
    InvalidProbability(f64),
    #[error("invalid stopping rule: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Tilt(#[from] TiltError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingRule {
    /// Confidence level is `1 - alpha`.
    pub alpha: f64,
    /// Target relative half-width.
    pub beta: f64,
    pub min_samples: u64,
    pub max_samples: u64,
    /// Samples per batch; the rule is checked after every batch.
    pub batch_size: u64,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            beta: 0.2,
            min_samples: 100,
            max_samples: 100_000_000,
            batch_size: 100,
        }
    }
}

impl StoppingRule {
    pub fn validate(&self) -> Result<(), McError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) || !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(McError::Config("alpha and beta must lie in (0, 1)"));
        }
        if self.batch_size == 0 || self.max_samples == 0 || self.min_samples > self.max_samples {
            return Err(McError::Config(
                "need batch_size >= 1 and min_samples <= max_samples",
            ));
        }
        Ok(())
    }

    /// Fixed sample size: no early stop.
    pub fn fixed(n: u64) -> Self {
        Self {
            min_samples: n,
            max_samples: n,
            beta: f64::MIN_POSITIVE,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Crude,
    IsSingle,
    IsPiecewise,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Crude => "crude",
            Method::IsSingle => "is-single",
            Method::IsPiecewise => "is-piecewise",
        }
    }
}

impl core::str::FromStr for Method {
    type Err = &'static str;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "crude" => Ok(Method::Crude),
            "is-single" => Ok(Method::IsSingle),
            "is-piecewise" => Ok(Method::IsPiecewise),
            _ => Err("expected crude, is-single or is-piecewise"),
        }
    }
}

/// Running summary of weighted indicator values (Welford, merged with Chan's formula).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BatchStats {
    pub n: u64,
    pub hits: u64,
    pub mean: f64,
    pub m2: f64,
}

impl BatchStats {
    pub fn push(&mut self, value: f64, hit: bool) {
        self.n += 1;
        self.hits += hit as u64;
        let d = value - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (value - self.mean);
    }

    pub fn merge(&mut self, other: &BatchStats) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let (na, nb) = (self.n as f64, other.n as f64);
        self.mean += d * nb / n as f64;
        self.m2 += other.m2 + d * d * na * nb / n as f64;
        self.n = n;
        self.hits += other.hits;
    }

    /// Sample variance (n − 1 denominator).
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }
}

/// One draw of the weighted indicator `I(X)·f(X)/f̃(X)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Draw {
    pub value: f64,
    pub hit: bool,
}

/// Something that produces independent weighted indicator draws.
pub trait Experiment {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Draw, McError>;
}

/// Independent inputs drawn from their proposals, weighted against their
/// targets; the event is `score ≤ 0`.
pub struct ImportanceSampler<'a, E> {
    pub variables: &'a [CeVariable],
    pub event: &'a E,
}

impl<E: RareEvent> Experiment for ImportanceSampler<'_, E> {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Draw, McError> {
        let xs: Vec<f64> = self
            .variables
            .iter()
            .map(|v| v.proposal.sample(rng))
            .collect();
        if self.event.score(&xs, rng) > 0.0 {
            return Ok(Draw {
                value: 0.0,
                hit: false,
            });
        }
        let mut ln_ratio = 0.0;
        for (&xi, v) in xs.iter().zip(self.variables) {
            ln_ratio += v.proposal.ln_likelihood_ratio(&v.target, xi)?;
        }
        Ok(Draw {
            value: exp(ln_ratio),
            hit: true,
        })
    }
}

/// Inputs drawn from their true distributions; the event is `score ≤ 0`.
pub struct CrudeSampler<'a, E> {
    pub variables: &'a [CeVariable],
    pub event: &'a E,
}

impl<E: RareEvent> Experiment for CrudeSampler<'_, E> {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Draw, McError> {
        let xs: Vec<f64> = self
            .variables
            .iter()
            .map(|v| v.target.sample(rng))
            .collect();
        let hit = self.event.score(&xs, rng) <= 0.0;
        Ok(Draw {
            value: hit as u8 as f64,
            hit,
        })
    }
}

/// Evaluates batch `index` of `size` draws on its own stream of `seed`.
pub fn run_batch<X: Experiment + ?Sized>(
    experiment: &X,
    seed: u64,
    index: u64,
    size: u64,
) -> Result<BatchStats, McError> {
    let mut rng = stream_rng(seed, index);
    let mut stats = BatchStats::default();
    for _ in 0..size {
        let d = experiment.draw(&mut rng)?;
        if !d.value.is_finite() {
            return Err(McError::NonFiniteWeight {
                batch: index,
                value: d.value,
            });
        }
        stats.push(d.value, d.hit);
    }
    Ok(stats)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub n: u64,
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub rel_half_width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub method: Method,
    pub estimate: f64,
    pub samples: u64,
    pub hits: u64,
    pub variance: f64,
    pub confidence: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// `(ci_hi - ci_lo) / (2·estimate)`; infinite while the estimate is 0.
    pub rel_half_width: f64,
    /// Stopped because the relative half-width dropped below `beta`.
    pub converged: bool,
    /// Zero hits by the end of the run.
    pub no_events: bool,
    pub seed: u64,
    pub trace: Vec<TraceRow>,
}

impl EstimateReport {
    /// The per-batch running estimates.
    pub fn convergence_trace(&self) -> &[TraceRow] {
        &self.trace
    }
}

/// Folds batches in order and applies the stopping rule after each.
#[derive(Debug, Clone)]
pub struct Estimator {
    rule: StoppingRule,
    method: Method,
    seed: u64,
    z: f64,
    stats: BatchStats,
    batches: u64,
    trace: Vec<TraceRow>,
    converged: bool,
    finished: bool,
}

impl Estimator {
    pub fn new(rule: StoppingRule, method: Method, seed: u64) -> Result<Self, McError> {
        rule.validate()?;
        Ok(Self {
            z: two_sided_z(rule.alpha),
            rule,
            method,
            seed,
            stats: BatchStats::default(),
            batches: 0,
            trace: Vec::new(),
            converged: false,
            finished: false,
        })
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Index of the next batch to fold in.
    pub fn next_batch(&self) -> u64 {
        self.batches
    }

    /// Size of batch `index`, or 0 past the sample cap.
    pub fn batch_size(&self, index: u64) -> u64 {
        let start = index.saturating_mul(self.rule.batch_size);
        self.rule
            .batch_size
            .min(self.rule.max_samples.saturating_sub(start))
    }

    fn row(&self) -> TraceRow {
        let s = &self.stats;
        let half = if s.n > 0 {
            self.z * sqrt(s.variance() / s.n as f64)
        } else {
            f64::INFINITY
        };
        let rel = if s.mean > 0.0 {
            half / s.mean
        } else {
            f64::INFINITY
        };
        TraceRow {
            n: s.n,
            estimate: s.mean,
            ci_lo: s.mean - half,
            ci_hi: s.mean + half,
            rel_half_width: rel,
        }
    }

    /// Adds the next batch; returns `true` once the run is over.
    pub fn push(&mut self, batch: &BatchStats) -> bool {
        if self.finished {
            return true;
        }
        self.stats.merge(batch);
        self.batches += 1;
        let row = self.row();
        self.trace.push(row);
        let n = self.stats.n;
        if n >= self.rule.min_samples
            && self.stats.hits >= MIN_HITS_TO_STOP
            && row.rel_half_width < self.rule.beta
        {
            self.converged = true;
            self.finished = true;
        } else if n >= self.rule.max_samples || batch.n == 0 {
            self.finished = true;
        }
        self.finished
    }

    pub fn report(&self) -> EstimateReport {
        let row = self.trace.last().copied().unwrap_or_else(|| self.row());
        EstimateReport {
            method: self.method,
            estimate: self.stats.mean,
            samples: self.stats.n,
            hits: self.stats.hits,
            variance: self.stats.variance(),
            confidence: 1.0 - self.rule.alpha,
            ci_lo: row.ci_lo,
            ci_hi: row.ci_hi,
            rel_half_width: row.rel_half_width,
            converged: self.converged,
            no_events: self.stats.hits == 0,
            seed: self.seed,
            trace: self.trace.clone(),
        }
    }
}

/// Runs `experiment` batch by batch until the stopping rule fires.
pub fn estimate<X: Experiment + ?Sized>(
    experiment: &X,
    method: Method,
    rule: &StoppingRule,
    seed: u64,
) -> Result<EstimateReport, McError> {
    let mut est = Estimator::new(*rule, method, seed)?;
    while !est.is_finished() {
        let index = est.next_batch();
        let stats = run_batch(experiment, seed, index, est.batch_size(index))?;
        est.push(&stats);
    }
    Ok(est.report())
}

/// Crude Monte Carlo: inputs from their true distributions.
pub fn estimate_crude<E: RareEvent>(
    variables: &[CeVariable],
    event: &E,
    rule: &StoppingRule,
    seed: u64,
) -> Result<EstimateReport, McError> {
    estimate(
        &CrudeSampler { variables, event },
        Method::Crude,
        rule,
        seed,
    )
}

/// Importance sampling from each variable's proposal.
pub fn estimate_is<E: RareEvent>(
    variables: &[CeVariable],
    event: &E,
    method: Method,
    rule: &StoppingRule,
    seed: u64,
) -> Result<EstimateReport, McError> {
    estimate(&ImportanceSampler { variables, event }, method, rule, seed)
}

/// Crude sample count for relative half-width `beta` at confidence `1 - alpha`:
/// `⌈z²(1 − P)/(β² P)⌉`.
pub fn required_samples_crude(p: f64, alpha: f64, beta: f64) -> Result<u64, McError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(McError::InvalidProbability(p));
    }
    if !(alpha > 0.0 && alpha < 1.0) || !(beta > 0.0) {
        return Err(McError::Config(
            "alpha must lie in (0, 1) and beta must be positive",
        ));
    }
    let z = two_sided_z(alpha);
    Ok(ceil(z * z * (1.0 - p) / (beta * beta * p)) as u64)
}
