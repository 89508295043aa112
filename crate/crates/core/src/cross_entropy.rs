//! Cross-entropy optimization of piecewise tilted proposals.
//!
//! The rare event is described by a scalar score: at level `ℓ` the event is
//! `score(x) ≤ ℓ`, and the event of interest is level 0. Each iteration
//! draws a batch from the current proposals, picks the level (adaptively
//! from the batch, or from a fixed schedule), weights every hit by its
//! likelihood ratio against the true densities and refits the per-piece
//! weights `π̃_i` and tilts `θ_i` by weighted maximum likelihood.
//!
//! Safeguards: a floor on `π̃_i`, a fallback for pieces without hits,
//! growing the batch until heavy pieces have enough hits, and shifting the
//! truncation points outward when the tail piece already carries all the
//! weight it can.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

use crate::distributions::{BoundedComponent, PiecewiseMixture};
use crate::math::{abs, ceil, exp, ln, ln_sum_exp};
use crate::optimize::bracket_max;
use crate::tilting::{TiltError, TiltedPiecewise};
use crate::{stream_rng, SimRng};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CeError {
    #[error("no rare events in batch")]
    NoRareEvents,
    #[error(
        "hit starvation at iteration {iteration}: {hits} hits in {samples} samples at level {level} after {shifts} truncation shifts"
    )]
    HitStarvation {
        iteration: usize,
        level: f64,
        samples: usize,
        hits: usize,
        shifts: usize,
    },
    #[error("event score is NaN for sample {index}")]
    InvalidScore { index: usize },
    #[error("invalid cross-entropy configuration: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Tilt(#[from] TiltError),
}

impl From<crate::distributions::DistributionError> for CeError {
    fn from(e: crate::distributions::DistributionError) -> Self {
        CeError::Tilt(e.into())
    }
}

/// A rare event expressed through a score; smaller is more extreme.
pub trait RareEvent {
    /// Score of the input `x` (one value per variable). Extra randomness
    /// that is not tilted, such as an empirically distributed covariate, is
    /// drawn from `rng`.
    fn score<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> f64;

    /// Physical thresholds corresponding to a level, for traces.
    fn thresholds(&self, level: f64) -> Vec<f64> {
        vec![level]
    }
}

/// How the relaxed level of each iteration is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum LevelSchedule {
    /// Next level is the `quantile` of the batch's scores, never above the
    /// previous level and never below 0.
    Adaptive { quantile: f64 },
    /// Levels given in advance; 0 is used once the list runs out.
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CeConfig {
    pub sample_size: usize,
    pub max_sample_size: usize,
    pub max_iterations: usize,
    /// Convergence threshold on the largest absolute change of any `θ_i` or `π̃_i`.
    pub tolerance: f64,
    /// Consecutive iterations at level 0 below `tolerance` required to stop.
    pub stable_iterations: usize,
    pub pi_floor: f64,
    /// Hits required in every piece whose `π̃_i` exceeds `materiality`.
    pub min_hits: usize,
    pub materiality: f64,
    /// Each truncation shift moves the knots by this fraction of the current
    /// distance between the last interior knot and `γ_0`.
    pub shift_fraction: f64,
    pub max_shifts: usize,
    pub schedule: LevelSchedule,
    pub seed: u64,
}

impl Default for CeConfig {
    fn default() -> Self {
        Self {
            sample_size: 1000,
            max_sample_size: 8000,
            max_iterations: 20,
            tolerance: 1e-3,
            stable_iterations: 2,
            pi_floor: 0.01,
            min_hits: 10,
            materiality: 0.05,
            shift_fraction: 0.5,
            max_shifts: 20,
            schedule: LevelSchedule::Adaptive { quantile: 0.1 },
            seed: 0,
        }
    }
}

impl CeConfig {
    pub fn validate(&self, max_pieces: usize) -> Result<(), CeError> {
        if self.sample_size == 0 || self.max_sample_size < self.sample_size {
            return Err(CeError::Config("need 1 <= sample_size <= max_sample_size"));
        }
        if self.max_iterations == 0 {
            return Err(CeError::Config("max_iterations must be positive"));
        }
        if !(self.pi_floor > 0.0) || !(self.pi_floor * max_pieces as f64 <= 1.0) {
            return Err(CeError::Config("pi_floor must lie in (0, 1/k)"));
        }
        if !(self.tolerance > 0.0) || self.stable_iterations == 0 {
            return Err(CeError::Config("convergence settings must be positive"));
        }
        if !(self.shift_fraction >= 0.0) {
            return Err(CeError::Config("shift_fraction must be nonnegative"));
        }
        match &self.schedule {
            LevelSchedule::Adaptive { quantile } if !(*quantile > 0.0 && *quantile < 1.0) => {
                Err(CeError::Config("adaptive quantile must lie in (0, 1)"))
            }
            LevelSchedule::Fixed(levels)
                if levels.windows(2).any(|w| w[1] > w[0])
                    || levels.iter().any(|l| !(*l >= 0.0)) =>
            {
                Err(CeError::Config(
                    "fixed levels must be nonnegative and nonincreasing",
                ))
            }
            _ => Ok(()),
        }
    }
}

/// One tilted input: its true density and its current proposal.
#[derive(Debug, Clone, PartialEq)]
pub struct CeVariable {
    pub name: String,
    pub target: PiecewiseMixture,
    pub proposal: TiltedPiecewise,
}

impl CeVariable {
    /// Starts from the untilted target itself.
    pub fn new(name: impl Into<String>, target: PiecewiseMixture) -> Self {
        let proposal = TiltedPiecewise::identity(target.clone());
        Self {
            name: name.into(),
            target,
            proposal,
        }
    }

    pub fn with_proposal(
        name: impl Into<String>,
        target: PiecewiseMixture,
        proposal: TiltedPiecewise,
    ) -> Self {
        Self {
            name: name.into(),
            target,
            proposal,
        }
    }
}

/// Why the batch of an iteration was not accepted as drawn.
#[derive(Debug, Clone, PartialEq)]
pub enum CeWarning {
    /// Batch grown to `to` samples because a heavy piece lacked hits.
    SampleSizeIncreased { to: usize },
    /// Truncations of `variable` shifted by `step`.
    TruncationShift { variable: usize, step: f64 },
    /// Sample size cap reached with insufficient hits; the update went ahead.
    SampleSizeCapReached { hits: usize },
}

/// Per-variable outcome of one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableUpdate {
    /// Proposal the batch was drawn from.
    pub sampled_theta: Vec<f64>,
    pub sampled_weights: Vec<f64>,
    pub truncations: Vec<f64>,
    pub shift: f64,
    pub hits_per_piece: Vec<usize>,
    /// Updated parameters.
    pub theta: Vec<f64>,
    pub proposal_weights: Vec<f64>,
    /// Pieces whose `θ_i` came from the fallback rule.
    pub fallback: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CeState {
    pub iteration: usize,
    pub level: f64,
    pub thresholds: Vec<f64>,
    pub sample_size: usize,
    pub hits: usize,
    /// `Σ c_n / N`, an unbiased estimate of the probability of the relaxed event.
    pub level_probability: f64,
    pub variables: Vec<VariableUpdate>,
    pub max_change: f64,
    pub warnings: Vec<CeWarning>,
    /// The batch: `samples[n][v]`, event scores and `ln c_n`.
    pub samples: Vec<Vec<f64>>,
    pub scores: Vec<f64>,
    pub ln_weights: Vec<f64>,
}

impl CeState {
    /// `c_n = I(score_n <= level) f(X_n) / f̃(X_n)`.
    pub fn weights(&self) -> Vec<f64> {
        self.ln_weights.iter().map(|l| exp(*l)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CeRun {
    pub variables: Vec<CeVariable>,
    pub states: Vec<CeState>,
    pub converged: bool,
}

impl CeRun {
    pub fn final_level(&self) -> f64 {
        self.states.last().map_or(f64::INFINITY, |s| s.level)
    }
}

/// Applies the floor to pieces that are `eligible` (positive target weight)
/// and renormalizes the others; ineligible pieces get weight 0.
pub fn apply_floor(raw: &[f64], eligible: &[bool], floor: f64) -> Vec<f64> {
    let k = raw.len();
    let mut floored = vec![false; k];
    loop {
        let fixed = floored.iter().filter(|f| **f).count() as f64 * floor;
        let free: f64 = raw
            .iter()
            .zip(&floored)
            .zip(eligible)
            .filter(|((_, f), e)| !**f && **e)
            .map(|((r, _), _)| *r)
            .sum();
        let scale = if free > 0.0 {
            (1.0 - fixed) / free
        } else {
            0.0
        };
        let mut changed = false;
        for i in 0..k {
            if eligible[i] && !floored[i] && raw[i] * scale < floor {
                floored[i] = true;
                changed = true;
            }
        }
        if !changed {
            let mut out: Vec<f64> = (0..k)
                .map(|i| {
                    if !eligible[i] {
                        0.0
                    } else if floored[i] {
                        floor
                    } else {
                        raw[i] * scale
                    }
                })
                .collect();
            // Absorb rounding in the largest weight so the sum is 1.
            let sum: f64 = out.iter().sum();
            if let Some(j) = (0..k).max_by(|&a, &b| out[a].total_cmp(&out[b])) {
                out[j] += 1.0 - sum;
            }
            return out;
        }
    }
}

/// `π̃_i = Σ_{n∈S_i} c_n / Σ_n c_n`, floored and renormalized.
pub fn update_proposal_weights(
    hit_mass: &[f64],
    eligible: &[bool],
    floor: f64,
) -> Result<Vec<f64>, CeError> {
    let total: f64 = hit_mass.iter().sum();
    if !(total > 0.0) {
        return Err(CeError::NoRareEvents);
    }
    let raw: Vec<f64> = hit_mass.iter().map(|m| m / total).collect();
    Ok(apply_floor(&raw, eligible, floor))
}

/// Largest weight the last piece can hold once every other eligible piece sits on the floor.
pub fn max_tail_weight(eligible: &[bool], floor: f64) -> f64 {
    let others = eligible[..eligible.len() - 1]
        .iter()
        .filter(|e| **e)
        .count();
    1.0 - others as f64 * floor
}

/// Natural scale of `θ` for a piece: `λ` or `1/σ²` (smallest σ of a mixture).
fn theta_scale(piece: &BoundedComponent) -> f64 {
    match piece {
        BoundedComponent::Exponential(e) => e.rate(),
        BoundedComponent::Normal(n) => 1.0 / (n.sigma() * n.sigma()),
        BoundedComponent::NormalMixture(m) => {
            let s = m
                .normals()
                .iter()
                .map(|c| c.sigma())
                .fold(f64::INFINITY, f64::min);
            1.0 / (s * s)
        }
    }
}

/// Maximizes `θ·Σc_nX_n - (Σc_n)·κ(θ)` over the tilt of `piece`, where `κ` is
/// the piece's log moment-generating function. `start` seeds the search.
pub fn update_theta(piece: &BoundedComponent, weighted_sum: f64, mass: f64, start: f64) -> f64 {
    let scale = theta_scale(piece);
    let lo = -1e6 * scale;
    let hi = match piece {
        BoundedComponent::Exponential(e) => e.rate() - 2e-9,
        _ => 1e6 * scale,
    };
    let objective = |t: f64| match piece.log_mgf(t) {
        Ok(k) => t * weighted_sum - mass * k,
        Err(_) => f64::NEG_INFINITY,
    };
    let start = if start.is_finite() {
        start.max(lo).min(hi)
    } else {
        0.0
    };
    bracket_max(objective, start, 0.1 * scale, lo, hi, 1e-10 * scale).argmax
}

/// Exponential-piece update: the tilted rate `λ - θ` makes the piece's
/// conditional mean match the weighted mean of its hits.
pub fn update_theta_exponential(
    piece: &crate::BoundedExponential,
    weighted_sum: f64,
    mass: f64,
    start: f64,
) -> f64 {
    update_theta(
        &BoundedComponent::Exponential(piece.clone()),
        weighted_sum,
        mass,
        start,
    )
}

/// Normal-piece update: with no truncation `θσ²` equals the hits' weighted mean.
pub fn update_theta_normal(
    piece: &crate::BoundedNormal,
    weighted_sum: f64,
    mass: f64,
    start: f64,
) -> f64 {
    update_theta(
        &BoundedComponent::Normal(piece.clone()),
        weighted_sum,
        mass,
        start,
    )
}

/// `θ_i` for a piece without hits: 0 in the first iteration (back to the
/// true distribution), the previous value afterwards.
pub fn theta_fallback(iteration: usize, previous: f64) -> f64 {
    if iteration <= 1 {
        0.0
    } else {
        previous
    }
}

/// Outcome of the sample-size rule for one batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleSizeDecision {
    Sufficient,
    Grow(usize),
    CapReached,
}

/// Doubles `current` (up to `cap`) while some piece with `π̃_i > materiality`
/// has fewer than `min_hits` hits. Pieces at or below the materiality
/// threshold never trigger growth.
pub fn adjust_sample_size(
    current: usize,
    cap: usize,
    hits_per_piece: &[usize],
    weights: &[f64],
    min_hits: usize,
    materiality: f64,
) -> SampleSizeDecision {
    let starved = hits_per_piece
        .iter()
        .zip(weights)
        .any(|(&h, &w)| w > materiality && h < min_hits);
    if !starved {
        SampleSizeDecision::Sufficient
    } else if current >= cap {
        SampleSizeDecision::CapReached
    } else {
        SampleSizeDecision::Grow((current * 2).min(cap))
    }
}

/// Shifts every truncation except `γ_0` by `step` (see [`TiltedPiecewise::shifted`]).
pub fn shift_truncations(
    proposal: &TiltedPiecewise,
    step: f64,
) -> Result<TiltedPiecewise, CeError> {
    Ok(proposal.shifted(step)?)
}

struct Batch {
    samples: Vec<Vec<f64>>,
    ln_ratio: Vec<f64>,
    scores: Vec<f64>,
}

impl Batch {
    fn new() -> Self {
        Self {
            samples: Vec::new(),
            ln_ratio: Vec::new(),
            scores: Vec::new(),
        }
    }

    fn len(&self) -> usize {
        self.samples.len()
    }

    fn extend<E: RareEvent>(
        &mut self,
        vars: &[CeVariable],
        event: &E,
        n: usize,
        rng: &mut SimRng,
    ) -> Result<(), CeError> {
        for _ in 0..n {
            let mut x = Vec::with_capacity(vars.len());
            let mut lr = 0.0;
            for v in vars {
                let xi = v.proposal.sample(rng);
                lr += v.proposal.ln_likelihood_ratio(&v.target, xi)?;
                x.push(xi);
            }
            let s = event.score(&x, rng);
            if s.is_nan() {
                return Err(CeError::InvalidScore {
                    index: self.samples.len(),
                });
            }
            self.samples.push(x);
            self.ln_ratio.push(lr);
            self.scores.push(s);
        }
        Ok(())
    }
}

fn batch_level(schedule: &LevelSchedule, iteration: usize, previous: f64, scores: &[f64]) -> f64 {
    match schedule {
        LevelSchedule::Adaptive { quantile } => {
            let mut sorted = scores.to_vec();
            sorted.sort_by(|a, b| a.total_cmp(b));
            let n = sorted.len();
            let idx = (ceil(quantile * n as f64) as usize).clamp(1, n) - 1;
            sorted[idx].min(previous).max(0.0)
        }
        LevelSchedule::Fixed(levels) => levels
            .get(iteration - 1)
            .copied()
            .unwrap_or(0.0)
            .min(previous),
    }
}

fn hits_per_piece(proposal: &TiltedPiecewise, values: impl Iterator<Item = f64>) -> Vec<usize> {
    let mut counts = vec![0usize; proposal.len()];
    for x in values {
        if let Some(i) = proposal.proposal().piece_index(x) {
            counts[i] += 1;
        }
    }
    counts
}

fn eligible(var: &CeVariable) -> Vec<bool> {
    var.proposal
        .reference()
        .weights()
        .iter()
        .map(|&w| w > 0.0)
        .collect()
}

fn stream_id(iteration: usize, attempt: usize) -> u64 {
    ((iteration as u64) << 20) | attempt as u64
}

/// Runs the cross-entropy iterations and returns the final proposals with
/// the full per-iteration trace.
pub fn ce_iterate<E: RareEvent>(
    variables: Vec<CeVariable>,
    event: &E,
    config: &CeConfig,
) -> Result<CeRun, CeError> {
    if variables.is_empty() {
        return Err(CeError::Config("at least one variable is required"));
    }
    let max_pieces = variables
        .iter()
        .map(|v| v.proposal.len())
        .max()
        .unwrap_or(1);
    config.validate(max_pieces)?;
    let mut vars = variables;
    let mut states: Vec<CeState> = Vec::new();
    let mut level = f64::INFINITY;
    let mut stable = 0;
    let mut converged = false;

    for iteration in 1..=config.max_iterations {
        let mut warnings = Vec::new();
        let mut attempt = 0usize;
        let mut shifts = 0usize;
        let mut n = config.sample_size;
        let mut batch = Batch::new();
        let mut rng = stream_rng(config.seed, stream_id(iteration, attempt));
        let (batch, level_t, hit_flags) = loop {
            let need = n - batch.len();
            batch.extend(&vars, event, need, &mut rng)?;
            let level_t = batch_level(&config.schedule, iteration, level, &batch.scores);
            let hit_flags: Vec<bool> = batch.scores.iter().map(|&s| s <= level_t).collect();
            let hits = hit_flags.iter().filter(|h| **h).count();

            let mut decision = SampleSizeDecision::Sufficient;
            let mut starved = vec![hits == 0; vars.len()];
            for (vi, v) in vars.iter().enumerate() {
                let hit_values = batch
                    .samples
                    .iter()
                    .zip(&hit_flags)
                    .filter(|(_, h)| **h)
                    .map(|(x, _)| x[vi]);
                let h = hits_per_piece(&v.proposal, hit_values);
                let d = adjust_sample_size(
                    n,
                    config.max_sample_size,
                    &h,
                    v.proposal.proposal_weights(),
                    config.min_hits,
                    config.materiality,
                );
                if d != SampleSizeDecision::Sufficient {
                    starved[vi] = true;
                    decision = d;
                }
            }
            if hits == 0 && decision == SampleSizeDecision::Sufficient {
                decision = if n >= config.max_sample_size {
                    SampleSizeDecision::CapReached
                } else {
                    SampleSizeDecision::Grow((n * 2).min(config.max_sample_size))
                };
            }
            if decision == SampleSizeDecision::Sufficient {
                break (batch, level_t, hit_flags);
            }

            // A starved variable whose tail already has its largest weight:
            // move its knots outward.
            let mut shifted_any = false;
            if shifts < config.max_shifts && config.shift_fraction > 0.0 {
                for (vi, v) in vars.iter_mut().enumerate() {
                    let k = v.proposal.len();
                    if k < 2 || !starved[vi] {
                        continue;
                    }
                    let elig = eligible(v);
                    let tail = v.proposal.proposal_weights()[k - 1];
                    if tail + 1e-12 >= max_tail_weight(&elig, config.pi_floor) {
                        let knots = v.proposal.truncations();
                        let step = config.shift_fraction * (knots[k - 1] - knots[0]);
                        v.proposal = shift_truncations(&v.proposal, step)?;
                        warnings.push(CeWarning::TruncationShift { variable: vi, step });
                        shifted_any = true;
                    }
                }
            }
            if shifted_any {
                shifts += 1;
                attempt += 1;
                n = config.sample_size;
                batch = Batch::new();
                rng = stream_rng(config.seed, stream_id(iteration, attempt));
                continue;
            }
            match decision {
                SampleSizeDecision::Grow(to) => {
                    warnings.push(CeWarning::SampleSizeIncreased { to });
                    n = to;
                }
                _ => {
                    if hits == 0 {
                        return Err(CeError::HitStarvation {
                            iteration,
                            level: level_t,
                            samples: batch.len(),
                            hits,
                            shifts,
                        });
                    }
                    warnings.push(CeWarning::SampleSizeCapReached { hits });
                    break (batch, level_t, hit_flags);
                }
            }
        };
        level = level_t;

        let ln_weights: Vec<f64> = batch
            .ln_ratio
            .iter()
            .zip(&hit_flags)
            .map(|(l, h)| if *h { *l } else { f64::NEG_INFINITY })
            .collect();
        let ln_total = ln_sum_exp(&ln_weights);
        let hits = hit_flags.iter().filter(|h| **h).count();

        let mut updates = Vec::with_capacity(vars.len());
        let mut max_change: f64 = 0.0;
        for (vi, v) in vars.iter_mut().enumerate() {
            let column: Vec<f64> = batch.samples.iter().map(|x| x[vi]).collect();
            let update = update_variable(
                &v.proposal,
                &column,
                &ln_weights,
                iteration,
                config.pi_floor,
            )?;
            for i in 0..v.proposal.len() {
                max_change = max_change.max(abs(update.theta[i] - v.proposal.theta()[i]));
                max_change = max_change.max(abs(
                    update.proposal_weights[i] - v.proposal.proposal_weights()[i]
                ));
            }
            v.proposal = v
                .proposal
                .with_parameters(update.theta.clone(), update.proposal_weights.clone())?;
            updates.push(update);
        }

        let n_batch = batch.len();
        states.push(CeState {
            iteration,
            level,
            thresholds: event.thresholds(level),
            sample_size: n_batch,
            hits,
            level_probability: exp(ln_total - ln(n_batch as f64)),
            variables: updates,
            max_change,
            warnings,
            samples: batch.samples,
            scores: batch.scores,
            ln_weights,
        });

        if level <= 0.0 {
            stable = if max_change < config.tolerance {
                stable + 1
            } else {
                0
            };
            if stable >= config.stable_iterations {
                converged = true;
                break;
            }
        }
    }
    Ok(CeRun {
        variables: vars,
        states,
        converged,
    })
}

/// CE update of one variable from its sample column and the shared
/// `ln c_n` (`-inf` for samples outside the event). Only the hits' values of
/// this variable enter, which is what lets independent inputs be updated
/// separately.
pub fn update_variable(
    proposal: &TiltedPiecewise,
    values: &[f64],
    ln_weights: &[f64],
    iteration: usize,
    floor: f64,
) -> Result<VariableUpdate, CeError> {
    // c_n on a common scale; the updates are invariant to it.
    let top = ln_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let k = proposal.len();
    let grid = proposal.proposal();
    let mut mass = vec![0.0; k];
    let mut wsum = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (&x, &lw) in values.iter().zip(ln_weights) {
        if lw == f64::NEG_INFINITY {
            continue;
        }
        let cn = exp(lw - top);
        if let Some(i) = grid.piece_index(x) {
            mass[i] += cn;
            wsum[i] += cn * x;
            counts[i] += 1;
        }
    }
    let eligible: Vec<bool> = proposal
        .reference()
        .weights()
        .iter()
        .map(|&w| w > 0.0)
        .collect();
    let weights = update_proposal_weights(&mass, &eligible, floor)?;
    let mut theta = Vec::with_capacity(k);
    let mut fallback = Vec::with_capacity(k);
    for i in 0..k {
        let previous = proposal.theta()[i];
        if mass[i] > 0.0 {
            theta.push(update_theta(
                &reference_piece(proposal, i)?,
                wsum[i],
                mass[i],
                previous,
            ));
            fallback.push(false);
        } else {
            theta.push(theta_fallback(iteration, previous));
            fallback.push(true);
        }
    }
    Ok(VariableUpdate {
        sampled_theta: proposal.theta().to_vec(),
        sampled_weights: proposal.proposal_weights().to_vec(),
        truncations: proposal.truncations().to_vec(),
        shift: proposal.shift(),
        hits_per_piece: counts,
        theta,
        proposal_weights: weights,
        fallback,
    })
}

/// The reference shape of piece `i` re-conditioned on the proposal grid.
fn reference_piece(proposal: &TiltedPiecewise, i: usize) -> Result<BoundedComponent, CeError> {
    let knots = proposal.truncations();
    let p = &proposal.reference().pieces()[i];
    if p.lower() == knots[i] && p.upper() == knots[i + 1] {
        Ok(p.clone())
    } else {
        Ok(p.with_bounds(knots[i], knots[i + 1])?)
    }
}
