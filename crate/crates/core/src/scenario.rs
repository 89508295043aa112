//! The cut-in lane-change scenario.
//!
//! A lead vehicle cuts in at speed `v_L`, range `R_L` and time to collision
//! `TTC_L`. The model draws `v_L` from an empirical distribution, `R⁻¹` from
//! one piecewise model and `TTC⁻¹` from a piecewise model chosen by the
//! speed segment of `v_L`. The automated follower holds its speed until the
//! instantaneous TTC drops below a trigger, waits a reaction delay, then
//! brakes at a fixed deceleration.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

use crate::cross_entropy::RareEvent;
use crate::distributions::{
    BoundedExponential, BoundedNormalMixture, DistributionError, EmpiricalDistribution,
    MixtureComponent, PiecewiseMixture,
};
use crate::math::{ceil, exp};
use crate::montecarlo::{Draw, Experiment, McError};
use crate::stream_rng;
use crate::tilting::TiltedPiecewise;

/// Closed-open lead-speed bands in m/s.
pub const SPEED_SEGMENTS: [(f64, f64); 3] = [(5.0, 15.0), (15.0, 25.0), (25.0, 35.0)];

/// Range and TTC units of one level step of [`CutInEvent`].
pub const RANGE_SCALE_M: f64 = 0.1;
pub const TTC_SCALE_S: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("lead speed {0} m/s is outside every speed segment")]
    SpeedOutOfRange(f64),
    #[error("invalid initial state: {0}")]
    InvalidState(&'static str),
    #[error("invalid controller configuration: {0}")]
    Controller(&'static str),
    #[error("expected {expected} TTC models, got {got}")]
    SegmentCount { expected: usize, got: usize },
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

/// Index of the speed segment containing `v`.
pub fn segment_of(v: f64) -> Option<usize> {
    SPEED_SEGMENTS
        .iter()
        .position(|&(lo, hi)| v >= lo && v < hi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaneChangeModel {
    pub speed: EmpiricalDistribution,
    pub range_inv: PiecewiseMixture,
    /// One per entry of [`SPEED_SEGMENTS`].
    pub ttc_inv: Vec<PiecewiseMixture>,
}

impl LaneChangeModel {
    pub fn new(
        speed: EmpiricalDistribution,
        range_inv: PiecewiseMixture,
        ttc_inv: Vec<PiecewiseMixture>,
    ) -> Result<Self, ScenarioError> {
        if ttc_inv.len() != SPEED_SEGMENTS.len() {
            return Err(ScenarioError::SegmentCount {
                expected: SPEED_SEGMENTS.len(),
                got: ttc_inv.len(),
            });
        }
        if let Some(&v) = speed.values().iter().find(|&&v| segment_of(v).is_none()) {
            return Err(ScenarioError::SpeedOutOfRange(v));
        }
        if !(range_inv.lower() >= 0.0) || ttc_inv.iter().any(|m| !(m.lower() >= 0.0)) {
            return Err(ScenarioError::InvalidState(
                "inverse range and TTC models must have nonnegative support",
            ));
        }
        Ok(Self {
            speed,
            range_inv,
            ttc_inv,
        })
    }

    /// Probability of each speed segment under the speed distribution.
    pub fn segment_probabilities(&self) -> Vec<f64> {
        SPEED_SEGMENTS
            .iter()
            .map(|&(lo, hi)| self.speed.mass_in(lo, hi))
            .collect()
    }

    /// Speed distribution conditioned on segment `j`; an error if it has no mass.
    pub fn segment_speed(&self, j: usize) -> Result<EmpiricalDistribution, ScenarioError> {
        let (lo, hi) = SPEED_SEGMENTS[j];
        Ok(self.speed.restricted(lo, hi)?)
    }

    pub fn sample_scenario<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
    ) -> Result<CutInInitialState, ScenarioError> {
        let v = self.speed.sample(rng);
        let seg = segment_of(v).ok_or(ScenarioError::SpeedOutOfRange(v))?;
        let r_inv = self.range_inv.sample(rng);
        let t_inv = self.ttc_inv[seg].sample(rng);
        CutInInitialState::from_draws(v, r_inv, t_inv)
    }
}

/// One lane-change event as recorded in event files.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneChangeEvent {
    pub v_lead_mps: f64,
    pub range_m: f64,
    /// Infinite when the vehicles are not closing.
    pub ttc_s: f64,
}

impl LaneChangeEvent {
    pub fn range_inv(&self) -> f64 {
        1.0 / self.range_m
    }

    pub fn ttc_inv(&self) -> f64 {
        1.0 / self.ttc_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutInInitialState {
    pub v_lead: f64,
    pub range: f64,
    /// `Ṙ₀ = −R₀/TTC₀`, negative while closing.
    pub range_rate: f64,
    pub v_follow: f64,
}

impl CutInInitialState {
    /// From `v_L`, `R⁻¹` and `TTC⁻¹`. A zero `TTC⁻¹` means no closing speed.
    pub fn from_draws(v_lead: f64, range_inv: f64, ttc_inv: f64) -> Result<Self, ScenarioError> {
        if !(range_inv > 0.0) || !range_inv.is_finite() {
            return Err(ScenarioError::InvalidState(
                "inverse range must be positive and finite",
            ));
        }
        if !(ttc_inv >= 0.0) || !ttc_inv.is_finite() {
            return Err(ScenarioError::InvalidState(
                "inverse TTC must be nonnegative and finite",
            ));
        }
        let range = 1.0 / range_inv;
        let range_rate = -range * ttc_inv;
        let s = Self {
            v_lead,
            range,
            range_rate,
            v_follow: v_lead - range_rate,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if ![self.v_lead, self.range, self.range_rate, self.v_follow]
            .iter()
            .all(|x| x.is_finite())
        {
            return Err(ScenarioError::InvalidState("non-finite state"));
        }
        if !(self.range > 0.0) {
            return Err(ScenarioError::InvalidState("range must be positive"));
        }
        if self.v_lead < 0.0 || self.v_follow < 0.0 {
            return Err(ScenarioError::InvalidState("speeds must be nonnegative"));
        }
        Ok(())
    }

    pub fn ttc(&self) -> f64 {
        instantaneous_ttc(self.range, self.range_rate)
    }
}

/// `−R/Ṙ` while closing, `+∞` otherwise.
pub fn instantaneous_ttc(range: f64, range_rate: f64) -> f64 {
    if range_rate < 0.0 {
        range / -range_rate
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerConfig {
    pub reaction_delay_s: f64,
    /// Braking is requested once the instantaneous TTC drops below this; 0 disables braking.
    pub trigger_ttc_s: f64,
    pub max_decel_mps2: f64,
    pub timestep_s: f64,
    pub horizon_s: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            reaction_delay_s: 0.3,
            trigger_ttc_s: 3.0,
            max_decel_mps2: 9.5,
            timestep_s: 0.01,
            horizon_s: 10.0,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.timestep_s > 0.0 && self.timestep_s <= 0.1) {
            return Err(ScenarioError::Controller("timestep must lie in (0, 0.1] s"));
        }
        if !(self.horizon_s > 0.0) || !self.horizon_s.is_finite() {
            return Err(ScenarioError::Controller("horizon must be positive"));
        }
        if !(self.reaction_delay_s >= 0.0)
            || !(self.trigger_ttc_s >= 0.0)
            || !(self.max_decel_mps2 > 0.0)
        {
            return Err(ScenarioError::Controller(
                "delay and trigger must be nonnegative, deceleration positive",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOutcome {
    pub min_range: f64,
    pub min_ttc: f64,
    pub crash_time: Option<f64>,
    pub trigger_time: Option<f64>,
    pub braking_time: Option<f64>,
}

impl SimOutcome {
    pub fn crashed(&self) -> bool {
        self.crash_time.is_some()
    }
}

/// First `n` in `[lo, hi]` with `pred(n)`, for a predicate that stays true
/// once true; `hi + 1` if none.
fn first_step(lo: u64, hi: u64, pred: impl Fn(u64) -> bool) -> u64 {
    let (mut a, mut b) = (lo, hi + 1);
    while a < b {
        let m = a + (b - a) / 2;
        if pred(m) {
            b = m;
        } else {
            a = m + 1;
        }
    }
    a
}

fn run(
    s: &CutInInitialState,
    c: &ControllerConfig,
    mut path: Option<&mut Vec<(f64, f64)>>,
) -> Result<SimOutcome, ScenarioError> {
    s.validate()?;
    c.validate()?;
    let dt = c.timestep_s;
    let steps = ceil(c.horizon_s / dt - 1e-9) as u64;
    let mut out = SimOutcome {
        min_range: s.range,
        min_ttc: s.ttc(),
        crash_time: None,
        trigger_time: None,
        braking_time: None,
    };
    let w = -s.range_rate;
    if !(w > 0.0) {
        if let Some(p) = path.as_deref_mut() {
            p.push((0.0, s.range));
        }
        return Ok(out);
    }

    // Constant closing speed until braking: the Euler update is exact there.
    let r_at = |n: u64| s.range - w * (n as f64 * dt);
    let trigger = if c.trigger_ttc_s > 0.0 {
        first_step(0, steps, |n| r_at(n) < c.trigger_ttc_s * w)
    } else {
        steps + 1
    };
    let crash = first_step(0, steps, |n| r_at(n) <= 0.0);
    let delay_steps = ceil(c.reaction_delay_s / dt - 1e-9) as u64;
    let brake = trigger.saturating_add(delay_steps);
    let end = brake.min(crash).min(steps);
    if let Some(p) = path.as_deref_mut() {
        p.extend((0..=end).map(|n| (n as f64 * dt, r_at(n))));
    }
    if trigger <= steps {
        out.trigger_time = Some(trigger as f64 * dt);
    }
    let r_end = r_at(end);
    out.min_range = r_end;
    out.min_ttc = r_end / w;
    if crash == end {
        out.crash_time = Some(end as f64 * dt);
        return Ok(out);
    }
    if end == steps {
        return Ok(out);
    }

    out.braking_time = Some(end as f64 * dt);
    let (mut n, mut range, mut v_f) = (end, r_end, s.v_follow);
    while n < steps {
        let rate = s.v_lead - v_f;
        if rate >= 0.0 {
            break;
        }
        range += rate * dt;
        v_f = (v_f - c.max_decel_mps2 * dt).max(0.0);
        n += 1;
        if let Some(p) = path.as_deref_mut() {
            p.push((n as f64 * dt, range));
        }
        out.min_range = out.min_range.min(range);
        let ttc = if range <= 0.0 {
            range
        } else {
            instantaneous_ttc(range, s.v_lead - v_f)
        };
        out.min_ttc = out.min_ttc.min(ttc);
        if range <= 0.0 {
            out.crash_time = Some(n as f64 * dt);
            break;
        }
    }
    Ok(out)
}

/// Simulates the cut-in and returns the minimum range and TTC.
pub fn simulate_cut_in(
    s: &CutInInitialState,
    c: &ControllerConfig,
) -> Result<SimOutcome, ScenarioError> {
    run(s, c, None)
}

/// `(t, R)` at every timestep until a crash, the end of the closing motion
/// or the horizon.
pub fn range_trajectory(
    s: &CutInInitialState,
    c: &ControllerConfig,
) -> Result<Vec<(f64, f64)>, ScenarioError> {
    let mut path = Vec::new();
    run(s, c, Some(&mut path))?;
    Ok(path)
}

pub fn crash_indicator(s: &CutInInitialState, c: &ControllerConfig) -> Result<bool, ScenarioError> {
    Ok(simulate_cut_in(s, c)?.crashed())
}

/// Range reaches `t_range` or TTC reaches `t_ttc` within the horizon.
pub fn relaxed_indicator(
    s: &CutInInitialState,
    c: &ControllerConfig,
    t_range: f64,
    t_ttc: f64,
) -> Result<bool, ScenarioError> {
    let o = simulate_cut_in(s, c)?;
    Ok(o.min_range <= t_range || o.min_ttc <= t_ttc)
}

/// `min(min range / 0.1 m, min TTC / 1 s)`: the relaxed event at level `ℓ`
/// has thresholds `t_R = 0.1·ℓ m` and `t_TTC = ℓ s`, and level 0 is a crash.
/// A small range unit keeps early levels from being met by cut-ins that
/// simply start very close, which would pull the range proposal away from
/// the fast-closing crashes.
pub fn event_score(o: &SimOutcome) -> f64 {
    (o.min_range / RANGE_SCALE_M).min(o.min_ttc / TTC_SCALE_S)
}

/// Cut-in crash event for one speed segment; inputs are `[R⁻¹, TTC⁻¹]` and
/// `v_L` is drawn untilted from the segment's speed distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct CutInEvent {
    pub speed: EmpiricalDistribution,
    pub controller: ControllerConfig,
}

impl RareEvent for CutInEvent {
    fn score<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> f64 {
        let v = self.speed.sample(rng);
        match CutInInitialState::from_draws(v, x[0], x[1])
            .and_then(|s| simulate_cut_in(&s, &self.controller))
        {
            Ok(o) => event_score(&o),
            Err(_) => f64::INFINITY,
        }
    }

    fn thresholds(&self, level: f64) -> Vec<f64> {
        vec![level * RANGE_SCALE_M, level * TTC_SCALE_S]
    }
}

/// Proposals for `R⁻¹` and `TTC⁻¹`, one pair per speed segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentProposals {
    pub range_inv: Vec<TiltedPiecewise>,
    pub ttc_inv: Vec<TiltedPiecewise>,
}

impl SegmentProposals {
    /// Sampling from the model itself.
    pub fn identity(model: &LaneChangeModel) -> Self {
        Self {
            range_inv: vec![
                TiltedPiecewise::identity(model.range_inv.clone());
                SPEED_SEGMENTS.len()
            ],
            ttc_inv: model
                .ttc_inv
                .iter()
                .cloned()
                .map(TiltedPiecewise::identity)
                .collect(),
        }
    }
}

/// Crash probability experiment over the whole model: `v_L` untilted, then
/// `R⁻¹` and `TTC⁻¹` from the proposals of its segment.
pub struct ScenarioExperiment<'a> {
    pub model: &'a LaneChangeModel,
    pub proposals: &'a SegmentProposals,
    pub controller: ControllerConfig,
}

impl Experiment for ScenarioExperiment<'_> {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Draw, McError> {
        let v = self.model.speed.sample(rng);
        let seg = segment_of(v).expect("speed support checked by LaneChangeModel::new");
        let (pr, pt) = (&self.proposals.range_inv[seg], &self.proposals.ttc_inv[seg]);
        let r_inv = pr.sample(rng);
        let t_inv = pt.sample(rng);
        let crashed = CutInInitialState::from_draws(v, r_inv, t_inv)
            .and_then(|s| crash_indicator(&s, &self.controller))
            .unwrap_or(false);
        if !crashed {
            return Ok(Draw {
                value: 0.0,
                hit: false,
            });
        }
        let ln_ratio = pr.ln_likelihood_ratio(&self.model.range_inv, r_inv)?
            + pt.ln_likelihood_ratio(&self.model.ttc_inv[seg], t_inv)?;
        Ok(Draw {
            value: exp(ln_ratio),
            hit: true,
        })
    }
}

fn speed_distribution() -> EmpiricalDistribution {
    // 0.1 m/s grid; segment masses 0.30, 0.45, 0.25.
    let mut values = Vec::with_capacity(300);
    let mut counts = Vec::with_capacity(300);
    for (j, per_point) in [6u64, 9, 5].into_iter().enumerate() {
        let lo = SPEED_SEGMENTS[j].0;
        for i in 0..100 {
            values.push((10.0 * lo + 0.5 + i as f64) / 10.0);
            counts.push(per_point);
        }
    }
    EmpiricalDistribution::new(&values, &counts).expect("valid speed grid")
}

fn range_inv_truth() -> PiecewiseMixture {
    let knots = [0.0125, 0.04, 0.1, f64::INFINITY];
    let rates = [80.0, 40.0, 25.0];
    let pieces = (0..3)
        .map(|i| {
            BoundedExponential::new(rates[i], knots[i], knots[i + 1])
                .expect("valid piece")
                .into()
        })
        .collect();
    PiecewiseMixture::new(knots.to_vec(), vec![0.2, 0.6, 0.2], pieces).expect("valid model")
}

fn ttc_inv_truth(seg: usize) -> PiecewiseMixture {
    let body = [
        [(0.6, 0.05), (0.4, 0.14)],
        [(0.6, 0.04), (0.4, 0.12)],
        [(0.65, 0.035), (0.35, 0.10)],
    ][seg];
    let tail_rate = [22.0, 24.0, 26.0][seg];
    let comps: Vec<MixtureComponent> = body
        .iter()
        .map(|&(p, s)| MixtureComponent::centered(p, s))
        .collect();
    let mixture = BoundedNormalMixture::new(&comps, 0.0, 0.25).expect("valid body");
    let tail = BoundedExponential::new(tail_rate, 0.25, f64::INFINITY).expect("valid tail");
    PiecewiseMixture::new(
        vec![0.0, 0.25, f64::INFINITY],
        vec![0.97, 0.03],
        vec![mixture.into(), tail.into()],
    )
    .expect("valid model")
}

/// The fixed synthetic "true" lane-change model and its controller.
///
/// `R⁻¹` on `[0.0125, 0.04, 0.1, ∞)` with weights (0.2, 0.6, 0.2) and
/// bounded exponential rates (80, 40, 25); `TTC⁻¹` per segment on
/// `[0, 0.25, ∞)` with a two-normal body of weight 0.97 and exponential
/// tails of rate 22, 24, 26. Lead speeds are uniform on a 0.1 m/s grid
/// within each segment with segment masses (0.30, 0.45, 0.25). With the
/// default controller the crash probability is about 1.0e-5.
pub fn synthetic_ground_truth() -> (LaneChangeModel, ControllerConfig) {
    let model = LaneChangeModel::new(
        speed_distribution(),
        range_inv_truth(),
        (0..3).map(ttc_inv_truth).collect(),
    )
    .expect("valid ground truth");
    (model, ControllerConfig::default())
}

/// Draws `n` lane-change events from `model`.
pub fn generate_events(
    model: &LaneChangeModel,
    n: usize,
    seed: u64,
) -> Result<Vec<LaneChangeEvent>, ScenarioError> {
    let mut rng = stream_rng(seed, 0);
    (0..n)
        .map(|_| {
            let s = model.sample_scenario(&mut rng)?;
            Ok(LaneChangeEvent {
                v_lead_mps: s.v_lead,
                range_m: s.range,
                ttc_s: s.ttc(),
            })
        })
        .collect()
}

/// Proposal family tuned by the cross-entropy method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProposalFamily {
    /// Tilts and reweights every piece of the model.
    Piecewise,
    /// One exponential over the whole support of each input.
    Single,
}

impl ProposalFamily {
    pub fn method(self) -> crate::montecarlo::Method {
        match self {
            ProposalFamily::Piecewise => crate::montecarlo::Method::IsPiecewise,
            ProposalFamily::Single => crate::montecarlo::Method::IsSingle,
        }
    }

    /// Untilted starting proposal of this family for `target`.
    pub fn initial(
        self,
        target: &PiecewiseMixture,
    ) -> Result<TiltedPiecewise, crate::tilting::TiltError> {
        match self {
            ProposalFamily::Piecewise => Ok(TiltedPiecewise::identity(target.clone())),
            ProposalFamily::Single => crate::tilting::single_exponential_family(target),
        }
    }
}

/// Runs the cross-entropy method separately for each speed segment, with
/// inputs `[R⁻¹, TTC⁻¹]`, and collects the final proposals.
pub fn optimize_proposals(
    model: &LaneChangeModel,
    controller: &ControllerConfig,
    family: ProposalFamily,
    config: &crate::cross_entropy::CeConfig,
) -> Result<(SegmentProposals, Vec<crate::cross_entropy::CeRun>), crate::cross_entropy::CeError> {
    use crate::cross_entropy::{ce_iterate, CeConfig, CeError, CeVariable};
    let mut range_inv = Vec::new();
    let mut ttc_inv = Vec::new();
    let mut runs = Vec::new();
    for (seg, ttc_model) in model.ttc_inv.iter().enumerate() {
        let speed = model
            .segment_speed(seg)
            .map_err(|_| CeError::Config("speed segment without data"))?;
        let event = CutInEvent {
            speed,
            controller: *controller,
        };
        let vars = vec![
            CeVariable::with_proposal(
                "range_inv",
                model.range_inv.clone(),
                family.initial(&model.range_inv)?,
            ),
            CeVariable::with_proposal("ttc_inv", ttc_model.clone(), family.initial(ttc_model)?),
        ];
        let seeded = CeConfig {
            seed: config
                .seed
                .wrapping_add((seg as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
            ..config.clone()
        };
        let run = ce_iterate(vars, &event, &seeded)?;
        range_inv.push(run.variables[0].proposal.clone());
        ttc_inv.push(run.variables[1].proposal.clone());
        runs.push(run);
    }
    Ok((SegmentProposals { range_inv, ttc_inv }, runs))
}
