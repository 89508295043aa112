//! Maximum-likelihood fitting of bounded components and piecewise mixtures.
//!
//! The piecewise log-likelihood separates: the weights are occupancy
//! fractions and each piece is fitted on its own data. Scale and rate
//! parameters are found by 1-D maximization on a log scale; mixtures of
//! bounded normals use EM with a numeric M-step for each σ_j.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::distributions::{
    BoundedComponent, BoundedExponential, BoundedNormal, BoundedNormalMixture, DistributionError,
    MixtureComponent, PiecewiseMixture,
};
use crate::math::{exp, ln, ln_1m_exp, ln_sum_exp, sqrt, NeumaierSum};
use crate::optimize::{bracket_max, DEFAULT_TOLERANCE};
use crate::special::norm_ln_mass;

/// Smallest `rate·width` an exponential fit may return on a finite piece.
pub const MIN_RATE_WIDTH: f64 = 1e-6;
/// σ below this is treated as a collapsed mixture component.
pub const COLLAPSE_SIGMA: f64 = 1e-8;
/// Responsibility mass below this is treated as an empty component.
pub const EMPTY_MASS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("observation {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("observation {value} lies outside the support [{lower}, {upper})")]
    OutOfSupport { value: f64, lower: f64, upper: f64 },
    #[error("observation {value} falls in piece {piece}, which has zero weight")]
    ZeroWeight { piece: usize, value: f64 },
    #[error("degenerate data: {0}")]
    Degenerate(&'static str),
    #[error("mixture component {component} collapsed (sigma = {sigma})")]
    ComponentCollapse { component: usize, sigma: f64 },
    #[error("mixture component {component} has no responsibility mass ({mass})")]
    EmptyResponsibility { component: usize, mass: f64 },
    #[error("EM log-likelihood decreased at iteration {iteration}: {previous} -> {current}")]
    LikelihoodDecreased {
        iteration: usize,
        previous: f64,
        current: f64,
    },
    #[error("invalid fit configuration: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

/// Observations of one scalar variable, optionally tagged with the speed
/// segment they were collected in.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Vec<f64>,
    segment: Option<usize>,
}

impl Dataset {
    pub fn new(values: Vec<f64>) -> Result<Self, FitError> {
        if values.is_empty() {
            return Err(FitError::EmptyDataset);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(FitError::NonFinite { index, value });
        }
        Ok(Self {
            values,
            segment: None,
        })
    }

    pub fn with_segment(mut self, segment: usize) -> Self {
        self.segment = Some(segment);
        self
    }

    pub fn segment(&self) -> Option<usize> {
        self.segment
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Observations in `[lower, upper)`.
    pub fn within(&self, lower: f64, upper: f64) -> Vec<f64> {
        self.values
            .iter()
            .copied()
            .filter(|&x| x >= lower && x < upper)
            .collect()
    }
}

/// Parametric family used for one piece.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PieceFamily {
    Exponential,
    Normal,
    NormalMixture { components: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    pub max_iterations: usize,
    /// Stop once the log-likelihood improves by less than this.
    pub tolerance: f64,
    /// Starting point; the default ladder is used when `None`.
    pub initial: Option<Vec<MixtureComponent>>,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-6,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Full knot vector `γ_0 < … < γ_k`.
    pub truncations: Vec<f64>,
    /// One family per piece.
    pub families: Vec<PieceFamily>,
    pub em: EmConfig,
    /// Absolute tolerance on the log-parameter in 1-D searches.
    pub tolerance: f64,
}

impl FitConfig {
    pub fn new(truncations: Vec<f64>, families: Vec<PieceFamily>) -> Self {
        Self {
            truncations,
            families,
            em: EmConfig::default(),
            tolerance: DEFAULT_TOLERANCE,
        }
    }

    pub fn validate(&self) -> Result<(), FitError> {
        if self.truncations.len() < 2 {
            return Err(FitError::Config(
                "at least two truncation points are required",
            ));
        }
        if self.families.len() + 1 != self.truncations.len() {
            return Err(FitError::Config("need exactly one family per piece"));
        }
        if self.truncations.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(FitError::Config(
                "truncation points must be strictly increasing",
            ));
        }
        if self
            .families
            .iter()
            .any(|f| matches!(f, PieceFamily::NormalMixture { components: 0 }))
        {
            return Err(FitError::Config("a mixture needs at least one component"));
        }
        if !(self.tolerance > 0.0) || !(self.em.tolerance > 0.0) {
            return Err(FitError::Config("tolerances must be positive"));
        }
        Ok(())
    }
}

/// Heuristic interior knots at the given empirical quantile levels, e.g.
/// `[0.9, 0.99]`. Duplicate knots are dropped. This is a starting point for
/// manual knot selection, not a model-selection procedure.
pub fn quantile_knots(data: &Dataset, levels: &[f64]) -> Vec<f64> {
    let mut sorted = data.values.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    let mut knots: Vec<f64> = Vec::with_capacity(levels.len());
    for &p in levels {
        if !(p > 0.0 && p < 1.0) {
            continue;
        }
        let idx = ((p * n as f64) as usize).min(n - 1);
        let k = sorted[idx];
        if knots.last().map_or(true, |&last| k > last) {
            knots.push(k);
        }
    }
    knots
}

/// Piecewise log-likelihood `Σ_i Σ_{n∈S_i} (ln π_i + ln f_i(X_n))`.
pub fn log_likelihood(d: &PiecewiseMixture, data: &Dataset) -> Result<f64, FitError> {
    let mut total = NeumaierSum::new();
    for &x in &data.values {
        let Some(i) = d.piece_index(x) else {
            return Err(FitError::OutOfSupport {
                value: x,
                lower: d.lower(),
                upper: d.upper(),
            });
        };
        if d.weights()[i] <= 0.0 {
            return Err(FitError::ZeroWeight { piece: i, value: x });
        }
        total.add(ln(d.weights()[i]) + d.piece(i).ln_pdf(x));
    }
    Ok(total.value())
}

/// Occupancy fractions `|S_i| / N`.
pub fn fit_piece_weights(data: &Dataset, truncations: &[f64]) -> Result<Vec<f64>, FitError> {
    let counts = piece_counts(data, truncations)?;
    let n = data.len() as f64;
    Ok(counts.iter().map(|&c| c as f64 / n).collect())
}

fn piece_counts(data: &Dataset, truncations: &[f64]) -> Result<Vec<usize>, FitError> {
    if truncations.len() < 2 {
        return Err(FitError::Config(
            "at least two truncation points are required",
        ));
    }
    let (lower, upper) = (truncations[0], truncations[truncations.len() - 1]);
    let mut counts = vec![0usize; truncations.len() - 1];
    for &x in &data.values {
        if !(x >= lower && x < upper) {
            return Err(FitError::OutOfSupport {
                value: x,
                lower,
                upper,
            });
        }
        counts[truncations[1..].partition_point(|&g| g <= x)] += 1;
    }
    Ok(counts)
}

fn check_support(xs: &[f64], lower: f64, upper: f64) -> Result<(), FitError> {
    if xs.is_empty() {
        return Err(FitError::EmptyDataset);
    }
    match xs.iter().find(|&&x| !(x >= lower && x < upper)) {
        Some(&value) => Err(FitError::OutOfSupport {
            value,
            lower,
            upper,
        }),
        None => Ok(()),
    }
}

/// A fitted exponential rate and whether the search stopped on its lower limit.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialFit {
    pub distribution: BoundedExponential,
    pub at_lower_limit: bool,
}

/// Average log-likelihood of a bounded exponential with rate `rate`, given
/// the mean offset `m = x̄ - γ_1` and the width `γ_2 - γ_1`.
fn exponential_mean_ll(rate: f64, offset: f64, width: f64) -> f64 {
    let norm = if width == f64::INFINITY {
        0.0
    } else {
        ln_1m_exp(-rate * width)
    };
    ln(rate) - norm - rate * offset
}

/// MLE of the rate of a bounded exponential on `[lower, upper)`.
pub fn fit_bounded_exponential(
    xs: &[f64],
    lower: f64,
    upper: f64,
) -> Result<ExponentialFit, FitError> {
    fit_bounded_exponential_with(xs, lower, upper, DEFAULT_TOLERANCE)
}

pub fn fit_bounded_exponential_with(
    xs: &[f64],
    lower: f64,
    upper: f64,
    tolerance: f64,
) -> Result<ExponentialFit, FitError> {
    check_support(xs, lower, upper)?;
    if !lower.is_finite() {
        return Err(FitError::Config(
            "an exponential piece needs a finite lower bound",
        ));
    }
    let offset = xs
        .iter()
        .map(|&x| x - lower)
        .collect::<NeumaierSum>()
        .value()
        / xs.len() as f64;
    if !(offset > 0.0) {
        return Err(FitError::Degenerate(
            "every observation sits on the lower bound",
        ));
    }
    let width = upper - lower;
    let s_min = if width.is_finite() {
        ln(MIN_RATE_WIDTH / width)
    } else {
        ln(1e-12 / offset)
    };
    let s_max = ln(1e12 / offset);
    let start = (-ln(offset)).max(s_min);
    let best = bracket_max(
        |s| exponential_mean_ll(exp(s), offset, width),
        start,
        0.5,
        s_min,
        s_max,
        tolerance,
    );
    let rate = exp(best.argmax);
    let at_lower_limit = width.is_finite() && best.argmax <= s_min + 2.0 * tolerance;
    Ok(ExponentialFit {
        distribution: BoundedExponential::new(rate, lower, upper)?,
        at_lower_limit,
    })
}

/// Bounded exponential on `[lower, upper)` whose rate maximizes the expected
/// log-likelihood under a law with the given mean, i.e. the large-sample MLE
/// for data with that mean.
pub fn fit_bounded_exponential_to_mean(
    mean: f64,
    lower: f64,
    upper: f64,
) -> Result<ExponentialFit, FitError> {
    if !lower.is_finite() {
        return Err(FitError::Config(
            "an exponential piece needs a finite lower bound",
        ));
    }
    let offset = mean - lower;
    let width = upper - lower;
    if !(offset > 0.0) || !(offset < width) {
        return Err(FitError::Degenerate(
            "mean must lie strictly inside the support",
        ));
    }
    let s_min = if width.is_finite() {
        ln(MIN_RATE_WIDTH / width)
    } else {
        ln(1e-12 / offset)
    };
    let s_max = ln(1e12 / offset);
    let start = (-ln(offset)).max(s_min);
    let best = bracket_max(
        |s| exponential_mean_ll(exp(s), offset, width),
        start,
        0.5,
        s_min,
        s_max,
        DEFAULT_TOLERANCE,
    );
    let at_lower_limit = width.is_finite() && best.argmax <= s_min + 2.0 * DEFAULT_TOLERANCE;
    Ok(ExponentialFit {
        distribution: BoundedExponential::new(exp(best.argmax), lower, upper)?,
        at_lower_limit,
    })
}

/// Log-likelihood of zero-mean bounded normal data summarized by the
/// (possibly weighted) count `w = Σ τ_n` and `s = Σ τ_n x_n²`.
fn normal_weighted_ll(sigma: f64, w: f64, s: f64, lower: f64, upper: f64) -> f64 {
    -s / (2.0 * sigma * sigma) - w * ln(sigma) - w * norm_ln_mass(lower / sigma, upper / sigma)
}

/// Maximizes [`normal_weighted_ll`] over `ln σ`, starting from `start`.
fn maximize_sigma(w: f64, s: f64, lower: f64, upper: f64, start: f64, tolerance: f64) -> f64 {
    let rms = sqrt(s / w);
    let (s_min, s_max) = (ln(rms * 1e-6), ln(rms * 1e6));
    let best = bracket_max(
        |t| normal_weighted_ll(exp(t), w, s, lower, upper),
        ln(start).max(s_min).min(s_max),
        0.25,
        s_min,
        s_max,
        tolerance,
    );
    exp(best.argmax)
}

/// MLE of σ for a zero-mean bounded normal on `[lower, upper)`.
pub fn fit_bounded_normal(xs: &[f64], lower: f64, upper: f64) -> Result<BoundedNormal, FitError> {
    fit_bounded_normal_with(xs, lower, upper, DEFAULT_TOLERANCE)
}

pub fn fit_bounded_normal_with(
    xs: &[f64],
    lower: f64,
    upper: f64,
    tolerance: f64,
) -> Result<BoundedNormal, FitError> {
    check_support(xs, lower, upper)?;
    let s = xs.iter().map(|x| x * x).collect::<NeumaierSum>().value();
    if !(s > 0.0) {
        return Err(FitError::Degenerate("all observations are zero"));
    }
    let w = xs.len() as f64;
    let sigma = maximize_sigma(w, s, lower, upper, sqrt(s / w), tolerance);
    Ok(BoundedNormal::centered(sigma, lower, upper)?)
}

/// Result of an EM fit, with the log-likelihood after every iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct EmFit {
    pub mixture: BoundedNormalMixture,
    pub log_likelihood: f64,
    /// `trace[0]` is the log-likelihood at the starting point.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Posterior membership probabilities `τ_n^j`, one row per observation.
pub fn responsibilities(mixture: &BoundedNormalMixture, xs: &[f64]) -> Vec<Vec<f64>> {
    let log_w: Vec<f64> = mixture.weights().iter().map(|&w| ln(w)).collect();
    xs.iter()
        .map(|&x| {
            let terms: Vec<f64> = log_w
                .iter()
                .zip(mixture.normals())
                .map(|(lw, c)| lw + c.ln_pdf(x))
                .collect();
            let total = ln_sum_exp(&terms);
            terms.iter().map(|t| exp(t - total)).collect()
        })
        .collect()
}

struct EStep {
    log_likelihood: f64,
    mass: Vec<f64>,
    second_moment: Vec<f64>,
}

fn e_step(mixture: &BoundedNormalMixture, xs: &[f64]) -> EStep {
    let m = mixture.len();
    let log_w: Vec<f64> = mixture.weights().iter().map(|&w| ln(w)).collect();
    let mut ll = NeumaierSum::new();
    let mut mass = vec![NeumaierSum::new(); m];
    let mut second = vec![NeumaierSum::new(); m];
    let mut terms = vec![0.0; m];
    for &x in xs {
        for (t, (lw, c)) in terms.iter_mut().zip(log_w.iter().zip(mixture.normals())) {
            *t = lw + c.ln_pdf(x);
        }
        let total = ln_sum_exp(&terms);
        ll.add(total);
        for j in 0..m {
            let tau = exp(terms[j] - total);
            mass[j].add(tau);
            second[j].add(tau * x * x);
        }
    }
    EStep {
        log_likelihood: ll.value(),
        mass: mass.iter().map(NeumaierSum::value).collect(),
        second_moment: second.iter().map(NeumaierSum::value).collect(),
    }
}

fn initial_components(xs: &[f64], m: usize) -> Vec<MixtureComponent> {
    let n = xs.len() as f64;
    let rms = sqrt(xs.iter().map(|x| x * x).sum::<f64>() / n);
    (0..m)
        .map(|j| {
            let ladder = exp((j as f64 - 0.5 * (m as f64 - 1.0)) * core::f64::consts::LN_2);
            MixtureComponent::centered(1.0 / m as f64, rms * ladder)
        })
        .collect()
}

/// Fits a mixture of `m` zero-mean bounded normals on `[lower, upper)` by EM.
pub fn fit_mixture_em(
    xs: &[f64],
    lower: f64,
    upper: f64,
    m: usize,
    config: &EmConfig,
) -> Result<EmFit, FitError> {
    fit_mixture_em_with(xs, lower, upper, m, config, DEFAULT_TOLERANCE)
}

pub fn fit_mixture_em_with(
    xs: &[f64],
    lower: f64,
    upper: f64,
    m: usize,
    config: &EmConfig,
    tolerance: f64,
) -> Result<EmFit, FitError> {
    check_support(xs, lower, upper)?;
    if m == 0 {
        return Err(FitError::Config("a mixture needs at least one component"));
    }
    if xs.iter().all(|&x| x == 0.0) {
        return Err(FitError::Degenerate("all observations are zero"));
    }
    let start = match &config.initial {
        Some(init) if init.len() == m => init.clone(),
        Some(_) => {
            return Err(FitError::Config(
                "initial mixture has the wrong number of components",
            ))
        }
        None => initial_components(xs, m),
    };
    let mut mixture = BoundedNormalMixture::normalized(&start, lower, upper)?;
    let n = xs.len() as f64;
    let mut stats = e_step(&mixture, xs);
    let mut trace = vec![stats.log_likelihood];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iterations {
        iterations += 1;
        let mut next = Vec::with_capacity(m);
        for (j, comp) in mixture.normals().iter().enumerate() {
            let (w, s) = (stats.mass[j], stats.second_moment[j]);
            if !(w >= EMPTY_MASS) || !(s > 0.0) {
                return Err(FitError::EmptyResponsibility {
                    component: j,
                    mass: w,
                });
            }
            let old = comp.sigma();
            let candidate = maximize_sigma(w, s, lower, upper, old, tolerance);
            // Never accept a step that lowers the expected complete-data
            // likelihood; this keeps EM monotone despite a finite tolerance.
            let sigma = if normal_weighted_ll(candidate, w, s, lower, upper)
                >= normal_weighted_ll(old, w, s, lower, upper)
            {
                candidate
            } else {
                old
            };
            if !(sigma >= COLLAPSE_SIGMA) {
                return Err(FitError::ComponentCollapse {
                    component: j,
                    sigma,
                });
            }
            next.push(MixtureComponent::centered(w / n, sigma));
        }
        mixture = BoundedNormalMixture::normalized(&next, lower, upper)?;
        let previous = stats.log_likelihood;
        stats = e_step(&mixture, xs);
        trace.push(stats.log_likelihood);
        let slack = 1e-9 + 1e-13 * previous.abs();
        if stats.log_likelihood < previous - slack {
            return Err(FitError::LikelihoodDecreased {
                iteration: iterations,
                previous,
                current: stats.log_likelihood,
            });
        }
        if stats.log_likelihood - previous < config.tolerance {
            converged = true;
            break;
        }
    }
    Ok(EmFit {
        log_likelihood: stats.log_likelihood,
        mixture,
        trace,
        iterations,
        converged,
    })
}

/// Per-piece diagnostics of [`fit_piecewise`].
#[derive(Debug, Clone, PartialEq)]
pub struct PieceReport {
    pub index: usize,
    pub family: PieceFamily,
    pub count: usize,
    pub weight: f64,
    /// True when the piece was empty and its parameters are a placeholder.
    pub skipped: bool,
    /// True when a rate fit stopped on its lower limit.
    pub at_bound: bool,
    pub em_iterations: Option<usize>,
    pub em_converged: Option<bool>,
    /// Piece contribution `Σ_{n∈S_i} (ln π_i + ln f_i(X_n))`.
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseFit {
    pub model: PiecewiseMixture,
    pub pieces: Vec<PieceReport>,
    pub log_likelihood: f64,
}

fn placeholder(family: PieceFamily, lower: f64, upper: f64) -> Result<BoundedComponent, FitError> {
    let width = upper - lower;
    let scale = if width.is_finite() {
        width
    } else {
        lower.abs().max(1.0)
    };
    Ok(match family {
        PieceFamily::Exponential => BoundedExponential::new(1.0 / scale, lower, upper)?.into(),
        PieceFamily::Normal => BoundedNormal::centered(scale, lower, upper)?.into(),
        PieceFamily::NormalMixture { components } => {
            let comps: Vec<_> = (0..components)
                .map(|j| {
                    MixtureComponent::centered(1.0 / components as f64, scale * (j + 1) as f64)
                })
                .collect();
            BoundedNormalMixture::normalized(&comps, lower, upper)?.into()
        }
    })
}

/// Fits weights by occupancy and every non-empty piece by its family's MLE.
pub fn fit_piecewise(data: &Dataset, config: &FitConfig) -> Result<PiecewiseFit, FitError> {
    config.validate()?;
    let knots = &config.truncations;
    let counts = piece_counts(data, knots)?;
    let n = data.len() as f64;
    let weights: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let mut pieces = Vec::with_capacity(counts.len());
    let mut reports = Vec::with_capacity(counts.len());
    for (i, (&family, &count)) in config.families.iter().zip(&counts).enumerate() {
        let (lo, hi) = (knots[i], knots[i + 1]);
        let mut report = PieceReport {
            index: i,
            family,
            count,
            weight: weights[i],
            skipped: count == 0,
            at_bound: false,
            em_iterations: None,
            em_converged: None,
            log_likelihood: 0.0,
        };
        if count == 0 {
            pieces.push(placeholder(family, lo, hi)?);
            reports.push(report);
            continue;
        }
        let xs = data.within(lo, hi);
        let piece: BoundedComponent = match family {
            PieceFamily::Exponential => {
                let fit = fit_bounded_exponential_with(&xs, lo, hi, config.tolerance)?;
                report.at_bound = fit.at_lower_limit;
                fit.distribution.into()
            }
            PieceFamily::Normal => fit_bounded_normal_with(&xs, lo, hi, config.tolerance)?.into(),
            PieceFamily::NormalMixture { components } => {
                let fit =
                    fit_mixture_em_with(&xs, lo, hi, components, &config.em, config.tolerance)?;
                report.em_iterations = Some(fit.iterations);
                report.em_converged = Some(fit.converged);
                fit.mixture.into()
            }
        };
        let lw = ln(weights[i]);
        report.log_likelihood = xs
            .iter()
            .map(|&x| lw + piece.ln_pdf(x))
            .collect::<NeumaierSum>()
            .value();
        pieces.push(piece);
        reports.push(report);
    }
    let model = PiecewiseMixture::new(knots.clone(), weights, pieces)?;
    let log_likelihood = reports
        .iter()
        .map(|r| r.log_likelihood)
        .collect::<NeumaierSum>()
        .value();
    Ok(PiecewiseFit {
        model,
        pieces: reports,
        log_likelihood,
    })
}
