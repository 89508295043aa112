//! Bounded component distributions and the piecewise mixtures built from them.
//!
//! All values here are immutable once constructed. Densities are evaluated in
//! log space (`ln_pdf`) and sampling goes through the inverse CDF of a single
//! uniform draw, so a seeded generator reproduces draws exactly.

mod empirical;
mod exponential;
mod mixture;
mod normal;
mod piecewise;

use thiserror::Error;

pub use empirical::EmpiricalDistribution;
pub use exponential::BoundedExponential;
pub use mixture::{BoundedNormalMixture, MixtureComponent};
pub use normal::BoundedNormal;
pub use piecewise::PiecewiseMixture;

use rand::Rng;

/// Weights must sum to one within this tolerance.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// Smallest rate an exponential piece may be tilted down to.
pub const MIN_TILTED_RATE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistributionError {
    #[error("invalid {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("bounds must satisfy lower < upper, got [{lower}, {upper})")]
    BoundsOrder { lower: f64, upper: f64 },
    #[error("support [{lower}, {upper}) carries no probability mass")]
    EmptySupport { lower: f64, upper: f64 },
    #[error("weights sum to {sum}, expected 1")]
    WeightsNotNormalized { sum: f64 },
    #[error("expected {expected} {what}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("truncation points must be strictly increasing (index {index})")]
    TruncationsNotIncreasing { index: usize },
    #[error("piece {index} has bounds [{lower}, {upper}) but the truncations say [{expected_lower}, {expected_upper})")]
    PieceBounds {
        index: usize,
        lower: f64,
        upper: f64,
        expected_lower: f64,
        expected_upper: f64,
    },
    #[error("probability {0} is outside [0, 1)")]
    ProbabilityOutOfRange(f64),
    #[error("tilt {theta} is not below the rate {rate}")]
    TiltTooLarge { theta: f64, rate: f64 },
    #[error("empty {0}")]
    Empty(&'static str),
}

pub(crate) fn check_bounds(lower: f64, upper: f64) -> Result<(), DistributionError> {
    if lower.is_nan() || upper.is_nan() || !(lower < upper) || lower == f64::INFINITY {
        return Err(DistributionError::BoundsOrder { lower, upper });
    }
    Ok(())
}

/// Forces `x` into the half-open interval `[lower, upper)`.
pub(crate) fn clamp_into(x: f64, lower: f64, upper: f64) -> f64 {
    if !(x >= lower) {
        lower
    } else if x >= upper {
        upper.next_down()
    } else {
        x
    }
}

/// The conditional law of one piece of a [`PiecewiseMixture`].
#[derive(Debug, Clone, PartialEq)]
pub enum BoundedComponent {
    Exponential(BoundedExponential),
    Normal(BoundedNormal),
    NormalMixture(BoundedNormalMixture),
}

impl BoundedComponent {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Exponential(_) => "bounded_exp",
            Self::Normal(_) => "bounded_normal",
            Self::NormalMixture(_) => "bounded_normal_mixture",
        }
    }

    pub fn lower(&self) -> f64 {
        match self {
            Self::Exponential(d) => d.lower(),
            Self::Normal(d) => d.lower(),
            Self::NormalMixture(d) => d.lower(),
        }
    }

    pub fn upper(&self) -> f64 {
        match self {
            Self::Exponential(d) => d.upper(),
            Self::Normal(d) => d.upper(),
            Self::NormalMixture(d) => d.upper(),
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match self {
            Self::Exponential(d) => d.ln_pdf(x),
            Self::Normal(d) => d.ln_pdf(x),
            Self::NormalMixture(d) => d.ln_pdf(x),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        crate::math::exp(self.ln_pdf(x))
    }

    /// Conditional CDF on the piece's own support.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Self::Exponential(d) => d.cdf(x),
            Self::Normal(d) => d.cdf(x),
            Self::NormalMixture(d) => d.cdf(x),
        }
    }

    /// Conditional quantile for `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        if !(u > 0.0) {
            return self.lower();
        }
        match self {
            Self::Exponential(d) => d.quantile(u),
            Self::Normal(d) => d.quantile(u),
            Self::NormalMixture(d) => d.quantile(u),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.gen::<f64>())
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Exponential(d) => d.mean(),
            Self::Normal(d) => d.mean(),
            Self::NormalMixture(d) => d.mean(),
        }
    }

    /// `κ(θ) = ln E[e^{θX}]` of the conditional law.
    pub fn log_mgf(&self, theta: f64) -> Result<f64, DistributionError> {
        match self {
            Self::Exponential(d) => d.log_mgf(theta),
            Self::Normal(d) => d.log_mgf(theta),
            Self::NormalMixture(d) => d.log_mgf(theta),
        }
    }

    /// Density proportional to `e^{θx}` times this one, on the same support.
    pub fn tilt(&self, theta: f64) -> Result<Self, DistributionError> {
        Ok(match self {
            Self::Exponential(d) => Self::Exponential(d.tilt(theta)?),
            Self::Normal(d) => Self::Normal(d.tilt(theta)?),
            Self::NormalMixture(d) => Self::NormalMixture(d.tilt(theta)?),
        })
    }

    /// Same parametric form conditioned on a different interval.
    pub fn with_bounds(&self, lower: f64, upper: f64) -> Result<Self, DistributionError> {
        Ok(match self {
            Self::Exponential(d) => Self::Exponential(d.with_bounds(lower, upper)?),
            Self::Normal(d) => Self::Normal(d.with_bounds(lower, upper)?),
            Self::NormalMixture(d) => Self::NormalMixture(d.with_bounds(lower, upper)?),
        })
    }
}

impl From<BoundedExponential> for BoundedComponent {
    fn from(d: BoundedExponential) -> Self {
        Self::Exponential(d)
    }
}

impl From<BoundedNormal> for BoundedComponent {
    fn from(d: BoundedNormal) -> Self {
        Self::Normal(d)
    }
}

impl From<BoundedNormalMixture> for BoundedComponent {
    fn from(d: BoundedNormalMixture) -> Self {
        Self::NormalMixture(d)
    }
}
