use rand::Rng;

use super::{check_bounds, DistributionError, MIN_TILTED_RATE};
use crate::math::{exp, exp_m1, ln, ln_1p};
use crate::special::one_minus_exp;

/// Exponential distribution with rate `rate` conditioned on `[lower, upper)`.
///
/// `upper` may be `+inf`. Everything is expressed relative to `lower`, so
/// the normalizer `1 - e^{-rate·(upper-lower)}` never underflows.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedExponential {
    rate: f64,
    lower: f64,
    upper: f64,
    ln_norm: f64,
}

impl BoundedExponential {
    pub fn new(rate: f64, lower: f64, upper: f64) -> Result<Self, DistributionError> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(DistributionError::InvalidParameter {
                name: "rate",
                value: rate,
            });
        }
        if !lower.is_finite() {
            return Err(DistributionError::InvalidParameter {
                name: "lower",
                value: lower,
            });
        }
        check_bounds(lower, upper)?;
        let width = upper - lower;
        let ln_norm = if width == f64::INFINITY {
            0.0
        } else {
            ln(one_minus_exp(-rate * width))
        };
        Ok(Self {
            rate,
            lower,
            upper,
            ln_norm,
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn with_bounds(&self, lower: f64, upper: f64) -> Result<Self, DistributionError> {
        Self::new(self.rate, lower, upper)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !(x >= self.lower && x < self.upper) {
            return f64::NEG_INFINITY;
        }
        ln(self.rate) - self.rate * (x - self.lower) - self.ln_norm
    }

    pub fn pdf(&self, x: f64) -> f64 {
        exp(self.ln_pdf(x))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if !(x > self.lower) {
            return 0.0;
        }
        if x >= self.upper {
            return 1.0;
        }
        one_minus_exp(-self.rate * (x - self.lower)) / exp(self.ln_norm)
    }

    /// Conditional quantile for `u ∈ [0, 1)`; the result stays inside `[lower, upper)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let scaled = u * exp_m1(-self.rate * self.width());
        let x = self.lower - ln_1p(scaled) / self.rate;
        super::clamp_into(x, self.lower, self.upper)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.gen::<f64>())
    }

    pub fn mean(&self) -> f64 {
        let w = self.width();
        let tail = if w == f64::INFINITY {
            0.0
        } else {
            let e = exp(-self.rate * w);
            w * e / one_minus_exp(-self.rate * w)
        };
        self.lower + 1.0 / self.rate - tail
    }

    /// Log moment-generating function `ln E[e^{θX}]`; finite while `θ < rate`.
    pub fn log_mgf(&self, theta: f64) -> Result<f64, DistributionError> {
        if theta == 0.0 {
            return Ok(0.0);
        }
        let tilted = self.tilted_rate(theta)?;
        let w = self.width();
        let ratio = if w == f64::INFINITY {
            0.0
        } else {
            ln(one_minus_exp(-tilted * w)) - self.ln_norm
        };
        Ok(theta * self.lower + ln(self.rate) - ln(tilted) + ratio)
    }

    /// Exponential change of measure: rate `λ - θ` on the same support.
    pub fn tilt(&self, theta: f64) -> Result<Self, DistributionError> {
        if theta == 0.0 {
            return Ok(self.clone());
        }
        Self::new(self.tilted_rate(theta)?, self.lower, self.upper)
    }

    fn tilted_rate(&self, theta: f64) -> Result<f64, DistributionError> {
        if !theta.is_finite() || theta > self.rate - MIN_TILTED_RATE {
            return Err(DistributionError::TiltTooLarge {
                theta,
                rate: self.rate,
            });
        }
        Ok(self.rate - theta)
    }
}
