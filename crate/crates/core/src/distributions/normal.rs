use rand::Rng;

use super::{check_bounds, DistributionError};
use crate::math::{exp, ln, ln_1p};
use crate::special::{
    norm_cdf, norm_isf_ln, norm_ln_mass, norm_ln_pdf, norm_ln_sf, norm_quantile, one_minus_exp,
};

/// Normal distribution `N(mu, sigma²)` conditioned on `[lower, upper)`.
///
/// Untilted pieces use `mu = 0`; an exponential tilt by `θ` moves the mean to
/// `θσ²` and keeps `sigma` and the bounds. Either bound may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedNormal {
    mu: f64,
    sigma: f64,
    lower: f64,
    upper: f64,
    ln_mass: f64,
}

impl BoundedNormal {
    pub fn new(mu: f64, sigma: f64, lower: f64, upper: f64) -> Result<Self, DistributionError> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(DistributionError::InvalidParameter {
                name: "sigma",
                value: sigma,
            });
        }
        if !mu.is_finite() {
            return Err(DistributionError::InvalidParameter {
                name: "mu",
                value: mu,
            });
        }
        check_bounds(lower, upper)?;
        let ln_mass = norm_ln_mass((lower - mu) / sigma, (upper - mu) / sigma);
        if !ln_mass.is_finite() {
            return Err(DistributionError::EmptySupport { lower, upper });
        }
        Ok(Self {
            mu,
            sigma,
            lower,
            upper,
            ln_mass,
        })
    }

    /// Zero-mean bounded normal, the untilted form used for fitted pieces.
    pub fn centered(sigma: f64, lower: f64, upper: f64) -> Result<Self, DistributionError> {
        Self::new(0.0, sigma, lower, upper)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    /// `ln(Φ(β) - Φ(α))` for the standardized bounds.
    pub fn ln_mass(&self) -> f64 {
        self.ln_mass
    }

    fn alpha(&self) -> f64 {
        (self.lower - self.mu) / self.sigma
    }

    fn beta(&self) -> f64 {
        (self.upper - self.mu) / self.sigma
    }

    pub fn with_bounds(&self, lower: f64, upper: f64) -> Result<Self, DistributionError> {
        Self::new(self.mu, self.sigma, lower, upper)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !(x >= self.lower && x < self.upper) {
            return f64::NEG_INFINITY;
        }
        norm_ln_pdf((x - self.mu) / self.sigma) - ln(self.sigma) - self.ln_mass
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
        let (a, b, z) = (self.alpha(), self.beta(), (x - self.mu) / self.sigma);
        let v = if a > 0.0 {
            let la = norm_ln_sf(a);
            one_minus_exp(norm_ln_sf(z) - la) / one_minus_exp(norm_ln_sf(b) - la)
        } else if b < 0.0 {
            // Lower tail: mirror onto the upper tail of -Z.
            let (lz, la, lb) = (norm_ln_sf(-z), norm_ln_sf(-a), norm_ln_sf(-b));
            exp(lz - lb) * one_minus_exp(la - lz) / one_minus_exp(la - lb)
        } else {
            (norm_cdf(z) - norm_cdf(a)) / exp(self.ln_mass)
        };
        v.max(0.0).min(1.0)
    }

    /// Conditional quantile for `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let (a, b) = (self.alpha(), self.beta());
        let z = if a > 0.0 {
            let la = norm_ln_sf(a);
            let lq = la + ln_1p(-u * one_minus_exp(norm_ln_sf(b) - la));
            norm_isf_ln(lq)
        } else if b < 0.0 {
            let lb = norm_ln_sf(-b);
            let lq = lb + ln_1p(-(1.0 - u) * one_minus_exp(norm_ln_sf(-a) - lb));
            -norm_isf_ln(lq)
        } else {
            let pa = norm_cdf(a);
            norm_quantile(pa + u * exp(self.ln_mass))
        };
        super::clamp_into(self.mu + self.sigma * z, self.lower, self.upper)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.gen::<f64>())
    }

    pub fn mean(&self) -> f64 {
        let (a, b) = (self.alpha(), self.beta());
        let pa = if a.is_finite() {
            exp(norm_ln_pdf(a) - self.ln_mass)
        } else {
            0.0
        };
        let pb = if b.is_finite() {
            exp(norm_ln_pdf(b) - self.ln_mass)
        } else {
            0.0
        };
        self.mu + self.sigma * (pa - pb)
    }

    /// `ln E[e^{θX}] = θμ + θ²σ²/2 + ln(Φ(β-θσ) - Φ(α-θσ)) - ln(Φ(β) - Φ(α))`.
    pub fn log_mgf(&self, theta: f64) -> Result<f64, DistributionError> {
        if theta == 0.0 {
            return Ok(0.0);
        }
        if !theta.is_finite() {
            return Err(DistributionError::InvalidParameter {
                name: "theta",
                value: theta,
            });
        }
        let shift = theta * self.sigma;
        let shifted = norm_ln_mass(self.alpha() - shift, self.beta() - shift);
        Ok(theta * self.mu + 0.5 * shift * shift + shifted - self.ln_mass)
    }

    /// Exponential change of measure: mean moves by `θσ²`, scale and bounds stay.
    pub fn tilt(&self, theta: f64) -> Result<Self, DistributionError> {
        if theta == 0.0 {
            return Ok(self.clone());
        }
        if !theta.is_finite() {
            return Err(DistributionError::InvalidParameter {
                name: "theta",
                value: theta,
            });
        }
        Self::new(
            self.mu + theta * self.sigma * self.sigma,
            self.sigma,
            self.lower,
            self.upper,
        )
    }
}
