use alloc::vec::Vec;

use rand::Rng;

use super::{check_bounds, BoundedNormal, DistributionError, WEIGHT_SUM_TOLERANCE};
use crate::math::{abs, exp, ln, ln_sum_exp};

/// One component of a [`BoundedNormalMixture`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl MixtureComponent {
    pub fn centered(weight: f64, sigma: f64) -> Self {
        Self {
            weight,
            mu: 0.0,
            sigma,
        }
    }
}

/// Mixture of bounded normals sharing the support `[lower, upper)`.
///
/// Each component is normalized on the shared support on its own, so the
/// mixture density is `Σ p_j f_j(x)` with every `f_j` a proper conditional
/// density.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedNormalMixture {
    weights: Vec<f64>,
    components: Vec<BoundedNormal>,
    lower: f64,
    upper: f64,
}

impl BoundedNormalMixture {
    pub fn new(
        components: &[MixtureComponent],
        lower: f64,
        upper: f64,
    ) -> Result<Self, DistributionError> {
        if components.is_empty() {
            return Err(DistributionError::Empty("mixture components"));
        }
        check_bounds(lower, upper)?;
        let mut sum = 0.0;
        for c in components {
            if !(c.weight > 0.0 && c.weight <= 1.0) {
                return Err(DistributionError::InvalidParameter {
                    name: "mixture weight",
                    value: c.weight,
                });
            }
            sum += c.weight;
        }
        if abs(sum - 1.0) > WEIGHT_SUM_TOLERANCE {
            return Err(DistributionError::WeightsNotNormalized { sum });
        }
        let parts = components
            .iter()
            .map(|c| BoundedNormal::new(c.mu, c.sigma, lower, upper))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            weights: components.iter().map(|c| c.weight).collect(),
            components: parts,
            lower,
            upper,
        })
    }

    /// Like [`new`](Self::new) but rescales the weights to sum to one first.
    pub fn normalized(
        components: &[MixtureComponent],
        lower: f64,
        upper: f64,
    ) -> Result<Self, DistributionError> {
        let sum: f64 = components.iter().map(|c| c.weight).sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(DistributionError::WeightsNotNormalized { sum });
        }
        let scaled: Vec<_> = components
            .iter()
            .map(|c| MixtureComponent {
                weight: c.weight / sum,
                ..*c
            })
            .collect();
        Self::new(&scaled, lower, upper)
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn normals(&self) -> &[BoundedNormal] {
        &self.components
    }

    pub fn components(&self) -> Vec<MixtureComponent> {
        self.weights
            .iter()
            .zip(&self.components)
            .map(|(&weight, c)| MixtureComponent {
                weight,
                mu: c.mu(),
                sigma: c.sigma(),
            })
            .collect()
    }

    pub fn with_bounds(&self, lower: f64, upper: f64) -> Result<Self, DistributionError> {
        Self::new(&self.components(), lower, upper)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !(x >= self.lower && x < self.upper) {
            return f64::NEG_INFINITY;
        }
        if self.components.len() == 1 {
            return self.components[0].ln_pdf(x);
        }
        let mut terms = [0.0f64; 8];
        if self.components.len() <= terms.len() {
            for (t, (w, c)) in terms
                .iter_mut()
                .zip(self.weights.iter().zip(&self.components))
            {
                *t = ln(*w) + c.ln_pdf(x);
            }
            return ln_sum_exp(&terms[..self.components.len()]);
        }
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| ln(*w) + c.ln_pdf(x))
            .collect();
        ln_sum_exp(&terms)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        exp(self.ln_pdf(x))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let v: f64 = self
            .weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| w * c.cdf(x))
            .sum();
        v.max(0.0).min(1.0)
    }

    /// Conditional quantile, found by safeguarded Newton iteration on the
    /// mixture CDF. The root always lies between the smallest and largest
    /// component quantiles at the same level.
    pub fn quantile(&self, u: f64) -> f64 {
        if self.components.len() == 1 {
            return self.components[0].quantile(u);
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut guess = 0.0;
        for (w, c) in self.weights.iter().zip(&self.components) {
            let q = c.quantile(u);
            lo = lo.min(q);
            hi = hi.max(q);
            guess += w * q;
        }
        if !(hi > lo) {
            return lo;
        }
        let mut x = guess.max(lo).min(hi);
        for _ in 0..200 {
            let f = self.cdf(x) - u;
            if f == 0.0 {
                break;
            }
            if f > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let slope = self.pdf(x);
            let newton = x - f / slope;
            let next = if slope > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if abs(next - x) <= 4.0 * f64::EPSILON * abs(x).max(f64::MIN_POSITIVE)
                || hi - lo <= f64::EPSILON * abs(x)
            {
                x = next;
                break;
            }
            x = next;
        }
        super::clamp_into(x, self.lower, self.upper)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.gen::<f64>())
    }

    pub fn mean(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| w * c.mean())
            .sum()
    }

    pub fn log_mgf(&self, theta: f64) -> Result<f64, DistributionError> {
        if theta == 0.0 {
            return Ok(0.0);
        }
        let terms = self
            .weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| Ok(ln(*w) + c.log_mgf(theta)?))
            .collect::<Result<Vec<f64>, DistributionError>>()?;
        Ok(ln_sum_exp(&terms))
    }

    /// Tilts every component by the shared `θ` and reweights them by
    /// `p_j·M_j(θ)`, so the result is `e^{θx - κ(θ)}` times this density.
    pub fn tilt(&self, theta: f64) -> Result<Self, DistributionError> {
        if theta == 0.0 {
            return Ok(self.clone());
        }
        let mut log_w = Vec::with_capacity(self.len());
        let mut tilted = Vec::with_capacity(self.len());
        for (w, c) in self.weights.iter().zip(&self.components) {
            log_w.push(ln(*w) + c.log_mgf(theta)?);
            tilted.push(c.tilt(theta)?);
        }
        let total = ln_sum_exp(&log_w);
        let comps: Vec<MixtureComponent> = log_w
            .iter()
            .zip(&tilted)
            .map(|(lw, c)| MixtureComponent {
                weight: exp(lw - total).max(f64::MIN_POSITIVE),
                mu: c.mu(),
                sigma: c.sigma(),
            })
            .collect();
        Self::normalized(&comps, self.lower, self.upper)
    }
}
