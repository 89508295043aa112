//! Importance-sampling proposals built by exponentially tilting each piece
//! of a piecewise mixture and reweighting the pieces.
//!
//! A [`TiltedPiecewise`] is described by a reference model (whose piece
//! shapes are tilted), one tilt `θ_i` and one weight `π̃_i` per piece, and an
//! optional shift of the truncation points. Likelihood ratios are always
//! taken against a separately supplied target density, which is usually but
//! not necessarily the reference itself.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

use crate::distributions::{BoundedComponent, DistributionError, PiecewiseMixture};
use crate::fitting::{fit_bounded_exponential_to_mean, FitError};
use crate::math::exp;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TiltError {
    #[error("expected {expected} {what}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("proposal density is zero at {x} where the target density is positive")]
    SupportMismatch { x: f64 },
    #[error("likelihood ratio at {x} is not finite")]
    NonFiniteRatio { x: f64 },
    #[error("truncation shift {shift} collapses the first piece")]
    InvalidShift { shift: f64 },
    #[error("cannot build the single-parametric family: {0}")]
    Family(#[from] FitError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TiltedPiecewise {
    reference: PiecewiseMixture,
    theta: Vec<f64>,
    proposal_weights: Vec<f64>,
    shift: f64,
    proposal: PiecewiseMixture,
}

impl TiltedPiecewise {
    /// The untilted proposal: `θ = 0`, `π̃ = π`, no shift.
    pub fn identity(reference: PiecewiseMixture) -> Self {
        let k = reference.len();
        Self {
            theta: vec![0.0; k],
            proposal_weights: reference.weights().to_vec(),
            shift: 0.0,
            proposal: reference.clone(),
            reference,
        }
    }

    pub fn new(
        reference: PiecewiseMixture,
        theta: Vec<f64>,
        proposal_weights: Vec<f64>,
        shift: f64,
    ) -> Result<Self, TiltError> {
        let k = reference.len();
        if theta.len() != k {
            return Err(TiltError::LengthMismatch {
                what: "tilt parameters",
                expected: k,
                got: theta.len(),
            });
        }
        if proposal_weights.len() != k {
            return Err(TiltError::LengthMismatch {
                what: "proposal weights",
                expected: k,
                got: proposal_weights.len(),
            });
        }
        let knots = shifted_knots(reference.truncations(), shift)?;
        let pieces = reference
            .pieces()
            .iter()
            .zip(&theta)
            .enumerate()
            .map(|(i, (p, &t))| {
                let rebounded = if shift == 0.0 {
                    p.clone()
                } else {
                    p.with_bounds(knots[i], knots[i + 1])?
                };
                rebounded.tilt(t)
            })
            .collect::<Result<Vec<BoundedComponent>, DistributionError>>()?;
        let proposal = PiecewiseMixture::new(knots, proposal_weights.clone(), pieces)?;
        Ok(Self {
            reference,
            theta,
            proposal_weights,
            shift,
            proposal,
        })
    }

    pub fn reference(&self) -> &PiecewiseMixture {
        &self.reference
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn proposal_weights(&self) -> &[f64] {
        &self.proposal_weights
    }

    /// Total shift applied to every truncation point except the first.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// The sampling density as an ordinary piecewise mixture.
    pub fn proposal(&self) -> &PiecewiseMixture {
        &self.proposal
    }

    pub fn truncations(&self) -> &[f64] {
        self.proposal.truncations()
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// New tilts and weights on the same reference and grid.
    pub fn with_parameters(
        &self,
        theta: Vec<f64>,
        proposal_weights: Vec<f64>,
    ) -> Result<Self, TiltError> {
        Self::new(self.reference.clone(), theta, proposal_weights, self.shift)
    }

    /// Moves every truncation point except `γ_0` up by `step`. The piece
    /// shapes are re-conditioned on the new intervals, so the proposal stays
    /// a proper density; tilts and weights are kept.
    pub fn shifted(&self, step: f64) -> Result<Self, TiltError> {
        if step == 0.0 {
            return Ok(self.clone());
        }
        Self::new(
            self.reference.clone(),
            self.theta.clone(),
            self.proposal_weights.clone(),
            self.shift + step,
        )
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        self.proposal.ln_pdf(x)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.proposal.pdf(x)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.proposal.sample(rng)
    }

    /// `ln(f(x) / f̃(x))` for the target density `target`.
    pub fn ln_likelihood_ratio(&self, target: &PiecewiseMixture, x: f64) -> Result<f64, TiltError> {
        ln_likelihood_ratio(target, self, x)
    }

    pub fn likelihood_ratio(&self, target: &PiecewiseMixture, x: f64) -> Result<f64, TiltError> {
        likelihood_ratio(target, self, x)
    }
}

fn shifted_knots(knots: &[f64], shift: f64) -> Result<Vec<f64>, TiltError> {
    if shift == 0.0 {
        return Ok(knots.to_vec());
    }
    if !shift.is_finite() || !(knots[1] + shift > knots[0]) {
        return Err(TiltError::InvalidShift { shift });
    }
    let mut out = knots.to_vec();
    for k in &mut out[1..] {
        *k += shift;
    }
    Ok(out)
}

/// `ln f(x) - ln f̃(x)`, evaluated in log space so extreme ratios survive.
/// Points outside the target support give `-inf` (ratio zero).
pub fn ln_likelihood_ratio(
    target: &PiecewiseMixture,
    proposal: &TiltedPiecewise,
    x: f64,
) -> Result<f64, TiltError> {
    let lf = target.ln_pdf(x);
    if lf == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let lg = proposal.ln_pdf(x);
    if lg == f64::NEG_INFINITY {
        return Err(TiltError::SupportMismatch { x });
    }
    let r = lf - lg;
    if r.is_nan() || r == f64::INFINITY {
        return Err(TiltError::NonFiniteRatio { x });
    }
    Ok(r)
}

/// `f(x) / f̃(x)`.
pub fn likelihood_ratio(
    target: &PiecewiseMixture,
    proposal: &TiltedPiecewise,
    x: f64,
) -> Result<f64, TiltError> {
    ln_likelihood_ratio(target, proposal, x).map(exp)
}

/// The single-parametric proposal family for `base`: one bounded
/// exponential on the whole support `[γ_0, γ_k)`, with the rate that best
/// fits `base` in the maximum-likelihood sense (matching its mean).
pub fn single_exponential_family(base: &PiecewiseMixture) -> Result<TiltedPiecewise, TiltError> {
    let fit = fit_bounded_exponential_to_mean(base.mean(), base.lower(), base.upper())?;
    let reference = PiecewiseMixture::single(fit.distribution.into())?;
    Ok(TiltedPiecewise::identity(reference))
}
