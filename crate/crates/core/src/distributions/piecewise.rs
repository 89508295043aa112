use alloc::vec::Vec;

use rand::Rng;

use super::{BoundedComponent, DistributionError, WEIGHT_SUM_TOLERANCE};
use crate::math::{abs, exp, ln};

/// Distribution assembled from `k` bounded pieces on consecutive half-open
/// intervals `[γ_{i-1}, γ_i)`, piece `i` carrying probability `π_i`.
///
/// Pieces with zero weight are allowed; they have zero density and are never
/// sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseMixture {
    truncations: Vec<f64>,
    weights: Vec<f64>,
    pieces: Vec<BoundedComponent>,
    cumulative: Vec<f64>,
}

impl PiecewiseMixture {
    /// `truncations` holds `γ_0 < γ_1 < … < γ_k`, so it is one longer than
    /// `weights` and `pieces`. Piece bounds must match the truncations exactly.
    pub fn new(
        truncations: Vec<f64>,
        weights: Vec<f64>,
        pieces: Vec<BoundedComponent>,
    ) -> Result<Self, DistributionError> {
        let k = pieces.len();
        if k == 0 {
            return Err(DistributionError::Empty("pieces"));
        }
        if truncations.len() != k + 1 {
            return Err(DistributionError::LengthMismatch {
                what: "truncations",
                expected: k + 1,
                got: truncations.len(),
            });
        }
        if weights.len() != k {
            return Err(DistributionError::LengthMismatch {
                what: "weights",
                expected: k,
                got: weights.len(),
            });
        }
        for (i, w) in truncations.windows(2).enumerate() {
            if w[0].is_nan() || w[1].is_nan() || !(w[0] < w[1]) {
                return Err(DistributionError::TruncationsNotIncreasing { index: i + 1 });
            }
        }
        for (i, p) in pieces.iter().enumerate() {
            let (lo, hi) = (truncations[i], truncations[i + 1]);
            if p.lower() != lo || p.upper() != hi {
                return Err(DistributionError::PieceBounds {
                    index: i,
                    lower: p.lower(),
                    upper: p.upper(),
                    expected_lower: lo,
                    expected_upper: hi,
                });
            }
        }
        let mut sum = 0.0;
        for &w in &weights {
            if !(0.0..=1.0).contains(&w) {
                return Err(DistributionError::InvalidParameter {
                    name: "piece weight",
                    value: w,
                });
            }
            sum += w;
        }
        if abs(sum - 1.0) > WEIGHT_SUM_TOLERANCE {
            return Err(DistributionError::WeightsNotNormalized { sum });
        }
        let mut cumulative = Vec::with_capacity(k + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for &w in &weights {
            acc += w;
            cumulative.push(acc);
        }
        // Pin the last boundary so every y in [0, 1) selects a piece.
        let last_positive = weights.iter().rposition(|&w| w > 0.0).unwrap_or(k - 1);
        for c in &mut cumulative[last_positive + 1..] {
            *c = 1.0;
        }
        Ok(Self {
            truncations,
            weights,
            pieces,
            cumulative,
        })
    }

    /// Builds the truncation vector from the pieces' own bounds.
    pub fn from_pieces(
        weights: Vec<f64>,
        pieces: Vec<BoundedComponent>,
    ) -> Result<Self, DistributionError> {
        let Some(first) = pieces.first() else {
            return Err(DistributionError::Empty("pieces"));
        };
        let mut truncations = Vec::with_capacity(pieces.len() + 1);
        truncations.push(first.lower());
        truncations.extend(pieces.iter().map(|p| p.upper()));
        Self::new(truncations, weights, pieces)
    }

    /// A single piece carrying all the mass.
    pub fn single(piece: BoundedComponent) -> Result<Self, DistributionError> {
        Self::from_pieces(alloc::vec![1.0], alloc::vec![piece])
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn truncations(&self) -> &[f64] {
        &self.truncations
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn pieces(&self) -> &[BoundedComponent] {
        &self.pieces
    }

    pub fn piece(&self, i: usize) -> &BoundedComponent {
        &self.pieces[i]
    }

    pub fn lower(&self) -> f64 {
        self.truncations[0]
    }

    pub fn upper(&self) -> f64 {
        self.truncations[self.truncations.len() - 1]
    }

    /// Index `i` (zero based) with `γ_i ≤ x < γ_{i+1}`, or `None` off support.
    pub fn piece_index(&self, x: f64) -> Option<usize> {
        if !(x >= self.lower() && x < self.upper()) {
            return None;
        }
        Some(self.truncations[1..].partition_point(|&g| g <= x))
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match self.piece_index(x) {
            Some(i) if self.weights[i] > 0.0 => ln(self.weights[i]) + self.pieces[i].ln_pdf(x),
            _ => f64::NEG_INFINITY,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        exp(self.ln_pdf(x))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if !(x > self.lower()) {
            return 0.0;
        }
        if x >= self.upper() {
            return 1.0;
        }
        let i = self.piece_index(x).unwrap_or(0);
        let v = self.cumulative[i] + self.weights[i] * self.pieces[i].cdf(x);
        v.min(1.0)
    }

    /// Quantile for `y ∈ [0, 1)`. The piece is chosen from the cumulative
    /// weights and its own conditional quantile is evaluated at the rescaled
    /// level, so the result always lies in that piece's support.
    pub fn inverse_cdf(&self, y: f64) -> Result<f64, DistributionError> {
        if !(0.0..1.0).contains(&y) {
            return Err(DistributionError::ProbabilityOutOfRange(y));
        }
        let i = self.cumulative[1..].partition_point(|&c| c <= y);
        let u = ((y - self.cumulative[i]) / self.weights[i]).max(0.0);
        let u = if u < 1.0 { u } else { 1.0f64.next_down() };
        Ok(self.pieces[i].quantile(u))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let y: f64 = rng.gen();
        self.inverse_cdf(y).unwrap_or_else(|_| self.lower())
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }

    pub fn mean(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.pieces)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, p)| w * p.mean())
            .sum()
    }

    /// Same pieces, new weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self, DistributionError> {
        Self::new(self.truncations.clone(), weights, self.pieces.clone())
    }

    /// Same weights, new pieces (bounds must still match).
    pub fn with_pieces(&self, pieces: Vec<BoundedComponent>) -> Result<Self, DistributionError> {
        Self::new(self.truncations.clone(), self.weights.clone(), pieces)
    }
}
