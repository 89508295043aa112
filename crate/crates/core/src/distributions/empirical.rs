use alloc::vec::Vec;

use rand::Rng;

use super::DistributionError;

/// Discrete distribution over observed values with multiplicities.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    values: Vec<f64>,
    counts: Vec<u64>,
    cumulative: Vec<u64>,
}

impl EmpiricalDistribution {
    /// Builds from support values and their counts. Values are sorted and
    /// duplicates merged; zero counts are dropped.
    pub fn new(values: &[f64], counts: &[u64]) -> Result<Self, DistributionError> {
        if values.len() != counts.len() {
            return Err(DistributionError::LengthMismatch {
                what: "counts",
                expected: values.len(),
                got: counts.len(),
            });
        }
        let mut pairs: Vec<(f64, u64)> = Vec::with_capacity(values.len());
        for (&v, &c) in values.iter().zip(counts) {
            if !v.is_finite() {
                return Err(DistributionError::InvalidParameter {
                    name: "support value",
                    value: v,
                });
            }
            if c > 0 {
                pairs.push((v, c));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, u64)> = Vec::with_capacity(pairs.len());
        for (v, c) in pairs {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => merged.push((v, c)),
            }
        }
        if merged.is_empty() {
            return Err(DistributionError::Empty("empirical support"));
        }
        let mut cumulative = Vec::with_capacity(merged.len());
        let mut total = 0u64;
        for &(_, c) in &merged {
            total += c;
            cumulative.push(total);
        }
        Ok(Self {
            values: merged.iter().map(|p| p.0).collect(),
            counts: merged.iter().map(|p| p.1).collect(),
            cumulative,
        })
    }

    pub fn from_observations(observations: &[f64]) -> Result<Self, DistributionError> {
        let ones: Vec<u64> = observations.iter().map(|_| 1).collect();
        Self::new(observations, &ones)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        *self.cumulative.last().unwrap_or(&0)
    }

    /// Probability of drawing a value in `[lower, upper)`.
    pub fn mass_in(&self, lower: f64, upper: f64) -> f64 {
        let n: u64 = self
            .values
            .iter()
            .zip(&self.counts)
            .filter(|(v, _)| **v >= lower && **v < upper)
            .map(|(_, c)| *c)
            .sum();
        n as f64 / self.total() as f64
    }

    /// The conditional distribution on `[lower, upper)`.
    pub fn restricted(&self, lower: f64, upper: f64) -> Result<Self, DistributionError> {
        let (v, c): (Vec<f64>, Vec<u64>) = self
            .values
            .iter()
            .zip(&self.counts)
            .filter(|(v, _)| **v >= lower && **v < upper)
            .map(|(v, c)| (*v, *c))
            .unzip();
        Self::new(&v, &c)
    }

    /// Maps a uniform `u ∈ [0, 1)` onto a stored support value.
    pub fn quantile(&self, u: f64) -> f64 {
        let total = self.total();
        let k = ((u * total as f64) as u64).min(total - 1);
        let idx = self.cumulative.partition_point(|&c| c <= k);
        self.values[idx]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.gen::<f64>())
    }
}
