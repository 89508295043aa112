//! JSON documents for distributions, proposals, models and reports.
//!
//! Infinite values are written as the strings `"+inf"` / `"-inf"`; finite
//! values are plain numbers and round-trip bit for bit.

use std::fs;
use std::path::Path;

use acceval_core::montecarlo::{EstimateReport, Method};
use acceval_core::scenario::{SegmentProposals, SPEED_SEGMENTS};
use acceval_core::{
    BoundedComponent, BoundedExponential, BoundedNormal, BoundedNormalMixture, DistributionError,
    EmpiricalDistribution, LaneChangeModel, MixtureComponent, PiecewiseMixture, TiltedPiecewise,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{AppError, Result};

/// Serde adapter for `f64` fields that may be infinite.
pub mod ext_f64 {
    use super::*;

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Token(String),
    }

    pub fn to_token(x: f64) -> Option<&'static str> {
        if x == f64::INFINITY {
            Some("+inf")
        } else if x == f64::NEG_INFINITY {
            Some("-inf")
        } else {
            None
        }
    }

    pub fn from_token(s: &str) -> Option<f64> {
        match s {
            "+inf" | "inf" => Some(f64::INFINITY),
            "-inf" => Some(f64::NEG_INFINITY),
            _ => None,
        }
    }

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        match to_token(*x) {
            Some(t) => s.serialize_str(t),
            None if x.is_nan() => Err(serde::ser::Error::custom("NaN cannot be written")),
            None => s.serialize_f64(*x),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(x),
            Raw::Token(t) => from_token(&t).ok_or_else(|| {
                serde::de::Error::custom(format!("expected a number or \"+inf\", got {t:?}"))
            }),
        }
    }
}

/// [`ext_f64`] for vectors.
pub mod ext_f64_vec {
    use super::*;

    #[derive(Serialize, Deserialize)]
    struct Item(#[serde(with = "ext_f64")] f64);

    pub fn serialize<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(xs.iter().map(|&x| Item(x)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<Item>::deserialize(d)?
            .into_iter()
            .map(|i| i.0)
            .collect())
    }
}

/// Provenance block embedded in every output document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meta {
    pub tool_version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
}

fn is_pos_zero(x: &f64) -> bool {
    x.to_bits() == 0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentDoc {
    pub p: f64,
    #[serde(default, skip_serializing_if = "is_pos_zero")]
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PieceDoc {
    BoundedExp { rate: f64 },
    BoundedNormal { mu: f64, sigma: f64 },
    BoundedNormalMixture { components: Vec<ComponentDoc> },
}

impl PieceDoc {
    fn from_component(c: &BoundedComponent) -> Self {
        match c {
            BoundedComponent::Exponential(d) => Self::BoundedExp { rate: d.rate() },
            BoundedComponent::Normal(d) => Self::BoundedNormal {
                mu: d.mu(),
                sigma: d.sigma(),
            },
            BoundedComponent::NormalMixture(m) => Self::BoundedNormalMixture {
                components: m
                    .components()
                    .iter()
                    .map(|c| ComponentDoc {
                        p: c.weight,
                        mu: c.mu,
                        sigma: c.sigma,
                    })
                    .collect(),
            },
        }
    }

    fn to_component(&self, lower: f64, upper: f64) -> Result<BoundedComponent, DistributionError> {
        Ok(match self {
            Self::BoundedExp { rate } => BoundedExponential::new(*rate, lower, upper)?.into(),
            Self::BoundedNormal { mu, sigma } => {
                BoundedNormal::new(*mu, *sigma, lower, upper)?.into()
            }
            Self::BoundedNormalMixture { components } => {
                let comps: Vec<MixtureComponent> = components
                    .iter()
                    .map(|c| MixtureComponent {
                        weight: c.p,
                        mu: c.mu,
                        sigma: c.sigma,
                    })
                    .collect();
                BoundedNormalMixture::new(&comps, lower, upper)?.into()
            }
        })
    }
}

/// A piecewise mixture: `{"truncations", "weights", "pieces"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionDoc {
    #[serde(with = "ext_f64_vec")]
    pub truncations: Vec<f64>,
    pub weights: Vec<f64>,
    pub pieces: Vec<PieceDoc>,
}

impl From<&PiecewiseMixture> for DistributionDoc {
    fn from(d: &PiecewiseMixture) -> Self {
        Self {
            truncations: d.truncations().to_vec(),
            weights: d.weights().to_vec(),
            pieces: d.pieces().iter().map(PieceDoc::from_component).collect(),
        }
    }
}

impl DistributionDoc {
    pub fn to_model(&self) -> Result<PiecewiseMixture, DistributionError> {
        let k = self.pieces.len();
        if self.truncations.len() != k + 1 {
            return Err(DistributionError::LengthMismatch {
                what: "truncations",
                expected: k + 1,
                got: self.truncations.len(),
            });
        }
        let pieces = self
            .pieces
            .iter()
            .enumerate()
            .map(|(i, p)| p.to_component(self.truncations[i], self.truncations[i + 1]))
            .collect::<Result<Vec<_>, _>>()?;
        PiecewiseMixture::new(self.truncations.clone(), self.weights.clone(), pieces)
    }
}

/// A tilted proposal: the reference distribution plus `theta`,
/// `proposal_weights` and the knot shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TiltedDoc {
    #[serde(with = "ext_f64_vec")]
    pub truncations: Vec<f64>,
    pub weights: Vec<f64>,
    pub pieces: Vec<PieceDoc>,
    pub theta: Vec<f64>,
    pub proposal_weights: Vec<f64>,
    #[serde(default)]
    pub shift: f64,
}

impl From<&TiltedPiecewise> for TiltedDoc {
    fn from(t: &TiltedPiecewise) -> Self {
        let base = DistributionDoc::from(t.reference());
        Self {
            truncations: base.truncations,
            weights: base.weights,
            pieces: base.pieces,
            theta: t.theta().to_vec(),
            proposal_weights: t.proposal_weights().to_vec(),
            shift: t.shift(),
        }
    }
}

impl TiltedDoc {
    pub fn to_proposal(&self) -> Result<TiltedPiecewise> {
        let base = DistributionDoc {
            truncations: self.truncations.clone(),
            weights: self.weights.clone(),
            pieces: self.pieces.clone(),
        }
        .to_model()?;
        Ok(TiltedPiecewise::new(
            base,
            self.theta.clone(),
            self.proposal_weights.clone(),
            self.shift,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmpiricalDoc {
    pub values: Vec<f64>,
    pub counts: Vec<u64>,
}

/// The lane-change model: lead speed, `R⁻¹` and per-segment `TTC⁻¹`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub meta: Meta,
    pub speed: EmpiricalDoc,
    pub range_inv: DistributionDoc,
    pub ttc_inv: Vec<DistributionDoc>,
}

impl ModelDoc {
    pub fn new(meta: Meta, model: &LaneChangeModel) -> Self {
        Self {
            meta,
            speed: EmpiricalDoc {
                values: model.speed.values().to_vec(),
                counts: model.speed.counts().to_vec(),
            },
            range_inv: (&model.range_inv).into(),
            ttc_inv: model.ttc_inv.iter().map(Into::into).collect(),
        }
    }

    pub fn to_model(&self) -> Result<LaneChangeModel> {
        let speed = EmpiricalDistribution::new(&self.speed.values, &self.speed.counts)?;
        let ttc = self
            .ttc_inv
            .iter()
            .map(DistributionDoc::to_model)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(LaneChangeModel::new(
            speed,
            self.range_inv.to_model()?,
            ttc,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentProposalDoc {
    pub segment: usize,
    pub speed_range_mps: [f64; 2],
    pub range_inv: TiltedDoc,
    pub ttc_inv: TiltedDoc,
    pub ce_iterations: usize,
    pub ce_converged: bool,
}

/// Per-segment proposals produced by the `ce` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposalDoc {
    pub meta: Meta,
    pub family: String,
    pub method: String,
    pub segments: Vec<SegmentProposalDoc>,
}

impl ProposalDoc {
    pub fn method(&self) -> Result<Method> {
        self.method
            .parse()
            .map_err(|_| AppError::Config(format!("unknown method {:?}", self.method)))
    }

    pub fn to_proposals(&self) -> Result<SegmentProposals> {
        if self.segments.len() != SPEED_SEGMENTS.len() {
            return Err(AppError::Config(format!(
                "expected {} proposal segments, got {}",
                SPEED_SEGMENTS.len(),
                self.segments.len()
            )));
        }
        let mut range_inv = Vec::new();
        let mut ttc_inv = Vec::new();
        for s in &self.segments {
            range_inv.push(s.range_inv.to_proposal()?);
            ttc_inv.push(s.ttc_inv.to_proposal()?);
        }
        Ok(SegmentProposals { range_inv, ttc_inv })
    }
}

/// Estimation result without its per-batch trace (that goes to CSV).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportDoc {
    pub meta: Meta,
    pub method: String,
    pub estimate: f64,
    pub samples: u64,
    pub hits: u64,
    pub variance: f64,
    pub confidence: f64,
    #[serde(with = "ext_f64")]
    pub ci_lo: f64,
    #[serde(with = "ext_f64")]
    pub ci_hi: f64,
    #[serde(with = "ext_f64")]
    pub rel_half_width: f64,
    pub converged: bool,
    pub no_events: bool,
    pub workers: usize,
    /// Relaxation level of the event; 0 is a crash.
    #[serde(default, skip_serializing_if = "is_pos_zero")]
    pub level: f64,
}

impl ReportDoc {
    pub fn new(meta: Meta, r: &EstimateReport, workers: usize) -> Self {
        Self {
            meta,
            method: r.method.as_str().to_string(),
            estimate: r.estimate,
            samples: r.samples,
            hits: r.hits,
            variance: r.variance,
            confidence: r.confidence,
            ci_lo: r.ci_lo,
            ci_hi: r.ci_hi,
            rel_half_width: r.rel_half_width,
            converged: r.converged,
            no_events: r.no_events,
            workers,
            level: 0.0,
        }
    }
}

pub fn to_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize");
    s.push('\n');
    s
}

pub fn write<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_string(value)).map_err(|e| AppError::io(path, e))
}

pub fn read<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| AppError::format(path, e))
}

pub fn read_distribution(path: &Path) -> Result<PiecewiseMixture> {
    let doc: DistributionDoc = read(path)?;
    doc.to_model().map_err(|e| AppError::format(path, e))
}

pub fn read_model(path: &Path) -> Result<LaneChangeModel> {
    let doc: ModelDoc = read(path)?;
    doc.to_model().map_err(|e| AppError::format(path, e))
}
