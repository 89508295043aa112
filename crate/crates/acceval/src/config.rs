//! Run configuration: one JSON document per run, overridable from flags.

use std::path::{Path, PathBuf};

use acceval_core::cross_entropy::{CeConfig, LevelSchedule};
use acceval_core::scenario::ProposalFamily;
use acceval_core::{ControllerConfig, EmConfig, FitConfig, PieceFamily, StoppingRule};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{AppError, Result};
use crate::json::{self, ext_f64_vec, Meta};

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyDoc {
    Exponential,
    Normal,
    NormalMixture(usize),
}

impl From<FamilyDoc> for PieceFamily {
    fn from(f: FamilyDoc) -> Self {
        match f {
            FamilyDoc::Exponential => PieceFamily::Exponential,
            FamilyDoc::Normal => PieceFamily::Normal,
            FamilyDoc::NormalMixture(components) => PieceFamily::NormalMixture { components },
        }
    }
}

/// Knots and per-piece families for one input variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableFit {
    #[serde(with = "ext_f64_vec")]
    pub truncations: Vec<f64>,
    pub families: Vec<FamilyDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSettings {
    pub range_inv: VariableFit,
    pub ttc_inv: VariableFit,
    pub em_max_iterations: usize,
    pub em_tolerance: f64,
    /// Points per emitted CDF curve.
    pub cdf_points: usize,
}

impl Default for FitSettings {
    fn default() -> Self {
        let em = EmConfig::default();
        Self {
            range_inv: VariableFit {
                truncations: vec![0.0125, 0.04, 0.1, f64::INFINITY],
                families: vec![FamilyDoc::Exponential; 3],
            },
            ttc_inv: VariableFit {
                truncations: vec![0.0, 0.25, f64::INFINITY],
                families: vec![FamilyDoc::NormalMixture(2), FamilyDoc::Exponential],
            },
            em_max_iterations: em.max_iterations,
            em_tolerance: em.tolerance,
            cdf_points: 500,
        }
    }
}

impl FitSettings {
    pub fn fit_config(&self, v: &VariableFit) -> FitConfig {
        let mut c = FitConfig::new(
            v.truncations.clone(),
            v.families.iter().map(|&f| f.into()).collect(),
        );
        c.em.max_iterations = self.em_max_iterations;
        c.em.tolerance = self.em_tolerance;
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FamilyChoice {
    Piecewise,
    Single,
}

impl FamilyChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Piecewise => "piecewise",
            Self::Single => "single",
        }
    }
}

impl From<FamilyChoice> for ProposalFamily {
    fn from(f: FamilyChoice) -> Self {
        match f {
            FamilyChoice::Piecewise => ProposalFamily::Piecewise,
            FamilyChoice::Single => ProposalFamily::Single,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CeSettings {
    pub family: FamilyChoice,
    pub sample_size: usize,
    pub max_sample_size: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub stable_iterations: usize,
    pub pi_floor: f64,
    pub min_hits: usize,
    pub materiality: f64,
    /// Quantile of the batch scores that sets the next level.
    pub quantile: f64,
    pub shift_fraction: f64,
    pub max_shifts: usize,
}

impl Default for CeSettings {
    fn default() -> Self {
        let c = CeConfig::default();
        let quantile = match c.schedule {
            LevelSchedule::Adaptive { quantile } => quantile,
            LevelSchedule::Fixed(_) => 0.1,
        };
        Self {
            family: FamilyChoice::Piecewise,
            sample_size: c.sample_size,
            max_sample_size: c.max_sample_size,
            max_iterations: c.max_iterations,
            tolerance: c.tolerance,
            stable_iterations: c.stable_iterations,
            pi_floor: c.pi_floor,
            min_hits: c.min_hits,
            materiality: c.materiality,
            quantile,
            shift_fraction: c.shift_fraction,
            max_shifts: c.max_shifts,
        }
    }
}

impl CeSettings {
    pub fn ce_config(&self, seed: u64) -> CeConfig {
        CeConfig {
            sample_size: self.sample_size,
            max_sample_size: self.max_sample_size,
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            stable_iterations: self.stable_iterations,
            pi_floor: self.pi_floor,
            min_hits: self.min_hits,
            materiality: self.materiality,
            shift_fraction: self.shift_fraction,
            max_shifts: self.max_shifts,
            schedule: LevelSchedule::Adaptive {
                quantile: self.quantile,
            },
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub alpha: f64,
    pub beta: f64,
    pub min_samples: u64,
    pub max_samples: u64,
    pub batch_size: u64,
    /// Also run crude Monte Carlo on the model at relaxation `crude_level`.
    pub crude: bool,
    pub crude_level: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        let r = StoppingRule::default();
        Self {
            alpha: r.alpha,
            beta: r.beta,
            min_samples: r.min_samples,
            max_samples: r.max_samples,
            batch_size: r.batch_size,
            crude: false,
            crude_level: 0.0,
        }
    }
}

impl EvalSettings {
    pub fn rule(&self) -> StoppingRule {
        StoppingRule {
            alpha: self.alpha,
            beta: self.beta,
            min_samples: self.min_samples,
            max_samples: self.max_samples,
            batch_size: self.batch_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerDoc {
    pub reaction_delay_s: f64,
    pub trigger_ttc_s: f64,
    pub max_decel_mps2: f64,
    pub timestep_s: f64,
    pub horizon_s: f64,
}

impl Default for ControllerDoc {
    fn default() -> Self {
        ControllerConfig::default().into()
    }
}

impl From<ControllerConfig> for ControllerDoc {
    fn from(c: ControllerConfig) -> Self {
        Self {
            reaction_delay_s: c.reaction_delay_s,
            trigger_ttc_s: c.trigger_ttc_s,
            max_decel_mps2: c.max_decel_mps2,
            timestep_s: c.timestep_s,
            horizon_s: c.horizon_s,
        }
    }
}

impl From<&ControllerDoc> for ControllerConfig {
    fn from(c: &ControllerDoc) -> Self {
        Self {
            reaction_delay_s: c.reaction_delay_s,
            trigger_ttc_s: c.trigger_ttc_s,
            max_decel_mps2: c.max_decel_mps2,
            timestep_s: c.timestep_s,
            horizon_s: c.horizon_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub events: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub proposal: Option<PathBuf>,
    /// Second proposal evaluated with the same seed as `proposal`.
    pub compare: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    /// Worker threads; all cores when unset.
    pub workers: Option<usize>,
    /// Events written by `synth`.
    pub count: usize,
    pub fit: FitSettings,
    pub ce: CeSettings,
    pub eval: EvalSettings,
    pub controller: ControllerDoc,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            events: None,
            model: None,
            proposal: None,
            compare: None,
            out: PathBuf::from("."),
            seed: 0,
            workers: None,
            count: 100_000,
            fit: FitSettings::default(),
            ce: CeSettings::default(),
            eval: EvalSettings::default(),
            controller: ControllerDoc::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        json::read(path)
    }

    pub fn controller(&self) -> ControllerConfig {
        (&self.controller).into()
    }

    /// SHA-256 of the canonical JSON form. Input paths are replaced by a
    /// digest of their contents; the output directory and worker count are
    /// left out, so the same run elsewhere hashes the same.
    pub fn hash(&self) -> String {
        let by_content = |p: &Option<PathBuf>| {
            p.as_ref().map(|p| match std::fs::read(p) {
                Ok(bytes) => PathBuf::from(format!("sha256:{}", hex(&Sha256::digest(&bytes)))),
                Err(_) => p.clone(),
            })
        };
        let canonical = RunConfig {
            events: by_content(&self.events),
            model: by_content(&self.model),
            proposal: by_content(&self.proposal),
            compare: by_content(&self.compare),
            out: PathBuf::new(),
            workers: None,
            ..self.clone()
        };
        let bytes = serde_json::to_vec(&canonical).expect("configs serialize");
        hex(&Sha256::digest(&bytes))
    }

    pub fn meta(&self, command: &str) -> Meta {
        Meta {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_hash: self.hash(),
            seed: self.seed,
        }
    }

    /// The input path `name`, which must be set and exist.
    pub fn input(&self, name: &str, path: &Option<PathBuf>) -> Result<PathBuf> {
        let p = path
            .as_ref()
            .ok_or_else(|| AppError::Config(format!("missing input path `{name}`")))?;
        if !p.exists() {
            return Err(AppError::io(
                p,
                std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
            ));
        }
        Ok(p.clone())
    }
}
