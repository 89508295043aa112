//! Rare-event accelerated evaluation core.
//!
//! Piecewise mixture distributions are fitted to event data, turned into
//! importance-sampling proposals by per-piece exponential tilting, tuned with
//! the cross-entropy method and used to estimate small event probabilities.
//! The crate is `no_std` and only needs `alloc`; file formats, the CLI and
//! thread pools live in the `acceval` companion crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod cross_entropy;
pub mod distributions;
pub mod fitting;
pub mod math;
pub mod montecarlo;
pub mod optimize;
pub mod scenario;
pub mod special;
pub mod tilting;

pub use cross_entropy::{CeConfig, CeError, CeRun, CeState, CeVariable, LevelSchedule, RareEvent};
pub use distributions::{
    BoundedComponent, BoundedExponential, BoundedNormal, BoundedNormalMixture, DistributionError,
    EmpiricalDistribution, MixtureComponent, PiecewiseMixture,
};
pub use fitting::{Dataset, EmConfig, FitConfig, FitError, PieceFamily};
pub use montecarlo::{EstimateReport, McError, Method, StoppingRule};
pub use scenario::{
    ControllerConfig, CutInInitialState, LaneChangeEvent, LaneChangeModel, ScenarioError,
};
pub use tilting::{TiltError, TiltedPiecewise};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seeded generator used by every stochastic routine in the crate.
pub type SimRng = ChaCha8Rng;

/// Builds the generator for `seed`, positioned on stream `stream`.
///
/// Distinct streams of one seed never overlap, so per-batch and per-worker
/// generators can be derived from a single master seed.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
