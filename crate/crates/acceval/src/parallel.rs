//! Multi-threaded estimation that reproduces the sequential result exactly.

use acceval_core::montecarlo::{
    run_batch, Draw, EstimateReport, Estimator, Experiment, McError, Method, StoppingRule,
};
use acceval_core::scenario::{event_score, segment_of, simulate_cut_in};
use acceval_core::{ControllerConfig, CutInInitialState, LaneChangeModel};
use rand::Rng;
use rayon::prelude::*;
use rayon::ThreadPool;

/// Batches evaluated per worker between stopping checks.
const BATCHES_PER_WORKER: u64 = 4;

pub fn thread_pool(workers: Option<usize>) -> Result<ThreadPool, rayon::ThreadPoolBuildError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        b = b.num_threads(n);
    }
    b.build()
}

/// Same contract as [`acceval_core::montecarlo::estimate`]: batch `b` is drawn
/// from stream `b` of `seed` and batches are folded in index order, so the
/// report does not depend on the worker count. Batches computed past the
/// stopping point are discarded.
pub fn estimate_parallel<X: Experiment + Sync + ?Sized>(
    pool: &ThreadPool,
    experiment: &X,
    method: Method,
    rule: &StoppingRule,
    seed: u64,
) -> Result<EstimateReport, McError> {
    let mut est = Estimator::new(*rule, method, seed)?;
    let wave = pool.current_num_threads().max(1) as u64 * BATCHES_PER_WORKER;
    while !est.is_finished() {
        let first = est.next_batch();
        let jobs: Vec<(u64, u64)> = (first..first + wave)
            .map(|i| (i, est.batch_size(i)))
            .take_while(|&(_, size)| size > 0)
            .collect();
        if jobs.is_empty() {
            est.push(&run_batch(experiment, seed, first, 0)?);
            continue;
        }
        let results: Vec<_> = pool.install(|| {
            jobs.par_iter()
                .map(|&(i, size)| run_batch(experiment, seed, i, size))
                .collect()
        });
        for r in results {
            if est.push(&r?) {
                break;
            }
        }
    }
    Ok(est.report())
}

/// Crude Monte Carlo of the relaxed cut-in event `score ≤ level` under the
/// model itself; level 0 is a crash.
pub struct RelaxedCrude<'a> {
    pub model: &'a LaneChangeModel,
    pub controller: ControllerConfig,
    pub level: f64,
}

impl Experiment for RelaxedCrude<'_> {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Draw, McError> {
        let v = self.model.speed.sample(rng);
        let seg = segment_of(v).expect("speed support checked by LaneChangeModel::new");
        let r_inv = self.model.range_inv.sample(rng);
        let t_inv = self.model.ttc_inv[seg].sample(rng);
        let hit = CutInInitialState::from_draws(v, r_inv, t_inv)
            .and_then(|s| simulate_cut_in(&s, &self.controller))
            .map(|o| event_score(&o) <= self.level)
            .unwrap_or(false);
        Ok(Draw {
            value: hit as u8 as f64,
            hit,
        })
    }
}
