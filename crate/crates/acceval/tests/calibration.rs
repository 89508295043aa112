//! One-off crude Monte Carlo run that produces the cached crash probability
//! used by the acceptance suite. Run with
//! `cargo test --release -p acceval --test calibration -- --ignored`.

use std::path::Path;

use acceval::parallel::{estimate_parallel, thread_pool};
use acceval_core::montecarlo::{Method, StoppingRule};
use acceval_core::scenario::{synthetic_ground_truth, ScenarioExperiment, SegmentProposals};
use serde_json::json;

const SAMPLES: u64 = 100_000_000;
const SEED: u64 = 20_240_101;

#[test]
#[ignore = "about four CPU-minutes"]
fn crude_reference() {
    let (model, controller) = synthetic_ground_truth();
    let identity = SegmentProposals::identity(&model);
    let exp = ScenarioExperiment {
        model: &model,
        proposals: &identity,
        controller,
    };
    let rule = StoppingRule {
        batch_size: 100_000,
        ..StoppingRule::fixed(SAMPLES)
    };
    let pool = thread_pool(None).unwrap();
    let r = estimate_parallel(&pool, &exp, Method::Crude, &rule, SEED).unwrap();
    let doc = json!({
        "samples": r.samples,
        "hits": r.hits,
        "estimate": r.estimate,
        "confidence": r.confidence,
        "ci_lo": r.ci_lo,
        "ci_hi": r.ci_hi,
        "seed": SEED,
    });
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/crude_reference.json");
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(&path, serde_json::to_string_pretty(&doc).unwrap() + "\n").unwrap();
    println!("{doc}");
}
