//! Shared inputs for the criterion benchmarks.

use diffvp::modules::init_params;
use diffvp::world::{gen_dataset, CaseRecord, GenConfig};
use diffvp::ParamStore;

/// A fixed corpus with `per_stage` cases of each step count 1 to 4.
pub fn corpus(per_stage: usize) -> Vec<CaseRecord> {
    let config = GenConfig {
        seed: 42,
        stage_counts: [per_stage; 4],
        ..GenConfig::default()
    };
    gen_dataset(&config).expect("bench corpus generates")
}

/// Random toy weights, large enough that no module output is near-uniform.
pub fn params() -> ParamStore {
    init_params(3, 0.5)
}
