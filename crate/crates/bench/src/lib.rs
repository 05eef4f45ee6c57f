//! Shared inputs for the benchmarks in `benches/`.

use kfp_core::corpus::{band_limited, SourceCorpus};
use kfp_core::solver::AnalyticSource;
use kfp_core::{GridField, GridSpec};

/// The 64×64 phase grid the standard source corpus is resolved on.
pub fn phase_grid(nt: usize) -> GridSpec {
    GridSpec::uniform(1, 0.0, 1.0, nt, 12.0, 64, 10.0, 64).expect("valid grid")
}

pub fn corpus_source(index: u64) -> AnalyticSource {
    SourceCorpus::standard().sample(12.0, 0xbe4c, index)
}

/// A band-limited field with modes up to `max_mode`.
pub fn smooth_field(spec: &GridSpec, max_mode: usize) -> GridField {
    band_limited(spec, max_mode, 0xbe4c, 0)
}
