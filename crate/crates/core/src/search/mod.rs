//! Hamming-space retrieval, ground truth, metrics and projection baselines.

mod baselines;
mod hamming;
mod metrics;
mod truth;

pub use baselines::{lsh_baseline, lsh_fit, pcah_baseline, pcah_fit};
pub use hamming::{hamming_lookup, hamming_rank, probe_count, HammingIndex, Ranked};
pub use metrics::{average_precision, evaluate, EvalOptions, PrAtN, PrPoint, RetrievalReport};
pub use truth::{build_ground_truth, GroundTruth, TruthMode};
