//! Log replay, evaluation metrics, reports and frame rendering.

mod metrics;
mod render;
mod replay;
mod scenario;

pub use metrics::{aggregate, evaluate, ConvergenceCriteria, EvalReport, LabeledRun, RunResult};
pub use render::{render_frame, ESTIMATE, OBJECT, PARTICLE, TRUTH};
pub use replay::{check_hashes, estimates_from_ndjson, estimates_to_ndjson, replay, replay_into, ReplayOutput};
pub use scenario::{run_trial, RunConfig, TrainingSpec, Trial, WorldAssets};
