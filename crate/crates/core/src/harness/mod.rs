//! Orchestration: synthetic benchmark, dataset manifests, run pipelines.

mod benchmark;
mod config;
mod fewshot;
mod manifest;
mod pipeline;
mod run;
mod synthetic;

pub use benchmark::{defect_name, generate_benchmark, BenchmarkSpec};
pub use config::{ConfigFile, Preset, RunConfig};
pub use fewshot::few_shot_subset;
pub use manifest::{convert, write_benchmark, Manifest, ManifestEntry, NOMINAL_DEFECT};
pub use run::{bench_samples, peak_rss_mb, run_bench, run_eval, run_infer, run_train, BenchRecord, TrainSummary};
pub use pipeline::{align_samples, finalize_all, fit, report, score_samples, GroupBy, Scored};
pub use synthetic::{default_palette, generate_scene, AnomalyKind, Pairing, Shape, SyntheticSceneSpec};

use crate::data::MultimodalSample;

/// A sample with its defect type (`good` for nominal samples).
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub sample: MultimodalSample,
    pub defect: String,
}
