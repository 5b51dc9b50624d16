//! Datasets, checkpoints, evaluation runs and their reports.
//!
//! Binary artifacts (`.cfmm` datasets, `.cfck` checkpoints) are
//! little-endian with a four-byte magic, a version and a trailing sha256 of
//! the preceding bytes. Run reports are a per-sample CSV plus a JSON
//! summary carrying the configuration digest.

mod checkpoint;
mod codec;
mod dataset;
mod eval;
mod report;
mod stats;

pub use checkpoint::Checkpoint;
pub use dataset::{
    gen_dataset, Dataset, DatasetHeader, DatasetSplits, GenerationMode, SplitCounts, SplitKind,
};
pub use eval::{
    allocate, audit, bench_timing, evaluate, AuditOutcome, EvalOptions, TimingRow, TimingTable,
};
pub use report::{
    load_document, summary_table, FinetuneSettings, Method, Provenance, ReportDocument, RunReport,
    SampleRecord, Summary, Timing, CDF_POINTS, CONSISTENCY_TOL,
};
pub use stats::{mean, percentile, EmpiricalCdf};

use crate::config::ExperimentConfig;
use crate::dnn;
use crate::error::Result;

/// Trains on the `train` split with best-validation checkpointing.
pub fn train_checkpoint(train: &Dataset, validation: &Dataset, cfg: &ExperimentConfig) -> Result<Checkpoint> {
    let sys = &cfg.system;
    let train_samples = train.training_samples(sys)?;
    let validation_samples = validation.training_samples(sys)?;
    let out = dnn::train(
        &train_samples,
        &validation_samples,
        sys.num_aps,
        sys.num_users,
        &cfg.train,
    )?;
    Ok(Checkpoint {
        model: out.model,
        history: out.history,
        config_digest: sys.digest(),
    })
}
