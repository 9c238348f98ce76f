//! Evaluation harness: synthetic datasets, committed fixtures, benchmark
//! runs, ablation studies and CSV reports.

mod bench;
mod datasets;
pub mod fixtures;
mod report;
mod winoground;

pub use bench::{
    accuracies, noisy_oracle_scores, run_benchmark, scaling_curve, timestep_accuracy_curve, timestep_grid,
    variance_report, BenchmarkConfig, BenchmarkOutcome, PrunerConfig, TimestepAccuracy, VarianceReport,
    DEFAULT_LABEL_NOISE,
};
pub use datasets::{
    gen_dataset, templates, DatasetKind, DatasetSpec, GmmPreset, SyntheticDataset, TemplateSet, TEMPLATE_SIZE,
};
pub use report::{fnv1a64, ExperimentReport, MetricRow, RunMetadata};
pub use winoground::{diffusion_score_matrix, read_score_matrices, winoground_text_score, ScoreMatrix};

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};

/// Writes serializable rows as CSV with a header derived from the field names.
pub fn write_rows_csv<W: Write, T: Serialize>(writer: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
