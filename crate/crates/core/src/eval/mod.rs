//! Evaluation of releases and experiment orchestration.

mod format;
mod io;
pub mod reference;
mod sweep;
mod wasserstein;

pub use format::{fmt17, maybe_inf};
pub use io::{read_irradiance, read_release, write_irradiance, write_release, ReleaseMeta};
pub use sweep::{
    class_setup, run_sweep, run_sweep_on, spearman, CalibrationConfig, EvaluationReport, ExperimentConfig, ExperimentInputs,
    OrderingVerdict, RunRecord, SensitivitySummary, SummaryRow,
};
pub use wasserstein::{wasserstein1, PoolMode, SortedSample};
