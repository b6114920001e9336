//! Experiment driver: dataset generation, experiments and reports.

pub mod config;
pub mod experiments;
pub mod generate;
pub mod records;
pub mod report;

pub use config::{
    ActiveConfig, ExperimentConfig, GenerationConfig, SemisupConfig, SupervisedConfig, TuningScope,
    WeightedGenerator,
};
pub use experiments::{run_active, run_semisup, run_supervised};
pub use generate::{audit, generate, regenerate, AuditReport, GenerationOutcome, GeneratorStats};
pub use records::{read_records, to_dataset, write_records, StateRecord, DATASET_SCHEMA_VERSION};
pub use report::{
    combine, mean_std, summarize, AccuracyRow, CombinedSummary, Details, Experiment, RunReport, SummaryRow,
    REPORT_SCHEMA_VERSION,
};
