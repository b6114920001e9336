//! Soft-margin kernel SVM trained by SMO, with grid-search
//! cross-validation and feature screening.

pub mod cv;
pub mod dataset;
pub mod kernel;
pub mod model;
pub mod screening;
pub mod smo;

pub use cv::{cross_validate, log_grid, CvCell, CvContext, CvResult, KernelKind, TrainConfig};
pub use dataset::{stratified_folds, stratified_split, Dataset, SampleMeta};
pub use kernel::{rbf_kernel, squared_distance, DenseGram, FeatureSource, Kernel, KernelRows, KernelSource, RowCache};
pub use model::{
    apply_mask, full_mask, kkt_audit, kkt_audit_weighted, train, train_on_rows, train_weighted, train_with, KktAudit,
    SvmModel, SvmParams, MODEL_SCHEMA_VERSION,
};
pub use screening::{accuracy_vs_feature_count, screen_features, CurvePoint, FeatureGain, Screening};
pub use smo::{solve_smo, SmoParams, SmoSolution};
