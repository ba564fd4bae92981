//! Linear intra-predictors for block-based image coding.
//!
//! Designed predictors (angular, DC, planar) are expressed as matrices mapping
//! the `3N + 1` reference samples around a block to its `N²` pixels. The
//! [`regression`] module refines such a set on training patches by
//! alternating best-mode clustering with per-cluster ridge regression, and
//! [`engine`] scores sets under best-case and worst-case reconstruction.

pub mod designed;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod model;
pub mod regression;

pub use designed::{
    build_angular_matrix, build_dc_matrix, build_hevc_set, build_planar_matrix, build_uniform_angular_set,
    DcStyle, PredictorMatrix, PredictorSet, Provenance,
};
pub use engine::{
    best_case_evaluate, best_case_predict, predict, predict_all, psnr, select_mode, stack, worst_case_reconstruct,
    EvaluationReport, ModeChoice, Protocol, Psnr, StackedPredictor,
};
pub use error::{Error, Result};
pub use geometry::{
    extract_block, extract_reference, reference_length, sample_patches, AvailabilityMask, BlockGeometry,
    PatchDataset, Plane, ReferenceVector, SourceId, TargetBlock,
};
pub use model::{load_model, read_model, save_model, write_model};
pub use regression::{
    assign_clusters, prediction_error, ridge_update, train, ClusterAssignment, TrainingConfig, TrainingTrace,
};
