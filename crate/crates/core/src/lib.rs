//! Functional data analysis of epidemic curves: B-spline smoothing,
//! functional PCA and principal-component function-on-function regression.

pub mod basis;
pub mod cli;
pub mod error;
pub mod eval;
pub mod ffreg;
pub mod fpca;
pub mod ingest;
pub mod linalg;
mod serde_matrix;

pub use basis::{
    eval_curve, fit_least_squares, make_bspline_basis, select_basis_count, BasisSystem,
    FunctionalDataset, FunctionalDatum, SmoothingFit,
};
pub use error::{FdaError, Result};
pub use eval::{
    generate_synthetic, mse_curve, prediction_table, rescale_to_counts, EvaluationReport,
    SplitSpec, SyntheticSpec,
};
pub use ffreg::{
    fit_mfflr, impute_missing, predict_response, reconstruct_beta, BetaSurface, MfflrConfig,
    MfflrModel,
};
pub use fpca::{
    explained_variance, fpca_fit, fpca_fit_with, perturbation_curves, project_scores,
    score_pairs, FpcaModel, FpcaOptions, Metric,
};
pub use ingest::{
    normalize_grid, parse_series, scale_per_capita, ColumnSchema, PopulationTable, RawSeries,
    ScaledSeries, TimeGrid, Variable,
};
