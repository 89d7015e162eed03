//! Landscape and lineage analysis of evolved benchmarks.

mod curvature;
mod levenshtein;
mod linalg;
mod lineage;
mod mds;
mod sobol;
mod trajectory;

pub use curvature::{
    curvature_features, latin_hypercube, quantile_sorted, CurvatureFeatures, FdSteps, TooFewUsablePoints,
};
pub use levenshtein::{distance_matrix, levenshtein};
pub use linalg::{symmetric_eigen, SymmetricEigen};
pub use lineage::{
    aggregate, generation_summary, lineage_stats, operator_stats, GenerationSummary, LineageError, LineageStats,
    OperatorStats,
};
pub use mds::{mds_embed, MdsError};
pub use sobol::{sobol_indices, InvalidSample, SobolResult};
pub use trajectory::{convergence_traces, trace_table, Trace};
