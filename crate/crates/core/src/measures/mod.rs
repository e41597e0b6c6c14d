//! Frostman measures on ladder windows and the power-law Markov measure on
//! Gauss-like systems, with a Monte Carlo local dimension estimator.

mod frostman;
mod gauss_like;

pub use frostman::{
    frostman_build, frostman_build_with, frostman_verify, frostman_verify_seeded, FrostmanLevel, FrostmanMeasure,
    FrostmanReport, SupportPolicy, FROSTMAN_EXHAUSTIVE_LIMIT,
};
pub use gauss_like::{
    local_dim_estimate, normalizer_summary, sample_mu, sample_mu_path, write_local_dim_csv, GaussLikeMeasure,
    LevelRecord, LocalDimension, NormalizerSummary, SampleTrace, MAX_LN_DIGIT,
};
