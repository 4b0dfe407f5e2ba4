//! Ordinary least squares with one or two absorbed high-dimensional
//! fixed-effect factors, cluster-robust standard errors, and recovery of the
//! identified fixed-effect values.

mod cluster;
mod demean;
mod estimate;
mod factor;
mod fe;
mod ols;

pub use cluster::{clustered_vcov, standard_errors};
pub use demean::{demean_in_place, group_means, DemeanInfo, DemeanOptions};
pub use estimate::{
    absorb_and_estimate, CollinearPolicy, DataTable, EstimationResult, FeTable, RegressionSpec,
    SolverOptions,
};
pub use factor::FactorColumn;
pub use fe::{bipartite_components, recover_fixed_effects, FeRecovery};
pub use ols::{dense_ols_oracle, detect_collinear, gram_and_xty, solve_kept, GramSolve, OlsFit};
