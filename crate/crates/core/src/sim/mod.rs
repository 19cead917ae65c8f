//! Data generators and replicate drivers for the thinning-versus-splitting
//! regression comparison and the K-selection experiments.

mod data;
mod regression;
mod report;
mod selection;

pub use data::{
    gen_binomial_pca_data, gen_gamma_clusters, random_orthogonal, BinomialPcaConfig, BinomialPcaData, GammaData,
    GammaTask,
};
pub use regression::{
    fixed_design, forward_stepwise, gen_regression_data, ols, run_split_comparison, OlsFit, RegressionData,
    RegressionSimConfig, Scenario,
};
pub use report::{MethodSummary, SimReport};
pub use selection::{run_selection_sim, SelectionSimConfig, SelectionTask};
