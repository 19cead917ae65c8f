//! Thinning-based model evaluation: rank selection for binomial PCA,
//! cluster-count selection for gamma data, and the SVD error curves used
//! with elbow plots.

mod curve;
mod cv;
mod gamma;
mod kmeans;
mod pca;
mod sse;

pub use curve::{LossCurve, LossKind};
pub use cv::{cv_curves, cv_select_k, CvMethod, Task, KMEANS_RESTARTS};
pub use gamma::{fit_gamma_clusters, fit_gamma_clusters_with, gamma_mle, loss_gamma, ClusterFit, GammaMle, SHAPE_CAP};
pub use kmeans::{kmeans, KMeansFit, MAX_LLOYD_ITERS};
pub use pca::{fit_binomial_pca, loss_binomial, BinomialSvd, PcaFit, PSEUDO_COUNT};
pub use sse::{log_normalize, sse_curve, sse_test_curve, standardize_columns, SseCurve, Standardized};
