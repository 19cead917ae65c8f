pub mod diagnostics;
pub mod eval;
pub mod error;
pub mod family;
pub mod parallel;
pub mod rng;
pub mod samplers;
pub mod sim;
pub mod special;
pub mod stats;
pub mod thinning;

pub use error::{Error, Result};
pub use family::{Family, ThinPlan};
pub use rng::RandomStream;
pub use thinning::{fold_complement, multithin, thin, thin_dataset, FoldSet, ThinMode, Thinner};
