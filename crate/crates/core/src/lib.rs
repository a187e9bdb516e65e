//! Community detection on networks with nodal covariates under the
//! node-coupled stochastic block model.
//!
//! The pipeline is: an SDP relaxation solved by ADMM and rounded with
//! k-means ([`sdp`]), refined either by variational EM or by maximum profile
//! likelihood ([`inference`]), with multi-logistic coefficient estimates and
//! Wald tests ([`logit`]) and partition metrics ([`metrics`]). [`harness`]
//! drives simulation studies and file I/O.

pub mod align;
pub mod error;
pub mod harness;
pub mod inference;
mod linalg;
pub mod logit;
pub mod metrics;
pub mod rng;
pub mod sdp;
pub mod simgen;
pub mod types;

pub use align::{align_labels, permute_coefficients, Permutation};
pub use error::{NsbmError, Result};
pub use types::{
    BlockMatrix, BlockMode, Coefficients, CovariateBlock, CovariateLaw, Covariates, Graph, Labels,
    Membership, ModelParams, SoftLabels,
};
