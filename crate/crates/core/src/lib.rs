//! Differentially private estimation of the top principal component from a
//! stream of i.i.d. matrices.
//!
//! The crate contains three estimators that share one projected stochastic
//! gradient skeleton:
//!
//! * [`oja::run_oja`], the classical non-private Oja iteration;
//! * [`private_oja::run_private_oja`] and
//!   [`private_oja::run_minibatch_clipped_oja`], DP-SGD style variants that
//!   clip each gradient and add isotropic Gaussian noise;
//! * [`dppca::run_dppca`], minibatch ascent whose noise adapts to the
//!   gradient spread through a private top-eigenvalue estimate
//!   ([`estimators::private_top_eigenvalue`]) and a private truncated mean
//!   ([`estimators::private_mean`]).
//!
//! Supporting modules provide synthetic data models ([`model`]), geometry
//! ([`metrics`]), privacy mechanisms and budget arithmetic ([`privacy`]), and
//! the Gaussian-mechanism covariance baseline ([`baseline`]).

pub mod baseline;
pub mod dppca;
pub mod error;
pub mod estimators;
pub mod metrics;
pub mod model;
pub mod oja;
pub mod privacy;
pub mod private_oja;
pub mod rng;

pub use error::{Error, Result};
pub use metrics::{sin_distance, top_eigpair, UnitVector};
pub use model::{Dataset, ModelParams, SampleMatrix};
pub use oja::{LearningRateSchedule, StepRule, StepSize};
pub use privacy::{HistogramOutcome, PrivacyBudget, PrivacyLedger};

/// Dense column vector used for iterates, gradients and samples.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix used for covariances and full-rank samples.
pub type Matrix = nalgebra::DMatrix<f64>;

/// Version of this library, recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
