//! Behavior-score prediction from parcellated resting-state fMRI timeseries.
//!
//! The crate covers the whole pipeline:
//!
//! * [`dataio`]: cohort manifests, timeseries CSV files, normative score
//!   z-scoring and synthetic cohorts with planted temporal signal.
//! * [`baselines`]: functional connectivity, individual/group FastICA and
//!   ALFF feature extractors.
//! * [`regression`]: RBF kernel ridge regression and the shared metrics
//!   (Pearson R with permutation p-values, RMSE, ROC/AUC).
//! * [`ssm`]: zero-order-hold discretization and sequential/parallel
//!   selective scans with a hand-written backward pass.
//! * [`model`]: the Mamba block, the bidirectional differential Mamba++
//!   layer and the NeuroMamba regression/BCE model with checkpoints.
//! * [`training`]: Adam with clipping, small-batch training, leave-one-out
//!   evaluation and few-shot adaptation.
//! * [`analysis`]: permutation feature importance and report assembly.

pub mod analysis;
pub mod baselines;
pub mod dataio;
pub mod error;
pub mod linalg;
pub mod model;
pub mod real;
pub mod regression;
pub mod rng;
pub mod ssm;
pub mod training;

pub use error::{Error, ErrorClass, Result};
pub use real::Real;
