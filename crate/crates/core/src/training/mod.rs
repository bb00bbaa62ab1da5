//! Adam with global-norm clipping, small-batch training, leave-one-out
//! evaluation and few-shot adaptation.

mod adam;
mod adapt;
mod fit;

pub use adam::{adam_step, clip_global_norm, AdamState};
pub use adapt::{adapt, select_shots, AdaptOutcome, Shots};
pub use fit::{
    examples_from_cohort, loocv, loocv_from, predict_examples, train, Example, FoldResult, LoocvOutcome,
    TrainConfig, TrainOutcome,
};
