//! The Mamba block, the bidirectional Mamba++ layer and the NeuroMamba
//! model with regression and BCE heads.
//!
//! Gradients are computed by hand-written backward passes; a gradient
//! buffer is a model of the same shape (see [`NeuroMamba::zeros_like`]).

mod block;
pub mod checkpoint;
mod gradcheck;
mod layer;
mod net;
pub(crate) mod params;

pub use block::{BlockCache, BlockConfig, MambaBlock};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use gradcheck::{gradcheck, gradcheck_suite, jitter_output_biases, relative_error, GradcheckConfig, GradcheckReport, TensorCheck};
pub use layer::{LayerCache, MambaPlusLayer};
pub use net::{Head, HeadKind, ModelConfig, NeuroMamba, Target};
pub use params::{ParamInfo, Params};
