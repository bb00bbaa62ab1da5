//! Model-based feature extractors: functional connectivity, individual and
//! group ICA, and ALFF.

mod alff;
mod features;
mod fcm;
mod ica;

pub use alff::{alff, alff_band_bins, alff_features, DEFAULT_BAND};
pub use features::{extract_features, FeatureMatrix, FeatureMethod};
pub use fcm::{fcm, fcm_features, vectorize_upper, ConnectivityMatrix};
pub use ica::{
    amari_index, group_ica_features, ica_features_individual, ica_fit, GroupIcaResult, IcaConfig,
    UnmixingResult,
};
