//! Robust deep multi-view clustering.
//!
//! Each view gets its own autoencoder, projector and classifier head. A
//! Gaussian mixture over the projected embeddings, driven by the classifier's
//! soft predictions, scores how well each sample's embedding agrees with its
//! prediction; a two-component 1-D mixture over those scores yields a
//! per-sample probability of being clean. Training then pulls suspected
//! noisy samples toward the first (clean) view's prediction and applies a
//! threshold-gated contrastive loss across views.

pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod io;
pub mod kmeans;
pub mod losses;
pub mod math;
pub mod networks;
pub mod noise_gmm;
pub mod par;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
