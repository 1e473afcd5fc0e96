//! Visual radial-basis Q-network.
//!
//! Raw pixel frames go through a fixed layer of random Gaussian receptive
//! fields ([`rbf`]); the resulting sparse activations feed a linear Q-head
//! ([`qlearn`]) trained from a replay buffer ([`replay`]) by the loop in
//! [`trainer`]. [`env`] provides two small pixel-rendered scenarios and
//! [`analysis`] the neuron-activity tools.

pub mod analysis;
mod codec;
pub mod env;
pub mod error;
pub mod qlearn;
pub mod rbf;
pub mod replay;
pub mod trainer;

pub use error::{Error, Result};
pub use qlearn::{AdamConfig, QHead, TdBatch};
pub use rbf::{sample_layer, FeatureVector, Frame, LayerSpec, RbfLayer, RbfNeuron, State};
pub use replay::{ReplayBuffer, Transition};
