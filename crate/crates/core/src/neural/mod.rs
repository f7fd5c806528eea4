//! Fully-connected networks, losses, Adam and normalization layers.

pub mod adam;
pub mod checkpoint;
pub mod network;
pub mod ops;

pub use adam::{adam_step, AdamState};
pub use network::{
    ForwardCache, Gradients, Input, LayerParams, Network, NetworkParams, NetworkSpec, NormParams, SpectralState,
};
pub use ops::{
    binary_cross_entropy, layer_norm_apply, multiclass_cross_entropy, sigmoid, softmax, spectral_normalize,
    SpectralEstimate,
};

#[cfg(test)]
mod tests;
