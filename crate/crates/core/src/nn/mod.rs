//! Minimal dense-network engine.

mod activation;
mod mlp;

pub use activation::{sigmoid, softplus, Activation, SELU_ALPHA, SELU_LAMBDA};
pub use mlp::{
    AdamState, Backward, ForwardTrace, Gradients, Layer, LayerGrads, LayerTrace, Mlp, Mode,
    ADAM_BETA1, ADAM_BETA2, ADAM_EPS,
};

#[cfg(test)]
mod tests;
