//! Dense tensors and reverse-mode differentiation with second-order support,
//! sized for small convolutional generator/critic pairs.

mod adam;
mod gp;
mod graph;
mod kernels;
mod network;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gp::{critic_loss, generator_loss, gp_double_backward, interpolate, CriticLoss};
pub use graph::{Graph, Var};
pub use network::{
    forward_network, forward_with_masks, DropoutMasks, Layer, LayerParams, Mode, NetworkSpec,
    Padding, ParamArchive, ParamSet, ParamShape, Tape, LEAKY_SLOPE,
};
pub use tensor::Tensor;
