//! Polynomial graph-filter network trained from scratch.
//!
//! Each layer computes `sum_{k<d} S^k X W_k + b` for a graph shift `S`;
//! hidden layers apply a rectifier and the last layer yields class logits.
//! Gradients are computed by hand and parameters are updated with Adam.

mod adam;
mod net;
mod shift;
mod train;

pub use adam::Adam;
pub use net::{argmax_rows, masked_cross_entropy, DecayMode, FilterLayer, FilterNet, ForwardCache, Gradients, NetConfig};
pub use shift::{shift_powers_apply, ShiftKind, ShiftOperator};
pub use train::{input_features, masked_accuracy, stratified_split, train, train_with_shift, Split, TrainOutcome};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GnnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite activation in layer {layer}")]
    Numerical { layer: usize },
    #[error("mask selects no nodes")]
    EmptyMask,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
