//! Convolutional network inference in f64.

mod layers;
mod network;
pub mod shapes;
mod tensor;

use thiserror::Error;

pub use layers::{
    apply_activation, conv_forward, conv_forward_with, fc_forward, output_size, pool_forward, softmax,
    ActivationKind, Conv, FullyConnected, LayerSpec, Pool, PoolKind,
};
pub use network::{
    infer, infer_many, infer_with, load_network, network_from_bytes, network_to_bytes, save_network, Label,
    Network, FORMAT_NAME, FORMAT_VERSION,
};
pub use tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VisionError {
    #[error("shape error{}: {message}", fmt_layer(*.layer))]
    Shape { layer: Option<usize>, message: String },
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("invalid network{}: {message}", fmt_layer(*.layer))]
    Validation { layer: Option<usize>, message: String },
    #[error("io error: {0}")]
    Io(String),
}

fn fmt_layer(layer: Option<usize>) -> String {
    layer.map(|l| format!(" in layer {l}")).unwrap_or_default()
}

impl VisionError {
    /// Attaches a layer index to shape/validation errors that lack one.
    pub fn at_layer(self, i: usize) -> Self {
        match self {
            VisionError::Shape { layer: None, message } => VisionError::Shape { layer: Some(i), message },
            VisionError::Validation { layer: None, message } => VisionError::Validation { layer: Some(i), message },
            e => e,
        }
    }
}
