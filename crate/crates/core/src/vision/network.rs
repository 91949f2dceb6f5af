//! Layer graph, inference and the on-disk network format.
//!
//! A network file is a single line of compact JSON followed by `\n`:
//!
//! ```text
//! {"format":"deskbot-net","version":1,"input":[1,32,32],"labels":[...],"layers":[...]}
//! ```
//!
//! Layers carry only integers and strings in the header; every weight or
//! bias array is a base64 (standard alphabet, padded) string of
//! little-endian IEEE-754 f64 values. Keys appear in a fixed order, so
//! loading and saving a file reproduces it byte for byte.

use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::layers::{ActivationKind, Conv, FullyConnected, LayerSpec, Pool, PoolKind};
use super::{Tensor, VisionError};
use crate::par::{self, Exec};

pub const FORMAT_NAME: &str = "deskbot-net";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Label {
    pub name: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub input: [usize; 3],
    pub labels: Vec<String>,
    pub layers: Vec<LayerSpec>,
}

impl Network {
    /// Checks that layer shapes chain from the input to one score per label.
    pub fn validate(&self) -> Result<(), VisionError> {
        let mut dims = self.input.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            dims = layer.output_dims(&dims).map_err(|e| e.at_layer(i))?;
        }
        let n: usize = dims.iter().product();
        if n != self.labels.len() {
            return Err(VisionError::Shape {
                layer: Some(self.layers.len().saturating_sub(1)),
                message: format!("network produces {n} outputs for {} labels", self.labels.len()),
            });
        }
        Ok(())
    }

    /// Output of every layer in order; the last entry is the network output.
    pub fn forward_trace(&self, image: &Tensor, exec: Exec) -> Result<Vec<Tensor>, VisionError> {
        if image.dims() != self.input {
            return Err(VisionError::Shape {
                layer: None,
                message: format!("input {:?} but network expects {:?}", image.dims(), self.input),
            });
        }
        let mut outs: Vec<Tensor> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let x = outs.last().unwrap_or(image);
            let y = layer.forward(x, exec).map_err(|e| e.at_layer(i))?;
            outs.push(y);
        }
        Ok(outs)
    }

    pub fn forward(&self, image: &Tensor, exec: Exec) -> Result<Tensor, VisionError> {
        let mut t = self.forward_trace(image, exec)?;
        Ok(t.pop().unwrap_or_else(|| image.clone()))
    }
}

/// Labels in descending score order (ties keep label order).
pub fn infer(net: &Network, image: &Tensor) -> Result<Vec<Label>, VisionError> {
    infer_with(net, image, Exec::Sequential)
}

pub fn infer_with(net: &Network, image: &Tensor, exec: Exec) -> Result<Vec<Label>, VisionError> {
    let out = net.forward(image, exec)?;
    if out.len() != net.labels.len() {
        return Err(VisionError::Shape {
            layer: Some(net.layers.len().saturating_sub(1)),
            message: format!("{} outputs for {} labels", out.len(), net.labels.len()),
        });
    }
    let mut labels: Vec<Label> = net
        .labels
        .iter()
        .zip(out.data())
        .map(|(n, &s)| Label { name: n.clone(), score: s })
        .collect();
    labels.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(labels)
}

/// Independent inferences over many images, spread across workers.
pub fn infer_many(net: &Network, images: &[Tensor], exec: Exec) -> Vec<Result<Vec<Label>, VisionError>> {
    par::map(exec, images, |img| infer(net, img))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileHeader {
    format: String,
    version: u32,
    input: [usize; 3],
    labels: Vec<String>,
    layers: Vec<FileLayer>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum FileLayer {
    Conv {
        filters: usize,
        in_channels: usize,
        kernel: [usize; 2],
        stride: usize,
        pad: usize,
        weights: String,
        bias: String,
    },
    Activation {
        kind: ActivationKind,
    },
    Pool {
        kind: PoolKind,
        window: usize,
        stride: usize,
    },
    Fc {
        inputs: usize,
        outputs: usize,
        weights: String,
        bias: String,
    },
    Softmax,
}

fn encode_f64s(v: &[f64]) -> String {
    let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

fn decode_f64s(s: &str, layer: usize, what: &str) -> Result<Vec<f64>, VisionError> {
    let bytes = STANDARD.decode(s).map_err(|e| VisionError::Validation {
        layer: Some(layer),
        message: format!("{what}: bad base64: {e}"),
    })?;
    if bytes.len() % 8 != 0 {
        return Err(VisionError::Validation {
            layer: Some(layer),
            message: format!("{what}: {} bytes is not a whole number of f64", bytes.len()),
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

fn byte_offset(text: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut off = 0;
    for _ in 1..line {
        match text[off..].iter().position(|&b| b == b'\n') {
            Some(p) => off += p + 1,
            None => return text.len(),
        }
    }
    (off + column.saturating_sub(1)).min(text.len())
}

pub fn network_from_bytes(bytes: &[u8]) -> Result<Network, VisionError> {
    let header: FileHeader = serde_json::from_slice(bytes).map_err(|e| VisionError::Parse {
        offset: byte_offset(bytes, e.line(), e.column()),
        message: e.to_string(),
    })?;
    if header.format != FORMAT_NAME || header.version != FORMAT_VERSION {
        return Err(VisionError::Validation {
            layer: None,
            message: format!("unsupported format {} v{}", header.format, header.version),
        });
    }
    let mut layers = Vec::with_capacity(header.layers.len());
    for (i, l) in header.layers.into_iter().enumerate() {
        let spec = match l {
            FileLayer::Conv { filters, in_channels, kernel, stride, pad, weights, bias } => {
                let w = decode_f64s(&weights, i, "conv weights")?;
                let dims = vec![filters, in_channels, kernel[0], kernel[1]];
                if w.len() != dims.iter().product::<usize>() {
                    return Err(VisionError::Validation {
                        layer: Some(i),
                        message: format!("conv weights have {} values for dims {:?}", w.len(), dims),
                    });
                }
                LayerSpec::Conv(Conv {
                    num_filters: filters,
                    in_channels,
                    kernel: (kernel[0], kernel[1]),
                    stride,
                    pad,
                    weights: Tensor::new(dims, w).map_err(|e| e.at_layer(i))?,
                    bias: decode_f64s(&bias, i, "conv bias")?,
                })
            }
            FileLayer::Activation { kind } => LayerSpec::Activation(kind),
            FileLayer::Pool { kind, window, stride } => LayerSpec::Pool(Pool { kind, window, stride }),
            FileLayer::Fc { inputs, outputs, weights, bias } => LayerSpec::FullyConnected(FullyConnected {
                inputs,
                outputs,
                weights: decode_f64s(&weights, i, "fc weights")?,
                bias: decode_f64s(&bias, i, "fc bias")?,
            }),
            FileLayer::Softmax => LayerSpec::Softmax,
        };
        layers.push(spec);
    }
    let net = Network { input: header.input, labels: header.labels, layers };
    net.validate().map_err(|e| match e {
        VisionError::Shape { layer, message } => VisionError::Validation { layer, message },
        other => other,
    })?;
    Ok(net)
}

pub fn network_to_bytes(net: &Network) -> Vec<u8> {
    let layers = net
        .layers
        .iter()
        .map(|l| match l {
            LayerSpec::Conv(c) => FileLayer::Conv {
                filters: c.num_filters,
                in_channels: c.in_channels,
                kernel: [c.kernel.0, c.kernel.1],
                stride: c.stride,
                pad: c.pad,
                weights: encode_f64s(c.weights.data()),
                bias: encode_f64s(&c.bias),
            },
            LayerSpec::Activation(k) => FileLayer::Activation { kind: *k },
            LayerSpec::Pool(p) => FileLayer::Pool { kind: p.kind, window: p.window, stride: p.stride },
            LayerSpec::FullyConnected(f) => FileLayer::Fc {
                inputs: f.inputs,
                outputs: f.outputs,
                weights: encode_f64s(&f.weights),
                bias: encode_f64s(&f.bias),
            },
            LayerSpec::Softmax => FileLayer::Softmax,
        })
        .collect();
    let header = FileHeader {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        input: net.input,
        labels: net.labels.clone(),
        layers,
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    out
}

pub fn load_network(path: impl AsRef<Path>) -> Result<Network, VisionError> {
    let bytes = std::fs::read(path.as_ref()).map_err(|e| VisionError::Io(format!("{}: {e}", path.as_ref().display())))?;
    network_from_bytes(&bytes)
}

pub fn save_network(net: &Network, path: impl AsRef<Path>) -> Result<(), VisionError> {
    std::fs::write(path.as_ref(), network_to_bytes(net)).map_err(|e| VisionError::Io(format!("{}: {e}", path.as_ref().display())))
}
