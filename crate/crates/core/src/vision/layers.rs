//! Forward passes for each layer kind.

use serde::{Deserialize, Serialize};

use super::{Tensor, VisionError};
use crate::par::{self, Exec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Tanh,
    Sigmoid,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolKind {
    Max,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv {
    pub num_filters: usize,
    pub in_channels: usize,
    pub kernel: (usize, usize),
    pub stride: usize,
    pub pad: usize,
    /// (num_filters, in_channels, kh, kw).
    pub weights: Tensor,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pool {
    pub kind: PoolKind,
    pub window: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullyConnected {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major (outputs, inputs).
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Conv(Conv),
    Activation(ActivationKind),
    Pool(Pool),
    FullyConnected(FullyConnected),
    Softmax,
}

fn shape_err(message: String) -> VisionError {
    VisionError::Shape { layer: None, message }
}

/// (in − k + 2·pad)/stride + 1, rejecting non-integer results.
pub fn output_size(input: usize, k: usize, pad: usize, stride: usize) -> Result<usize, VisionError> {
    let span = input + 2 * pad;
    if stride == 0 || k == 0 || span < k || (span - k) % stride != 0 {
        return Err(shape_err(format!(
            "size {input} with kernel {k}, pad {pad}, stride {stride} does not tile"
        )));
    }
    Ok((span - k) / stride + 1)
}

impl Conv {
    pub fn validate(&self) -> Result<(), VisionError> {
        let (kh, kw) = self.kernel;
        if self.weights.dims() != [self.num_filters, self.in_channels, kh, kw] {
            return Err(shape_err(format!(
                "conv weights {:?} but expected {:?}",
                self.weights.dims(),
                [self.num_filters, self.in_channels, kh, kw]
            )));
        }
        if self.bias.len() != self.num_filters {
            return Err(shape_err(format!(
                "conv bias has {} values for {} filters",
                self.bias.len(),
                self.num_filters
            )));
        }
        if self.stride == 0 {
            return Err(shape_err("conv stride is zero".into()));
        }
        Ok(())
    }

    pub fn output_dims(&self, input: &[usize]) -> Result<Vec<usize>, VisionError> {
        let [c, h, w] = input else {
            return Err(shape_err(format!("conv needs a 3-d input, got {input:?}")));
        };
        if *c != self.in_channels {
            return Err(shape_err(format!("conv expects {} channels, got {c}", self.in_channels)));
        }
        Ok(vec![
            self.num_filters,
            output_size(*h, self.kernel.0, self.pad, self.stride)?,
            output_size(*w, self.kernel.1, self.pad, self.stride)?,
        ])
    }
}

pub fn conv_forward(input: &Tensor, layer: &Conv) -> Result<Tensor, VisionError> {
    conv_forward_with(input, layer, Exec::Sequential)
}

/// Cross-correlation; filters are evaluated independently under `exec`.
pub fn conv_forward_with(input: &Tensor, layer: &Conv, exec: Exec) -> Result<Tensor, VisionError> {
    layer.validate()?;
    let od = layer.output_dims(input.dims())?;
    let (oh, ow) = (od[1], od[2]);
    let (cin, h, w) = input.chw();
    let (kh, kw) = layer.kernel;
    let (s, pad) = (layer.stride, layer.pad);
    let x = input.data();
    let wt = layer.weights.data();
    let planes = par::map_range(exec, layer.num_filters, |f| {
        let mut out = vec![layer.bias[f]; oh * ow];
        for c in 0..cin {
            let plane = &x[c * h * w..(c + 1) * h * w];
            let k = &wt[(f * cin + c) * kh * kw..(f * cin + c + 1) * kh * kw];
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0.0;
                    for ky in 0..kh {
                        let iy = (oy * s + ky) as isize - pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let row = &plane[iy as usize * w..];
                        for kx in 0..kw {
                            let ix = (ox * s + kx) as isize - pad as isize;
                            if ix >= 0 && ix < w as isize {
                                acc += row[ix as usize] * k[ky * kw + kx];
                            }
                        }
                    }
                    out[oy * ow + ox] += acc;
                }
            }
        }
        out
    });
    Tensor::new(od, planes.concat())
}

pub fn apply_activation(input: &Tensor, kind: ActivationKind) -> Tensor {
    match kind {
        ActivationKind::Relu => input.map(|x| x.max(0.0)),
        ActivationKind::Tanh => input.map(f64::tanh),
        ActivationKind::Sigmoid => input.map(|x| {
            if x >= 0.0 {
                1.0 / (1.0 + (-x).exp())
            } else {
                let e = x.exp();
                e / (1.0 + e)
            }
        }),
    }
}

impl Pool {
    pub fn output_dims(&self, input: &[usize]) -> Result<Vec<usize>, VisionError> {
        let [c, h, w] = input else {
            return Err(shape_err(format!("pool needs a 3-d input, got {input:?}")));
        };
        Ok(vec![
            *c,
            output_size(*h, self.window, 0, self.stride)?,
            output_size(*w, self.window, 0, self.stride)?,
        ])
    }
}

pub fn pool_forward(input: &Tensor, layer: &Pool) -> Result<Tensor, VisionError> {
    let od = layer.output_dims(input.dims())?;
    let (c, oh, ow) = (od[0], od[1], od[2]);
    let mut out = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut m = f64::NEG_INFINITY;
                for ky in 0..layer.window {
                    for kx in 0..layer.window {
                        m = m.max(input.at(ch, oy * layer.stride + ky, ox * layer.stride + kx));
                    }
                }
                out.push(m);
            }
        }
    }
    Tensor::new(od, out)
}

impl FullyConnected {
    pub fn validate(&self) -> Result<(), VisionError> {
        if self.weights.len() != self.inputs * self.outputs {
            return Err(shape_err(format!(
                "fc weights have {} values, expected {}×{}",
                self.weights.len(),
                self.outputs,
                self.inputs
            )));
        }
        if self.bias.len() != self.outputs {
            return Err(shape_err(format!(
                "fc bias has {} values for {} outputs",
                self.bias.len(),
                self.outputs
            )));
        }
        Ok(())
    }
}

pub fn fc_forward(input: &Tensor, layer: &FullyConnected) -> Result<Tensor, VisionError> {
    layer.validate()?;
    let x = input.data();
    if x.len() != layer.inputs {
        return Err(shape_err(format!("fc expects {} inputs, got {}", layer.inputs, x.len())));
    }
    let y = layer
        .weights
        .chunks_exact(layer.inputs)
        .zip(&layer.bias)
        .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
        .collect();
    Ok(Tensor::vector(y))
}

/// Max-shifted softmax over all elements, returned as a vector.
pub fn softmax(input: &Tensor) -> Tensor {
    let m = input.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = input.data().iter().map(|&x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    Tensor::vector(e.into_iter().map(|v| v / s).collect())
}

impl LayerSpec {
    pub fn forward(&self, input: &Tensor, exec: Exec) -> Result<Tensor, VisionError> {
        match self {
            LayerSpec::Conv(c) => conv_forward_with(input, c, exec),
            LayerSpec::Activation(k) => Ok(apply_activation(input, *k)),
            LayerSpec::Pool(p) => pool_forward(input, p),
            LayerSpec::FullyConnected(f) => fc_forward(input, f),
            LayerSpec::Softmax => Ok(softmax(input)),
        }
    }

    pub fn output_dims(&self, input: &[usize]) -> Result<Vec<usize>, VisionError> {
        match self {
            LayerSpec::Conv(c) => {
                c.validate()?;
                c.output_dims(input)
            }
            LayerSpec::Activation(_) => Ok(input.to_vec()),
            LayerSpec::Pool(p) => p.output_dims(input),
            LayerSpec::FullyConnected(f) => {
                f.validate()?;
                let n: usize = input.iter().product();
                if n != f.inputs {
                    return Err(shape_err(format!("fc expects {} inputs, got {n}", f.inputs)));
                }
                Ok(vec![f.outputs])
            }
            LayerSpec::Softmax => Ok(vec![input.iter().product()]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_kernel() {
        let x = Tensor::new(vec![1, 3, 3], (0..9).map(|v| v as f64).collect()).unwrap();
        let c = Conv {
            num_filters: 1,
            in_channels: 1,
            kernel: (1, 1),
            stride: 1,
            pad: 0,
            weights: Tensor::new(vec![1, 1, 1, 1], vec![1.0]).unwrap(),
            bias: vec![0.0],
        };
        assert_eq!(conv_forward(&x, &c).unwrap(), x);
    }

    #[test]
    fn ones_kernel_sums_nine() {
        let x = Tensor::new(vec![1, 4, 4], vec![1.0; 16]).unwrap();
        let c = Conv {
            num_filters: 1,
            in_channels: 1,
            kernel: (3, 3),
            stride: 1,
            pad: 0,
            weights: Tensor::new(vec![1, 1, 3, 3], vec![1.0; 9]).unwrap(),
            bias: vec![0.0],
        };
        let y = conv_forward(&x, &c).unwrap();
        assert_eq!(y.dims(), &[1, 2, 2]);
        assert!(y.data().iter().all(|&v| v == 9.0));
    }

    #[test]
    fn non_integer_output_rejected() {
        assert!(output_size(6, 3, 0, 2).is_err());
        assert_eq!(output_size(7, 3, 0, 2).unwrap(), 3);
    }

    #[test]
    fn activations() {
        let x = Tensor::vector(vec![-1.0, 0.0, 2.0]);
        assert_eq!(apply_activation(&x, ActivationKind::Relu).data(), &[0.0, 0.0, 2.0]);
        let z = Tensor::vector(vec![0.0]);
        assert_eq!(apply_activation(&z, ActivationKind::Sigmoid).data(), &[0.5]);
        assert_eq!(apply_activation(&z, ActivationKind::Tanh).data(), &[0.0]);
        let big = Tensor::vector(vec![-800.0, 800.0]);
        assert!(apply_activation(&big, ActivationKind::Sigmoid).is_finite());
    }

    #[test]
    fn pool_basic() {
        let x = Tensor::new(vec![1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let p = Pool { kind: PoolKind::Max, window: 2, stride: 2 };
        assert_eq!(pool_forward(&x, &p).unwrap().data(), &[4.0]);
        let k = Tensor::new(vec![2, 4, 4], vec![0.7; 32]).unwrap();
        let y = pool_forward(&k, &p).unwrap();
        assert_eq!(y.dims(), &[2, 2, 2]);
        assert!(y.data().iter().all(|&v| v == 0.7));
    }

    #[test]
    fn fc_identity_and_bias() {
        let x = Tensor::vector(vec![3.0, -1.0]);
        let id = FullyConnected { inputs: 2, outputs: 2, weights: vec![1.0, 0.0, 0.0, 1.0], bias: vec![0.0; 2] };
        assert_eq!(fc_forward(&x, &id).unwrap().data(), x.data());
        let zb = FullyConnected { inputs: 2, outputs: 2, weights: vec![0.0; 4], bias: vec![1.0, 2.0] };
        assert_eq!(fc_forward(&x, &zb).unwrap().data(), &[1.0, 2.0]);
    }

    #[test]
    fn softmax_extremes() {
        let y = softmax(&Tensor::vector(vec![1000.0, 0.0, -1000.0]));
        assert!((y.data().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(y.is_finite());
    }
}
