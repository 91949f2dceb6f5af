use serde::{Deserialize, Serialize};

use super::VisionError;

/// Row-major f64 array; (channels, height, width) or (length).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self, VisionError> {
        let n: usize = dims.iter().product();
        if dims.is_empty() || n != data.len() {
            return Err(VisionError::Shape {
                layer: None,
                message: format!("dims {:?} need {} values, got {}", dims, n, data.len()),
            });
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let n = dims.iter().product();
        Self { dims, data: vec![0.0; n] }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self { dims: vec![data.len()], data }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// (c, h, w) view; vectors count as (n, 1, 1).
    pub fn chw(&self) -> (usize, usize, usize) {
        match self.dims.as_slice() {
            [c, h, w] => (*c, *h, *w),
            [n] => (*n, 1, 1),
            d => (d.iter().product(), 1, 1),
        }
    }

    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        let (_, h, w) = self.chw();
        self.data[(c * h + y) * w + x]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Single-channel tensor from 8-bit pixels scaled to [0, 1].
    pub fn from_gray(width: usize, height: usize, pixels: &[u8]) -> Result<Self, VisionError> {
        Tensor::new(
            vec![1, height, width],
            pixels.iter().map(|&p| p as f64 / 255.0).collect(),
        )
    }
}
