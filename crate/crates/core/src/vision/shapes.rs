//! Seeded generator for the 32×32 shape-recognition images.

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::rng::{derive_seed, XorShift64Star};

pub const SHAPE_SIDE: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Square,
    Cross,
    Disk,
    Triangle,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 4] = [ShapeKind::Square, ShapeKind::Cross, ShapeKind::Disk, ShapeKind::Triangle];

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Square => "square",
            ShapeKind::Cross => "cross",
            ShapeKind::Disk => "disk",
            ShapeKind::Triangle => "triangle",
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&k| k == self).expect("listed")
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// 4×4 supersampled coverage of the shape at pixel (x, y).
fn coverage(kind: ShapeKind, cx: f64, cy: f64, r: f64, x: usize, y: usize) -> f64 {
    let mut hits = 0;
    for sy in 0..4 {
        for sx in 0..4 {
            let px = x as f64 + (sx as f64 + 0.5) / 4.0 - cx;
            let py = y as f64 + (sy as f64 + 0.5) / 4.0 - cy;
            let inside = match kind {
                ShapeKind::Square => px.abs() <= r && py.abs() <= r,
                ShapeKind::Cross => {
                    let arm = r * 0.35;
                    (px.abs() <= r && py.abs() <= arm) || (py.abs() <= r && px.abs() <= arm)
                }
                ShapeKind::Disk => px * px + py * py <= r * r,
                ShapeKind::Triangle => {
                    // Upright isosceles: apex at (0, −r), base at y = r.
                    py <= r && py >= -r && px.abs() <= (py + r) * 0.5
                }
            };
            hits += inside as u32;
        }
    }
    hits as f64 / 16.0
}

/// Renders one 8-bit image of `kind` with random size, position, contrast
/// and pixel noise.
pub fn render_shape(kind: ShapeKind, rng: &mut XorShift64Star) -> Vec<u8> {
    let r = rng.uniform(6.0, 11.0);
    let c = SHAPE_SIDE as f64 / 2.0;
    let cx = c + rng.uniform(-3.0, 3.0);
    let cy = c + rng.uniform(-3.0, 3.0);
    let bg = rng.uniform(0.0, 60.0);
    let fg = rng.uniform(150.0, 255.0);
    let noise = rng.uniform(0.0, 12.0);
    let mut px = Vec::with_capacity(SHAPE_SIDE * SHAPE_SIDE);
    for y in 0..SHAPE_SIDE {
        for x in 0..SHAPE_SIDE {
            let a = coverage(kind, cx, cy, r, x, y);
            let v = bg + (fg - bg) * a + rng.gaussian(0.0, noise);
            px.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    px
}

/// A view with no object: background level and pixel noise drawn like
/// [`render_shape`]'s.
pub fn render_empty(rng: &mut XorShift64Star) -> Vec<u8> {
    let bg = rng.uniform(0.0, 60.0);
    let noise = rng.uniform(0.0, 12.0);
    (0..SHAPE_SIDE * SHAPE_SIDE)
        .map(|_| (bg + rng.gaussian(0.0, noise)).round().clamp(0.0, 255.0) as u8)
        .collect()
}

/// Spread between the 95th and 5th intensity percentiles. Object images
/// sit well above noise-only views.
pub fn image_contrast(pixels: &[u8]) -> u8 {
    if pixels.is_empty() {
        return 0;
    }
    let mut v = pixels.to_vec();
    v.sort_unstable();
    let at = |q: f64| v[((q * (v.len() - 1) as f64).round() as usize).min(v.len() - 1)];
    at(0.95) - at(0.05)
}

pub fn shape_tensor(pixels: &[u8]) -> Tensor {
    Tensor::from_gray(SHAPE_SIDE, SHAPE_SIDE, pixels).expect("32×32 image")
}

/// `n` images cycling through the classes in order.
pub fn shape_dataset(seed: u64, n: usize) -> Vec<(ShapeKind, Vec<u8>)> {
    let mut rng = XorShift64Star::new(derive_seed(seed, 0x5348));
    (0..n)
        .map(|i| {
            let k = ShapeKind::ALL[i % 4];
            (k, render_shape(k, &mut rng))
        })
        .collect()
}

/// The canonical clean image of a class: centred, mid size, full contrast.
pub fn canonical_shape(kind: ShapeKind) -> Vec<u8> {
    let c = SHAPE_SIDE as f64 / 2.0;
    (0..SHAPE_SIDE * SHAPE_SIDE)
        .map(|i| (255.0 * coverage(kind, c, c, 9.0, i % SHAPE_SIDE, i / SHAPE_SIDE)).round() as u8)
        .collect()
}
