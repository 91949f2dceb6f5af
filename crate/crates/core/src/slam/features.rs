//! Harris corner detection with patch descriptors.
//!
//! Response `R = det(M) - k * trace(M)^2` where `M` is the Gaussian-weighted
//! (sigma 1, 5 taps) structure tensor of Sobel gradients (Sobel scaled by
//! 1/8). Borders are clamped. A pixel is kept when `R > threshold`, its
//! 8x8 descriptor window fits inside the image, and it beats every other
//! pixel in the `(2r+1)^2` suppression window (ties go to the earlier pixel
//! in raster order). Locations are refined by a 1-D parabola fit per axis.

use serde::{Deserialize, Serialize};

use super::{Descriptor, FeaturePoint, DESCRIPTOR_SIDE};
use crate::par::{self, Exec};
use crate::sensors::GrayImage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarrisParams {
    pub k: f32,
    pub threshold: f32,
    pub nms_radius: usize,
}

impl Default for HarrisParams {
    fn default() -> Self {
        Self {
            k: 0.04,
            threshold: 1000.0,
            nms_radius: 5,
        }
    }
}

const GAUSS5: [f32; 5] = [0.054_488_685, 0.244_201_34, 0.402_619_96, 0.244_201_34, 0.054_488_685];

/// Dense corner response, row-major, same size as the image.
pub fn harris_response(img: &GrayImage, k: f32, exec: Exec) -> Vec<f32> {
    let (w, h) = (img.width, img.height);
    if w == 0 || h == 0 {
        return Vec::new();
    }
    let px = |x: isize, y: isize| -> f32 {
        let xc = x.clamp(0, w as isize - 1) as usize;
        let yc = y.clamp(0, h as isize - 1) as usize;
        img.data[yc * w + xc] as f32
    };
    // Gradient products, interleaved (xx, yy, xy) per pixel.
    let mut prod = vec![0f32; w * h * 3];
    par::for_each_chunk_mut(exec, &mut prod, w * 3, |y, row| {
        let y = y as isize;
        for x in 0..w {
            let xi = x as isize;
            let gx = (px(xi + 1, y - 1) + 2.0 * px(xi + 1, y) + px(xi + 1, y + 1)
                - px(xi - 1, y - 1)
                - 2.0 * px(xi - 1, y)
                - px(xi - 1, y + 1))
                * 0.125;
            let gy = (px(xi - 1, y + 1) + 2.0 * px(xi, y + 1) + px(xi + 1, y + 1)
                - px(xi - 1, y - 1)
                - 2.0 * px(xi, y - 1)
                - px(xi + 1, y - 1))
                * 0.125;
            row[3 * x] = gx * gx;
            row[3 * x + 1] = gy * gy;
            row[3 * x + 2] = gx * gy;
        }
    });
    // Horizontal blur.
    let mut tmp = vec![0f32; w * h * 3];
    par::for_each_chunk_mut(exec, &mut tmp, w * 3, |y, row| {
        let src = &prod[y * w * 3..(y + 1) * w * 3];
        for x in 0..w {
            let mut acc = [0f32; 3];
            for (t, g) in GAUSS5.iter().enumerate() {
                let xs = (x as isize + t as isize - 2).clamp(0, w as isize - 1) as usize;
                for c in 0..3 {
                    acc[c] += g * src[3 * xs + c];
                }
            }
            row[3 * x..3 * x + 3].copy_from_slice(&acc);
        }
    });
    // Vertical blur fused with the response.
    let mut resp = vec![0f32; w * h];
    par::for_each_chunk_mut(exec, &mut resp, w, |y, row| {
        for (x, out) in row.iter_mut().enumerate() {
            let mut acc = [0f32; 3];
            for (t, g) in GAUSS5.iter().enumerate() {
                let ys = (y as isize + t as isize - 2).clamp(0, h as isize - 1) as usize;
                let base = (ys * w + x) * 3;
                for c in 0..3 {
                    acc[c] += g * tmp[base + c];
                }
            }
            let det = acc[0] * acc[1] - acc[2] * acc[2];
            let tr = acc[0] + acc[1];
            *out = det - k * tr * tr;
        }
    });
    resp
}

fn is_local_max(resp: &[f32], w: usize, h: usize, x: usize, y: usize, r: usize) -> bool {
    let v = resp[y * w + x];
    let y0 = y.saturating_sub(r);
    let y1 = (y + r).min(h - 1);
    let x0 = x.saturating_sub(r);
    let x1 = (x + r).min(w - 1);
    for yy in y0..=y1 {
        for xx in x0..=x1 {
            if xx == x && yy == y {
                continue;
            }
            let o = resp[yy * w + xx];
            let earlier = (yy, xx) < (y, x);
            if o > v || (o == v && earlier) {
                return false;
            }
        }
    }
    true
}

fn parabola_offset(m: f32, c: f32, p: f32) -> f64 {
    let denom = m - 2.0 * c + p;
    if denom.abs() < f32::EPSILON * c.abs().max(1.0) {
        return 0.0;
    }
    (0.5 * (m - p) as f64 / denom as f64).clamp(-0.5, 0.5)
}

/// Unit-normalised 8x8 intensity patch covering `[x-4, x+4) x [y-4, y+4)`.
pub fn patch_descriptor(img: &GrayImage, x: usize, y: usize) -> Option<Descriptor> {
    let half = DESCRIPTOR_SIDE / 2;
    if x < half || y < half || x + half > img.width || y + half > img.height {
        return None;
    }
    let mut d = [0f32; DESCRIPTOR_SIDE * DESCRIPTOR_SIDE];
    for j in 0..DESCRIPTOR_SIDE {
        for i in 0..DESCRIPTOR_SIDE {
            d[j * DESCRIPTOR_SIDE + i] = img.get(x - half + i, y - half + j) as f32;
        }
    }
    Descriptor::normalized(d)
}

pub fn extract_features(img: &GrayImage, params: &HarrisParams) -> Vec<FeaturePoint> {
    extract_features_with(img, params, Exec::default())
}

pub fn extract_features_with(img: &GrayImage, params: &HarrisParams, exec: Exec) -> Vec<FeaturePoint> {
    let (w, h) = (img.width, img.height);
    let half = DESCRIPTOR_SIDE / 2;
    if w < DESCRIPTOR_SIDE || h < DESCRIPTOR_SIDE {
        return Vec::new();
    }
    let resp = harris_response(img, params.k, exec);
    let rows: Vec<Vec<FeaturePoint>> = par::map_range(exec, h + 1 - 2 * half, |j| {
        let y = j + half;
        let mut out = Vec::new();
        for x in half..=w - half {
            let v = resp[y * w + x];
            if v <= params.threshold || !is_local_max(&resp, w, h, x, y, params.nms_radius) {
                continue;
            }
            let Some(descriptor) = patch_descriptor(img, x, y) else {
                continue;
            };
            let du = if x > 0 && x + 1 < w {
                parabola_offset(resp[y * w + x - 1], v, resp[y * w + x + 1])
            } else {
                0.0
            };
            let dv = if y > 0 && y + 1 < h {
                parabola_offset(resp[(y - 1) * w + x], v, resp[(y + 1) * w + x])
            } else {
                0.0
            };
            out.push(FeaturePoint {
                u: x as f64 + du,
                v: y as f64 + dv,
                pixel: (x as u32, y as u32),
                score: v as f64,
                descriptor,
            });
        }
        out
    });
    rows.into_iter().flatten().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn square(w: usize, h: usize, x0: usize, y0: usize, side: usize, fg: u8, bg: u8) -> GrayImage {
        let mut img = GrayImage::filled(w, h, bg);
        for y in y0..y0 + side {
            for x in x0..x0 + side {
                img.set(x, y, fg);
            }
        }
        img
    }

    #[test]
    fn uniform_image_has_no_features() {
        let img = GrayImage::filled(64, 48, 90);
        assert!(extract_features(&img, &HarrisParams::default()).is_empty());
    }

    /// Oracle: evaluate the response at every pixel and collect the strict
    /// maxima of each quadrant around the square; compare with the detector.
    #[test]
    fn white_square_gives_four_corners() {
        let img = square(64, 64, 20, 24, 16, 255, 0);
        let feats = extract_features(&img, &HarrisParams::default());
        assert_eq!(feats.len(), 4, "{feats:?}");
        // Geometric corners at pixel boundaries 19.5 / 35.5 and 23.5 / 39.5.
        let corners = [(19.5, 23.5), (35.5, 23.5), (19.5, 39.5), (35.5, 39.5)];
        for (cu, cv) in corners {
            assert!(
                feats.iter().any(|f| (f.u - cu).abs() <= 1.0 && (f.v - cv).abs() <= 1.0),
                "no feature near ({cu}, {cv}): {feats:?}"
            );
        }
        // Exhaustive oracle: global maximum of the response in each quadrant.
        let resp = harris_response(&img, 0.04, Exec::Sequential);
        for (qx, qy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            let mut best = (f32::MIN, 0, 0);
            for y in qy * 32..(qy + 1) * 32 {
                for x in qx * 32..(qx + 1) * 32 {
                    if resp[y * 64 + x] > best.0 {
                        best = (resp[y * 64 + x], x, y);
                    }
                }
            }
            assert!(feats.iter().any(|f| f.pixel == (best.1 as u32, best.2 as u32)));
        }
    }

    #[test]
    fn descriptors_are_unit_norm() {
        let img = square(64, 64, 20, 24, 16, 200, 30);
        for f in extract_features(&img, &HarrisParams::default()) {
            let n: f32 = f.descriptor.0.iter().map(|v| v * v).sum();
            assert!((n - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn tiny_image_is_empty() {
        let img = GrayImage::filled(5, 5, 0);
        assert!(extract_features(&img, &HarrisParams::default()).is_empty());
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let img = square(96, 80, 30, 20, 12, 220, 40);
        let a = extract_features_with(&img, &HarrisParams::default(), Exec::Sequential);
        let b = extract_features_with(&img, &HarrisParams::default(), Exec::Parallel);
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        // Shifting the scene shifts every interior feature by the same amount.
        #[test]
        fn translation_covariant(dx in 0usize..9, dy in 0usize..9, side in 8usize..14,
                                 fg in 120u8..255) {
            let a = square(96, 96, 30, 30, side, fg, 40);
            let b = square(96, 96, 30 + dx, 30 + dy, side, fg, 40);
            let fa = extract_features(&a, &HarrisParams::default());
            let fb = extract_features(&b, &HarrisParams::default());
            prop_assert_eq!(fa.len(), fb.len());
            for (p, q) in fa.iter().zip(&fb) {
                prop_assert_eq!(p.pixel.0 + dx as u32, q.pixel.0);
                prop_assert_eq!(p.pixel.1 + dy as u32, q.pixel.1);
                prop_assert!((p.u + dx as f64 - q.u).abs() < 1e-9);
                prop_assert_eq!(&p.descriptor, &q.descriptor);
            }
        }
    }
}
