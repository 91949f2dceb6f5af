//! Log band-energy features.
//!
//! Frames are 200 samples (25 ms) with an 80-sample (10 ms) hop, weighted by
//! a symmetric Hann window. The 200-point DFT power spectrum is summed into
//! eight 500 Hz bands: band b covers [500b, 500(b+1)) Hz, with the Nyquist
//! bin folded into the last band. Features are natural logs of the band
//! sums, floored at 1e-10.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::vocab::SAMPLE_RATE;
use super::SpeechError;
use crate::sensors::AudioChunk;

pub const FRAME_LEN: usize = 200;
pub const FRAME_HOP: usize = 80;
pub const N_BANDS: usize = 8;
pub const LOG_FLOOR: f64 = 1e-10;
pub const BAND_HZ: f64 = 500.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub index: usize,
    pub bands: [f64; N_BANDS],
}

pub fn frame_count(samples: usize) -> usize {
    if samples < FRAME_LEN {
        0
    } else {
        (samples - FRAME_LEN) / FRAME_HOP + 1
    }
}

/// Band of DFT bin `k` for a `FRAME_LEN`-point transform.
pub fn bin_band(k: usize) -> usize {
    let hz = k as f64 * SAMPLE_RATE as f64 / FRAME_LEN as f64;
    ((hz / BAND_HZ) as usize).min(N_BANDS - 1)
}

pub struct FeatureExtractor {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
}

impl Default for FeatureExtractor {
    fn default() -> Self {
        Self::new()
    }
}

impl FeatureExtractor {
    pub fn new() -> Self {
        let window = (0..FRAME_LEN)
            .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / (FRAME_LEN - 1) as f64).cos())
            .collect();
        Self {
            fft: FftPlanner::new().plan_fft_forward(FRAME_LEN),
            window,
        }
    }

    /// Raw (linear) band powers of one frame.
    pub fn band_powers(&self, frame: &[i16]) -> [f64; N_BANDS] {
        let mut buf: Vec<Complex<f64>> = frame
            .iter()
            .zip(&self.window)
            .map(|(&s, &w)| Complex::new(s as f64 * w, 0.0))
            .collect();
        self.fft.process(&mut buf);
        let mut bands = [0.0; N_BANDS];
        for (k, c) in buf.iter().enumerate().take(FRAME_LEN / 2 + 1) {
            bands[bin_band(k)] += c.norm_sqr();
        }
        bands
    }

    pub fn frames(&self, samples: &[i16], first_index: usize) -> Vec<FeatureVector> {
        (0..frame_count(samples.len()))
            .map(|i| {
                let p = self.band_powers(&samples[i * FRAME_HOP..i * FRAME_HOP + FRAME_LEN]);
                FeatureVector {
                    index: first_index + i,
                    bands: p.map(|e| e.max(LOG_FLOOR).ln()),
                }
            })
            .collect()
    }
}

pub fn extract_speech_features(chunks: &[AudioChunk]) -> Result<Vec<FeatureVector>, SpeechError> {
    if let Some(c) = chunks.iter().find(|c| c.sample_rate != SAMPLE_RATE) {
        return Err(SpeechError::SampleRate(c.sample_rate));
    }
    let samples: Vec<i16> = chunks.iter().flat_map(|c| c.samples.iter().copied()).collect();
    Ok(FeatureExtractor::new().frames(&samples, 0))
}
