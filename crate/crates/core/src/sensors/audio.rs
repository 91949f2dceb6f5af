//! Synthetic microphone stream: command words rendered as tone sequences.

use serde::{Deserialize, Serialize};

use super::SensorError;
use crate::rng::XorShift64Star;
use crate::speech::vocab::{word_tones, SAMPLE_RATE};

pub const CHUNK_SAMPLES: usize = 800;
pub const CHUNK_NS: u64 = 100_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudioChunk {
    pub t_ns: u64,
    pub sample_rate: u32,
    pub samples: Vec<i16>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AudioParams {
    pub amplitude: f64,
    pub noise_std: f64,
    pub lead_silence_ms: u32,
    pub gap_ms: u32,
    pub tail_silence_ms: u32,
    /// Raised-cosine ramp at both ends of every tone.
    pub ramp_ms: u32,
}

impl Default for AudioParams {
    fn default() -> Self {
        Self {
            amplitude: 8000.0,
            noise_std: 0.0,
            lead_silence_ms: 200,
            gap_ms: 250,
            tail_silence_ms: 300,
            ramp_ms: 5,
        }
    }
}

/// A word placed at an absolute start time within a stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedWord {
    pub at_s: f64,
    pub word: String,
}

fn ms_to_samples(ms: u32) -> usize {
    ms as usize * SAMPLE_RATE as usize / 1000
}

fn add_word(buf: &mut [f64], start: usize, word: &str, params: &AudioParams) {
    let tones = word_tones(word).expect("validated");
    let ramp = ms_to_samples(params.ramp_ms).max(1);
    let mut pos = start;
    for t in tones {
        let n = ms_to_samples(t.duration_ms);
        for i in 0..n {
            let Some(slot) = buf.get_mut(pos + i) else {
                break;
            };
            let edge = i.min(n - 1 - i);
            let env = if edge < ramp {
                0.5 - 0.5 * (std::f64::consts::PI * edge as f64 / ramp as f64).cos()
            } else {
                1.0
            };
            let ph = 2.0 * std::f64::consts::PI * t.freq_hz * i as f64 / SAMPLE_RATE as f64;
            *slot += params.amplitude * env * ph.sin();
        }
        pos += n;
    }
}

fn check_words<'a>(words: impl IntoIterator<Item = &'a str>) -> Result<(), SensorError> {
    for w in words {
        if word_tones(w).is_none() {
            return Err(SensorError::UnknownWord(w.to_string()));
        }
    }
    Ok(())
}

fn finish(buf: Vec<f64>, noise_std: f64, seed: u64) -> Vec<i16> {
    let mut rng = XorShift64Star::new(seed);
    buf.into_iter()
        .map(|v| {
            let n = if noise_std > 0.0 { rng.gaussian(0.0, noise_std) } else { 0.0 };
            (v + n).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
        })
        .collect()
}

/// Renders words at scripted start times into a stream of `total_samples`.
pub fn synthesize_script(
    script: &[ScriptedWord],
    total_samples: usize,
    params: &AudioParams,
    seed: u64,
) -> Result<Vec<i16>, SensorError> {
    check_words(script.iter().map(|s| s.word.as_str()))?;
    let mut buf = vec![0.0; total_samples];
    for s in script {
        if !(s.at_s.is_finite() && s.at_s >= 0.0) {
            return Err(SensorError::InvalidSpec(format!("bad word time {}", s.at_s)));
        }
        let start = (s.at_s * SAMPLE_RATE as f64).round() as usize;
        add_word(&mut buf, start, &s.word, params);
    }
    Ok(finish(buf, params.noise_std, seed))
}

/// Cuts a sample stream into contiguous 100 ms chunks, zero-padding the tail.
pub fn chunk_samples(samples: &[i16], t0_ns: u64) -> Vec<AudioChunk> {
    samples
        .chunks(CHUNK_SAMPLES)
        .enumerate()
        .map(|(i, c)| {
            let mut s = c.to_vec();
            s.resize(CHUNK_SAMPLES, 0);
            AudioChunk {
                t_ns: t0_ns + i as u64 * CHUNK_NS,
                sample_rate: SAMPLE_RATE,
                samples: s,
            }
        })
        .collect()
}

/// Lays the words out back to back (lead silence, words separated by gaps,
/// tail silence) and returns the stream as whole chunks.
pub fn synthesize_audio(
    words: &[&str],
    params: &AudioParams,
    seed: u64,
) -> Result<Vec<AudioChunk>, SensorError> {
    check_words(words.iter().copied())?;
    let mut script = Vec::with_capacity(words.len());
    let mut at_ms = params.lead_silence_ms;
    for (i, w) in words.iter().enumerate() {
        if i > 0 {
            at_ms += params.gap_ms;
        }
        script.push(ScriptedWord {
            at_s: at_ms as f64 / 1000.0,
            word: w.to_string(),
        });
        at_ms += crate::speech::vocab::word_duration_ms(w).expect("checked");
    }
    at_ms += params.tail_silence_ms;
    let total = ms_to_samples(at_ms).div_ceil(CHUNK_SAMPLES) * CHUNK_SAMPLES;
    let samples = synthesize_script(&script, total, params, seed)?;
    Ok(chunk_samples(&samples, 0))
}

pub fn concat_chunks(chunks: &[AudioChunk]) -> Vec<i16> {
    chunks.iter().flat_map(|c| c.samples.iter().copied()).collect()
}
