//! Writes labelled feature frames for fitting the speech GMMs: one label
//! byte (0 = silence, 1 + 2·word + tone otherwise) then eight little-endian
//! f64 log band energies per frame. Frames straddling a boundary are skipped.

use std::io::Write;

use deskbot_core::rng::XorShift64Star;
use deskbot_core::sensors::{synthesize_script, AudioParams, ScriptedWord};
use deskbot_core::speech::{FeatureExtractor, FRAME_HOP, FRAME_LEN, VOCABULARY};

const NOISE_LEVELS: [f64; 5] = [0.0, 250.0, 500.0, 1000.0, 1500.0];

fn main() -> std::io::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "speech_frames.bin".into());
    let per_level: usize = std::env::args().nth(2).map_or(60, |s| s.parse().expect("count"));
    let mut rng = XorShift64Star::new(17);
    let ex = FeatureExtractor::new();
    let mut out = std::io::BufWriter::new(std::fs::File::create(&path)?);
    for (li, &noise) in NOISE_LEVELS.iter().enumerate() {
        for u in 0..per_level {
            let mut at = rng.uniform(0.1, 0.4);
            let mut script = Vec::new();
            let mut segments = Vec::new();
            for _ in 0..3 {
                let w = rng.below(VOCABULARY.len() as u64) as usize;
                let start = (at * 8000.0).round() as usize;
                for (k, t) in VOCABULARY[w].1.iter().enumerate() {
                    let len = t.duration_ms as usize * 8;
                    segments.push((start + k * len, start + (k + 1) * len, (1 + 2 * w + k) as u8));
                }
                script.push(ScriptedWord { at_s: at, word: VOCABULARY[w].0.to_string() });
                at += 0.3 + rng.uniform(0.15, 0.4);
            }
            let total = ((at + 0.3) * 8000.0) as usize;
            let params = AudioParams { amplitude: rng.uniform(5000.0, 10000.0), noise_std: noise, ..Default::default() };
            let samples = synthesize_script(&script, total, &params, (li * 1000 + u) as u64).unwrap();
            for (i, f) in ex.frames(&samples, 0).iter().enumerate() {
                let (a, b) = (i * FRAME_HOP, i * FRAME_HOP + FRAME_LEN);
                let label = if let Some(s) = segments.iter().find(|s| a >= s.0 && b <= s.1) {
                    s.2
                } else if segments.iter().all(|s| b <= s.0 || a >= s.1) {
                    0
                } else {
                    continue;
                };
                out.write_all(&[label])?;
                for v in f.bands {
                    out.write_all(&v.to_le_bytes())?;
                }
            }
        }
    }
    out.flush()
}
