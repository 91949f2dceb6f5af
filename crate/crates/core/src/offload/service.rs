//! Request handling shared by the socket server and simulated endpoints.

use std::path::Path;
use std::time::Instant;

use super::protocol::{codes, WireLabel, WireMessage};
use super::OffloadError;
use crate::sensors::chunk_samples;
use crate::speech::vocab::SAMPLE_RATE;
use crate::speech::SpeechModel;
use crate::vision::{infer, load_network, Network, Tensor};

pub const SHAPE_NET_FILE: &str = "shape_net.json";
pub const SPEECH_MODEL_FILE: &str = "speech_model.json";

/// Read-only models served by a cloud endpoint.
#[derive(Debug, Clone)]
pub struct OffloadModels {
    pub network: Network,
    pub speech: SpeechModel,
}

impl OffloadModels {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, OffloadError> {
        let dir = dir.as_ref();
        if !dir.is_dir() {
            return Err(OffloadError::Models(format!("{} is not a directory", dir.display())));
        }
        let net_path = dir.join(SHAPE_NET_FILE);
        let network = load_network(&net_path).map_err(|e| OffloadError::Models(format!("{}: {e}", net_path.display())))?;
        let sp_path = dir.join(SPEECH_MODEL_FILE);
        let speech = SpeechModel::load(&sp_path).map_err(|e| OffloadError::Models(format!("{}: {e}", sp_path.display())))?;
        Ok(Self { network, speech })
    }
}

/// Pixels are row-major with interleaved channels.
pub fn image_tensor(width: u16, height: u16, channels: u8, pixels: &[u8]) -> Result<Tensor, String> {
    let (w, h, c) = (width as usize, height as usize, channels as usize);
    if pixels.len() != w * h * c {
        return Err(format!("{} pixels for {w}x{h}x{c}", pixels.len()));
    }
    let mut data = vec![0.0; pixels.len()];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                data[(ch * h + y) * w + x] = pixels[(y * w + x) * c + ch] as f64 / 255.0;
            }
        }
    }
    Tensor::new(vec![c, h, w], data).map_err(|e| e.to_string())
}

fn classify(models: &OffloadModels, width: u16, height: u16, channels: u8, pixels: &[u8]) -> WireMessage {
    let want = models.network.input;
    if [channels as usize, height as usize, width as usize] != want {
        return WireMessage::error(
            codes::PROCESSING,
            format!("image is {width}x{height}x{channels}, model expects {}x{}x{}", want[2], want[1], want[0]),
        );
    }
    let result = image_tensor(width, height, channels, pixels)
        .and_then(|t| infer(&models.network, &t).map_err(|e| e.to_string()));
    match result {
        Ok(labels) => WireMessage::ObjResponse {
            labels: labels.into_iter().map(|l| WireLabel { name: l.name, score: l.score as f32 }).collect(),
        },
        Err(e) => WireMessage::error(codes::PROCESSING, e),
    }
}

fn transcribe(models: &OffloadModels, sample_rate: u32, samples: &[i16], started: Instant) -> WireMessage {
    if sample_rate != SAMPLE_RATE {
        return WireMessage::error(codes::PROCESSING, format!("sample rate {sample_rate} Hz, expected {SAMPLE_RATE}"));
    }
    match models.speech.recognize(&chunk_samples(samples, 0)) {
        Ok(t) => WireMessage::AsrResponse {
            text: t.word_list().join(" "),
            server_processing_ns: started.elapsed().as_nanos() as u64,
        },
        Err(e) => WireMessage::error(codes::PROCESSING, e.to_string()),
    }
}

/// Answers one request. Response-typed or error frames sent by a client are
/// rejected with an error frame.
pub fn handle_request(models: &OffloadModels, request: &WireMessage) -> WireMessage {
    let started = Instant::now();
    match request {
        WireMessage::ObjRequest { width, height, channels, pixels } => classify(models, *width, *height, *channels, pixels),
        WireMessage::AsrRequest { sample_rate, samples } => transcribe(models, *sample_rate, samples, started),
        other => WireMessage::error(codes::UNSUPPORTED, format!("{} is not a request", other.type_name())),
    }
}
