//! Tone-word recognition: log band energies scored by diagonal GMMs and
//! decoded with Viterbi over a silence/word composite HMM.

mod commands;
mod features;
mod gmm;
mod hmm;
mod model;
pub mod vocab;

use thiserror::Error;

pub use commands::{match_command, Command};
pub use features::{
    bin_band, extract_speech_features, frame_count, FeatureExtractor, FeatureVector, BAND_HZ, FRAME_HOP, FRAME_LEN,
    LOG_FLOOR, N_BANDS,
};
pub use gmm::{gmm_log_likelihood, log_sum_exp, GmmComponent, GmmModel};
pub use hmm::{path_score, viterbi, viterbi_decode, HmmModel, HmmState};
pub use model::{composite_hmm, recognize, LexEntry, Lexicon, SpeechModel, Topology, Transcript, WordSpan, MODEL_FORMAT};
pub use vocab::{is_word, word_duration_ms, word_tones, Tone, SAMPLE_RATE, VOCABULARY};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpeechError {
    #[error("expected 8000 Hz audio, got {0} Hz")]
    SampleRate(u32),
    #[error("feature has {got} dimensions, model expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("no observations to decode")]
    EmptyObservations,
    #[error("no path through the model has finite probability")]
    DecodeFailure,
    #[error("invalid speech model: {0}")]
    InvalidModel(String),
    #[error("model parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}
