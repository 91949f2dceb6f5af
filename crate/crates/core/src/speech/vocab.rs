//! Fixture vocabulary: each command word is a fixed sequence of pure tones.
//!
//! Tones sit at the centres of the 500 Hz analysis bands so each word lights
//! up two distinct bands in order.

pub const SAMPLE_RATE: u32 = 8000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tone {
    pub freq_hz: f64,
    pub duration_ms: u32,
}

const fn tone(freq_hz: f64, duration_ms: u32) -> Tone {
    Tone {
        freq_hz,
        duration_ms,
    }
}

pub const VOCABULARY: [(&str, [Tone; 2]); 4] = [
    ("stop", [tone(750.0, 150), tone(2750.0, 150)]),
    ("go", [tone(1250.0, 150), tone(3250.0, 150)]),
    ("left", [tone(1750.0, 150), tone(250.0, 150)]),
    ("right", [tone(2250.0, 150), tone(3750.0, 150)]),
];

pub fn word_tones(word: &str) -> Option<&'static [Tone]> {
    VOCABULARY
        .iter()
        .find(|(w, _)| *w == word)
        .map(|(_, t)| t.as_slice())
}

pub fn word_duration_ms(word: &str) -> Option<u32> {
    word_tones(word).map(|t| t.iter().map(|x| x.duration_ms).sum())
}

pub fn is_word(word: &str) -> bool {
    word_tones(word).is_some()
}
