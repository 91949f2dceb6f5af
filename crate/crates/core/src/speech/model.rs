//! Lexicon, composite decoding graph, model file and recognition.
//!
//! The model file is JSON with the GMMs, the lexicon, the per-state GMM
//! binding and the log transition table. Forbidden transitions are simply
//! absent from the sparse `transitions` list, so no infinities appear.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{extract_speech_features, viterbi, FeatureVector, GmmModel, HmmModel, HmmState, SpeechError};
use crate::sensors::AudioChunk;

pub const MODEL_FORMAT: &str = "deskbot-speech";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LexEntry {
    pub word: String,
    pub states: Vec<usize>,
}

/// Word → left-to-right state ids, plus the shared silence states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lexicon {
    pub silence: Vec<usize>,
    pub words: Vec<LexEntry>,
}

impl Lexicon {
    pub fn validate(&self, n_states: usize) -> Result<(), SpeechError> {
        let mut seen = vec![false; n_states];
        for &s in self.silence.iter().chain(self.words.iter().flat_map(|w| w.states.iter())) {
            if s >= n_states {
                return Err(SpeechError::InvalidModel(format!("lexicon state {s} out of range")));
            }
            if std::mem::replace(&mut seen[s], true) {
                return Err(SpeechError::InvalidModel(format!("state {s} used twice in lexicon")));
            }
        }
        if self.silence.is_empty() {
            return Err(SpeechError::InvalidModel("no silence state".into()));
        }
        if let Some(w) = self.words.iter().find(|w| w.states.is_empty()) {
            return Err(SpeechError::InvalidModel(format!("word {} has no states", w.word)));
        }
        Ok(())
    }

    fn word_of_state(&self, n_states: usize) -> Vec<Option<(usize, usize)>> {
        let mut out = vec![None; n_states];
        for (wi, w) in self.words.iter().enumerate() {
            for (pos, &s) in w.states.iter().enumerate() {
                out[s] = Some((wi, pos));
            }
        }
        out
    }
}

/// Transition probabilities of the composite graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Topology {
    pub word_self_loop: f64,
    pub silence_self_loop: f64,
    pub initial_silence: f64,
}

impl Default for Topology {
    fn default() -> Self {
        Self {
            word_self_loop: 0.8,
            silence_self_loop: 0.95,
            initial_silence: 0.5,
        }
    }
}

/// Single-state silence looping into every word with equal probability;
/// words are strictly left to right and return to silence on exit.
pub fn composite_hmm(lexicon: &Lexicon, state_gmm: &[usize], labels: &[String], topo: &Topology) -> HmmModel {
    let n = state_gmm.len();
    let neg = f64::NEG_INFINITY;
    let mut trans = vec![vec![neg; n]; n];
    let mut init = vec![neg; n];
    let n_words = lexicon.words.len() as f64;
    let n_sil = lexicon.silence.len() as f64;
    for &s in &lexicon.silence {
        init[s] = (topo.initial_silence / n_sil).ln();
        for &t in &lexicon.silence {
            let p = if s == t { topo.silence_self_loop } else { 0.0 };
            if p > 0.0 {
                trans[s][t] = p.ln();
            }
        }
        for w in &lexicon.words {
            trans[s][w.states[0]] = ((1.0 - topo.silence_self_loop) / n_words).ln();
        }
    }
    for w in &lexicon.words {
        init[w.states[0]] = ((1.0 - topo.initial_silence) / n_words).ln();
        for (k, &s) in w.states.iter().enumerate() {
            trans[s][s] = topo.word_self_loop.ln();
            let exit = (1.0 - topo.word_self_loop).ln();
            match w.states.get(k + 1) {
                Some(&nx) => trans[s][nx] = exit,
                None => {
                    for &sil in &lexicon.silence {
                        trans[s][sil] = (1.0 - topo.word_self_loop).ln() - n_sil.ln();
                    }
                }
            }
        }
    }
    HmmModel {
        states: state_gmm
            .iter()
            .zip(labels)
            .map(|(&g, l)| HmmState { gmm: g, label: l.clone() })
            .collect(),
        log_init: init,
        log_trans: trans,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeechModel {
    pub gmms: Vec<GmmModel>,
    pub lexicon: Lexicon,
    pub hmm: HmmModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordSpan {
    pub word: String,
    pub start_frame: usize,
    pub end_frame: usize,
    pub log_score: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub words: Vec<WordSpan>,
}

impl Transcript {
    pub fn from_words(words: &[&str]) -> Self {
        Self {
            words: words
                .iter()
                .enumerate()
                .map(|(i, w)| WordSpan { word: w.to_string(), start_frame: i, end_frame: i, log_score: 0.0 })
                .collect(),
        }
    }

    pub fn word_list(&self) -> Vec<&str> {
        self.words.iter().map(|w| w.word.as_str()).collect()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateJson {
    label: String,
    gmm: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitJson {
    state: usize,
    log_prob: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransJson {
    from: usize,
    to: usize,
    log_prob: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelJson {
    format: String,
    version: u32,
    gmms: Vec<GmmModel>,
    lexicon: Lexicon,
    states: Vec<StateJson>,
    initial: Vec<InitJson>,
    transitions: Vec<TransJson>,
}

impl SpeechModel {
    pub fn new(gmms: Vec<GmmModel>, lexicon: Lexicon, hmm: HmmModel) -> Result<Self, SpeechError> {
        let m = Self { gmms, lexicon, hmm };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), SpeechError> {
        for g in &self.gmms {
            g.validate()?;
        }
        self.hmm.validate(self.gmms.len())?;
        self.lexicon.validate(self.hmm.len())
    }

    pub fn from_json(text: &str) -> Result<Self, SpeechError> {
        let m: ModelJson = serde_json::from_str(text).map_err(|e| SpeechError::Parse(e.to_string()))?;
        if m.format != MODEL_FORMAT || m.version != 1 {
            return Err(SpeechError::InvalidModel(format!("unsupported format {} v{}", m.format, m.version)));
        }
        let n = m.states.len();
        let neg = f64::NEG_INFINITY;
        let mut log_init = vec![neg; n];
        let mut log_trans = vec![vec![neg; n]; n];
        for i in &m.initial {
            *log_init
                .get_mut(i.state)
                .ok_or_else(|| SpeechError::InvalidModel(format!("initial state {} out of range", i.state)))? = i.log_prob;
        }
        for t in &m.transitions {
            if t.from >= n || t.to >= n {
                return Err(SpeechError::InvalidModel(format!("transition {}→{} out of range", t.from, t.to)));
            }
            log_trans[t.from][t.to] = t.log_prob;
        }
        let hmm = HmmModel {
            states: m.states.into_iter().map(|s| HmmState { gmm: s.gmm, label: s.label }).collect(),
            log_init,
            log_trans,
        };
        Self::new(m.gmms, m.lexicon, hmm)
    }

    pub fn to_json(&self) -> String {
        let n = self.hmm.len();
        let doc = ModelJson {
            format: MODEL_FORMAT.into(),
            version: 1,
            gmms: self.gmms.clone(),
            lexicon: self.lexicon.clone(),
            states: self.hmm.states.iter().map(|s| StateJson { label: s.label.clone(), gmm: s.gmm }).collect(),
            initial: (0..n)
                .filter(|&i| self.hmm.log_init[i] > f64::NEG_INFINITY)
                .map(|i| InitJson { state: i, log_prob: self.hmm.log_init[i] })
                .collect(),
            transitions: (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .filter(|&(i, j)| self.hmm.log_trans[i][j] > f64::NEG_INFINITY)
                .map(|(i, j)| TransJson { from: i, to: j, log_prob: self.hmm.log_trans[i][j] })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SpeechError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| SpeechError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SpeechError> {
        std::fs::write(path.as_ref(), self.to_json())
            .map_err(|e| SpeechError::Io(format!("{}: {e}", path.as_ref().display())))
    }

    /// Decodes features into the words whose final state the best path
    /// reaches.
    pub fn recognize_features(&self, feats: &[FeatureVector]) -> Result<Transcript, SpeechError> {
        if feats.is_empty() {
            return Ok(Transcript::default());
        }
        let obs: Vec<&[f64]> = feats.iter().map(|f| f.bands.as_slice()).collect();
        let emit = self.hmm.emissions(&self.gmms, &obs)?;
        let (path, _) = viterbi(&self.hmm.log_init, &self.hmm.log_trans, &emit)?;

        let mut cum = Vec::with_capacity(path.len());
        let mut s = self.hmm.log_init[path[0]] + emit[0][path[0]];
        cum.push(s);
        for t in 1..path.len() {
            s = s + self.hmm.log_trans[path[t - 1]][path[t]] + emit[t][path[t]];
            cum.push(s);
        }

        let owner = self.lexicon.word_of_state(self.hmm.len());
        let mut words = Vec::new();
        let mut t = 0;
        while t < path.len() {
            let Some((wi, _)) = owner[path[t]] else {
                t += 1;
                continue;
            };
            let start = t;
            let mut reached_end = false;
            let last = self.lexicon.words[wi].states.len() - 1;
            while t < path.len() && owner[path[t]].map(|o| o.0) == Some(wi) {
                reached_end |= owner[path[t]].map(|o| o.1) == Some(last);
                t += 1;
            }
            if reached_end {
                let before = if start == 0 { 0.0 } else { cum[start - 1] };
                words.push(WordSpan {
                    word: self.lexicon.words[wi].word.clone(),
                    start_frame: feats[start].index,
                    end_frame: feats[t - 1].index,
                    log_score: cum[t - 1] - before,
                });
            }
        }
        Ok(Transcript { words })
    }

    pub fn recognize(&self, audio: &[AudioChunk]) -> Result<Transcript, SpeechError> {
        self.recognize_features(&extract_speech_features(audio)?)
    }
}

pub fn recognize(model: &SpeechModel, audio: &[AudioChunk]) -> Result<Transcript, SpeechError> {
    model.recognize(audio)
}
