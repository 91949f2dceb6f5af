//! Assembles the speech model file from fitted GMMs (a JSON list, index 0 =
//! silence, then two tones per vocabulary word in order).

use deskbot_core::speech::{composite_hmm, GmmModel, LexEntry, Lexicon, SpeechModel, Topology, VOCABULARY};

const STATES_PER_TONE: usize = 3;

fn main() {
    let mut args = std::env::args().skip(1);
    let src = args.next().expect("gmm json path");
    let dst = args.next().expect("output path");
    let gmms: Vec<GmmModel> = serde_json::from_str(&std::fs::read_to_string(src).unwrap()).unwrap();
    let mut state_gmm = vec![0];
    let mut labels = vec!["sil".to_string()];
    let mut words = Vec::new();
    for (w, (word, tones)) in VOCABULARY.iter().enumerate() {
        let mut states = Vec::new();
        for k in 0..tones.len() {
            for j in 0..STATES_PER_TONE {
                states.push(state_gmm.len());
                state_gmm.push(1 + 2 * w + k);
                labels.push(format!("{word}.{k}.{j}"));
            }
        }
        words.push(LexEntry { word: word.to_string(), states });
    }
    let lexicon = Lexicon { silence: vec![0], words };
    let hmm = composite_hmm(&lexicon, &state_gmm, &labels, &Topology::default());
    SpeechModel::new(gmms, lexicon, hmm).unwrap().save(dst).unwrap();
}
