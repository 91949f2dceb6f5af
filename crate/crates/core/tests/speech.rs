use deskbot_core::rng::XorShift64Star;
use deskbot_core::sensors::{synthesize_audio, AudioParams};
use deskbot_core::speech::*;
use proptest::prelude::*;

mod common;

use common::*;

const MODEL: &str = SPEECH_MODEL;
const NOISE_FIX: f64 = 1000.0;

fn model() -> SpeechModel {
    SpeechModel::load(MODEL).unwrap()
}

fn hear(m: &SpeechModel, words: &[&str], noise: f64, seed: u64) -> Vec<String> {
    let p = AudioParams { noise_std: noise, ..Default::default() };
    let audio = synthesize_audio(words, &p, seed).unwrap();
    m.recognize(&audio).unwrap().word_list().into_iter().map(String::from).collect()
}

#[test]
fn single_stop() {
    assert_eq!(hear(&model(), &["stop"], 0.0, 1), ["stop"]);
}

#[test]
fn silence_has_no_words() {
    assert!(hear(&model(), &[], 0.0, 1).is_empty());
    assert!(hear(&model(), &[], NOISE_FIX, 1).is_empty());
}

#[test]
fn go_then_stop() {
    assert_eq!(hear(&model(), &["go", "stop"], 0.0, 1), ["go", "stop"]);
}

fn accuracy(noise: f64, trials: usize) -> f64 {
    let m = model();
    let mut rng = XorShift64Star::new(99);
    let (mut correct, mut total) = (0, 0);
    for t in 0..trials {
        let words: Vec<&str> = (0..3).map(|_| VOCABULARY[rng.below(4) as usize].0).collect();
        let got = hear(&m, &words, noise, 1000 + t as u64);
        total += words.len();
        // Position-wise agreement; insertions or deletions count against.
        correct += words.iter().zip(&got).filter(|(a, b)| **a == b.as_str()).count();
        if got.len() != words.len() {
            correct = correct.saturating_sub(got.len().abs_diff(words.len()));
        }
    }
    correct as f64 / total as f64
}

#[test]
fn clean_vocabulary_fully_recognized() {
    assert_eq!(accuracy(0.0, 20), 1.0);
}

#[test]
fn noisy_vocabulary_mostly_recognized() {
    let a = accuracy(NOISE_FIX, 20);
    assert!(a >= 0.9, "{a}");
}

#[test]
fn model_file_roundtrips() {
    let m = model();
    assert_eq!(SpeechModel::from_json(&m.to_json()).unwrap(), m);
}

#[test]
fn transition_rows_normalized() {
    let m = model();
    for row in &m.hmm.log_trans {
        assert!(log_sum_exp(row).abs() < 1e-9);
    }
}

#[test]
fn gmm_matches_linear_space() {
    let mut rng = XorShift64Star::new(8);
    for _ in 0..200 {
        let g = random_gmm(&mut rng, 3, 8);
        let x: Vec<f64> = (0..8).map(|_| rng.uniform(-1.5, 1.5)).collect();
        let a = g.log_likelihood(&x).unwrap();
        assert!((a - linear_gmm(&g, &x)).abs() < 1e-9);
    }
}

#[test]
fn viterbi_equals_enumeration() {
    let mut rng = XorShift64Star::new(21);
    for _ in 0..300 {
        let n = 1 + rng.below(4) as usize;
        let t = 1 + rng.below(6) as usize;
        let init = random_log_dist(&mut rng, n);
        let trans: Vec<Vec<f64>> = (0..n).map(|_| random_log_dist(&mut rng, n)).collect();
        let emit: Vec<Vec<f64>> = (0..t).map(|_| (0..n).map(|_| rng.uniform(-5.0, 2.0)).collect()).collect();
        let best = brute_force(&init, &trans, &emit);
        match viterbi(&init, &trans, &emit) {
            Ok((path, score)) => {
                assert_eq!(score, best);
                assert_eq!(path_score(&init, &trans, &emit, &path), best);
            }
            Err(SpeechError::DecodeFailure) => assert_eq!(best, f64::NEG_INFINITY),
            Err(e) => panic!("{e}"),
        }
    }
}

proptest! {
    #[test]
    fn gmm_log_sum_exp_bounds(seed in any::<u64>()) {
        let mut rng = XorShift64Star::new(seed);
        let k = 1 + rng.below(4) as usize;
        let g = random_gmm(&mut rng, k, 3);
        let x: Vec<f64> = (0..3).map(|_| rng.uniform(-4.0, 4.0)).collect();
        let v = g.log_likelihood(&x).unwrap();
        let top = g.components.iter().map(|c| c.weighted_log_density(&x)).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(v >= top - 1e-12);
        prop_assert!(v <= top + (k as f64).ln() + 1e-12);
    }

    #[test]
    fn viterbi_score_follows_recurrence(seed in any::<u64>()) {
        // The reported score is the recomputed score of the reported path.
        let mut rng = XorShift64Star::new(seed);
        let n = 1 + rng.below(4) as usize;
        let init = random_log_dist(&mut rng, n);
        let trans: Vec<Vec<f64>> = (0..n).map(|_| random_log_dist(&mut rng, n)).collect();
        let emit: Vec<Vec<f64>> = (0..5).map(|_| (0..n).map(|_| rng.uniform(-5.0, 2.0)).collect()).collect();
        if let Ok((path, score)) = viterbi(&init, &trans, &emit) {
            prop_assert_eq!(score, path_score(&init, &trans, &emit, &path));
            prop_assert_eq!(score, brute_force(&init, &trans, &emit));
        }
    }

    #[test]
    fn framing_count(s in 200usize..20_000) {
        let f = FeatureExtractor::new().frames(&vec![0i16; s], 0);
        prop_assert_eq!(f.len(), (s - 200) / 80 + 1);
    }
}
