//! Hidden Markov models in log space and Viterbi decoding.

use super::gmm::log_sum_exp;
use super::{GmmModel, SpeechError};

#[derive(Debug, Clone, PartialEq)]
pub struct HmmState {
    pub gmm: usize,
    pub label: String,
}

/// States, initial log distribution and a dense log transition matrix
/// (`f64::NEG_INFINITY` marks a forbidden transition).
#[derive(Debug, Clone, PartialEq)]
pub struct HmmModel {
    pub states: Vec<HmmState>,
    pub log_init: Vec<f64>,
    pub log_trans: Vec<Vec<f64>>,
}

impl HmmModel {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn validate(&self, n_gmms: usize) -> Result<(), SpeechError> {
        let n = self.states.len();
        let bad = |m: String| Err(SpeechError::InvalidModel(m));
        if self.log_init.len() != n || self.log_trans.len() != n || self.log_trans.iter().any(|r| r.len() != n) {
            return bad(format!("hmm tables do not match {n} states"));
        }
        if let Some(s) = self.states.iter().find(|s| s.gmm >= n_gmms) {
            return bad(format!("state {} refers to missing gmm {}", s.label, s.gmm));
        }
        let init = log_sum_exp(&self.log_init);
        if (init).abs() > 1e-9 {
            return bad(format!("initial distribution sums to exp({init})"));
        }
        for (i, row) in self.log_trans.iter().enumerate() {
            let s = log_sum_exp(row);
            if s.abs() > 1e-9 {
                return bad(format!("transition row {i} sums to exp({s})"));
            }
        }
        Ok(())
    }

    /// Per-frame, per-state emission log-likelihoods.
    pub fn emissions(&self, gmms: &[GmmModel], obs: &[&[f64]]) -> Result<Vec<Vec<f64>>, SpeechError> {
        obs.iter()
            .map(|x| {
                let per_gmm = gmms.iter().map(|g| g.log_likelihood(x)).collect::<Result<Vec<_>, _>>()?;
                Ok(self.states.iter().map(|s| per_gmm[s.gmm]).collect())
            })
            .collect()
    }
}

/// Most likely state path and its log score.
///
/// At each step the predecessor with the lowest id wins ties, and so does
/// the final state.
pub fn viterbi(log_init: &[f64], log_trans: &[Vec<f64>], log_emit: &[Vec<f64>]) -> Result<(Vec<usize>, f64), SpeechError> {
    let n = log_init.len();
    let Some(first) = log_emit.first() else {
        return Err(SpeechError::EmptyObservations);
    };
    // Allowed predecessors of each state, ascending.
    let preds: Vec<Vec<usize>> = (0..n)
        .map(|j| (0..n).filter(|&i| log_trans[i][j] > f64::NEG_INFINITY).collect())
        .collect();
    let mut delta: Vec<f64> = (0..n).map(|j| log_init[j] + first[j]).collect();
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(log_emit.len());
    for e in &log_emit[1..] {
        let mut next = vec![f64::NEG_INFINITY; n];
        let mut ptr = vec![0usize; n];
        for j in 0..n {
            let mut best = f64::NEG_INFINITY;
            let mut arg = usize::MAX;
            for &i in &preds[j] {
                let s = delta[i] + log_trans[i][j];
                if arg == usize::MAX || s > best {
                    best = s;
                    arg = i;
                }
            }
            if arg != usize::MAX {
                next[j] = best + e[j];
                ptr[j] = arg;
            }
        }
        back.push(ptr);
        delta = next;
    }
    let mut end = 0;
    for j in 1..n {
        if delta[j] > delta[end] {
            end = j;
        }
    }
    let score = delta[end];
    if score == f64::NEG_INFINITY || score.is_nan() {
        return Err(SpeechError::DecodeFailure);
    }
    let mut path = vec![end; log_emit.len()];
    for t in (0..back.len()).rev() {
        path[t] = back[t][path[t + 1]];
    }
    Ok((path, score))
}

pub fn viterbi_decode(hmm: &HmmModel, gmms: &[GmmModel], obs: &[&[f64]]) -> Result<(Vec<usize>, f64), SpeechError> {
    if obs.is_empty() {
        return Err(SpeechError::EmptyObservations);
    }
    let e = hmm.emissions(gmms, obs)?;
    viterbi(&hmm.log_init, &hmm.log_trans, &e)
}

/// Log score of a given path, accumulated in the same order as `viterbi`.
pub fn path_score(log_init: &[f64], log_trans: &[Vec<f64>], log_emit: &[Vec<f64>], path: &[usize]) -> f64 {
    let mut s = log_init[path[0]] + log_emit[0][path[0]];
    for t in 1..path.len() {
        s = s + log_trans[path[t - 1]][path[t]] + log_emit[t][path[t]];
    }
    s
}
