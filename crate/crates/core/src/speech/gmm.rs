use serde::{Deserialize, Serialize};

use super::SpeechError;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// Diagonal-covariance Gaussian mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmmModel {
    pub components: Vec<GmmComponent>,
}

impl GmmComponent {
    /// log(weight) + log N(x; mean, diag(var)).
    pub fn weighted_log_density(&self, x: &[f64]) -> f64 {
        let mut q = 0.0;
        let mut logdet = 0.0;
        for ((xi, m), v) in x.iter().zip(&self.mean).zip(&self.var) {
            let d = xi - m;
            q += d * d / v;
            logdet += v.ln();
        }
        self.weight.ln() - 0.5 * (x.len() as f64 * LN_2PI + logdet + q)
    }
}

impl GmmModel {
    pub fn dim(&self) -> usize {
        self.components.first().map_or(0, |c| c.mean.len())
    }

    pub fn validate(&self) -> Result<(), SpeechError> {
        let bad = |m: String| Err(SpeechError::InvalidModel(m));
        if self.components.is_empty() {
            return bad("gmm has no components".into());
        }
        let d = self.dim();
        let mut total = 0.0;
        for (i, c) in self.components.iter().enumerate() {
            if c.mean.len() != d || c.var.len() != d {
                return bad(format!("component {i} has inconsistent dimension"));
            }
            if !(c.weight > 0.0) {
                return bad(format!("component {i} weight {} not positive", c.weight));
            }
            if c.var.iter().any(|v| !(*v > 0.0) || !v.is_finite()) || c.mean.iter().any(|m| !m.is_finite()) {
                return bad(format!("component {i} has invalid mean or variance"));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("weights sum to {total}"));
        }
        Ok(())
    }

    /// log Σ_c w_c N(x; μ_c, Σ_c) via log-sum-exp.
    pub fn log_likelihood(&self, x: &[f64]) -> Result<f64, SpeechError> {
        if x.len() != self.dim() {
            return Err(SpeechError::Dimension { expected: self.dim(), got: x.len() });
        }
        let terms: Vec<f64> = self.components.iter().map(|c| c.weighted_log_density(x)).collect();
        Ok(log_sum_exp(&terms))
    }
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn gmm_log_likelihood(gmm: &GmmModel, x: &[f64]) -> Result<f64, SpeechError> {
    gmm.log_likelihood(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(weight: f64) -> GmmComponent {
        GmmComponent { weight, mean: vec![0.0], var: vec![1.0] }
    }

    #[test]
    fn standard_normal_at_zero() {
        let g = GmmModel { components: vec![unit(1.0)] };
        assert!((g.log_likelihood(&[0.0]).unwrap() + 0.918939).abs() < 1e-6);
    }

    #[test]
    fn identical_components_collapse() {
        let one = GmmModel { components: vec![unit(1.0)] };
        let two = GmmModel { components: vec![unit(0.5), unit(0.5)] };
        for x in [-2.0, 0.3, 5.0] {
            assert!((one.log_likelihood(&[x]).unwrap() - two.log_likelihood(&[x]).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let g = GmmModel { components: vec![unit(1.0)] };
        assert!(matches!(g.log_likelihood(&[0.0, 1.0]), Err(SpeechError::Dimension { .. })));
    }

    #[test]
    fn validation() {
        assert!(GmmModel { components: vec![unit(0.6)] }.validate().is_err());
        assert!(GmmModel { components: vec![unit(1.0)] }.validate().is_ok());
    }
}
