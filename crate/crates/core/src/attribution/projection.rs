//! Logit-lens projection of internal vectors into the vocabulary.

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::math::{apply_norm, logsumexp_f64};
use crate::model::{Tokenizer, TransformerWeights};

pub const DEFAULT_N_TOP: usize = 10;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TokenProb {
    pub token_id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token: Option<String>,
    pub probability: f64,
}

/// Top and bottom of the distribution softmax(E_u . finalnorm(v)).
///
/// `top_tokens` descend by probability; `last_tokens` ascend (smallest first).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectionReport {
    pub top_tokens: Vec<TokenProb>,
    pub last_tokens: Vec<TokenProb>,
}

impl ProjectionReport {
    pub fn attach_token_strings(&mut self, tokenizer: &Tokenizer) {
        for tp in self.top_tokens.iter_mut().chain(self.last_tokens.iter_mut()) {
            tp.token = tokenizer.token_text(tp.token_id).ok();
        }
    }
}

/// Project a d_model vector through the final norm and unembedding.
pub fn unembed_project(
    weights: &TransformerWeights,
    vector: &ArrayView1<f32>,
    n_top: usize,
) -> Result<ProjectionReport> {
    let d = weights.config.d_model;
    if vector.len() != d {
        return Err(Error::InvalidArgument(format!(
            "vector length {} != d_model {d}",
            vector.len()
        )));
    }
    let normed = apply_norm(weights.config.norm_family, &weights.final_norm, vector);
    let logits = weights.unembedding.dot(&normed);
    let lse = logsumexp_f64(logits.as_slice().expect("contiguous"));
    let mut probs: Vec<(u32, f64)> = logits
        .iter()
        .enumerate()
        .map(|(i, &l)| (i as u32, ((l as f64) - lse).exp()))
        .collect();
    // Descending probability; token id breaks exact ties deterministically.
    probs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let n = n_top.min(probs.len());
    let top_tokens = probs[..n]
        .iter()
        .map(|&(token_id, probability)| TokenProb {
            token_id,
            token: None,
            probability,
        })
        .collect();
    let last_tokens = probs[probs.len() - n..]
        .iter()
        .rev()
        .map(|&(token_id, probability)| TokenProb {
            token_id,
            token: None,
            probability,
        })
        .collect();
    Ok(ProjectionReport {
        top_tokens,
        last_tokens,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;

    use crate::model::{
        random_model, Activation, FfnFamily, ModelConfig, NormFamily, PositionFamily,
    };

    fn config() -> ModelConfig {
        ModelConfig {
            n_layers: 1,
            d_model: 8,
            n_heads: 1,
            d_head: 8,
            d_ffn: 8,
            vocab_size: 24,
            context_limit: 16,
            ffn_family: FfnFamily::SingleGate,
            norm_family: NormFamily::PreRmsnorm,
            position_family: PositionFamily::Rotary,
            activation: Some(Activation::Gelu),
            bos_token_id: 0,
            add_bos: true,
        }
    }

    #[test]
    fn zero_vector_projects_uniformly() {
        let w = random_model(&config(), 1).unwrap();
        let v = Array1::<f32>::zeros(8);
        let report = unembed_project(&w, &v.view(), 5).unwrap();
        for tp in report.top_tokens.iter().chain(report.last_tokens.iter()) {
            assert!((tp.probability - 1.0 / 24.0).abs() < 1e-9);
        }
    }

    #[test]
    fn dominant_row_wins_top_slot() {
        let mut w = random_model(&config(), 2).unwrap();
        // Amplify the row so its self-inner-product dominates; the final
        // norm is scale-invariant, so the input-side x100 alone cannot
        // place weight on any particular row.
        let amplified = w.unembedding.row(7).mapv(|x| x * 4.0);
        w.unembedding.row_mut(7).assign(&amplified);
        let v = w.unembedding.row(7).mapv(|x| x * 100.0);
        let report = unembed_project(&w, &v.view(), 3).unwrap();
        assert_eq!(report.top_tokens[0].token_id, 7);
        // Ordering invariants.
        for pair in report.top_tokens.windows(2) {
            assert!(pair[0].probability >= pair[1].probability);
        }
        for pair in report.last_tokens.windows(2) {
            assert!(pair[0].probability <= pair[1].probability);
        }
        // Probabilities come from a normalized distribution.
        let normed = apply_norm(w.config.norm_family, &w.final_norm, &v.view());
        let logits = w.unembedding.dot(&normed);
        let lse = logsumexp_f64(logits.as_slice().unwrap());
        let total: f64 = logits.iter().map(|&l| ((l as f64) - lse).exp()).sum();
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let w = random_model(&config(), 3).unwrap();
        let v = Array1::<f32>::zeros(5);
        assert!(unembed_project(&w, &v.view(), 3).is_err());
    }
}
