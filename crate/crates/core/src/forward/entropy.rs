//! Sequence likelihood: char-normalized entropy and greedy decoding.

use crate::error::{Error, Result};
use crate::forward::engine::{all_position_logits, forward};
use crate::forward::math::log_softmax_pick;
use crate::model::{Tokenizer, TransformerWeights};

/// log p(x_t | x_<t) for t = 1..T-1, from a single forward pass.
pub fn sequence_log_probs(weights: &TransformerWeights, tokens: &[u32]) -> Result<Vec<f64>> {
    if tokens.len() < 2 {
        return Err(Error::DegenerateText(tokens.len()));
    }
    let trace = forward(weights, tokens)?;
    let logits = all_position_logits(weights, &trace);
    let mut out = Vec::with_capacity(tokens.len() - 1);
    for i in 0..tokens.len() - 1 {
        let row = logits.row(i);
        out.push(log_softmax_pick(
            row.as_slice().expect("contiguous"),
            tokens[i + 1] as usize,
        ));
    }
    Ok(out)
}

/// Negative log-likelihood of `text` divided by its character count
/// (Unicode scalar values of the raw text; natural log).
pub fn char_normalized_entropy(
    weights: &TransformerWeights,
    tokenizer: &Tokenizer,
    text: &str,
) -> Result<f64> {
    if text.is_empty() {
        return Err(Error::InvalidArgument("empty text".into()));
    }
    let tokens = tokenizer.encode(text)?;
    if tokens.len() < 2 {
        return Err(Error::DegenerateText(tokens.len()));
    }
    let log_probs = sequence_log_probs(weights, &tokens)?;
    let nll: f64 = -log_probs.iter().sum::<f64>();
    let chars = text.chars().count() as f64;
    Ok(nll / chars)
}

/// Greedily decode continuations after `prompt`, returning the continuation
/// text. Ties in the argmax resolve to the lowest token id.
pub fn greedy_decode(
    weights: &TransformerWeights,
    tokenizer: &Tokenizer,
    prompt: &str,
    max_new_tokens: usize,
) -> Result<String> {
    let mut tokens = tokenizer.encode(prompt)?;
    if tokens.is_empty() {
        return Err(Error::EmptySequence);
    }
    let prompt_len = tokens.len();
    for _ in 0..max_new_tokens {
        if tokens.len() >= weights.config.context_limit {
            break;
        }
        let trace = forward(weights, &tokens)?;
        let mut best = 0usize;
        let mut best_v = f32::NEG_INFINITY;
        for (i, &v) in trace.logits.iter().enumerate() {
            if v > best_v {
                best_v = v;
                best = i;
            }
        }
        tokens.push(best as u32);
    }
    tokenizer.decode(&tokens[prompt_len..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        zero_model, Activation, FfnFamily, ModelConfig, NormFamily, PositionFamily,
    };

    fn byte_config(vocab_size: usize) -> ModelConfig {
        ModelConfig {
            n_layers: 2,
            d_model: 16,
            n_heads: 2,
            d_head: 8,
            d_ffn: 24,
            vocab_size,
            context_limit: 128,
            ffn_family: FfnFamily::SingleGate,
            norm_family: NormFamily::PreRmsnorm,
            position_family: PositionFamily::Rotary,
            activation: Some(Activation::Gelu),
            bos_token_id: 256,
            add_bos: true,
        }
    }

    #[test]
    fn entropy_is_deterministic() {
        let cfg = byte_config(257);
        let w = crate::model::random_model(&cfg, 3).unwrap();
        let tok = Tokenizer::byte_level(true);
        let a = char_normalized_entropy(&w, &tok, "the cat sat").unwrap();
        let b = char_normalized_entropy(&w, &tok, "the cat sat").unwrap();
        assert_eq!(a, b);
        assert!(a > 0.0);
    }

    #[test]
    fn uniform_model_entropy_is_log_vocab() {
        // All-zero weights give uniform logits, so every conditional term is
        // log(B): entropy = (T-1) * ln(B) / chars = ln(B) for a byte
        // tokenizer with bos.
        let cfg = byte_config(257);
        let w = zero_model(&cfg).unwrap();
        let tok = Tokenizer::byte_level(true);
        let text = "abcd";
        let h = char_normalized_entropy(&w, &tok, text).unwrap();
        let expected = (cfg.vocab_size as f64).ln();
        assert!((h - expected).abs() < 1e-5, "h={h} expected={expected}");
    }

    #[test]
    fn boosted_continuation_lowers_entropy() {
        // Boost the unembedding row of byte 'b': any text whose
        // continuations are 'b' scores lower entropy than one with 'c'.
        let cfg = byte_config(257);
        let mut w = zero_model(&cfg).unwrap();
        w.embedding.fill(0.01);
        for v in w.unembedding.row_mut(b'b' as usize).iter_mut() {
            *v = 5.0;
        }
        let tok = Tokenizer::byte_level(true);
        let h_b = char_normalized_entropy(&w, &tok, "abbb").unwrap();
        let h_c = char_normalized_entropy(&w, &tok, "accc").unwrap();
        assert!(h_b < h_c);
    }

    #[test]
    fn degenerate_text_is_rejected() {
        let cfg = byte_config(257);
        let w = zero_model(&cfg).unwrap();
        let no_bos = Tokenizer::byte_level(false);
        assert!(matches!(
            char_normalized_entropy(&w, &no_bos, "a"),
            Err(Error::DegenerateText(1))
        ));
        assert!(matches!(
            char_normalized_entropy(&w, &no_bos, ""),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn greedy_decode_echoes_boosted_token() {
        let cfg = byte_config(257);
        let mut w = zero_model(&cfg).unwrap();
        w.embedding.fill(0.01);
        for v in w.unembedding.row_mut(b'8' as usize).iter_mut() {
            *v = 5.0;
        }
        let tok = Tokenizer::byte_level(true);
        let out = greedy_decode(&w, &tok, "3+5=", 1).unwrap();
        assert_eq!(out, "8");
    }
}
