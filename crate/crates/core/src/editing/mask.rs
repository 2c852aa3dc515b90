//! Zero-masking of neurons and heads, copy-on-edit.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::model::{NeuronId, NeuronKind, TransformerWeights};

/// Return a copy of `weights` with each listed neuron's parameters zeroed:
/// FFN — the fc1 row (and gate row), plus the fc2 column; attention — the
/// value row and output column inside its head. Duplicates are rejected.
pub fn mask_neurons(weights: &TransformerWeights, ids: &[NeuronId]) -> Result<TransformerWeights> {
    let mut seen = HashSet::new();
    for id in ids {
        id.validate(&weights.config)?;
        if !seen.insert(*id) {
            return Err(Error::InvalidArgument(format!("duplicate neuron {id}")));
        }
    }
    let mut edited = weights.clone();
    for id in ids {
        let layer = &mut edited.layers[id.layer];
        match id.kind {
            NeuronKind::Ffn => {
                layer.fc1.row_mut(id.index).fill(0.0);
                if let Some(gate) = layer.gate.as_mut() {
                    gate.row_mut(id.index).fill(0.0);
                }
                layer.fc2.column_mut(id.index).fill(0.0);
            }
            NeuronKind::Attn => {
                let row = id.head.unwrap_or(0) * weights.config.d_head + id.index;
                layer.w_v.row_mut(row).fill(0.0);
                layer.w_o.column_mut(row).fill(0.0);
            }
        }
    }
    Ok(edited)
}

/// Zero one head's output-projection columns, removing its additive output.
pub fn mask_head(
    weights: &TransformerWeights,
    layer: usize,
    head: usize,
) -> Result<TransformerWeights> {
    let config = &weights.config;
    if layer >= config.n_layers {
        return Err(Error::OutOfBounds(format!("layer {layer}")));
    }
    if head >= config.n_heads {
        return Err(Error::OutOfBounds(format!("head {head}")));
    }
    let mut edited = weights.clone();
    let dh = config.d_head;
    for col in head * dh..(head + 1) * dh {
        edited.layers[layer].w_o.column_mut(col).fill(0.0);
    }
    Ok(edited)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::forward;
    use crate::model::{
        random_model, Activation, FfnFamily, ModelConfig, NormFamily, PositionFamily,
    };

    fn config() -> ModelConfig {
        ModelConfig {
            n_layers: 2,
            d_model: 16,
            n_heads: 2,
            d_head: 8,
            d_ffn: 12,
            vocab_size: 32,
            context_limit: 64,
            ffn_family: FfnFamily::Gated,
            norm_family: NormFamily::PreRmsnorm,
            position_family: PositionFamily::Rotary,
            activation: Some(Activation::Silu),
            bos_token_id: 0,
            add_bos: true,
        }
    }

    #[test]
    fn empty_mask_is_identity_and_copy_on_edit() {
        let w = random_model(&config(), 1).unwrap();
        let before = w.content_hash();
        let edited = mask_neurons(&w, &[]).unwrap();
        assert_eq!(edited.content_hash(), before);
        let _ = mask_neurons(&w, &[NeuronId::ffn(0, 3)]).unwrap();
        assert_eq!(w.content_hash(), before, "source weights must be untouched");
    }

    #[test]
    fn masking_is_idempotent() {
        let w = random_model(&config(), 2).unwrap();
        let ids = [NeuronId::ffn(1, 5), NeuronId::attn(0, 1, 2)];
        let once = mask_neurons(&w, &ids).unwrap();
        let twice = mask_neurons(&once, &ids).unwrap();
        assert_eq!(once.content_hash(), twice.content_hash());
    }

    #[test]
    fn duplicates_and_bad_ids_are_rejected() {
        let w = random_model(&config(), 3).unwrap();
        let dup = [NeuronId::ffn(0, 1), NeuronId::ffn(0, 1)];
        assert!(mask_neurons(&w, &dup).is_err());
        assert!(mask_neurons(&w, &[NeuronId::ffn(9, 0)]).is_err());
        assert!(mask_head(&w, 0, 9).is_err());
        assert!(mask_head(&w, 9, 0).is_err());
    }

    #[test]
    fn masked_head_output_is_zero_everywhere() {
        let w = random_model(&config(), 4).unwrap();
        let masked = mask_head(&w, 1, 0).unwrap();
        let trace = forward(&masked, &[3, 5, 7]).unwrap();
        for pos in 0..3 {
            let out = crate::forward::head_output(&masked, &trace, 1, 0, pos).unwrap();
            assert!(out.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn masking_all_heads_zeroes_attention_term() {
        let w = random_model(&config(), 5).unwrap();
        let mut masked = w.clone();
        for h in 0..w.config.n_heads {
            masked = mask_head(&masked, 0, h).unwrap();
        }
        let trace = forward(&masked, &[1, 2, 3, 4]).unwrap();
        assert!(trace.layers[0].attn_out.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn masked_ffn_neuron_contributes_nothing() {
        let w = random_model(&config(), 6).unwrap();
        let id = NeuronId::ffn(0, 7);
        let masked = mask_neurons(&w, &[id]).unwrap();
        let trace = forward(&masked, &[2, 4, 6]).unwrap();
        let m = trace.ffn_coefficients(0).unwrap();
        for i in 0..3 {
            assert_eq!(m[(i, 7)], 0.0);
        }
        let n = masked.get_neuron(id).unwrap();
        assert!(n.subkey.iter().all(|v| *v == 0.0));
        assert!(n.subvalue.iter().all(|v| *v == 0.0));
        assert!(n.gate_subkey.unwrap().iter().all(|v| *v == 0.0));
    }
}
