//! Instrumented forward pass.
//!
//! The residual identity h^l = h^{l-1} + A^l + F^l holds exactly by
//! construction: A and F are defined as the terms actually added to the
//! stream, computed after their respective pre-norms. The FFN term further
//! decomposes into coefficient-weighted subvalues, and each head's term into
//! attention-weighted neuron contributions; both reconstructions are part of
//! the trace contract.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::forward::math::{activate, apply_norm, apply_rotary, softmax_inplace};
use crate::forward::trace::{InferenceTrace, LayerTrace, PositionedContribution};
use crate::model::{FfnFamily, NeuronId, NeuronKind, PositionFamily, TransformerWeights};

/// Run the model over `tokens`, recording every residual term, attention
/// score, and neuron coefficient.
pub fn forward(weights: &TransformerWeights, tokens: &[u32]) -> Result<InferenceTrace> {
    let config = &weights.config;
    let t = tokens.len();
    if t == 0 {
        return Err(Error::EmptySequence);
    }
    if t > config.context_limit {
        return Err(Error::ContextOverflow {
            len: t,
            limit: config.context_limit,
        });
    }
    for &id in tokens {
        if (id as usize) >= config.vocab_size {
            return Err(Error::InvalidTokenId {
                id,
                vocab_size: config.vocab_size,
            });
        }
    }

    let d = config.d_model;
    let mut embedded = Array2::<f32>::zeros((t, d));
    for (i, &id) in tokens.iter().enumerate() {
        let mut row = weights.embedding.row(id as usize).to_owned();
        if let Some(pos) = &weights.pos_embedding {
            row += &pos.row(i);
        }
        embedded.row_mut(i).assign(&row);
    }

    let mut hidden = embedded.clone();
    let mut layers = Vec::with_capacity(config.n_layers);
    for layer in &weights.layers {
        // Attention block.
        let mut attn_input = Array2::<f32>::zeros((t, d));
        for i in 0..t {
            attn_input
                .row_mut(i)
                .assign(&apply_norm(config.norm_family, &layer.norm1, &hidden.row(i)));
        }
        let q_all = attn_input.dot(&layer.w_q.t());
        let k_all = attn_input.dot(&layer.w_k.t());
        let v_all = attn_input.dot(&layer.w_v.t());

        let dh = config.d_head;
        let scale = 1.0 / (dh as f32).sqrt();
        let mut attn_scores = Vec::with_capacity(config.n_heads);
        let mut context = Array2::<f32>::zeros((t, d));
        for h in 0..config.n_heads {
            let cols = h * dh..(h + 1) * dh;
            let mut q = q_all.slice(ndarray::s![.., cols.clone()]).to_owned();
            let mut k = k_all.slice(ndarray::s![.., cols.clone()]).to_owned();
            if config.position_family == PositionFamily::Rotary {
                for i in 0..t {
                    apply_rotary(q.row_mut(i).as_slice_mut().expect("contiguous"), i);
                    apply_rotary(k.row_mut(i).as_slice_mut().expect("contiguous"), i);
                }
            }
            let mut scores = Array2::<f32>::zeros((t, t));
            for i in 0..t {
                let mut row: Vec<f32> = (0..=i)
                    .map(|p| q.row(i).dot(&k.row(p)) * scale)
                    .collect();
                softmax_inplace(&mut row);
                for (p, v) in row.into_iter().enumerate() {
                    scores[(i, p)] = v;
                }
            }
            for i in 0..t {
                for p in 0..=i {
                    let alpha = scores[(i, p)];
                    if alpha != 0.0 {
                        for (slot, col) in cols.clone().enumerate() {
                            context[(i, col)] += alpha * v_all[(p, h * dh + slot)];
                        }
                    }
                }
            }
            attn_scores.push(scores);
        }
        let attn_out = context.dot(&layer.w_o.t());

        let mid = &hidden + &attn_out;

        // FFN block.
        let mut ffn_input = Array2::<f32>::zeros((t, d));
        for i in 0..t {
            ffn_input
                .row_mut(i)
                .assign(&apply_norm(config.norm_family, &layer.norm2, &mid.row(i)));
        }
        let act = config.activation();
        let up = ffn_input.dot(&layer.fc1.t());
        let coefficients = match config.ffn_family {
            FfnFamily::SingleGate => up.mapv(|v| activate(act, v)),
            FfnFamily::Gated => {
                let gate = ffn_input
                    .dot(&layer.gate.as_ref().expect("gated family has gate").t());
                let gated = gate.mapv(|v| activate(act, v));
                gated * &up
            }
        };
        let ffn_out = coefficients.dot(&layer.fc2.t());

        hidden = &mid + &ffn_out;
        layers.push(LayerTrace {
            attn_input,
            attn_scores,
            attn_out,
            ffn_input,
            coefficients,
            ffn_out,
            hidden: hidden.clone(),
        });
    }

    let final_normed = apply_norm(
        config.norm_family,
        &weights.final_norm,
        &hidden.row(t - 1),
    );
    let logits = weights.unembedding.dot(&final_normed);
    let mut distribution = logits.to_vec();
    softmax_inplace(&mut distribution);

    Ok(InferenceTrace {
        tokens: tokens.to_vec(),
        embedded,
        layers,
        final_normed,
        logits,
        distribution: Array1::from_vec(distribution),
    })
}

/// Logits for every position of an existing trace (final norm + unembedding
/// applied per row). Row i predicts token i+1.
pub fn all_position_logits(weights: &TransformerWeights, trace: &InferenceTrace) -> Array2<f32> {
    let t = trace.seq_len();
    let hidden = &trace.layers[trace.n_layers() - 1].hidden;
    let mut normed = Array2::<f32>::zeros((t, weights.config.d_model));
    for i in 0..t {
        normed.row_mut(i).assign(&apply_norm(
            weights.config.norm_family,
            &weights.final_norm,
            &hidden.row(i),
        ));
    }
    normed.dot(&weights.unembedding.t())
}

/// One head's additive output at one query position, reconstructed from the
/// trace: sum over source positions of alpha * W_o[head] V[head] x_p.
pub fn head_output(
    weights: &TransformerWeights,
    trace: &InferenceTrace,
    layer: usize,
    head: usize,
    position: usize,
) -> Result<Array1<f32>> {
    let config = &weights.config;
    if layer >= config.n_layers {
        return Err(Error::OutOfBounds(format!("layer {layer}")));
    }
    if head >= config.n_heads {
        return Err(Error::OutOfBounds(format!("head {head}")));
    }
    if position >= trace.seq_len() {
        return Err(Error::OutOfBounds(format!("position {position}")));
    }
    let dh = config.d_head;
    let lt = &trace.layers[layer];
    let w = &weights.layers[layer];
    let alpha = lt.attn_scores[head].row(position);
    let mut ctx = Array1::<f32>::zeros(dh);
    for p in 0..=position {
        let a = alpha[p];
        if a == 0.0 {
            continue;
        }
        let x = lt.attn_input.row(p);
        for k in 0..dh {
            ctx[k] += a * w.w_v.row(head * dh + k).dot(&x);
        }
    }
    let block = weights.head_out_block(layer, head);
    Ok(block.dot(&ctx))
}

/// Scalar weight with which one attention neuron's subvalue enters the
/// stream at `position`: sum_p alpha_p * (subkey . attn_input_p).
pub fn attn_neuron_coefficient(
    weights: &TransformerWeights,
    trace: &InferenceTrace,
    id: NeuronId,
    position: usize,
) -> Result<f32> {
    id.validate(&weights.config)?;
    if id.kind != NeuronKind::Attn {
        return Err(Error::InvalidArgument(format!(
            "{id} is not an attention neuron"
        )));
    }
    let lt = &trace.layers[id.layer];
    let row = weights.attn_row(id);
    let alpha = lt.attn_scores[id.head.unwrap_or(0)].row(position);
    let subkey = weights.layers[id.layer].w_v.row(row);
    let mut coeff = 0.0f32;
    for p in 0..=position {
        if alpha[p] != 0.0 {
            coeff += alpha[p] * subkey.dot(&lt.attn_input.row(p));
        }
    }
    Ok(coeff)
}

/// Decompose one head's output at `position` into per-neuron, per-source
/// contributions. Summing all vectors reproduces the head output.
pub fn attn_neuron_contributions(
    weights: &TransformerWeights,
    trace: &InferenceTrace,
    layer: usize,
    head: usize,
    position: usize,
) -> Result<Vec<PositionedContribution>> {
    let config = &weights.config;
    if layer >= config.n_layers {
        return Err(Error::OutOfBounds(format!("layer {layer}")));
    }
    if head >= config.n_heads {
        return Err(Error::OutOfBounds(format!("head {head}")));
    }
    if position >= trace.seq_len() {
        return Err(Error::OutOfBounds(format!("position {position}")));
    }
    let dh = config.d_head;
    let lt = &trace.layers[layer];
    let w = &weights.layers[layer];
    let alpha = lt.attn_scores[head].row(position);
    let mut out = Vec::with_capacity(dh * (position + 1));
    for k in 0..dh {
        let id = NeuronId::attn(layer, head, k);
        let subkey = w.w_v.row(head * dh + k);
        let subvalue = w.w_o.column(head * dh + k);
        for p in 0..=position {
            let coefficient = alpha[p] * subkey.dot(&lt.attn_input.row(p));
            out.push(PositionedContribution {
                neuron: id,
                position: p,
                vector: subvalue.mapv(|v| v * coefficient),
                coefficient,
            });
        }
    }
    Ok(out)
}
