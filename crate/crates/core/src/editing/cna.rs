//! Comparative neuron analysis: watch how masking one set of neurons shifts
//! other neurons' coefficients on the same prompt.

use serde::{Deserialize, Serialize};

use crate::attribution::projection::{unembed_project, ProjectionReport, DEFAULT_N_TOP};
use crate::error::{Error, Result};
use crate::forward::engine::{attn_neuron_coefficient, forward};
use crate::forward::InferenceTrace;
use crate::model::{NeuronId, NeuronKind, Tokenizer, TransformerWeights};

use super::mask::mask_neurons;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CnaRow {
    pub neuron: NeuronId,
    pub coef_before: f64,
    pub coef_after: f64,
    pub projection: ProjectionReport,
}

fn final_coefficient(
    weights: &TransformerWeights,
    trace: &InferenceTrace,
    id: NeuronId,
) -> Result<f64> {
    let t = trace.seq_len() - 1;
    match id.kind {
        NeuronKind::Ffn => Ok(f64::from(trace.layers[id.layer].coefficients[(t, id.index)])),
        NeuronKind::Attn => Ok(f64::from(attn_neuron_coefficient(weights, trace, id, t)?)),
    }
}

/// Final-position coefficients of `watch_ids` before and after masking
/// `mask_ids` on the same prompt. Projections come from the original
/// (unmasked) subvalues.
pub fn cna_compare(
    weights: &TransformerWeights,
    tokenizer: &Tokenizer,
    mask_ids: &[NeuronId],
    prompt: &str,
    watch_ids: &[NeuronId],
) -> Result<Vec<CnaRow>> {
    if watch_ids.is_empty() {
        return Err(Error::InvalidArgument("no neurons to watch".into()));
    }
    for id in watch_ids {
        id.validate(&weights.config)?;
        if mask_ids.contains(id) {
            return Err(Error::InvalidArgument(format!(
                "watched neuron {id} is inside the mask set"
            )));
        }
    }
    let tokens = tokenizer.encode(prompt)?;
    let before = forward(weights, &tokens)?;
    let masked = mask_neurons(weights, mask_ids)?;
    let after = forward(&masked, &tokens)?;

    watch_ids
        .iter()
        .map(|&id| {
            let subvalue = match id.kind {
                NeuronKind::Ffn => weights.ffn_subvalue(id.layer, id.index).to_owned(),
                NeuronKind::Attn => weights.attn_subvalue(id).to_owned(),
            };
            Ok(CnaRow {
                neuron: id,
                coef_before: final_coefficient(weights, &before, id)?,
                coef_after: final_coefficient(&masked, &after, id)?,
                projection: unembed_project(weights, &subvalue.view(), DEFAULT_N_TOP)?,
            })
        })
        .collect()
}
