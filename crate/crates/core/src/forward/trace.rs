//! Inference trace: every residual term and neuron coefficient of one pass.

use ndarray::{Array1, Array2, ArrayView1};
use serde_json::json;

use crate::error::{Error, Result};
use crate::model::NeuronId;

/// Per-layer record. All arrays are position-major: row i is position i.
#[derive(Debug, Clone)]
pub struct LayerTrace {
    /// norm1(h^{l-1}) — the attention (and value-path) input.
    pub attn_input: Array2<f32>,
    /// Attention scores per head; row = query position, col = source position.
    pub attn_scores: Vec<Array2<f32>>,
    /// A^l, the attention residual term.
    pub attn_out: Array2<f32>,
    /// norm2(h^{l-1} + A^l) — the FFN input.
    pub ffn_input: Array2<f32>,
    /// Neuron coefficients m[i, k].
    pub coefficients: Array2<f32>,
    /// F^l, the FFN residual term.
    pub ffn_out: Array2<f32>,
    /// h^l = h^{l-1} + A^l + F^l.
    pub hidden: Array2<f32>,
}

/// Full instrumented record of one forward pass.
#[derive(Debug, Clone)]
pub struct InferenceTrace {
    pub tokens: Vec<u32>,
    /// Token (+ learned position) embeddings; the stream before layer 0.
    pub embedded: Array2<f32>,
    pub layers: Vec<LayerTrace>,
    /// Final-norm output at the last position.
    pub final_normed: Array1<f32>,
    /// Pre-softmax logits at the last position.
    pub logits: Array1<f32>,
    /// Output distribution Y at the last position.
    pub distribution: Array1<f32>,
}

/// One neuron's additive contribution from one source position.
#[derive(Debug, Clone)]
pub struct PositionedContribution {
    pub neuron: NeuronId,
    pub position: usize,
    pub vector: Array1<f32>,
    pub coefficient: f32,
}

impl InferenceTrace {
    pub fn seq_len(&self) -> usize {
        self.tokens.len()
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    /// Residual stream entering layer `layer` (the embedding for layer 0).
    pub fn hidden_before(&self, layer: usize) -> ndarray::ArrayView2<'_, f32> {
        if layer == 0 {
            self.embedded.view()
        } else {
            self.layers[layer - 1].hidden.view()
        }
    }

    /// h^{l-1} at one position.
    pub fn hidden_before_at(&self, layer: usize, position: usize) -> ArrayView1<'_, f32> {
        if layer == 0 {
            self.embedded.row(position)
        } else {
            self.layers[layer - 1].hidden.row(position)
        }
    }

    /// FFN coefficients m[i, k] for one layer.
    pub fn ffn_coefficients(&self, layer: usize) -> Result<&Array2<f32>> {
        self.layers
            .get(layer)
            .map(|l| &l.coefficients)
            .ok_or_else(|| Error::OutOfBounds(format!("layer {layer}")))
    }

    /// Attention score row for the final position of one head.
    pub fn final_attn_row(&self, layer: usize, head: usize) -> Result<ArrayView1<'_, f32>> {
        let lt = self
            .layers
            .get(layer)
            .ok_or_else(|| Error::OutOfBounds(format!("layer {layer}")))?;
        let scores = lt
            .attn_scores
            .get(head)
            .ok_or_else(|| Error::OutOfBounds(format!("head {head} in layer {layer}")))?;
        Ok(scores.row(self.seq_len() - 1))
    }

    /// Dump the whole trace as JSON for debugging small models.
    pub fn to_debug_json(&self) -> serde_json::Value {
        fn mat(m: &Array2<f32>) -> serde_json::Value {
            json!(m.rows().into_iter().map(|r| r.to_vec()).collect::<Vec<_>>())
        }
        json!({
            "tokens": self.tokens,
            "embedded": mat(&self.embedded),
            "layers": self.layers.iter().map(|l| json!({
                "attn_input": mat(&l.attn_input),
                "attn_scores": l.attn_scores.iter().map(mat).collect::<Vec<_>>(),
                "attn_out": mat(&l.attn_out),
                "ffn_input": mat(&l.ffn_input),
                "coefficients": mat(&l.coefficients),
                "ffn_out": mat(&l.ffn_out),
                "hidden": mat(&l.hidden),
            })).collect::<Vec<_>>(),
            "final_normed": self.final_normed.to_vec(),
            "logits": self.logits.to_vec(),
            "distribution": self.distribution.to_vec(),
        })
    }
}
