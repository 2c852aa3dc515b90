//! Head-level localization: logit-based and causal-based scores.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::dataset::PairedCase;
use crate::eval::metrics::mean_abs_entropy_diff;
use crate::forward::engine::{forward, head_output};
use crate::forward::InferenceTrace;
use crate::model::{Tokenizer, TransformerWeights};

use super::importance::{target_log_prob, ScoredCase};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeadReport {
    pub layer: usize,
    pub head: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logit_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub causal_score: Option<f64>,
}

/// Value importance of one head's whole output at the final position
/// (the attention-neuron score applied to the summed head output).
pub fn head_logit_score(
    weights: &TransformerWeights,
    trace: &InferenceTrace,
    layer: usize,
    head: usize,
    target: u32,
) -> Result<f64> {
    if (target as usize) >= weights.config.vocab_size {
        return Err(Error::InvalidTokenId {
            id: target,
            vocab_size: weights.config.vocab_size,
        });
    }
    let t = trace.seq_len() - 1;
    let out = head_output(weights, trace, layer, head, t)?;
    let base = trace.hidden_before_at(layer, t).to_owned();
    let with = &base + &out;
    Ok(target_log_prob(weights, &with.view(), target)
        - target_log_prob(weights, &base.view(), target))
}

/// Mean head logit score over a corpus of scored cases.
pub fn mean_head_logit_scores(
    weights: &TransformerWeights,
    cases: &[ScoredCase],
) -> Result<Vec<Vec<f64>>> {
    if cases.is_empty() {
        return Err(Error::InvalidArgument("no cases".into()));
    }
    let config = &weights.config;
    let per_case: Vec<Vec<Vec<f64>>> = cases
        .par_iter()
        .map(|case| -> Result<Vec<Vec<f64>>> {
            let trace = forward(weights, &case.tokens)?;
            let mut grid = vec![vec![0.0f64; config.n_heads]; config.n_layers];
            for (l, row) in grid.iter_mut().enumerate() {
                for (h, cell) in row.iter_mut().enumerate() {
                    *cell = head_logit_score(weights, &trace, l, h, case.target)?;
                }
            }
            Ok(grid)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut mean = vec![vec![0.0f64; config.n_heads]; config.n_layers];
    for grid in &per_case {
        for l in 0..config.n_layers {
            for h in 0..config.n_heads {
                mean[l][h] += grid[l][h];
            }
        }
    }
    let n = per_case.len() as f64;
    for row in &mut mean {
        for v in row.iter_mut() {
            *v /= n;
        }
    }
    Ok(mean)
}

/// Reduction in the dataset's mean absolute entropy difference when the head
/// is zero-masked. Positive means the head encodes bias.
pub fn head_causal_score(
    weights: &TransformerWeights,
    tokenizer: &Tokenizer,
    pairs: &[PairedCase],
    layer: usize,
    head: usize,
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no paired cases".into()));
    }
    let base = mean_abs_entropy_diff(weights, tokenizer, pairs)?;
    let masked = crate::editing::mask_head(weights, layer, head)?;
    let after = mean_abs_entropy_diff(&masked, tokenizer, pairs)?;
    Ok(base.value - after.value)
}

/// Causal scores for every head. Heads evaluate in parallel; each worker
/// holds its own masked copy.
pub fn head_causal_grid(
    weights: &TransformerWeights,
    tokenizer: &Tokenizer,
    pairs: &[PairedCase],
) -> Result<Vec<Vec<f64>>> {
    let config = &weights.config;
    let coords: Vec<(usize, usize)> = (0..config.n_layers)
        .flat_map(|l| (0..config.n_heads).map(move |h| (l, h)))
        .collect();
    let scores: Vec<f64> = coords
        .par_iter()
        .map(|&(l, h)| head_causal_score(weights, tokenizer, pairs, l, h))
        .collect::<Result<Vec<_>>>()?;
    let mut grid = vec![vec![0.0f64; config.n_heads]; config.n_layers];
    for ((l, h), s) in coords.into_iter().zip(scores) {
        grid[l][h] = s;
    }
    Ok(grid)
}

/// Flatten a layer x head grid into reports ranked descending.
pub fn top_heads(grid: &[Vec<f64>], n: usize, causal: bool) -> Vec<HeadReport> {
    let mut flat: Vec<(f64, usize, usize)> = grid
        .iter()
        .enumerate()
        .flat_map(|(l, row)| row.iter().enumerate().map(move |(h, &s)| (s, l, h)))
        .collect();
    flat.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    flat.into_iter()
        .take(n)
        .map(|(s, layer, head)| HeadReport {
            layer,
            head,
            logit_score: (!causal).then_some(s),
            causal_score: causal.then_some(s),
        })
        .collect()
}
