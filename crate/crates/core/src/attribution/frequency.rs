//! Cross-case frequency analysis: how often the corpus-level top-K neurons
//! rank inside each individual case's top-M.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::engine::forward;
use crate::model::{NeuronId, TransformerWeights};

use super::importance::{aggregate_scores, score_case, ScoredCase};

/// For each k in 1..=K: the mean, over the top-k aggregate neurons, of the
/// share of cases where that neuron is inside the case's top-M (FFN and
/// attention pooled).
pub fn neuron_frequency(
    weights: &TransformerWeights,
    cases: &[ScoredCase],
    k_max: usize,
    m: usize,
) -> Result<Vec<(usize, f64)>> {
    if k_max < 1 || m < k_max {
        return Err(Error::InvalidArgument(format!(
            "need M >= K >= 1, got K={k_max} M={m}"
        )));
    }
    if cases.is_empty() {
        return Err(Error::InvalidArgument("no cases".into()));
    }
    let config = &weights.config;
    let total = config.total_neurons();
    let k_max = k_max.min(total);
    let m = m.min(total);

    let agg = aggregate_scores(weights, cases)?;
    let top_ids: Vec<usize> = agg
        .ranked_ids(config, None)
        .into_iter()
        .take(k_max)
        .map(|id| id.canonical_index(config))
        .collect();

    // Membership count per aggregate-top neuron across per-case top-M sets.
    let per_case_hits: Vec<Vec<bool>> = cases
        .par_iter()
        .map(|case| -> Result<Vec<bool>> {
            let trace = forward(weights, &case.tokens)?;
            let scores = score_case(weights, &trace, case.target);
            let mut order: Vec<usize> = (0..total).collect();
            order.sort_by(|&a, &b| {
                scores.importance[b]
                    .total_cmp(&scores.importance[a])
                    .then_with(|| {
                        NeuronId::from_canonical_index(config, a)
                            .cmp(&NeuronId::from_canonical_index(config, b))
                    })
            });
            let mut in_top_m = vec![false; total];
            for &flat in order.iter().take(m) {
                in_top_m[flat] = true;
            }
            Ok(top_ids.iter().map(|&flat| in_top_m[flat]).collect())
        })
        .collect::<Result<Vec<_>>>()?;

    let n_cases = cases.len() as f64;
    let share: Vec<f64> = (0..k_max)
        .map(|i| {
            per_case_hits
                .iter()
                .filter(|hits| hits[i])
                .count() as f64
                / n_cases
        })
        .collect();

    // Prefix means over the ranked top-K.
    let mut out = Vec::with_capacity(k_max);
    let mut acc = 0.0f64;
    for k in 1..=k_max {
        acc += share[k - 1];
        out.push((k, acc / k as f64));
    }
    Ok(out)
}
