//! Neuron importance scoring.
//!
//! A neuron's value importance is the log-probability increase of the target
//! token when the neuron's contribution joins the residual stream at the
//! final position. FFN neurons are scored against the post-attention baseline
//! (A^l + h^{l-1}); attention neurons against h^{l-1} alone — the two
//! baselines are intentionally asymmetric. Query scores measure how strongly
//! a shallow FFN neuron's output activates identified attention value
//! neurons via subkey inner products.

use ndarray::{Array1, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::engine::forward;
use crate::forward::math::{apply_norm, log_softmax_pick};
use crate::forward::InferenceTrace;
use crate::model::{NeuronId, NeuronKind, TransformerWeights};

use super::projection::{unembed_project, ProjectionReport, DEFAULT_N_TOP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NeuronRole {
    FfnValue,
    AttnValue,
    FfnQuery,
}

/// One located neuron with its score, dominant position, and projection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeuronReport {
    pub id: NeuronId,
    pub role: NeuronRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub importance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_score: Option<f64>,
    pub dominant_position: usize,
    pub projection: ProjectionReport,
}

/// One attribution unit: a tokenized prompt plus the target token scored at
/// the final position.
#[derive(Debug, Clone)]
pub struct ScoredCase {
    pub tokens: Vec<u32>,
    pub target: u32,
}

/// log p(target | x) with x entering the final norm + unembedding.
pub(crate) fn target_log_prob(
    weights: &TransformerWeights,
    x: &ArrayView1<f32>,
    target: u32,
) -> f64 {
    let normed = apply_norm(weights.config.norm_family, &weights.final_norm, x);
    let logits = weights.unembedding.dot(&normed);
    log_softmax_pick(logits.as_slice().expect("contiguous"), target as usize)
}

fn check_target(weights: &TransformerWeights, target: u32) -> Result<()> {
    if (target as usize) >= weights.config.vocab_size {
        return Err(Error::InvalidTokenId {
            id: target,
            vocab_size: weights.config.vocab_size,
        });
    }
    Ok(())
}

/// Value importance of one FFN neuron at the final position.
pub fn ffn_value_importance(
    weights: &TransformerWeights,
    trace: &InferenceTrace,
    neuron: NeuronId,
    target: u32,
) -> Result<f64> {
    neuron.validate(&weights.config)?;
    check_target(weights, target)?;
    if neuron.kind != NeuronKind::Ffn {
        return Err(Error::InvalidArgument(format!(
            "{neuron} is not an FFN neuron"
        )));
    }
    let t = trace.seq_len() - 1;
    let l = neuron.layer;
    let base =
        &trace.hidden_before_at(l, t).to_owned() + &trace.layers[l].attn_out.row(t);
    let coeff = trace.layers[l].coefficients[(t, neuron.index)];
    let with = &base + &weights.ffn_subvalue(l, neuron.index).mapv(|v| v * coeff);
    Ok(target_log_prob(weights, &with.view(), target)
        - target_log_prob(weights, &base.view(), target))
}

/// Value importance of one attention neuron at the final position.
pub fn attn_value_importance(
    weights: &TransformerWeights,
    trace: &InferenceTrace,
    neuron: NeuronId,
    target: u32,
) -> Result<f64> {
    neuron.validate(&weights.config)?;
    check_target(weights, target)?;
    if neuron.kind != NeuronKind::Attn {
        return Err(Error::InvalidArgument(format!(
            "{neuron} is not an attention neuron"
        )));
    }
    let t = trace.seq_len() - 1;
    let l = neuron.layer;
    let base = trace.hidden_before_at(l, t).to_owned();
    let coeff = crate::forward::attn_neuron_coefficient(weights, trace, neuron, t)?;
    let with = &base + &weights.attn_subvalue(neuron).mapv(|v| v * coeff);
    Ok(target_log_prob(weights, &with.view(), target)
        - target_log_prob(weights, &base.view(), target))
}

/// Per-case dense scores, indexed by each neuron's canonical index.
pub(crate) struct CaseScores {
    pub importance: Vec<f64>,
    pub dominant: Vec<u32>,
}

/// Score every neuron of the model on one trace.
pub(crate) fn score_case(
    weights: &TransformerWeights,
    trace: &InferenceTrace,
    target: u32,
) -> CaseScores {
    let config = &weights.config;
    let t = trace.seq_len() - 1;
    let total = config.total_neurons();
    let mut importance = vec![0.0f64; total];
    let mut dominant = vec![0u32; total];

    for l in 0..config.n_layers {
        let lt = &trace.layers[l];
        let h_prev = trace.hidden_before_at(l, t).to_owned();

        // FFN neurons: baseline A^l + h^{l-1}.
        let ffn_base = &h_prev + &lt.attn_out.row(t);
        let ffn_base_lp = target_log_prob(weights, &ffn_base.view(), target);
        for k in 0..config.d_ffn {
            let id = NeuronId::ffn(l, k);
            let flat = id.canonical_index(config);
            let coeff = lt.coefficients[(t, k)];
            let with = &ffn_base + &weights.ffn_subvalue(l, k).mapv(|v| v * coeff);
            importance[flat] = target_log_prob(weights, &with.view(), target) - ffn_base_lp;
            // Dominant position: largest |coefficient| over positions,
            // earliest on ties.
            let col = lt.coefficients.column(k);
            let mut best = 0usize;
            let mut best_v = -1.0f32;
            for (i, &m) in col.iter().enumerate() {
                if m.abs() > best_v {
                    best_v = m.abs();
                    best = i;
                }
            }
            dominant[flat] = best as u32;
        }

        // Attention neurons: baseline h^{l-1}.
        let attn_base_lp = target_log_prob(weights, &h_prev.view(), target);
        let dh = config.d_head;
        for h in 0..config.n_heads {
            let alpha = lt.attn_scores[h].row(t);
            for k in 0..dh {
                let id = NeuronId::attn(l, h, k);
                let flat = id.canonical_index(config);
                let subkey = weights.layers[l].w_v.row(h * dh + k);
                let mut coeff = 0.0f32;
                let mut best = 0usize;
                let mut best_v = -1.0f32;
                for p in 0..=t {
                    let inner = subkey.dot(&lt.attn_input.row(p));
                    let weighted = alpha[p] * inner;
                    coeff += weighted;
                    if weighted.abs() > best_v {
                        best_v = weighted.abs();
                        best = p;
                    }
                }
                let with = &h_prev + &weights.attn_subvalue(id).mapv(|v| v * coeff);
                importance[flat] =
                    target_log_prob(weights, &with.view(), target) - attn_base_lp;
                dominant[flat] = best as u32;
            }
        }
    }

    CaseScores {
        importance,
        dominant,
    }
}

/// Position where one neuron is most active on this trace.
///
/// FFN: argmax over positions of |coefficient|. Attention: argmax over source
/// positions of the final-position attention-weighted |subkey projection|.
/// Ties resolve to the earliest position.
pub fn dominant_position(
    weights: &TransformerWeights,
    trace: &InferenceTrace,
    neuron: NeuronId,
) -> Result<usize> {
    neuron.validate(&weights.config)?;
    let t = trace.seq_len() - 1;
    match neuron.kind {
        NeuronKind::Ffn => {
            let col = trace.layers[neuron.layer].coefficients.column(neuron.index);
            let mut best = 0usize;
            let mut best_v = -1.0f32;
            for (i, &m) in col.iter().enumerate() {
                if m.abs() > best_v {
                    best_v = m.abs();
                    best = i;
                }
            }
            Ok(best)
        }
        NeuronKind::Attn => {
            let lt = &trace.layers[neuron.layer];
            let alpha = lt.attn_scores[neuron.head.unwrap_or(0)].row(t);
            let subkey = weights.layers[neuron.layer]
                .w_v
                .row(weights.attn_row(neuron));
            let mut best = 0usize;
            let mut best_v = -1.0f32;
            for p in 0..=t {
                let weighted = alpha[p] * subkey.dot(&lt.attn_input.row(p)).abs();
                if weighted.abs() > best_v {
                    best_v = weighted.abs();
                    best = p;
                }
            }
            Ok(best)
        }
    }
}

fn make_report(
    weights: &TransformerWeights,
    id: NeuronId,
    role: NeuronRole,
    importance: Option<f64>,
    query_score: Option<f64>,
    dominant_position: usize,
) -> Result<NeuronReport> {
    let subvalue: Array1<f32> = match id.kind {
        NeuronKind::Ffn => weights.ffn_subvalue(id.layer, id.index).to_owned(),
        NeuronKind::Attn => weights.attn_subvalue(id).to_owned(),
    };
    Ok(NeuronReport {
        id,
        role,
        importance,
        query_score,
        dominant_position,
        projection: unembed_project(weights, &subvalue.view(), DEFAULT_N_TOP)?,
    })
}

/// Rank (score, id) pairs descending by score with canonical tie-break.
fn rank_desc(mut scored: Vec<(f64, NeuronId)>) -> Vec<(f64, NeuronId)> {
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    scored
}

/// Top value neurons of one trace: `(ffn_list, attn_list)`, each at most `n`.
pub fn top_value_neurons(
    weights: &TransformerWeights,
    trace: &InferenceTrace,
    target: u32,
    n: usize,
) -> Result<(Vec<NeuronReport>, Vec<NeuronReport>)> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    check_target(weights, target)?;
    let config = &weights.config;
    let scores = score_case(weights, trace, target);
    let mut ffn = Vec::new();
    let mut attn = Vec::new();
    for flat in 0..config.total_neurons() {
        let id = NeuronId::from_canonical_index(config, flat);
        match id.kind {
            NeuronKind::Ffn => ffn.push((scores.importance[flat], id)),
            NeuronKind::Attn => attn.push((scores.importance[flat], id)),
        }
    }
    let build = |list: Vec<(f64, NeuronId)>, role: NeuronRole| -> Result<Vec<NeuronReport>> {
        rank_desc(list)
            .into_iter()
            .take(n)
            .map(|(imp, id)| {
                let dp = scores.dominant[id.canonical_index(config)] as usize;
                make_report(weights, id, role, Some(imp), None, dp)
            })
            .collect()
    };
    Ok((
        build(ffn, NeuronRole::FfnValue)?,
        build(attn, NeuronRole::AttnValue)?,
    ))
}

/// Query scores for every FFN neuron against a set of identified attention
/// value neurons, ranked by absolute score. At most `n` reports.
pub fn query_neuron_scores(
    weights: &TransformerWeights,
    trace: &InferenceTrace,
    attn_value_neurons: &[NeuronId],
    n: usize,
) -> Result<Vec<NeuronReport>> {
    if attn_value_neurons.is_empty() {
        return Err(Error::InvalidArgument(
            "attention value neuron list is empty".into(),
        ));
    }
    for id in attn_value_neurons {
        id.validate(&weights.config)?;
        if id.kind != NeuronKind::Attn {
            return Err(Error::InvalidArgument(format!(
                "{id} is not an attention neuron"
            )));
        }
    }
    let config = &weights.config;
    let key_sum = summed_subkeys(weights, attn_value_neurons);
    let mut scored = Vec::with_capacity(config.n_layers * config.d_ffn);
    for l in 0..config.n_layers {
        // score_k = m[p*, k] * (fc2_k . sum of subkeys); dot once per layer.
        let dots = weights.layers[l].fc2.t().dot(&key_sum);
        let coeffs = &trace.layers[l].coefficients;
        for k in 0..config.d_ffn {
            let id = NeuronId::ffn(l, k);
            let p_star = dominant_position(weights, trace, id)?;
            let score = f64::from(coeffs[(p_star, k)]) * f64::from(dots[k]);
            scored.push((score, id, p_star));
        }
    }
    scored.sort_by(|a, b| {
        b.0.abs()
            .total_cmp(&a.0.abs())
            .then_with(|| a.1.cmp(&b.1))
    });
    scored
        .into_iter()
        .take(n)
        .map(|(score, id, p_star)| {
            make_report(weights, id, NeuronRole::FfnQuery, None, Some(score), p_star)
        })
        .collect()
}

pub(crate) fn summed_subkeys(
    weights: &TransformerWeights,
    attn_ids: &[NeuronId],
) -> Array1<f32> {
    let mut key_sum = Array1::<f32>::zeros(weights.config.d_model);
    for id in attn_ids {
        key_sum += &weights.layers[id.layer].w_v.row(weights.attn_row(*id));
    }
    key_sum
}

/// Mean importance and modal dominant position of every neuron over a corpus.
pub struct AggregateScores {
    /// Mean importance, canonical index order.
    pub mean_importance: Vec<f64>,
    /// Mean |importance|. Target tokens alternate between the two gender
    /// terms across a paired corpus, so a neuron that pushes one fixed
    /// direction scores with alternating signs; magnitude is the
    /// sign-stable salience used for candidate selection.
    pub mean_abs_importance: Vec<f64>,
    /// Dominant-position histogram per neuron (index = position).
    pub position_counts: Vec<Vec<u32>>,
    pub n_cases: usize,
}

impl AggregateScores {
    /// Most frequent dominant position; smaller position wins ties.
    pub fn modal_position(&self, flat: usize) -> usize {
        let counts = &self.position_counts[flat];
        let mut best = 0usize;
        let mut best_c = 0u32;
        for (pos, &c) in counts.iter().enumerate() {
            if c > best_c {
                best_c = c;
                best = pos;
            }
        }
        best
    }

    /// Canonical ids ranked by mean importance, optionally restricted by kind.
    pub fn ranked_ids(
        &self,
        config: &crate::model::ModelConfig,
        kind: Option<NeuronKind>,
    ) -> Vec<NeuronId> {
        self.ranked_by(config, kind, &self.mean_importance)
    }

    /// Canonical ids ranked by mean |importance|.
    pub fn ranked_ids_by_abs(
        &self,
        config: &crate::model::ModelConfig,
        kind: Option<NeuronKind>,
    ) -> Vec<NeuronId> {
        self.ranked_by(config, kind, &self.mean_abs_importance)
    }

    fn ranked_by(
        &self,
        config: &crate::model::ModelConfig,
        kind: Option<NeuronKind>,
        scores: &[f64],
    ) -> Vec<NeuronId> {
        let mut scored: Vec<(f64, NeuronId)> = scores
            .iter()
            .enumerate()
            .map(|(flat, &s)| (s, NeuronId::from_canonical_index(config, flat)))
            .filter(|(_, id)| kind.map_or(true, |k| id.kind == k))
            .collect();
        scored = rank_desc(scored);
        scored.into_iter().map(|(_, id)| id).collect()
    }
}

/// Run every case, averaging per-neuron importance and accumulating
/// dominant-position histograms. Cases evaluate in parallel; the reduction
/// is sequential in case order so results are reproducible.
pub fn aggregate_scores(
    weights: &TransformerWeights,
    cases: &[ScoredCase],
) -> Result<AggregateScores> {
    if cases.is_empty() {
        return Err(Error::InvalidArgument("no cases to aggregate".into()));
    }
    let total = weights.config.total_neurons();
    let per_case: Vec<CaseScores> = cases
        .par_iter()
        .map(|case| -> Result<CaseScores> {
            check_target(weights, case.target)?;
            let trace = forward(weights, &case.tokens)?;
            Ok(score_case(weights, &trace, case.target))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut mean_importance = vec![0.0f64; total];
    let mut mean_abs_importance = vec![0.0f64; total];
    let mut position_counts = vec![Vec::<u32>::new(); total];
    for cs in &per_case {
        for flat in 0..total {
            mean_importance[flat] += cs.importance[flat];
            mean_abs_importance[flat] += cs.importance[flat].abs();
            let pos = cs.dominant[flat] as usize;
            let counts = &mut position_counts[flat];
            if counts.len() <= pos {
                counts.resize(pos + 1, 0);
            }
            counts[pos] += 1;
        }
    }
    let n = per_case.len() as f64;
    for v in &mut mean_importance {
        *v /= n;
    }
    for v in &mut mean_abs_importance {
        *v /= n;
    }
    Ok(AggregateScores {
        mean_importance,
        mean_abs_importance,
        position_counts,
        n_cases: per_case.len(),
    })
}

/// Top `n` neurons (FFN and attention pooled) by mean importance across cases.
pub fn aggregate_importance(
    weights: &TransformerWeights,
    cases: &[ScoredCase],
    n: usize,
) -> Result<Vec<NeuronReport>> {
    let agg = aggregate_scores(weights, cases)?;
    let config = &weights.config;
    agg.ranked_ids(config, None)
        .into_iter()
        .take(n)
        .map(|id| {
            let flat = id.canonical_index(config);
            let role = match id.kind {
                NeuronKind::Ffn => NeuronRole::FfnValue,
                NeuronKind::Attn => NeuronRole::AttnValue,
            };
            make_report(
                weights,
                id,
                role,
                Some(agg.mean_importance[flat]),
                None,
                agg.modal_position(flat),
            )
        })
        .collect()
}

/// Mean query score of every FFN neuron (canonical FFN order flattened as
/// layer * d_ffn + index) against a fixed attention value set, averaged over
/// cases with per-case dominant positions.
pub fn mean_query_scores(
    weights: &TransformerWeights,
    cases: &[ScoredCase],
    attn_value_neurons: &[NeuronId],
) -> Result<Vec<f64>> {
    if cases.is_empty() {
        return Err(Error::InvalidArgument("no cases".into()));
    }
    if attn_value_neurons.is_empty() {
        return Err(Error::InvalidArgument(
            "attention value neuron list is empty".into(),
        ));
    }
    let config = &weights.config;
    let key_sum = summed_subkeys(weights, attn_value_neurons);
    let per_case: Vec<Vec<f64>> = cases
        .par_iter()
        .map(|case| -> Result<Vec<f64>> {
            let trace = forward(weights, &case.tokens)?;
            let mut scores = Vec::with_capacity(config.n_layers * config.d_ffn);
            for l in 0..config.n_layers {
                let dots = weights.layers[l].fc2.t().dot(&key_sum);
                for k in 0..config.d_ffn {
                    let p_star = dominant_position(weights, &trace, NeuronId::ffn(l, k))?;
                    let m = trace.layers[l].coefficients[(p_star, k)];
                    scores.push(f64::from(m) * f64::from(dots[k]));
                }
            }
            Ok(scores)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut mean = vec![0.0f64; config.n_layers * config.d_ffn];
    for cs in &per_case {
        for (acc, v) in mean.iter_mut().zip(cs.iter()) {
            *acc += v;
        }
    }
    let n = per_case.len() as f64;
    for v in &mut mean {
        *v /= n;
    }
    Ok(mean)
}
