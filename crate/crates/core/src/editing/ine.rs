//! Interpretable neuron editing: identify candidates on paired sentences,
//! filter start-position neurons, then causally re-score the survivors by
//! masking each one and measuring bias reduction and capability change.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attribution::importance::{aggregate_scores, mean_query_scores, NeuronRole};
use crate::error::{Error, Result};
use crate::eval::cases::scored_cases_from_pairs;
use crate::eval::dataset::{PairedCase, TaskCase};
use crate::eval::metrics::{mean_abs_entropy_diff, probe_accuracy};
use crate::model::{NeuronId, NeuronKind, Tokenizer, TransformerWeights};

use super::mask::mask_neurons;

pub const PLAN_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IneParams {
    /// Candidates kept per role in step 1.
    pub n_per_role: usize,
    /// Final selection budget.
    pub budget: usize,
    /// Max tolerated capability drop (accuracy points) in step 3.
    pub capability_drop_threshold: f64,
    /// Paired-case sample size for step-3 bias deltas.
    pub bias_sample_size: usize,
    pub seed: u64,
}

impl Default for IneParams {
    fn default() -> Self {
        IneParams {
            n_per_role: 50,
            budget: 50,
            capability_drop_threshold: 1.0,
            bias_sample_size: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterReason {
    /// Dominant position 0 (step 2).
    StartPosition,
    /// Capability drop above threshold (step 3).
    CapabilityDrop,
    /// Survived filtering but ranked below the budget.
    BudgetCutoff,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateProvenance {
    pub neuron: NeuronId,
    pub source: NeuronRole,
    /// Mean value importance (value roles) or mean query score (query role).
    pub importance: f64,
    pub dominant_position: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub causal_bias_delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capability_delta: Option<f64>,
    pub filtered: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter_reason: Option<FilterReason>,
}

/// Ordered selection plus full provenance for every candidate considered.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EditPlan {
    pub version: u32,
    pub model_hash: String,
    pub params: IneParams,
    /// Final selection, best bias reduction first.
    pub neurons: Vec<NeuronId>,
    pub candidates: Vec<CandidateProvenance>,
}

impl EditPlan {
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for c in &self.candidates {
            if !seen.insert(c.neuron) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate candidate {}",
                    c.neuron
                )));
            }
            if !c.filtered && c.dominant_position == 0 {
                return Err(Error::InvalidArgument(format!(
                    "unfiltered start-position neuron {}",
                    c.neuron
                )));
            }
        }
        let unfiltered = self.candidates.iter().filter(|c| !c.filtered).count();
        if unfiltered > self.params.budget {
            return Err(Error::InvalidArgument(format!(
                "{unfiltered} unfiltered candidates exceed budget {}",
                self.params.budget
            )));
        }
        if self.neurons.len() != unfiltered {
            return Err(Error::InvalidArgument(
                "selection list disagrees with unfiltered provenance".into(),
            ));
        }
        Ok(())
    }

    pub fn to_file(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("plan serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn from_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let plan: EditPlan = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        plan.validate()?;
        Ok(plan)
    }
}

struct Candidate {
    neuron: NeuronId,
    source: NeuronRole,
    importance: f64,
    dominant_position: usize,
}

/// Deterministic sample of at most `n` pairs, preserving dataset order.
fn sample_pairs(pairs: &[PairedCase], n: usize, seed: u64) -> Vec<PairedCase> {
    if pairs.len() <= n {
        return pairs.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, pairs.len(), n).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| pairs[i].clone()).collect()
}

/// Run the three-step selection. The returned plan records every candidate,
/// filtered or kept, and is bit-reproducible for fixed inputs and params.
pub fn ine_select(
    weights: &TransformerWeights,
    tokenizer: &Tokenizer,
    commonwords: &[PairedCase],
    capability_probe: &[TaskCase],
    params: &IneParams,
) -> Result<EditPlan> {
    if commonwords.is_empty() {
        return Err(Error::InvalidArgument("no paired cases".into()));
    }
    if capability_probe.is_empty() {
        return Err(Error::InvalidArgument("empty capability probe".into()));
    }
    if params.n_per_role == 0 || params.budget == 0 {
        return Err(Error::InvalidArgument(
            "n_per_role and budget must be >= 1".into(),
        ));
    }
    let config = &weights.config;

    // Step 1: aggregate value importance over the paired sentences, then
    // query scores against the identified attention value neurons. Value
    // roles rank by |mean importance|: the corpus alternates male/female
    // targets, so directional neurons alternate sign case to case.
    let cases = scored_cases_from_pairs(tokenizer, commonwords)?;
    let agg = aggregate_scores(weights, &cases)?;
    let ffn_value: Vec<NeuronId> = agg
        .ranked_ids_by_abs(config, Some(NeuronKind::Ffn))
        .into_iter()
        .take(params.n_per_role)
        .collect();
    let attn_value: Vec<NeuronId> = agg
        .ranked_ids_by_abs(config, Some(NeuronKind::Attn))
        .into_iter()
        .take(params.n_per_role)
        .collect();
    let query_means = mean_query_scores(weights, &cases, &attn_value)?;
    let mut query_ranked: Vec<(f64, NeuronId)> = query_means
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            (
                s,
                NeuronId::ffn(i / config.d_ffn, i % config.d_ffn),
            )
        })
        .collect();
    query_ranked.sort_by(|a, b| {
        b.0.abs()
            .total_cmp(&a.0.abs())
            .then_with(|| a.1.cmp(&b.1))
    });
    let ffn_query: Vec<(f64, NeuronId)> =
        query_ranked.into_iter().take(params.n_per_role).collect();

    // Assemble candidates; a neuron reached through several roles keeps the
    // provenance with the larger |score|.
    let mut candidates: Vec<Candidate> = Vec::new();
    let mut push = |neuron: NeuronId, source: NeuronRole, importance: f64| {
        if let Some(existing) = candidates.iter_mut().find(|c| c.neuron == neuron) {
            if importance.abs() > existing.importance.abs() {
                existing.source = source;
                existing.importance = importance;
            }
            return;
        }
        candidates.push(Candidate {
            neuron,
            source,
            importance,
            dominant_position: 0,
        });
    };
    for id in &ffn_value {
        push(
            *id,
            NeuronRole::FfnValue,
            agg.mean_abs_importance[id.canonical_index(config)],
        );
    }
    for id in &attn_value {
        push(
            *id,
            NeuronRole::AttnValue,
            agg.mean_abs_importance[id.canonical_index(config)],
        );
    }
    for (score, id) in &ffn_query {
        push(*id, NeuronRole::FfnQuery, *score);
    }

    // Step 2: modal dominant position; start-position candidates are
    // filtered out.
    for c in candidates.iter_mut() {
        c.dominant_position = agg.modal_position(c.neuron.canonical_index(config));
    }
    candidates.sort_by(|a, b| a.neuron.cmp(&b.neuron));

    let mut provenance: Vec<CandidateProvenance> = candidates
        .iter()
        .map(|c| CandidateProvenance {
            neuron: c.neuron,
            source: c.source,
            importance: c.importance,
            dominant_position: c.dominant_position,
            causal_bias_delta: None,
            capability_delta: None,
            filtered: c.dominant_position == 0,
            filter_reason: (c.dominant_position == 0).then_some(FilterReason::StartPosition),
        })
        .collect();

    let survivors: Vec<usize> = provenance
        .iter()
        .enumerate()
        .filter(|(_, p)| !p.filtered)
        .map(|(i, _)| i)
        .collect();
    if survivors.is_empty() {
        return Err(Error::EmptySelection(format!(
            "all {} candidates sit at the start position",
            provenance.len()
        )));
    }

    // Step 3: per-candidate causal re-scoring on a pair sample and the
    // capability probe.
    let sample = sample_pairs(commonwords, params.bias_sample_size, params.seed);
    let bias_base = mean_abs_entropy_diff(weights, tokenizer, &sample)?.value;
    let acc_base = probe_accuracy(weights, tokenizer, capability_probe)?;
    let deltas: Vec<(f64, f64)> = survivors
        .par_iter()
        .map(|&i| -> Result<(f64, f64)> {
            let masked = mask_neurons(weights, &[provenance[i].neuron])?;
            let bias = mean_abs_entropy_diff(&masked, tokenizer, &sample)?.value;
            let acc = probe_accuracy(&masked, tokenizer, capability_probe)?;
            Ok((bias_base - bias, acc_base - acc))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut ranked: Vec<(f64, usize)> = Vec::new();
    for (&i, &(bias_delta, acc_drop)) in survivors.iter().zip(deltas.iter()) {
        provenance[i].causal_bias_delta = Some(bias_delta);
        provenance[i].capability_delta = Some(acc_drop);
        if acc_drop > params.capability_drop_threshold {
            provenance[i].filtered = true;
            provenance[i].filter_reason = Some(FilterReason::CapabilityDrop);
        } else {
            ranked.push((bias_delta, i));
        }
    }
    if ranked.is_empty() {
        return Err(Error::EmptySelection(format!(
            "all {} position-filtered survivors exceed the capability threshold",
            survivors.len()
        )));
    }
    ranked.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| provenance[a.1].neuron.cmp(&provenance[b.1].neuron))
    });
    for &(_, i) in ranked.iter().skip(params.budget) {
        provenance[i].filtered = true;
        provenance[i].filter_reason = Some(FilterReason::BudgetCutoff);
    }
    let neurons: Vec<NeuronId> = ranked
        .iter()
        .take(params.budget)
        .map(|&(_, i)| provenance[i].neuron)
        .collect();

    let plan = EditPlan {
        version: PLAN_SCHEMA_VERSION,
        model_hash: weights.content_hash(),
        params: params.clone(),
        neurons,
        candidates: provenance,
    };
    plan.validate()?;
    Ok(plan)
}

/// Apply a plan: mask its selected neurons.
pub fn apply_plan(weights: &TransformerWeights, plan: &EditPlan) -> Result<TransformerWeights> {
    plan.validate()?;
    mask_neurons(weights, &plan.neurons)
}
