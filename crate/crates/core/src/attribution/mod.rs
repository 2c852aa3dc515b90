//! Localization of important heads and neurons: logit-lens projection,
//! value/query neuron scoring, head scores, dominant positions, and
//! cross-case frequency analysis.

pub mod frequency;
pub mod heads;
pub mod importance;
pub mod projection;

pub use frequency::neuron_frequency;
pub use heads::{
    head_causal_grid, head_causal_score, head_logit_score, mean_head_logit_scores, top_heads,
    HeadReport,
};
pub use importance::{
    aggregate_importance, aggregate_scores, attn_value_importance, dominant_position,
    ffn_value_importance, mean_query_scores, query_neuron_scores, top_value_neurons,
    AggregateScores, NeuronReport, NeuronRole, ScoredCase,
};
pub use projection::{unembed_project, ProjectionReport, TokenProb, DEFAULT_N_TOP};
