//! Instrumented forward pass and sequence likelihood.

pub mod engine;
pub mod entropy;
pub mod math;
pub mod trace;

pub use engine::{
    all_position_logits, attn_neuron_coefficient, attn_neuron_contributions, forward, head_output,
};
pub use entropy::{char_normalized_entropy, greedy_decode, sequence_log_probs};
pub use trace::{InferenceTrace, LayerTrace, PositionedContribution};
