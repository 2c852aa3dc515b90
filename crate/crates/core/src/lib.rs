//! biaslens: decoder-only transformer inference with full residual-stream
//! instrumentation, neuron-level localization of gender-biased predictions,
//! interpretable neuron editing, and bias/capability evaluation.
//!
//! The crate is organized around the pipeline:
//!
//! * [`model`] — weights, configs, neuron addressing, tokenizer, container I/O
//! * [`forward`] — the instrumented forward pass and likelihood helpers
//! * [`attribution`] — head and neuron localization (logit lens, importance)
//! * [`editing`] — zero-masking, the selection pipeline, comparative analysis
//! * [`eval`] — dataset generation/ingestion and all metrics
//! * [`synthetic`] — planted-circuit fixtures used by the validation suite

pub mod attribution;
pub mod editing;
pub mod error;
pub mod eval;
pub mod forward;
pub mod model;
pub mod report;
pub mod synthetic;

pub use error::{Error, Result};
pub use model::{
    export_weights, load_weights, random_model, ModelConfig, NeuronId, NeuronKind, Tokenizer,
    TransformerWeights,
};

pub use attribution::{NeuronReport, ScoredCase};
pub use editing::{EditPlan, IneParams};
pub use eval::{BiasMetrics, PairedCase, StereoCase, TaskCase};
pub use forward::{forward, InferenceTrace};
