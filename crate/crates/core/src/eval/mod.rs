//! Dataset generation/ingestion and bias/capability metrics.

pub mod cases;
pub mod dataset;
pub mod metrics;
pub mod templates;

pub use cases::{scored_case_from_prompt, scored_case_from_sentence, scored_cases_from_pairs};
pub use dataset::{
    arithmetic_probe, generate_commonwords, read_jsonl, write_jsonl, PairedCase, StereoCase,
    TaskCase, WordLists,
};
pub use metrics::{
    arithmetic_accuracy, entropy_difference_eval, icat, mcq_accuracy, mean_abs_entropy_diff,
    pair_entropies, probe_accuracy, stereoset_eval, winogender_eval, AccuracyReport, BiasMetrics,
    CategoryBias, MeanAbsDiff, StereoMetrics,
};
pub use templates::{Category, PromptTemplate};
