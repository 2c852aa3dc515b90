//! Neuron/head masking, the interpretable-neuron-editing pipeline, and
//! comparative neuron analysis.

pub mod cna;
pub mod ine;
pub mod mask;

pub use cna::{cna_compare, CnaRow};
pub use ine::{
    apply_plan, ine_select, CandidateProvenance, EditPlan, FilterReason, IneParams,
    PLAN_SCHEMA_VERSION,
};
pub use mask::{mask_head, mask_neurons};
