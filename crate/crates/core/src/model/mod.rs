//! Model loading, construction, addressing, and tokenization.

pub mod config;
pub mod container;
pub mod neuron;
pub mod tokenizer;
pub mod weights;

pub use config::{Activation, FfnFamily, ModelConfig, NormFamily, PositionFamily};
pub use container::{export_weights, hash_bytes, hash_file, load_weights, read_header, schema};
pub use neuron::{NeuronId, NeuronKind};
pub use tokenizer::Tokenizer;
pub use weights::{
    random_model, zero_model, LayerWeights, NeuronVectors, NormWeights, TransformerWeights,
};
