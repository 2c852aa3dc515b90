//! In-memory weight layout with layer/head/neuron addressing.

use ndarray::{s, Array1, Array2, ArrayView1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::model::{ModelConfig, NeuronId, NeuronKind, PositionFamily};

#[derive(Debug, Clone)]
pub struct NormWeights {
    pub scale: Array1<f32>,
    pub bias: Option<Array1<f32>>,
}

impl NormWeights {
    pub fn ones(d: usize) -> Self {
        NormWeights {
            scale: Array1::ones(d),
            bias: None,
        }
    }
}

/// One transformer layer. Projection matrices are stored dense with heads
/// packed along the row (w_q/w_k/w_v) or column (w_o) axis, head-major.
#[derive(Debug, Clone)]
pub struct LayerWeights {
    pub w_q: Array2<f32>,
    pub w_k: Array2<f32>,
    /// Rows are attention subkeys.
    pub w_v: Array2<f32>,
    /// Columns are attention subvalues.
    pub w_o: Array2<f32>,
    /// Rows are FFN subkeys.
    pub fc1: Array2<f32>,
    /// Gated family only: rows gate the matching fc1 rows.
    pub gate: Option<Array2<f32>>,
    /// Columns are FFN subvalues.
    pub fc2: Array2<f32>,
    pub norm1: NormWeights,
    pub norm2: NormWeights,
}

/// All parameters of a model, fp32, immutable after construction.
///
/// Editing never mutates in place; it clones and zeroes addressed slices.
#[derive(Debug, Clone)]
pub struct TransformerWeights {
    pub config: ModelConfig,
    pub embedding: Array2<f32>,
    pub pos_embedding: Option<Array2<f32>>,
    pub unembedding: Array2<f32>,
    pub final_norm: NormWeights,
    pub layers: Vec<LayerWeights>,
}

/// The vector pair addressed by a [`NeuronId`].
#[derive(Debug, Clone)]
pub struct NeuronVectors {
    pub subkey: Array1<f32>,
    /// Gated FFN family only.
    pub gate_subkey: Option<Array1<f32>>,
    pub subvalue: Array1<f32>,
}

impl TransformerWeights {
    /// Resolve a neuron id to its (subkey, subvalue) pair.
    pub fn get_neuron(&self, id: NeuronId) -> Result<NeuronVectors> {
        id.validate(&self.config)?;
        let layer = &self.layers[id.layer];
        match id.kind {
            NeuronKind::Ffn => Ok(NeuronVectors {
                subkey: layer.fc1.row(id.index).to_owned(),
                gate_subkey: layer.gate.as_ref().map(|g| g.row(id.index).to_owned()),
                subvalue: layer.fc2.column(id.index).to_owned(),
            }),
            NeuronKind::Attn => {
                let row = self.attn_row(id);
                Ok(NeuronVectors {
                    subkey: layer.w_v.row(row).to_owned(),
                    gate_subkey: None,
                    subvalue: layer.w_o.column(row).to_owned(),
                })
            }
        }
    }

    /// Row/column offset of an attention neuron inside its layer's packed
    /// value/output matrices.
    pub(crate) fn attn_row(&self, id: NeuronId) -> usize {
        id.head.unwrap_or(0) * self.config.d_head + id.index
    }

    /// Attention subvalue (output-projection column) without cloning the subkey.
    pub(crate) fn attn_subvalue(&self, id: NeuronId) -> ArrayView1<'_, f32> {
        self.layers[id.layer].w_o.column(self.attn_row(id))
    }

    /// FFN subvalue (fc2 column) view.
    pub(crate) fn ffn_subvalue(&self, layer: usize, index: usize) -> ArrayView1<'_, f32> {
        self.layers[layer].fc2.column(index)
    }

    /// Slice of w_o columns belonging to one head.
    pub(crate) fn head_out_block(&self, layer: usize, head: usize) -> ndarray::ArrayView2<'_, f32> {
        let dh = self.config.d_head;
        self.layers[layer].w_o.slice(s![.., head * dh..(head + 1) * dh])
    }

    /// SHA-256 of the serialized weight container, hex-encoded.
    pub fn content_hash(&self) -> String {
        let mut buf = Vec::new();
        crate::model::container::write_container(self, &mut buf)
            .expect("in-memory container write cannot fail");
        crate::model::container::hash_bytes(&buf)
    }

    /// All neuron ids in canonical order.
    pub fn neuron_ids(&self) -> impl Iterator<Item = NeuronId> + '_ {
        (0..self.config.total_neurons())
            .map(|flat| NeuronId::from_canonical_index(&self.config, flat))
    }
}

/// Deterministic random model for fixtures and property tests.
///
/// Matrix entries are N(0, 1/sqrt(d_model)); norm scales start at one.
pub fn random_model(config: &ModelConfig, seed: u64) -> Result<TransformerWeights> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = 1.0 / (config.d_model as f64).sqrt();
    let dist = Normal::new(0.0, sigma).expect("valid normal");
    let mut mat = |rows: usize, cols: usize| -> Array2<f32> {
        Array2::from_shape_fn((rows, cols), |_| dist.sample(&mut rng) as f32)
    };

    let d = config.d_model;
    let embedding = mat(config.vocab_size, d);
    let pos_embedding = match config.position_family {
        PositionFamily::LearnedAbsolute => Some(mat(config.context_limit, d)),
        PositionFamily::Rotary => None,
    };
    let unembedding = mat(config.vocab_size, d);
    let mut layers = Vec::with_capacity(config.n_layers);
    for _ in 0..config.n_layers {
        layers.push(LayerWeights {
            w_q: mat(d, d),
            w_k: mat(d, d),
            w_v: mat(d, d),
            w_o: mat(d, d),
            fc1: mat(config.d_ffn, d),
            gate: match config.ffn_family {
                crate::model::FfnFamily::Gated => Some(mat(config.d_ffn, d)),
                crate::model::FfnFamily::SingleGate => None,
            },
            fc2: mat(d, config.d_ffn),
            norm1: NormWeights::ones(d),
            norm2: NormWeights::ones(d),
        });
    }
    Ok(TransformerWeights {
        config: config.clone(),
        embedding,
        pos_embedding,
        unembedding,
        final_norm: NormWeights::ones(d),
        layers,
    })
}

/// Zero-initialized model; the starting point for hand-planted constructions.
pub fn zero_model(config: &ModelConfig) -> Result<TransformerWeights> {
    config.validate()?;
    let d = config.d_model;
    let zeros = |r, c| Array2::<f32>::zeros((r, c));
    let layers = (0..config.n_layers)
        .map(|_| LayerWeights {
            w_q: zeros(d, d),
            w_k: zeros(d, d),
            w_v: zeros(d, d),
            w_o: zeros(d, d),
            fc1: zeros(config.d_ffn, d),
            gate: match config.ffn_family {
                crate::model::FfnFamily::Gated => Some(zeros(config.d_ffn, d)),
                crate::model::FfnFamily::SingleGate => None,
            },
            fc2: zeros(d, config.d_ffn),
            norm1: NormWeights::ones(d),
            norm2: NormWeights::ones(d),
        })
        .collect();
    Ok(TransformerWeights {
        config: config.clone(),
        embedding: zeros(config.vocab_size, d),
        pos_embedding: match config.position_family {
            PositionFamily::LearnedAbsolute => Some(zeros(config.context_limit, d)),
            PositionFamily::Rotary => None,
        },
        unembedding: zeros(config.vocab_size, d),
        final_norm: NormWeights::ones(d),
        layers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FfnFamily, NormFamily};

    fn config() -> ModelConfig {
        ModelConfig {
            n_layers: 2,
            d_model: 16,
            n_heads: 2,
            d_head: 8,
            d_ffn: 12,
            vocab_size: 32,
            context_limit: 64,
            ffn_family: FfnFamily::SingleGate,
            norm_family: NormFamily::PreRmsnorm,
            position_family: PositionFamily::Rotary,
            activation: None,
            bos_token_id: 0,
            add_bos: true,
        }
    }

    #[test]
    fn random_model_is_seed_deterministic() {
        let cfg = config();
        let a = random_model(&cfg, 7).unwrap();
        let b = random_model(&cfg, 7).unwrap();
        assert_eq!(a.embedding, b.embedding);
        assert_eq!(a.layers[1].fc2, b.layers[1].fc2);
        let c = random_model(&cfg, 8).unwrap();
        assert_ne!(a.embedding, c.embedding);
    }

    #[test]
    fn neuron_shapes_match_contract() {
        let w = random_model(&config(), 1).unwrap();
        let f = w.get_neuron(NeuronId::ffn(0, 0)).unwrap();
        assert_eq!(f.subkey.len(), 16);
        assert_eq!(f.subvalue.len(), 16);
        assert!(f.gate_subkey.is_none());
        let a = w.get_neuron(NeuronId::attn(0, 0, 0)).unwrap();
        assert_eq!(a.subkey.len(), 16);
        assert_eq!(a.subvalue.len(), 16);
    }

    #[test]
    fn addressing_is_total_and_bounded() {
        let w = random_model(&config(), 1).unwrap();
        for id in w.neuron_ids() {
            assert!(w.get_neuron(id).is_ok(), "{id} should resolve");
        }
        assert!(w.get_neuron(NeuronId::ffn(2, 0)).is_err());
        assert!(w.get_neuron(NeuronId::ffn(0, 12)).is_err());
        assert!(w.get_neuron(NeuronId::attn(0, 0, 8)).is_err());
        assert!(w.get_neuron(NeuronId::attn(0, 2, 0)).is_err());
        assert!(w.get_neuron(NeuronId::attn(1, 1, 8)).is_err());
    }

    #[test]
    fn gated_family_exposes_gate_row() {
        let mut cfg = config();
        cfg.ffn_family = FfnFamily::Gated;
        let w = random_model(&cfg, 3).unwrap();
        let n = w.get_neuron(NeuronId::ffn(1, 4)).unwrap();
        assert_eq!(n.gate_subkey.as_ref().map(|g| g.len()), Some(16));
    }
}
