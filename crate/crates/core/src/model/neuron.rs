//! Neuron addressing.
//!
//! A neuron is a (subkey, subvalue) vector pair: an FFN first-layer row with
//! its second-layer column, or an attention value row with its output column.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NeuronKind {
    Ffn,
    Attn,
}

/// Address of one FFN or attention neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NeuronId {
    pub kind: NeuronKind,
    pub layer: usize,
    /// Head index; attention neurons only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head: Option<usize>,
    pub index: usize,
}

impl NeuronId {
    pub fn ffn(layer: usize, index: usize) -> Self {
        NeuronId {
            kind: NeuronKind::Ffn,
            layer,
            head: None,
            index,
        }
    }

    pub fn attn(layer: usize, head: usize, index: usize) -> Self {
        NeuronId {
            kind: NeuronKind::Attn,
            layer,
            head: Some(head),
            index,
        }
    }

    pub fn validate(&self, config: &ModelConfig) -> Result<()> {
        let ok = match self.kind {
            NeuronKind::Ffn => {
                self.head.is_none() && self.layer < config.n_layers && self.index < config.d_ffn
            }
            NeuronKind::Attn => match self.head {
                Some(h) => {
                    self.layer < config.n_layers && h < config.n_heads && self.index < config.d_head
                }
                None => false,
            },
        };
        if ok {
            Ok(())
        } else {
            Err(Error::OutOfBounds(format!("neuron {self}")))
        }
    }

    /// Position in the canonical enumeration (layer asc, ffn before attn,
    /// head asc, index asc). Used as the flat index everywhere a dense
    /// per-neuron buffer is kept.
    pub fn canonical_index(&self, config: &ModelConfig) -> usize {
        let per_layer = config.d_ffn + config.attn_neurons_per_layer();
        let base = self.layer * per_layer;
        match self.kind {
            NeuronKind::Ffn => base + self.index,
            NeuronKind::Attn => {
                base + config.d_ffn + self.head.unwrap_or(0) * config.d_head + self.index
            }
        }
    }

    /// Inverse of [`canonical_index`](Self::canonical_index).
    pub fn from_canonical_index(config: &ModelConfig, flat: usize) -> Self {
        let per_layer = config.d_ffn + config.attn_neurons_per_layer();
        let layer = flat / per_layer;
        let rem = flat % per_layer;
        if rem < config.d_ffn {
            NeuronId::ffn(layer, rem)
        } else {
            let a = rem - config.d_ffn;
            NeuronId::attn(layer, a / config.d_head, a % config.d_head)
        }
    }

    fn sort_key(&self) -> (usize, u8, usize, usize) {
        let kind_rank = match self.kind {
            NeuronKind::Ffn => 0,
            NeuronKind::Attn => 1,
        };
        (self.layer, kind_rank, self.head.unwrap_or(0), self.index)
    }
}

impl Ord for NeuronId {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl PartialOrd for NeuronId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for NeuronId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            NeuronKind::Ffn => write!(f, "ffn L{} N{}", self.layer, self.index),
            NeuronKind::Attn => write!(
                f,
                "attn L{}H{} N{}",
                self.layer,
                self.head.unwrap_or(0),
                self.index
            ),
        }
    }
}

/// Parses `ffn:LAYER:INDEX` or `attn:LAYER:HEAD:INDEX`.
impl FromStr for NeuronId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let parse = |v: &str| -> Result<usize> {
            v.parse()
                .map_err(|_| Error::InvalidArgument(format!("bad neuron field `{v}` in `{s}`")))
        };
        match parts.as_slice() {
            ["ffn", layer, index] => Ok(NeuronId::ffn(parse(layer)?, parse(index)?)),
            ["attn", layer, head, index] => {
                Ok(NeuronId::attn(parse(layer)?, parse(head)?, parse(index)?))
            }
            _ => Err(Error::InvalidArgument(format!(
                "bad neuron id `{s}` (expected ffn:L:N or attn:L:H:N)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FfnFamily, NormFamily, PositionFamily};

    fn config() -> ModelConfig {
        ModelConfig {
            n_layers: 2,
            d_model: 8,
            n_heads: 2,
            d_head: 4,
            d_ffn: 6,
            vocab_size: 16,
            context_limit: 32,
            ffn_family: FfnFamily::SingleGate,
            norm_family: NormFamily::PreRmsnorm,
            position_family: PositionFamily::Rotary,
            activation: None,
            bos_token_id: 0,
            add_bos: true,
        }
    }

    #[test]
    fn canonical_order_is_layer_then_kind() {
        let a = NeuronId::ffn(0, 5);
        let b = NeuronId::attn(0, 0, 0);
        let c = NeuronId::ffn(1, 0);
        assert!(a < b);
        assert!(b < c);
    }

    #[test]
    fn canonical_index_round_trips() {
        let cfg = config();
        for flat in 0..cfg.total_neurons() {
            let id = NeuronId::from_canonical_index(&cfg, flat);
            assert!(id.validate(&cfg).is_ok());
            assert_eq!(id.canonical_index(&cfg), flat);
        }
    }

    #[test]
    fn parse_and_display() {
        let id: NeuronId = "attn:18:7:56".parse().unwrap();
        assert_eq!(id, NeuronId::attn(18, 7, 56));
        assert_eq!(id.to_string(), "attn L18H7 N56");
        let id: NeuronId = "ffn:2:7003".parse().unwrap();
        assert_eq!(id.to_string(), "ffn L2 N7003");
        assert!("ffn:2".parse::<NeuronId>().is_err());
    }

    #[test]
    fn bounds_validation() {
        let cfg = config();
        assert!(NeuronId::ffn(1, 5).validate(&cfg).is_ok());
        assert!(NeuronId::ffn(2, 0).validate(&cfg).is_err());
        assert!(NeuronId::ffn(0, 6).validate(&cfg).is_err());
        assert!(NeuronId::attn(0, 2, 0).validate(&cfg).is_err());
        assert!(NeuronId::attn(0, 1, 4).validate(&cfg).is_err());
    }
}
