//! Model hyperparameters and architecture axes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// FFN wiring: a single up-projection through a nonlinearity, or a gated pair
/// of up-projections whose product forms each neuron coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FfnFamily {
    SingleGate,
    Gated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormFamily {
    PreLayernorm,
    PreRmsnorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PositionFamily {
    LearnedAbsolute,
    Rotary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Gelu,
    Silu,
    Relu,
}

/// Shape and family description of a decoder-only transformer.
///
/// Mirrors the on-disk config JSON field-for-field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_head: usize,
    pub d_ffn: usize,
    pub vocab_size: usize,
    #[serde(default = "default_context_limit")]
    pub context_limit: usize,
    pub ffn_family: FfnFamily,
    pub norm_family: NormFamily,
    pub position_family: PositionFamily,
    /// FFN nonlinearity. Defaults per family: gelu for single-gate, silu for gated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation: Option<Activation>,
    pub bos_token_id: u32,
    /// Whether encoders should prepend the bos token.
    #[serde(default = "default_true")]
    pub add_bos: bool,
}

fn default_context_limit() -> usize {
    2048
}

fn default_true() -> bool {
    true
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_layers", self.n_layers),
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("d_head", self.d_head),
            ("d_ffn", self.d_ffn),
            ("context_limit", self.context_limit),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        if self.vocab_size < 2 {
            return Err(Error::Config("vocab_size must be >= 2".into()));
        }
        if self.d_model != self.n_heads * self.d_head {
            return Err(Error::Config(format!(
                "d_model ({}) != n_heads ({}) * d_head ({})",
                self.d_model, self.n_heads, self.d_head
            )));
        }
        if self.position_family == PositionFamily::Rotary && self.d_head % 2 != 0 {
            return Err(Error::Config("rotary positions require an even d_head".into()));
        }
        if (self.bos_token_id as usize) >= self.vocab_size {
            return Err(Error::Config(format!(
                "bos_token_id {} outside vocab of size {}",
                self.bos_token_id, self.vocab_size
            )));
        }
        Ok(())
    }

    /// Effective FFN nonlinearity (family default when unset).
    pub fn activation(&self) -> Activation {
        self.activation.unwrap_or(match self.ffn_family {
            FfnFamily::SingleGate => Activation::Gelu,
            FfnFamily::Gated => Activation::Silu,
        })
    }

    /// Attention neurons per layer (all heads).
    pub fn attn_neurons_per_layer(&self) -> usize {
        self.n_heads * self.d_head
    }

    /// Total addressable neurons (FFN + attention) across all layers.
    pub fn total_neurons(&self) -> usize {
        self.n_layers * (self.d_ffn + self.attn_neurons_per_layer())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: ModelConfig =
            serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("config serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ModelConfig {
        ModelConfig {
            n_layers: 2,
            d_model: 16,
            n_heads: 2,
            d_head: 8,
            d_ffn: 32,
            vocab_size: 64,
            context_limit: 128,
            ffn_family: FfnFamily::SingleGate,
            norm_family: NormFamily::PreRmsnorm,
            position_family: PositionFamily::Rotary,
            activation: None,
            bos_token_id: 0,
            add_bos: true,
        }
    }

    #[test]
    fn validates_head_split() {
        let mut c = base();
        assert!(c.validate().is_ok());
        c.d_head = 7;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_tiny_vocab_and_zero_counts() {
        let mut c = base();
        c.vocab_size = 1;
        assert!(c.validate().is_err());
        let mut c = base();
        c.n_layers = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn activation_defaults_follow_family() {
        let mut c = base();
        assert_eq!(c.activation(), Activation::Gelu);
        c.ffn_family = FfnFamily::Gated;
        assert_eq!(c.activation(), Activation::Silu);
        c.activation = Some(Activation::Relu);
        assert_eq!(c.activation(), Activation::Relu);
    }

    #[test]
    fn config_json_round_trip() {
        let c = base();
        let text = serde_json::to_string(&c).unwrap();
        assert!(text.contains("single-gate"));
        assert!(text.contains("pre-rmsnorm"));
        let back: ModelConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
    }
}
