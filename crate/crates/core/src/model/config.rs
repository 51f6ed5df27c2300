use std::fmt;

use serde::{Deserialize, Serialize};

use crate::numerics::CellVariant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EncoderType {
    #[serde(rename = "LSTM")]
    Lstm,
    #[serde(rename = "BLSTM")]
    Blstm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AttentionType {
    Luong,
    Bahdanau,
}

/// Architecture and training schedule. Dropout values are drop rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub encoder_units: usize,
    pub decoder_units: usize,
    pub layers_enc: usize,
    pub layers_dec: usize,
    pub encoder_type: EncoderType,
    pub attention: AttentionType,
    pub embedding_dim: usize,
    pub output_dropout: f64,
    pub state_dropout: f64,
    pub variational: bool,
    pub lr0: f64,
    pub decay: f64,
    pub batch_size: usize,
    pub clip_norm: f64,
    pub max_source_len: usize,
    pub max_target_len: usize,
    pub seed: u64,
    pub cell: CellVariant,
    /// Half-width of the uniform initialisation interval.
    pub init_scale: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            encoder_units: 64,
            decoder_units: 128,
            layers_enc: 2,
            layers_dec: 2,
            encoder_type: EncoderType::Blstm,
            attention: AttentionType::Luong,
            embedding_dim: 64,
            output_dropout: 0.0,
            state_dropout: 0.0,
            variational: true,
            lr0: 1.0,
            decay: 0.854,
            batch_size: 128,
            clip_norm: 5.0,
            max_source_len: 256,
            max_target_len: 160,
            seed: 42,
            cell: CellVariant::Standard,
            init_scale: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub issues: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid model config: {}", self.issues.join("; "))
    }
}

impl std::error::Error for ConfigError {}

impl ModelConfig {
    /// The best configuration found by the original architecture search.
    pub fn best_published() -> Self {
        ModelConfig {
            encoder_units: 1024,
            decoder_units: 2048,
            layers_enc: 2,
            layers_dec: 2,
            encoder_type: EncoderType::Blstm,
            attention: AttentionType::Luong,
            embedding_dim: 1024,
            output_dropout: 0.7676,
            state_dropout: 0.5374,
            variational: true,
            lr0: 0.355,
            decay: 0.854,
            ..ModelConfig::default()
        }
    }

    /// Width of each encoder time step's output.
    pub fn encoder_output_dim(&self) -> usize {
        match self.encoder_type {
            EncoderType::Lstm => self.encoder_units,
            EncoderType::Blstm => 2 * self.encoder_units,
        }
    }

    pub fn directions(&self) -> usize {
        match self.encoder_type {
            EncoderType::Lstm => 1,
            EncoderType::Blstm => 2,
        }
    }

    /// Checks every constraint and reports all violations at once.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut issues = Vec::new();
        for (name, v) in [
            ("encoder_units", self.encoder_units),
            ("decoder_units", self.decoder_units),
            ("layers_enc", self.layers_enc),
            ("layers_dec", self.layers_dec),
            ("embedding_dim", self.embedding_dim),
            ("batch_size", self.batch_size),
            ("max_source_len", self.max_source_len),
            ("max_target_len", self.max_target_len),
        ] {
            if v == 0 {
                issues.push(format!("{name} must be positive"));
            }
        }
        if self.decoder_units != self.encoder_output_dim() {
            issues.push(format!(
                "decoder_units ({}) must equal the encoder output width ({}) for {:?}",
                self.decoder_units,
                self.encoder_output_dim(),
                self.encoder_type
            ));
        }
        for (name, v) in [("output_dropout", self.output_dropout), ("state_dropout", self.state_dropout)] {
            if !(0.0..=0.9).contains(&v) {
                issues.push(format!("{name} must lie in [0, 0.9], got {v}"));
            }
        }
        if !(self.lr0.is_finite() && self.lr0 > 0.0) {
            issues.push(format!("lr0 must be positive, got {}", self.lr0));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            issues.push(format!("decay must lie in (0, 1], got {}", self.decay));
        }
        if !(self.clip_norm.is_finite() && self.clip_norm > 0.0) {
            issues.push(format!("clip_norm must be positive, got {}", self.clip_norm));
        }
        if !(self.init_scale.is_finite() && self.init_scale > 0.0) {
            issues.push(format!("init_scale must be positive, got {}", self.init_scale));
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { issues })
        }
    }
}
