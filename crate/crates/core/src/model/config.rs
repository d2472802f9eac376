use serde::{Deserialize, Serialize};

use crate::featurize::AdjacencyMode;
use crate::frontend::View;

use super::ModelError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    #[default]
    Set2Set,
    /// Row mean, duplicated to width `2d`.
    Mean,
    /// One learned query vector attends over the nodes; readout duplicated to `2d`.
    GlobalAttn,
}

impl Pooling {
    pub fn parse(s: &str) -> Option<Pooling> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "set2set" => Some(Pooling::Set2Set),
            "mean" => Some(Pooling::Mean),
            "global_attn" => Some(Pooling::GlobalAttn),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Pooling::Set2Set => "set2set",
            Pooling::Mean => "mean",
            Pooling::GlobalAttn => "global_attn",
        }
    }
}

/// Divisor of attention logits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttnScale {
    /// `sqrt(head_dim)`
    #[default]
    HeadDim,
    /// `sqrt(d)`
    ModelDim,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub d: usize,
    pub layers: usize,
    pub heads: usize,
    pub head_dim: usize,
    pub dropout: f64,
    pub ffn_mult: usize,
    pub set2set_steps: usize,
    pub use_residual: bool,
    pub use_intra_attn: bool,
    pub use_cross_attn: bool,
    pub pooling: Pooling,
    pub views: Vec<View>,
    pub use_tokens: bool,
    pub adjacency: AdjacencyMode,
    pub attn_scale: AttnScale,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d: 128,
            layers: 3,
            heads: 8,
            head_dim: 64,
            dropout: 0.1,
            ffn_mult: 4,
            set2set_steps: 3,
            use_residual: true,
            use_intra_attn: true,
            use_cross_attn: true,
            pooling: Pooling::Set2Set,
            views: View::ALL.to_vec(),
            use_tokens: true,
            adjacency: AdjacencyMode::Symmetric,
            attn_scale: AttnScale::HeadDim,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("d", self.d),
            ("layers", self.layers),
            ("heads", self.heads),
            ("head_dim", self.head_dim),
            ("ffn_mult", self.ffn_mult),
            ("set2set_steps", self.set2set_steps),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(ModelError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::InvalidConfig(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        if self.views.is_empty() {
            return Err(ModelError::InvalidConfig("no views enabled".into()));
        }
        Ok(())
    }

    /// Enabled views in canonical order without duplicates.
    pub fn active_views(&self) -> Vec<View> {
        View::ALL.into_iter().filter(|v| self.views.contains(v)).collect()
    }

    pub fn attn_width(&self) -> usize {
        self.heads * self.head_dim
    }

    pub fn logit_scale(&self) -> f64 {
        let denom = match self.attn_scale {
            AttnScale::HeadDim => self.head_dim,
            AttnScale::ModelDim => self.d,
        };
        1.0 / (denom as f64).sqrt()
    }
}
