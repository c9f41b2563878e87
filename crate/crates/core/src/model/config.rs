use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The baseline and the six ways of feeding visual features to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Baseline,
    FusionConv,
    DecInit,
    EncdecInit,
    CtxMul,
    TrgMul,
    DecInitCtxTrgMul,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Baseline,
        Variant::FusionConv,
        Variant::DecInit,
        Variant::EncdecInit,
        Variant::CtxMul,
        Variant::TrgMul,
        Variant::DecInitCtxTrgMul,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::FusionConv => "fusion-conv",
            Variant::DecInit => "dec-init",
            Variant::EncdecInit => "encdec-init",
            Variant::CtxMul => "ctx-mul",
            Variant::TrgMul => "trg-mul",
            Variant::DecInitCtxTrgMul => "dec-init-ctx-trg-mul",
        }
    }

    pub fn uses_global(self) -> bool {
        !matches!(self, Variant::Baseline | Variant::FusionConv)
    }

    pub fn uses_spatial(self) -> bool {
        self == Variant::FusionConv
    }

    /// `h0 = tanh(W_img V)`.
    pub fn image_init(self) -> bool {
        matches!(self, Variant::DecInit | Variant::EncdecInit | Variant::DecInitCtxTrgMul)
    }

    pub fn ctx_modulation(self) -> bool {
        matches!(self, Variant::CtxMul | Variant::DecInitCtxTrgMul)
    }

    pub fn trg_modulation(self) -> bool {
        matches!(self, Variant::TrgMul | Variant::DecInitCtxTrgMul)
    }

    /// `h0 = tanh(W_init mean(S))`.
    pub fn mean_init(self) -> bool {
        matches!(self, Variant::Baseline | Variant::FusionConv)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL.into_iter().find(|v| v.name() == s).ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }
}

/// Dropout probabilities after source embeddings, after source annotations
/// and on the pre-softmax activations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dropout {
    pub emb: f64,
    pub annot: f64,
    pub out: f64,
}

impl Dropout {
    pub const OFF: Dropout = Dropout { emb: 0.0, annot: 0.0, out: 0.0 };
    pub const ENDE: Dropout = Dropout { emb: 0.3, annot: 0.5, out: 0.5 };
    pub const ENFR: Dropout = Dropout { emb: 0.2, annot: 0.4, out: 0.4 };
}

impl Default for Dropout {
    fn default() -> Self {
        Dropout::ENDE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    /// Embedding size E.
    #[serde(default = "default_emb")]
    pub emb_dim: usize,
    /// Recurrent size R; annotations have size C = 2R.
    #[serde(default = "default_rnn")]
    pub rnn_dim: usize,
    /// Vocabulary sizes; 0 in a config file means "take them from the
    /// vocabulary files" and must be filled in before use.
    #[serde(default)]
    pub src_vocab: usize,
    #[serde(default)]
    pub trg_vocab: usize,
    /// Global feature size D_g.
    #[serde(default = "default_global")]
    pub global_dim: usize,
    /// Spatial cell count P.
    #[serde(default = "default_cells")]
    pub spatial_cells: usize,
    /// Spatial feature size D_s.
    #[serde(default = "default_spatial")]
    pub spatial_dim: usize,
    #[serde(default)]
    pub dropout: Dropout,
    /// L2-normalize feature vectors (spatial: per cell) before use.
    #[serde(default)]
    pub normalize_features: bool,
}

fn default_emb() -> usize {
    128
}
fn default_rnn() -> usize {
    256
}
fn default_global() -> usize {
    2048
}
fn default_cells() -> usize {
    196
}
fn default_spatial() -> usize {
    1024
}

impl ModelConfig {
    /// Full-size dimensions with the given variant and vocabularies.
    pub fn full_scale(variant: Variant, src_vocab: usize, trg_vocab: usize) -> Self {
        ModelConfig {
            variant,
            emb_dim: default_emb(),
            rnn_dim: default_rnn(),
            src_vocab,
            trg_vocab,
            global_dim: default_global(),
            spatial_cells: default_cells(),
            spatial_dim: default_spatial(),
            dropout: Dropout::default(),
            normalize_features: false,
        }
    }

    /// Tiny dimensions used by gradient checks.
    pub fn toy(variant: Variant) -> Self {
        ModelConfig {
            variant,
            emb_dim: 8,
            rnn_dim: 8,
            src_vocab: 20,
            trg_vocab: 20,
            global_dim: 12,
            spatial_cells: 4,
            spatial_dim: 6,
            dropout: Dropout::OFF,
            normalize_features: false,
        }
    }

    pub fn ctx_dim(&self) -> usize {
        2 * self.rnn_dim
    }

    pub fn with_variant(&self, variant: Variant) -> Self {
        ModelConfig { variant, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("emb_dim", self.emb_dim),
            ("rnn_dim", self.rnn_dim),
            ("global_dim", self.global_dim),
            ("spatial_cells", self.spatial_cells),
            ("spatial_dim", self.spatial_dim),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, d)| *d == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.src_vocab < 5 || self.trg_vocab < 5 {
            return Err(Error::Config(format!(
                "vocabularies need the 4 specials plus at least one token (src {}, trg {})",
                self.src_vocab, self.trg_vocab
            )));
        }
        for (name, p) in [("emb", self.dropout.emb), ("annot", self.dropout.annot), ("out", self.dropout.out)] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::Config(format!("dropout.{name} must be in [0, 1), got {p}")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
