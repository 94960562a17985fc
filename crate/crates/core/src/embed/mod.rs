//! Low-dimensional embeddings of the base set.

pub mod eigh;
pub mod le;
pub mod pca;
pub mod tsne;

use serde::{Deserialize, Serialize};

pub use eigh::{eigh, SymmetricEigen};
pub use le::{deflated_eigh, embed_le_base, embed_le_relaxed, laplacian, relaxed_le_operator, CrossTerm};
pub use pca::{embed_pca, Pca};
pub use tsne::{embed_tsne, TsneConfig};

use crate::affinity::AffinityWeights;
use crate::{Error, Matrix, Result};

/// Which algorithm produced a base embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    ImhTsne,
    ImhLe,
    ImhLeBase,
    ImhPca,
}

impl Backend {
    pub const ALL: [Backend; 4] = [Backend::ImhTsne, Backend::ImhLe, Backend::ImhLeBase, Backend::ImhPca];

    pub fn name(self) -> &'static str {
        match self {
            Backend::ImhTsne => "imh-tsne",
            Backend::ImhLe => "imh-le",
            Backend::ImhLeBase => "imh-le-base",
            Backend::ImhPca => "imh-pca",
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Backend::ImhTsne => 0,
            Backend::ImhLe => 1,
            Backend::ImhLeBase => 2,
            Backend::ImhPca => 3,
        }
    }

    pub(crate) fn from_tag(t: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.tag() == t)
    }
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown embedding backend {s:?}")))
    }
}

/// `m x r` embedding of the base set plus the offset subtracted before
/// thresholding.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseEmbedding {
    pub values: Matrix,
    pub backend: Backend,
    pub center_offset: Vec<f64>,
}

impl BaseEmbedding {
    /// Embedding with a zero offset.
    pub fn new(values: Matrix, backend: Backend) -> Self {
        let r = values.cols();
        Self {
            values,
            backend,
            center_offset: vec![0.0; r],
        }
    }

    pub fn m(&self) -> usize {
        self.values.rows()
    }

    pub fn r(&self) -> usize {
        self.values.cols()
    }
}

/// Sets the offset to the mean of the training-set embedding `Wbar Y_B`.
pub fn center_embedding(emb: BaseEmbedding, wbar: &AffinityWeights) -> Result<BaseEmbedding> {
    if !wbar.is_normalized() {
        return Err(Error::invalid("centering needs row-normalised weights"));
    }
    if wbar.m() != emb.m() {
        return Err(Error::DimensionMismatch {
            expected: emb.m(),
            found: wbar.m(),
        });
    }
    if wbar.n() == 0 {
        return Err(Error::invalid("centering needs at least one training point"));
    }
    let y = wbar.mul_dense(&emb.values);
    Ok(BaseEmbedding {
        center_offset: y.column_means(),
        ..emb
    })
}
