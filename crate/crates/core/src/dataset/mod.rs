//! Feature datasets: the [`DataMatrix`] container, its loaders, synthetic
//! generators and seeded train/test splits.

mod delimited;
mod idx;
mod native;
mod synth;
mod vecs;

use std::collections::HashSet;

use rand::seq::index;
use serde::{Deserialize, Serialize};

pub use delimited::load_csv;
pub use idx::{load_idx, load_idx_labels, load_idx_with_labels};
pub use native::{load_native, read_native, save_native, write_native};
pub use synth::{synth_manifold, SynthKind, SynthParams};
pub use vecs::{load_vecs, VecsKind};

use crate::{seed, Error, Matrix, Result};

/// Dense `n x d` feature matrix with stable per-row ids and optional labels.
///
/// Invariants (checked by every constructor): `d >= 1`, all values finite,
/// ids unique, and `labels.len() == n` when present.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Matrix,
    ids: Vec<u64>,
    labels: Option<Vec<i64>>,
    provenance: String,
}

impl DataMatrix {
    pub fn new(
        values: Matrix,
        ids: Vec<u64>,
        labels: Option<Vec<i64>>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        if values.cols() == 0 {
            return Err(Error::invalid("dataset dimensionality must be at least 1"));
        }
        if ids.len() != values.rows() {
            return Err(Error::DimensionMismatch {
                expected: values.rows(),
                found: ids.len(),
            });
        }
        if let Some(l) = &labels {
            if l.len() != values.rows() {
                return Err(Error::DimensionMismatch {
                    expected: values.rows(),
                    found: l.len(),
                });
            }
        }
        if let Some(pos) = values.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value at row {}, column {}",
                pos / values.cols(),
                pos % values.cols()
            )));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        if let Some(dup) = ids.iter().find(|id| !seen.insert(**id)) {
            return Err(Error::invalid(format!("duplicate row id {dup}")));
        }
        Ok(Self {
            values,
            ids,
            labels,
            provenance: provenance.into(),
        })
    }

    /// Rows get ids `0..n`.
    pub fn from_matrix(values: Matrix, provenance: impl Into<String>) -> Result<Self> {
        let ids = (0..values.rows() as u64).collect();
        Self::new(values, ids, None, provenance)
    }

    pub fn with_labels(self, labels: Vec<i64>) -> Result<Self> {
        Self::new(self.values, self.ids, Some(labels), self.provenance)
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn dims(&self) -> usize {
        self.values.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.n() == 0
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn labels(&self) -> Option<&[i64]> {
        self.labels.as_deref()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Rows at the given positions (not ids), keeping ids and labels.
    pub fn select(&self, positions: &[usize]) -> DataMatrix {
        DataMatrix {
            values: self.values.select_rows(positions),
            ids: positions.iter().map(|&p| self.ids[p]).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| positions.iter().map(|&p| l[p]).collect()),
            provenance: self.provenance.clone(),
        }
    }

    /// Rows whose ids appear in `ids`, in that order.
    pub fn select_ids(&self, ids: &[u64]) -> Result<DataMatrix> {
        let pos: std::collections::HashMap<u64, usize> =
            self.ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let positions = ids
            .iter()
            .map(|id| {
                pos.get(id)
                    .copied()
                    .ok_or_else(|| Error::invalid(format!("unknown row id {id}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select(&positions))
    }

    /// First `n` rows.
    pub fn head(&self, n: usize) -> DataMatrix {
        let n = n.min(self.n());
        self.select(&(0..n).collect::<Vec<_>>())
    }

    pub fn normalized(&self, how: Normalization) -> DataMatrix {
        let mut values = self.values.clone();
        match how {
            Normalization::None => {}
            Normalization::UnitL2 => {
                for i in 0..values.rows() {
                    let r = values.row_mut(i);
                    let n = crate::matrix::norm(r);
                    if n > 0.0 {
                        r.iter_mut().for_each(|v| *v /= n);
                    }
                }
            }
            Normalization::ZScore => {
                let mean = values.column_means();
                values.sub_row_vector(&mean);
                let n = values.rows().max(1) as f64;
                let sd: Vec<f64> = (0..values.cols())
                    .map(|j| {
                        (values.row_iter().map(|r| r[j] * r[j]).sum::<f64>() / n).sqrt()
                    })
                    .collect();
                for i in 0..values.rows() {
                    for (v, s) in values.row_mut(i).iter_mut().zip(&sd) {
                        if *s > 0.0 {
                            *v /= s;
                        }
                    }
                }
            }
        }
        DataMatrix {
            values,
            ids: self.ids.clone(),
            labels: self.labels.clone(),
            provenance: self.provenance.clone(),
        }
    }
}

/// Optional feature normalisation applied before hashing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    None,
    UnitL2,
    ZScore,
}

impl std::str::FromStr for Normalization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "unit_l2" | "l2" => Ok(Self::UnitL2),
            "zscore" | "z_score" => Ok(Self::ZScore),
            other => Err(Error::invalid(format!("unknown normalization {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_ids: Vec<u64>,
    pub test_ids: Vec<u64>,
    pub seed: u64,
}

impl SplitSpec {
    pub fn apply(&self, data: &DataMatrix) -> Result<(DataMatrix, DataMatrix)> {
        Ok((data.select_ids(&self.train_ids)?, data.select_ids(&self.test_ids)?))
    }
}

/// Uniform sample of `test_count` rows without replacement; the remaining
/// rows, in dataset order, form the training part.
pub fn split(data: &DataMatrix, test_count: usize, seed_value: u64) -> Result<SplitSpec> {
    let n = data.n();
    if test_count >= n {
        return Err(Error::invalid(format!(
            "test_count {test_count} must be smaller than the dataset size {n}"
        )));
    }
    let mut rng = seed::rng(seed_value);
    let mut picked = index::sample(&mut rng, n, test_count).into_vec();
    picked.sort_unstable();
    let mut is_test = vec![false; n];
    for &p in &picked {
        is_test[p] = true;
    }
    Ok(SplitSpec {
        train_ids: (0..n).filter(|&i| !is_test[i]).map(|i| data.ids[i]).collect(),
        test_ids: picked.iter().map(|&i| data.ids[i]).collect(),
        seed: seed_value,
    })
}
