use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::matrix::sq_dist;
use crate::{DataMatrix, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum TruthMode {
    /// Same-label training items are relevant.
    Labels,
    /// The `ceil(fraction * n)` nearest training items are relevant.
    EuclideanTopFraction { fraction: f64 },
}

/// Relevant training ids for each query.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub mode: TruthMode,
    /// Query ids, in query order.
    pub query_ids: Vec<u64>,
    /// Ascending relevant ids per query; may be empty (such queries are not
    /// scored).
    pub relevant: Vec<Vec<u64>>,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.query_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.query_ids.is_empty()
    }

    /// Queries with an empty relevant set.
    pub fn empty_queries(&self) -> usize {
        self.relevant.iter().filter(|r| r.is_empty()).count()
    }
}

pub fn build_ground_truth(train: &DataMatrix, test: &DataMatrix, mode: TruthMode) -> Result<GroundTruth> {
    let relevant = match mode {
        TruthMode::Labels => {
            let (tl, ql) = match (train.labels(), test.labels()) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(Error::invalid("label ground truth needs labels on both train and test data")),
            };
            let mut by_class: HashMap<i64, Vec<u64>> = HashMap::new();
            for (&l, &id) in tl.iter().zip(train.ids()) {
                by_class.entry(l).or_default().push(id);
            }
            for v in by_class.values_mut() {
                v.sort_unstable();
            }
            ql.iter().map(|l| by_class.get(l).cloned().unwrap_or_default()).collect()
        }
        TruthMode::EuclideanTopFraction { fraction } => {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(Error::invalid(format!("ground-truth fraction must be in (0, 1], got {fraction}")));
            }
            if train.dims() != test.dims() {
                return Err(Error::DimensionMismatch {
                    expected: train.dims(),
                    found: test.dims(),
                });
            }
            let n = train.n();
            let count = ((fraction * n as f64).ceil() as usize).min(n);
            (0..test.n())
                .into_par_iter()
                .map(|q| {
                    let x = test.row(q);
                    let mut order: Vec<(f64, usize)> = (0..n).map(|i| (sq_dist(x, train.row(i)), i)).collect();
                    if count < n {
                        order.select_nth_unstable_by(count, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    }
                    let mut ids: Vec<u64> = order[..count].iter().map(|&(_, i)| train.ids()[i]).collect();
                    ids.sort_unstable();
                    ids
                })
                .collect()
        }
    };
    Ok(GroundTruth {
        mode,
        query_ids: test.ids().to_vec(),
        relevant,
    })
}
