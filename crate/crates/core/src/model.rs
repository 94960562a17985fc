//! Trained hash functions and their file format.
//!
//! [`HashModel`] is the inductive manifold hash: a point is placed in the
//! base embedding as the normalised-affinity average of its `k` nearest base
//! points, the training mean is subtracted, and the sign gives the code.
//! [`LinearHash`] covers the projection baselines.
//!
//! Model files:
//!
//! ```text
//! magic   "IMHMODEL"
//! version u32 = 1
//! kind    u8   0 = manifold, 1 = linear
//! manifold:
//!   backend u8, base method u8, bandwidth heuristic u8
//!   k u64, sigma f64, m u64, d u64, r u64
//!   centers m*d f64, embedding m*r f64, offset r f64
//! linear:
//!   kind u8 (0 = lsh, 1 = pcah), d u64, r u64
//!   mean d f64, projection d*r f64, offset r f64
//! crc32   u32
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::affinity::{knn_weights, normalize_rows, Bandwidth, BandwidthHeuristic};
use crate::base::BaseMethod;
use crate::binio::{Reader, Writer};
use crate::embed::{Backend, BaseEmbedding};
use crate::{CodeSet, DataMatrix, Error, Matrix, Result};

const MAGIC: &[u8; 8] = b"IMHMODEL";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct HashModel {
    centers: Matrix,
    embedding: BaseEmbedding,
    bandwidth: Bandwidth,
    k: usize,
    base_method: BaseMethod,
}

impl HashModel {
    pub fn new(
        centers: Matrix,
        embedding: BaseEmbedding,
        bandwidth: Bandwidth,
        k: usize,
        base_method: BaseMethod,
    ) -> Result<Self> {
        let m = centers.rows();
        if m == 0 {
            return Err(Error::invalid("model needs at least one base point"));
        }
        if embedding.m() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: embedding.m(),
            });
        }
        if embedding.r() == 0 || embedding.center_offset.len() != embedding.r() {
            return Err(Error::invalid("embedding must have r >= 1 columns and an r-vector offset"));
        }
        if k == 0 || k > m {
            return Err(Error::invalid(format!("k must satisfy 1 <= k <= m = {m}, got {k}")));
        }
        if !centers.is_finite() || !embedding.values.is_finite() || embedding.center_offset.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("model contains non-finite values"));
        }
        Ok(Self {
            centers,
            embedding,
            bandwidth,
            k,
            base_method,
        })
    }

    pub fn centers(&self) -> &Matrix {
        &self.centers
    }

    pub fn embedding(&self) -> &BaseEmbedding {
        &self.embedding
    }

    pub fn bandwidth(&self) -> Bandwidth {
        self.bandwidth
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.centers.rows()
    }

    pub fn d(&self) -> usize {
        self.centers.cols()
    }

    pub fn r(&self) -> usize {
        self.embedding.r()
    }

    pub fn backend(&self) -> Backend {
        self.embedding.backend
    }

    pub fn base_method(&self) -> BaseMethod {
        self.base_method
    }

    /// Centred embedding of one point.
    pub fn extend_point(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = Matrix::from_vec(1, x.len(), x.to_vec())?;
        Ok(self.extend_batch(&m)?.into_vec())
    }

    /// Centred embeddings of every row: `Wbar Y_B - offset`.
    pub fn extend_batch(&self, data: &Matrix) -> Result<Matrix> {
        if data.cols() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                found: data.cols(),
            });
        }
        if !data.is_finite() {
            return Err(Error::invalid("input contains non-finite values"));
        }
        if data.rows() == 0 {
            return Ok(Matrix::zeros(0, self.r()));
        }
        let w = normalize_rows(&knn_weights(data, &self.centers, self.k, &self.bandwidth)?)?;
        let mut y = w.mul_dense(&self.embedding.values);
        y.sub_row_vector(&self.embedding.center_offset);
        Ok(y)
    }

    pub fn hash(&self, data: &DataMatrix) -> Result<CodeSet> {
        self.hash_matrix(data.values(), data.ids().to_vec())
    }

    pub fn hash_matrix(&self, data: &Matrix, ids: Vec<u64>) -> Result<CodeSet> {
        CodeSet::from_signs(&self.extend_batch(data)?, ids)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearKind {
    Lsh,
    Pcah,
}

/// `h(x) = [ (x - mean) P - offset >= 0 ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHash {
    pub kind: LinearKind,
    pub mean: Vec<f64>,
    /// `d x r`.
    pub projection: Matrix,
    pub offset: Vec<f64>,
}

impl LinearHash {
    pub fn new(kind: LinearKind, mean: Vec<f64>, projection: Matrix, offset: Vec<f64>) -> Result<Self> {
        if projection.rows() != mean.len() || projection.cols() != offset.len() || offset.is_empty() {
            return Err(Error::invalid(format!(
                "linear hash shapes disagree: mean {}, projection {:?}, offset {}",
                mean.len(),
                projection.shape(),
                offset.len()
            )));
        }
        if !projection.is_finite() || mean.iter().chain(&offset).any(|v| !v.is_finite()) {
            return Err(Error::invalid("linear hash contains non-finite values"));
        }
        Ok(Self {
            kind,
            mean,
            projection,
            offset,
        })
    }

    pub fn d(&self) -> usize {
        self.mean.len()
    }

    pub fn r(&self) -> usize {
        self.offset.len()
    }

    pub fn project(&self, data: &Matrix) -> Result<Matrix> {
        if data.cols() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                found: data.cols(),
            });
        }
        let mut x = data.clone();
        x.sub_row_vector(&self.mean);
        let mut y = x.matmul(&self.projection);
        y.sub_row_vector(&self.offset);
        Ok(y)
    }

    pub fn hash(&self, data: &DataMatrix) -> Result<CodeSet> {
        self.hash_matrix(data.values(), data.ids().to_vec())
    }

    pub fn hash_matrix(&self, data: &Matrix, ids: Vec<u64>) -> Result<CodeSet> {
        CodeSet::from_signs(&self.project(data)?, ids)
    }
}

/// Any persisted hash function.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Manifold(HashModel),
    Linear(LinearHash),
}

impl Model {
    pub fn d(&self) -> usize {
        match self {
            Model::Manifold(m) => m.d(),
            Model::Linear(l) => l.d(),
        }
    }

    pub fn r(&self) -> usize {
        match self {
            Model::Manifold(m) => m.r(),
            Model::Linear(l) => l.r(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::Manifold(m) => m.backend().name(),
            Model::Linear(l) => match l.kind {
                LinearKind::Lsh => "lsh",
                LinearKind::Pcah => "pcah",
            },
        }
    }

    pub fn hash(&self, data: &DataMatrix) -> Result<CodeSet> {
        match self {
            Model::Manifold(m) => m.hash(data),
            Model::Linear(l) => l.hash(data),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(MAGIC, FORMAT_VERSION);
        match self {
            Model::Manifold(h) => {
                w.u8(0);
                w.u8(h.backend().tag());
                w.u8(match h.base_method {
                    BaseMethod::Kmeans => 0,
                    BaseMethod::Random => 1,
                });
                w.u8(match h.bandwidth.heuristic() {
                    BandwidthHeuristic::Fixed => 0,
                    BandwidthHeuristic::MeanKnnDist => 1,
                });
                w.u64(h.k as u64);
                w.f64(h.bandwidth.sigma());
                w.u64(h.m() as u64);
                w.u64(h.d() as u64);
                w.u64(h.r() as u64);
                w.f64s(h.centers.as_slice());
                w.f64s(h.embedding.values.as_slice());
                w.f64s(&h.embedding.center_offset);
            }
            Model::Linear(l) => {
                w.u8(1);
                w.u8(match l.kind {
                    LinearKind::Lsh => 0,
                    LinearKind::Pcah => 1,
                });
                w.u64(l.d() as u64);
                w.u64(l.r() as u64);
                w.f64s(&l.mean);
                w.f64s(l.projection.as_slice());
                w.f64s(&l.offset);
            }
        }
        w.finish()
    }

    pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<Self> {
        let mut rd = Reader::open(path, bytes, MAGIC, FORMAT_VERSION)?;
        let at = rd.offset();
        let model = match rd.u8()? {
            0 => {
                let at = rd.offset();
                let backend = Backend::from_tag(rd.u8()?).ok_or_else(|| rd.error_at(at, "unknown backend tag"))?;
                let at = rd.offset();
                let method = match rd.u8()? {
                    0 => BaseMethod::Kmeans,
                    1 => BaseMethod::Random,
                    _ => return Err(rd.error_at(at, "unknown base method tag")),
                };
                let at = rd.offset();
                let heuristic = match rd.u8()? {
                    0 => BandwidthHeuristic::Fixed,
                    1 => BandwidthHeuristic::MeanKnnDist,
                    _ => return Err(rd.error_at(at, "unknown bandwidth heuristic tag")),
                };
                let k = rd.usize()?;
                let sigma = rd.f64()?;
                let (m, d, r) = (rd.usize()?, rd.usize()?, rd.usize()?);
                let md = m.checked_mul(d).ok_or_else(|| rd.error("m*d overflows"))?;
                let mr = m.checked_mul(r).ok_or_else(|| rd.error("m*r overflows"))?;
                let centers = Matrix::from_vec(m, d, rd.f64s(md)?)?;
                let values = Matrix::from_vec(m, r, rd.f64s(mr)?)?;
                let center_offset = rd.f64s(r)?;
                let embedding = BaseEmbedding {
                    values,
                    backend,
                    center_offset,
                };
                Model::Manifold(HashModel::new(centers, embedding, Bandwidth::new(sigma, heuristic)?, k, method)?)
            }
            1 => {
                let at = rd.offset();
                let kind = match rd.u8()? {
                    0 => LinearKind::Lsh,
                    1 => LinearKind::Pcah,
                    _ => return Err(rd.error_at(at, "unknown linear hash kind")),
                };
                let (d, r) = (rd.usize()?, rd.usize()?);
                let mean = rd.f64s(d)?;
                let dr = d.checked_mul(r).ok_or_else(|| rd.error("d*r overflows"))?;
                let projection = Matrix::from_vec(d, r, rd.f64s(dr)?)?;
                let offset = rd.f64s(r)?;
                Model::Linear(LinearHash::new(kind, mean, projection, offset)?)
            }
            _ => return Err(rd.error_at(at, "unknown model kind")),
        };
        rd.finish()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(path, &std::fs::read(path)?)
    }
}

pub fn save_model(model: &HashModel, path: impl AsRef<Path>) -> Result<()> {
    Model::Manifold(model.clone()).save(path)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<HashModel> {
    match Model::load(path)? {
        Model::Manifold(m) => Ok(m),
        Model::Linear(_) => Err(Error::invalid("file holds a linear baseline, not a manifold hash model")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> HashModel {
        let centers = Matrix::from_rows(&[[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]]).unwrap();
        let y = Matrix::from_rows(&[[1.0, -1.0], [-2.0, 0.5], [0.25, 3.0]]).unwrap();
        let mut e = BaseEmbedding::new(y, Backend::ImhLe);
        e.center_offset = vec![0.1, 0.2];
        HashModel::new(centers, e, Bandwidth::fixed(1.5).unwrap(), 2, BaseMethod::Kmeans).unwrap()
    }

    #[test]
    fn base_point_with_k1_returns_its_embedding() {
        let mut m = toy();
        m.k = 1;
        let y = m.extend_point(&[2.0, 0.0]).unwrap();
        assert_eq!(y, vec![-2.0 - 0.1, 0.5 - 0.2]);
    }

    #[test]
    fn equidistant_point_gets_midpoint() {
        let m = toy();
        let y = m.extend_point(&[1.0, 1.0]).unwrap();
        // [1,1] is equidistant from all three; k = 2 keeps the two lowest indices
        assert!((y[0] - (-0.5 - 0.1)).abs() < 1e-15);
        assert!((y[1] - (-0.25 - 0.2)).abs() < 1e-15);
    }

    #[test]
    fn empty_batch_and_bad_dims() {
        let m = toy();
        assert_eq!(m.extend_batch(&Matrix::zeros(0, 2)).unwrap().shape(), (0, 2));
        assert!(matches!(m.extend_point(&[1.0]), Err(Error::DimensionMismatch { expected: 2, found: 1 })));
        assert!(m.extend_point(&[f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn save_load_roundtrip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        save_model(&toy(), &p).unwrap();
        let a = std::fs::read(&p).unwrap();
        let back = load_model(&p).unwrap();
        assert_eq!(back, toy());
        save_model(&back, &p).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), a);

        let mut bad = a.clone();
        bad[40] ^= 0x10;
        assert!(matches!(Model::from_bytes(&p, &bad), Err(Error::Checksum { .. })));

        let mut old = a.clone();
        old[8..12].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(
            Model::from_bytes(&p, &old),
            Err(Error::UnsupportedVersion { found: 0, supported: 1 })
        ));
    }

    #[test]
    fn linear_roundtrip() {
        let l = LinearHash::new(
            LinearKind::Pcah,
            vec![1.0, 2.0],
            Matrix::from_rows(&[[1.0], [0.0]]).unwrap(),
            vec![0.0],
        )
        .unwrap();
        let m = Model::Linear(l);
        assert_eq!(Model::from_bytes(Path::new("x"), &m.to_bytes()).unwrap(), m);
    }
}
