//! Dense-vector interchange and the trainable projection head.
//!
//! Embedding file layout (little-endian):
//!
//! ```text
//! "HRE1" | u32 count | u32 dim | count*dim f32 (row-major) | count * (u16 len, utf-8 id)
//! ```
//!
//! Head file layout (little-endian):
//!
//! ```text
//! "HRH1" | u32 l | u32 d | l*d f32 weights (row-major) | l f32 bias
//! ```

use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::io::{ByteReader, ByteWriter};

const EMBEDDING_MAGIC: &[u8; 4] = b"HRE1";
const HEAD_MAGIC: &[u8; 4] = b"HRH1";

/// Row-major `f32` matrix with one named row per query or proposition.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    ids: Vec<String>,
    dim: usize,
    data: Vec<f32>,
    index: HashMap<String, usize>,
}

impl EmbeddingMatrix {
    pub fn new(ids: Vec<String>, dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("embedding dim must be positive".into()));
        }
        if data.len() != ids.len() * dim {
            return Err(Error::Shape(format!(
                "{} ids x dim {} needs {} values, got {}",
                ids.len(),
                dim,
                ids.len() * dim,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / dim,
                col: pos % dim,
            });
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateId {
                    kind: "embedding",
                    id: id.clone(),
                });
            }
        }
        Ok(EmbeddingMatrix {
            ids,
            dim,
            data,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.index.get(id).map(|&i| self.row(i))
    }

    pub fn require(&self, id: &str) -> Result<&[f32]> {
        self.get(id)
            .ok_or_else(|| Error::MissingEmbedding(id.to_string()))
    }

    /// Concatenates two matrices of equal dimension.
    pub fn concat(&self, other: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
        if self.dim != other.dim {
            return Err(Error::Shape(format!(
                "cannot concatenate dim {} with dim {}",
                self.dim, other.dim
            )));
        }
        let ids = self.ids.iter().chain(&other.ids).cloned().collect();
        let data = self.data.iter().chain(&other.data).copied().collect();
        EmbeddingMatrix::new(ids, self.dim, data)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = ByteWriter::with_capacity(12 + self.data.len() * 4);
        w.magic(EMBEDDING_MAGIC);
        w.u32(self.ids.len() as u32);
        w.u32(self.dim as u32);
        for &v in &self.data {
            w.f32(v);
        }
        for id in &self.ids {
            w.short_str(id)?;
        }
        Ok(w.into_inner())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes, "embedding file");
        r.magic(EMBEDDING_MAGIC)?;
        let count = r.u32()? as usize;
        let dim = r.u32()? as usize;
        r.require(count * dim * 4)?;
        let mut data = Vec::with_capacity(count * dim);
        for i in 0..count * dim {
            let v = r.f32()?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: i / dim,
                    col: i % dim,
                });
            }
            data.push(v);
        }
        let mut ids = Vec::with_capacity(count);
        for _ in 0..count {
            ids.push(r.short_str()?);
        }
        r.finish()?;
        EmbeddingMatrix::new(ids, dim, data)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_file(path, &self.to_bytes()?)
    }
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    EmbeddingMatrix::from_bytes(&crate::io::read_file(path)?)
}

/// Affine map `R^d -> R^l`, the trainable tail of the query encoder.
///
/// Parameters are held in `f64` so gradient checks are meaningful; the head
/// file stores them as `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionHead {
    bits: usize,
    input_dim: usize,
    /// `bits x input_dim`, row-major.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl ProjectionHead {
    /// Builds a head whose code length is packable (a multiple of 64).
    pub fn new(weights: Vec<f64>, bias: Vec<f64>, input_dim: usize) -> Result<Self> {
        let head = Self::with_any_width(weights, bias, input_dim)?;
        if head.bits % 64 != 0 {
            return Err(Error::Config(format!(
                "code length {} is not a multiple of 64",
                head.bits
            )));
        }
        Ok(head)
    }

    /// Builds a head of arbitrary positive width. Such heads are usable for
    /// the relaxation and gradient math but cannot feed a packed index.
    pub fn with_any_width(weights: Vec<f64>, bias: Vec<f64>, input_dim: usize) -> Result<Self> {
        let bits = bias.len();
        if bits == 0 || input_dim == 0 {
            return Err(Error::Shape("head needs l > 0 and d > 0".into()));
        }
        if weights.len() != bits * input_dim {
            return Err(Error::Shape(format!(
                "weights have {} entries, expected {}x{}",
                weights.len(),
                bits,
                input_dim
            )));
        }
        if let Some(pos) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / input_dim,
                col: pos % input_dim,
            });
        }
        if let Some(pos) = bias.iter().position(|b| !b.is_finite()) {
            return Err(Error::NonFinite { row: pos, col: 0 });
        }
        Ok(ProjectionHead {
            bits,
            input_dim,
            weights,
            bias,
        })
    }

    /// Weights uniform on `[-1/sqrt(d), 1/sqrt(d)]`, zero bias.
    pub fn random(bits: usize, input_dim: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (input_dim as f64).sqrt();
        let weights = (0..bits * input_dim)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        Self::new(weights, vec![0.0; bits], input_dim)
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub(crate) fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    /// `weights · v + bias`.
    pub fn project<T: Copy + Into<f64>>(&self, v: &[T]) -> Result<Vec<f64>> {
        if v.len() != self.input_dim {
            return Err(Error::Shape(format!(
                "head expects input of length {}, got {}",
                self.input_dim,
                v.len()
            )));
        }
        Ok(self
            .weights
            .chunks_exact(self.input_dim)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(v).map(|(w, x)| w * (*x).into()).sum::<f64>() + b)
            .collect())
    }

    /// `tanh(beta · project(v))`.
    pub fn relaxed_code<T: Copy + Into<f64>>(&self, v: &[T], beta: f64) -> Result<Vec<f64>> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Config(format!("beta must be positive, got {beta}")));
        }
        Ok(self
            .project(v)?
            .into_iter()
            .map(|u| (beta * u).tanh())
            .collect())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::with_capacity(12 + (self.weights.len() + self.bits) * 4);
        w.magic(HEAD_MAGIC);
        w.u32(self.bits as u32);
        w.u32(self.input_dim as u32);
        for &v in self.weights.iter().chain(&self.bias) {
            w.f32(v as f32);
        }
        w.into_inner()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes, "head file");
        r.magic(HEAD_MAGIC)?;
        let bits = r.u32()? as usize;
        let input_dim = r.u32()? as usize;
        r.require((bits * input_dim + bits) * 4)?;
        let weights = (0..bits * input_dim)
            .map(|_| r.f32().map(f64::from))
            .collect::<Result<Vec<_>>>()?;
        let bias = (0..bits)
            .map(|_| r.f32().map(f64::from))
            .collect::<Result<Vec<_>>>()?;
        r.finish()?;
        Self::new(weights, bias, input_dim)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_file(path, &self.to_bytes())
    }
}

pub fn load_head(path: impl AsRef<Path>) -> Result<ProjectionHead> {
    ProjectionHead::from_bytes(&crate::io::read_file(path)?)
}

/// `sqrt(sigma · step + 1)`; `step` counts completed optimizer steps.
pub fn beta_schedule(step: u64, sigma: f64) -> f64 {
    (sigma * step as f64 + 1.0).sqrt()
}

/// Componentwise sign with `sign(0) = +1`.
pub fn binarize<T: Copy + Into<f64>>(v: &[T]) -> Vec<i8> {
    v.iter()
        .map(|&x| if x.into() >= 0.0 { 1 } else { -1 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn identity_head_projects_unchanged() {
        let head = ProjectionHead::with_any_width(vec![1.0, 0.0, 0.0, 1.0], vec![0.0; 2], 2).unwrap();
        let out = head.project(&[0.3f64, -0.7]).unwrap();
        assert_eq!(out, vec![0.3, -0.7]);
    }

    #[test]
    fn zero_weights_return_bias() {
        let head = ProjectionHead::with_any_width(vec![0.0; 6], vec![1.0; 2], 3).unwrap();
        assert_eq!(head.project(&[5.0f32, -2.0, 9.0]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn project_matches_dot_product_reference() {
        // weights [[0.5,-1.25,2.0],[0.75,0.1,-0.3]], bias [0.2,-0.4], v = [1,2,-0.5]
        // row 0: 0.5 - 2.5 - 1.0 + 0.2 = -2.8
        // row 1: 0.75 + 0.2 + 0.15 - 0.4 = 0.7
        let head = ProjectionHead::with_any_width(
            vec![0.5, -1.25, 2.0, 0.75, 0.1, -0.3],
            vec![0.2, -0.4],
            3,
        )
        .unwrap();
        let out = head.project(&[1.0f64, 2.0, -0.5]).unwrap();
        assert!((out[0] - -2.8).abs() < 1e-12);
        assert!((out[1] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn project_rejects_dimension_mismatch() {
        let head = ProjectionHead::with_any_width(vec![1.0; 4], vec![0.0; 2], 2).unwrap();
        assert!(matches!(head.project(&[1.0f32]), Err(Error::Shape(_))));
    }

    #[test]
    fn new_requires_packable_width() {
        assert!(ProjectionHead::new(vec![1.0; 4], vec![0.0; 2], 2).is_err());
        assert!(ProjectionHead::random(64, 3, 1).is_ok());
    }

    #[test]
    fn relaxed_code_values() {
        let zero = ProjectionHead::with_any_width(vec![0.0; 2], vec![0.0; 2], 1).unwrap();
        assert_eq!(zero.relaxed_code(&[3.0f64], 1.0).unwrap(), vec![0.0, 0.0]);

        let head = ProjectionHead::with_any_width(vec![0.0; 2], vec![0.5, -0.5], 1).unwrap();
        let sat = head.relaxed_code(&[0.0f64], 1e6).unwrap();
        assert!((sat[0] - 1.0).abs() < 1e-6 && (sat[1] + 1.0).abs() < 1e-6);

        let one = ProjectionHead::with_any_width(vec![0.0], vec![0.5], 1).unwrap();
        let v = one.relaxed_code(&[0.0f64], 1.0).unwrap()[0];
        assert!((v - 0.4621171573).abs() < 1e-10);

        assert!(one.relaxed_code(&[0.0f64], 0.0).is_err());
    }

    #[test]
    fn beta_schedule_points() {
        assert_eq!(beta_schedule(0, 0.1), 1.0);
        assert!((beta_schedule(990, 0.1) - 10.0).abs() < 1e-12);
        assert!((beta_schedule(30, 0.1) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn binarize_zero_is_positive() {
        assert_eq!(binarize(&[0.2f64, -3.0, 0.0]), vec![1, -1, 1]);
        assert_eq!(binarize(&[1.0f64, -1.0, 1.0]), vec![1, -1, 1]);
    }

    #[test]
    fn embedding_errors() {
        let m = EmbeddingMatrix::new(vec!["a".into()], 2, vec![1.0, 2.0]).unwrap();
        let mut bytes = m.to_bytes().unwrap();
        bytes.pop();
        assert!(matches!(
            EmbeddingMatrix::from_bytes(&bytes),
            Err(Error::Truncated { .. })
        ));

        let mut bad = m.to_bytes().unwrap();
        bad[0] = b'X';
        assert!(matches!(
            EmbeddingMatrix::from_bytes(&bad),
            Err(Error::BadMagic { .. })
        ));

        let nan = EmbeddingMatrix {
            ids: vec!["a".into(), "b".into()],
            dim: 2,
            data: vec![1.0, 2.0, 3.0, f32::NAN],
            index: HashMap::new(),
        };
        match EmbeddingMatrix::from_bytes(&nan.to_bytes().unwrap()) {
            Err(Error::NonFinite { row, col }) => assert_eq!((row, col), (1, 1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reads_three_rows_dim_four() {
        let ids = vec!["x".to_string(), "y".into(), "z".into()];
        let m = EmbeddingMatrix::new(ids, 4, (0..12).map(|i| i as f32).collect()).unwrap();
        let back = EmbeddingMatrix::from_bytes(&m.to_bytes().unwrap()).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back.dim(), 4);
        assert_eq!(back.get("y").unwrap(), &[4.0, 5.0, 6.0, 7.0]);
    }

    #[test]
    fn head_file_round_trip() {
        let head = ProjectionHead::random(64, 5, 9).unwrap();
        let bytes = head.to_bytes();
        let back = ProjectionHead::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
    }

    proptest! {
        #[test]
        fn tanh_preserves_sign(
            w in proptest::collection::vec(-2.0f64..2.0, 6),
            b in proptest::collection::vec(-1.0f64..1.0, 2),
            v in proptest::collection::vec(-3.0f64..3.0, 3),
            beta in 0.01f64..50.0,
        ) {
            let head = ProjectionHead::with_any_width(w, b, 3).unwrap();
            let proj = head.project(&v).unwrap();
            let relaxed = head.relaxed_code(&v, beta).unwrap();
            // Underflow of tanh toward zero keeps the sign of tiny inputs.
            for (p, r) in proj.iter().zip(&relaxed) {
                prop_assert!(*p == 0.0 || r.signum() == p.signum() || *r == 0.0);
            }
            let nonzero = proj.iter().all(|p| (beta * p).tanh() != 0.0);
            if nonzero {
                prop_assert_eq!(binarize(&relaxed), binarize(&proj));
            }
        }

        #[test]
        fn relaxation_sharpens_with_beta(u in -2.0f64..2.0, b1 in 0.01f64..10.0, db in 0.0f64..10.0) {
            prop_assume!(u != 0.0);
            let head = ProjectionHead::with_any_width(vec![0.0], vec![u], 1).unwrap();
            let lo = head.relaxed_code(&[0.0f64], b1).unwrap()[0].abs();
            let hi = head.relaxed_code(&[0.0f64], b1 + db).unwrap()[0].abs();
            prop_assert!(hi >= lo);
        }

        #[test]
        fn beta_schedule_monotone(step in 0u64..1_000_000, sigma in 0.001f64..10.0) {
            prop_assert!(beta_schedule(step + 1, sigma) >= beta_schedule(step, sigma));
            prop_assert_eq!(beta_schedule(0, sigma), 1.0);
        }

        #[test]
        fn embedding_file_round_trips(
            rows in 1usize..5,
            dim in 1usize..6,
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ids = (0..rows).map(|i| format!("id-{i}-é")).collect();
            let data = (0..rows * dim).map(|_| rng.random_range(-1e3f32..1e3)).collect();
            let m = EmbeddingMatrix::new(ids, dim, data).unwrap();
            let bytes = m.to_bytes().unwrap();
            let back = EmbeddingMatrix::from_bytes(&bytes).unwrap();
            prop_assert_eq!(back.to_bytes().unwrap(), bytes);
            prop_assert_eq!(back, m);
        }
    }
}
