//! Random-hyperplane LSH baseline at a fixed bit budget.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::codes::CodeMatrix;
use crate::embedding::{binarize, EmbeddingMatrix};
use crate::error::{Error, Result};

/// `l` Gaussian hyperplanes through the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct LshHasher {
    bits: usize,
    dim: usize,
    /// `bits x dim`, row-major.
    planes: Vec<f32>,
}

impl LshHasher {
    pub fn new(dim: usize, bits: usize, seed: u64) -> Result<Self> {
        if bits == 0 || !bits.is_multiple_of(64) {
            return Err(Error::Config(format!(
                "LSH code length {bits} is not a positive multiple of 64"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let planes = (0..bits * dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        Ok(LshHasher { bits, dim, planes })
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    /// Signed distances of `v` to every hyperplane.
    pub fn project(&self, v: &[f32]) -> Result<Vec<f32>> {
        if v.len() != self.dim {
            return Err(Error::Shape(format!(
                "LSH expects dim {}, got {}",
                self.dim,
                v.len()
            )));
        }
        Ok(self
            .planes
            .chunks_exact(self.dim)
            .map(|p| p.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn code(&self, v: &[f32]) -> Result<Vec<i8>> {
        self.project(v).map(|p| binarize(&p))
    }

    pub fn codes<'a>(&self, rows: impl IntoIterator<Item = &'a [f32]>) -> Result<CodeMatrix> {
        let mut signs = Vec::new();
        let mut n = 0;
        for v in rows {
            signs.extend(self.code(v)?);
            n += 1;
        }
        CodeMatrix::new(n, self.bits, signs)
    }
}

/// Codes for every row of `embeddings`, in row order.
pub fn lsh_baseline(embeddings: &EmbeddingMatrix, bits: usize, seed: u64) -> Result<CodeMatrix> {
    let hasher = LshHasher::new(embeddings.dim(), bits, seed)?;
    hasher.codes((0..embeddings.len()).map(|i| embeddings.row(i)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[Vec<f32>]) -> EmbeddingMatrix {
        let dim = rows[0].len();
        EmbeddingMatrix::new(
            (0..rows.len()).map(|i| format!("r{i}")).collect(),
            dim,
            rows.concat(),
        )
        .unwrap()
    }

    #[test]
    fn deterministic_per_seed() {
        let m = matrix(&[vec![0.1, 0.7, -0.3], vec![1.0, 0.0, 0.2]]);
        assert_eq!(lsh_baseline(&m, 64, 4).unwrap(), lsh_baseline(&m, 64, 4).unwrap());
        assert_ne!(lsh_baseline(&m, 64, 4).unwrap(), lsh_baseline(&m, 64, 5).unwrap());
    }

    #[test]
    fn antipodal_inputs_give_antipodal_codes() {
        let v = vec![0.3f32, -0.2, 0.9, 0.05];
        let neg: Vec<f32> = v.iter().map(|x| -x).collect();
        let codes = lsh_baseline(&matrix(&[v, neg]), 128, 11).unwrap();
        for k in 0..128 {
            assert_eq!(codes.get(0, k), -codes.get(1, k));
        }
    }

    #[test]
    fn collision_rate_tracks_angle() {
        // u, v at 60 degrees: per-bit collision probability 1 - 1/3.
        let u = [1.0f32, 0.0, 0.0];
        let v = [0.5f32, 3f32.sqrt() / 2.0, 0.0];
        let mut same = 0usize;
        let mut total = 0usize;
        for seed in 0..157u64 {
            let h = LshHasher::new(3, 64, seed).unwrap();
            let (a, b) = (h.code(&u).unwrap(), h.code(&v).unwrap());
            same += a.iter().zip(&b).filter(|(x, y)| x == y).count();
            total += 64;
        }
        let rate = same as f64 / total as f64;
        assert!((rate - 2.0 / 3.0).abs() < 0.05, "rate {rate}");
    }

    #[test]
    fn collision_rate_on_random_unit_pairs() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let unit = |rng: &mut ChaCha8Rng| {
            let v: Vec<f32> = (0..3).map(|_| StandardNormal.sample(rng)).collect();
            let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
            v.into_iter().map(|x| x / n).collect::<Vec<_>>()
        };
        // Bucket pairs by angle so the check is not dominated by ~90° pairs.
        let mut buckets = [(0usize, 0usize, 0.0f64); 4];
        for s in 0..10_000u64 {
            let (u, v) = (unit(&mut rng), unit(&mut rng));
            let cos: f32 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
            let theta = f64::from(cos.clamp(-1.0, 1.0)).acos();
            let h = LshHasher::new(3, 64, s ^ rng.random::<u64>()).unwrap();
            let bit = rng.random_range(0..64);
            let hit = h.code(&u).unwrap()[bit] == h.code(&v).unwrap()[bit];
            let b = ((theta / std::f64::consts::PI) * 4.0).min(3.0) as usize;
            buckets[b].0 += usize::from(hit);
            buckets[b].1 += 1;
            buckets[b].2 += 1.0 - theta / std::f64::consts::PI;
        }
        for (hits, count, expected) in buckets {
            assert!(count > 500);
            let observed = hits as f64 / count as f64;
            let expected = expected / count as f64;
            assert!((observed - expected).abs() < 0.05, "{observed} vs {expected}");
        }
    }
}
