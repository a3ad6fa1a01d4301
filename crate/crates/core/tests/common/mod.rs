//! Independent reference computations shared by the integration tests.

#![allow(dead_code)]

use hashrag::trainer::{code_objective, pairwise_loss};
use hashrag::ProjectionHead;
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures");

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(FIXTURES).join(name)
}

/// A random code-learning problem.
pub struct Instance {
    pub relaxed: Array2<f64>,
    pub s: Array2<f64>,
    pub omega: Vec<usize>,
    pub gamma: f64,
    pub n: usize,
}

pub fn random_signs(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| if rng.random::<bool>() { 1.0 } else { -1.0 })
}

pub fn random_instance(rng: &mut ChaCha8Rng, m: usize, n: usize, l: usize) -> Instance {
    let beta = rng.random_range(0.5..3.0);
    let relaxed = Array2::from_shape_fn((m, l), |_| (beta * rng.random_range(-2.0..2.0f64)).tanh());
    let s = random_signs(rng, m, n);
    let omega = (0..m).map(|_| rng.random_range(0..n)).collect();
    let gamma = [0.0, 0.5, 1.0, 10.0, 200.0][rng.random_range(0..5)];
    Instance {
        relaxed,
        s,
        omega,
        gamma,
        n,
    }
}

impl Instance {
    pub fn objective(&self, h: &Array2<f64>) -> f64 {
        code_objective(self.relaxed.view(), h.view(), self.s.view(), &self.omega, self.gamma).unwrap()
    }

    /// Minimum of the code objective over every `n x l` sign matrix.
    pub fn brute_force_min(&self) -> f64 {
        let l = self.relaxed.ncols();
        let cells = self.n * l;
        assert!(cells <= 20, "brute force over 2^{cells} matrices");
        (0u32..1 << cells)
            .map(|mask| {
                let h = Array2::from_shape_fn((self.n, l), |(j, k)| {
                    if mask >> (j * l + k) & 1 == 1 {
                        1.0
                    } else {
                        -1.0
                    }
                });
                self.objective(&h)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

impl Instance {
    /// Most negative objective change reachable by rewriting a single column
    /// of `h` to any sign vector.
    pub fn best_single_column_change(&self, h: &Array2<f64>) -> f64 {
        let base = self.objective(h);
        let mut best = 0.0f64;
        for k in 0..h.ncols() {
            for mask in 0u32..1 << self.n {
                let mut t = h.clone();
                for j in 0..self.n {
                    t[[j, k]] = if mask >> j & 1 == 1 { 1.0 } else { -1.0 };
                }
                best = best.min(self.objective(&t) - base);
            }
        }
        best
    }
}

/// The full loss written out as plain loops.
pub fn naive_loss(relaxed: &Array2<f64>, h: &Array2<f64>, s: &Array2<f64>, omega: &[usize], gamma: f64) -> f64 {
    let (m, l) = relaxed.dim();
    let n = h.nrows();
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..n {
            let mut dot = 0.0;
            for k in 0..l {
                dot += relaxed[[i, k]] * h[[j, k]];
            }
            total += (dot - l as f64 * s[[i, j]]).powi(2);
        }
        for k in 0..l {
            total += gamma * (h[[omega[i], k]] - relaxed[[i, k]]).powi(2);
        }
    }
    total
}

/// Full loss as a function of the head, with every row's relaxed code
/// recomputed from `queries`.
pub fn loss_of_head(
    head: &ProjectionHead,
    queries: &[Vec<f32>],
    h: &Array2<f64>,
    s: &Array2<f64>,
    omega: &[usize],
    beta: f64,
    gamma: f64,
) -> f64 {
    let l = head.bits();
    let mut relaxed = Array2::zeros((queries.len(), l));
    for (i, q) in queries.iter().enumerate() {
        for (k, x) in head.relaxed_code(q, beta).unwrap().into_iter().enumerate() {
            relaxed[[i, k]] = x;
        }
    }
    pairwise_loss(relaxed.view(), h.view(), s.view(), omega, gamma).unwrap()
}

/// Central-difference gradient of [`loss_of_head`] over weights then bias.
pub fn finite_difference(
    head: &ProjectionHead,
    queries: &[Vec<f32>],
    h: &Array2<f64>,
    s: &Array2<f64>,
    omega: &[usize],
    beta: f64,
    gamma: f64,
    step: f64,
) -> (Vec<f64>, Vec<f64>) {
    let at = |w: Vec<f64>, b: Vec<f64>| {
        let perturbed = ProjectionHead::with_any_width(w, b, head.input_dim()).unwrap();
        loss_of_head(&perturbed, queries, h, s, omega, beta, gamma)
    };
    let (w0, b0) = (head.weights().to_vec(), head.bias().to_vec());
    let gw = (0..w0.len())
        .map(|p| {
            let (mut up, mut down) = (w0.clone(), w0.clone());
            up[p] += step;
            down[p] -= step;
            (at(up, b0.clone()) - at(down, b0.clone())) / (2.0 * step)
        })
        .collect();
    let gb = (0..b0.len())
        .map(|p| {
            let (mut up, mut down) = (b0.clone(), b0.clone());
            up[p] += step;
            down[p] -= step;
            (at(w0.clone(), up) - at(w0.clone(), down)) / (2.0 * step)
        })
        .collect();
    (gw, gb)
}

pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-8);
    diff / scale
}

/// Bit-by-bit Hamming distance of two ±1 vectors.
pub fn naive_hamming(a: &[i8], b: &[i8]) -> u32 {
    a.iter().zip(b).filter(|(x, y)| x != y).count() as u32
}

pub fn inner(a: &[i8], b: &[i8]) -> i32 {
    a.iter().zip(b).map(|(&x, &y)| i32::from(x) * i32::from(y)).sum()
}

/// Signs of the low `l` bits of `x`, most significant first.
pub fn signs_of(x: u32, l: usize) -> Vec<i8> {
    (0..l).rev().map(|k| if x >> k & 1 == 1 { 1 } else { -1 }).collect()
}
