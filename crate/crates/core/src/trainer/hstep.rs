//! Closed-form column-wise update of the proposition code matrix.
//!
//! With the head fixed, the code objective restricted to column `k` is
//! linear in `H_{*k}`:
//!
//! ```text
//! L(H_{*k}) = H_{*k}ᵀ (2 Ĥ_k V̂_kᵀ Ṽ_{*k} + Q_{*k}) + const
//! Q = −2l·SᵀṼ − 2γ·V̄
//! ```
//!
//! where `Ĥ_k`, `V̂_k` drop column `k` and `V̄` scatter-adds each relaxed
//! row into its anchor's row of an `n x l` zero matrix. The minimizer is
//! `H_{*k} = −sign(2 Ĥ_k V̂_kᵀ Ṽ_{*k} + Q_{*k})`.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::objective::{array_to_codes, codes_to_array};
use crate::codes::CodeMatrix;
use crate::error::{Error, Result};

/// Precomputed terms for sweeping columns against a fixed `Ṽ`, `S`, `Ω`.
#[derive(Debug, Clone)]
pub struct ColumnUpdater {
    q: Array2<f64>,
    gram: Array2<f64>,
}

impl ColumnUpdater {
    pub fn new(
        relaxed: ArrayView2<f64>,
        s: ArrayView2<f64>,
        omega: &[usize],
        gamma: f64,
        n: usize,
    ) -> Result<Self> {
        let (m, l) = relaxed.dim();
        if s.dim() != (m, n) {
            return Err(Error::Shape(format!(
                "supervision is {:?}, expected ({m}, {n})",
                s.dim()
            )));
        }
        if omega.len() != m {
            return Err(Error::Shape(format!(
                "{} anchors for {m} supervision rows",
                omega.len()
            )));
        }
        let mut q = s.t().dot(&relaxed) * (-2.0 * l as f64);
        for (&j, row) in omega.iter().zip(relaxed.outer_iter()) {
            if j >= n {
                return Err(Error::OutOfRange {
                    what: "anchor index",
                    value: j,
                    min: 0,
                    max: n - 1,
                });
            }
            q.row_mut(j).scaled_add(-2.0 * gamma, &row);
        }
        let gram = relaxed.t().dot(&relaxed);
        Ok(ColumnUpdater { q, gram })
    }

    pub fn bits(&self) -> usize {
        self.gram.nrows()
    }

    /// Linear coefficient of `H_{*k}` given the other columns of `h`.
    pub fn column_coefficients(&self, h: &Array2<f64>, k: usize) -> Array1<f64> {
        let mut x = h.dot(&self.gram.column(k));
        x.scaled_add(-self.gram[[k, k]], &h.column(k));
        x *= 2.0;
        x += &self.q.column(k);
        x
    }

    /// Replaces column `k` with its minimizer. Exact ties keep the current
    /// entry. Returns the number of flipped entries.
    pub fn update_column(&self, h: &mut Array2<f64>, k: usize) -> usize {
        let x = self.column_coefficients(h, k);
        let mut flips = 0;
        for (hj, &xj) in h.column_mut(k).iter_mut().zip(&x) {
            let next = if xj > 0.0 {
                -1.0
            } else if xj < 0.0 {
                1.0
            } else {
                *hj
            };
            if next != *hj {
                flips += 1;
                *hj = next;
            }
        }
        flips
    }

    /// Updates every column in ascending order, each seeing the latest
    /// values of the others.
    pub fn sweep(&self, h: &mut Array2<f64>) -> usize {
        (0..h.len_of(Axis(1)))
            .map(|k| self.update_column(h, k))
            .sum()
    }
}

/// One full H-step sweep starting from `codes`.
pub fn h_step(
    relaxed: ArrayView2<f64>,
    s: ArrayView2<f64>,
    codes: &CodeMatrix,
    omega: &[usize],
    gamma: f64,
) -> Result<CodeMatrix> {
    if relaxed.ncols() != codes.bits() {
        return Err(Error::Shape(format!(
            "relaxed codes have {} bits, code matrix has {}",
            relaxed.ncols(),
            codes.bits()
        )));
    }
    let updater = ColumnUpdater::new(relaxed, s, omega, gamma, codes.rows())?;
    let mut h = codes_to_array(codes);
    updater.sweep(&mut h);
    array_to_codes(&h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::objective::code_objective;
    use ndarray::array;

    #[test]
    fn self_match_binary_relaxation_recovers_codes() {
        // Ṽ already binary, m = n, S = 2I - 1, γ at its default: one sweep
        // lands on H = Ṽ.
        let v = array![[1.0, -1.0, 1.0, -1.0], [-1.0, 1.0, 1.0, 1.0]];
        let s = array![[1.0, -1.0], [-1.0, 1.0]];
        let start = CodeMatrix::new(2, 4, vec![-1; 8]).unwrap();
        let out = h_step(v.view(), s.view(), &start, &[0, 1], 200.0).unwrap();
        assert_eq!(out.signs(), &[1, -1, 1, -1, -1, 1, 1, 1]);
    }

    #[test]
    fn single_column_is_negated_sign_of_q() {
        let v = array![[0.3], [-0.8]];
        let s = array![[1.0, -1.0, -1.0], [-1.0, -1.0, 1.0]];
        let upd = ColumnUpdater::new(v.view(), s.view(), &[0, 2], 2.0, 3).unwrap();
        let mut h = array![[1.0], [1.0], [1.0]];
        let x = upd.column_coefficients(&h, 0);
        // No other columns: coefficient is Q itself.
        for (xj, qj) in x.iter().zip(upd.q.column(0)) {
            assert_eq!(xj, qj);
        }
        upd.update_column(&mut h, 0);
        for (hj, qj) in h.column(0).iter().zip(upd.q.column(0)) {
            assert_eq!(*hj, if *qj > 0.0 { -1.0 } else { 1.0 });
        }
        let _ = code_objective(v.view(), h.view(), s.view(), &[0, 2], 2.0).unwrap();
    }
}
