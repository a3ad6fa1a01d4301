//! Pairwise code-fitting loss, its gradient through the projection head, and
//! the code-side objective minimized by the H-step.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::codes::CodeMatrix;
use crate::embedding::ProjectionHead;
use crate::error::{Error, Result};

pub fn codes_to_array(codes: &CodeMatrix) -> Array2<f64> {
    Array2::from_shape_fn((codes.rows(), codes.bits()), |(i, k)| {
        f64::from(codes.get(i, k))
    })
}

pub fn array_to_codes(h: &Array2<f64>) -> Result<CodeMatrix> {
    let signs = h.iter().map(|&x| if x >= 0.0 { 1 } else { -1 }).collect();
    CodeMatrix::new(h.nrows(), h.ncols(), signs)
}

fn check_shapes(
    relaxed: &ArrayView2<f64>,
    codes: &ArrayView2<f64>,
    s: &ArrayView2<f64>,
    omega: &[usize],
) -> Result<()> {
    let (m, l) = relaxed.dim();
    let n = codes.nrows();
    if codes.ncols() != l {
        return Err(Error::Shape(format!(
            "relaxed codes have {l} bits, code matrix has {}",
            codes.ncols()
        )));
    }
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
    if let Some(&bad) = omega.iter().find(|&&j| j >= n) {
        return Err(Error::OutOfRange {
            what: "anchor index",
            value: bad,
            min: 0,
            max: n - 1,
        });
    }
    Ok(())
}

/// `Σ_i Σ_j (h̃_iᵀ h_j − l·S_ij)² + γ Σ_i ‖h_{ω(i)} − h̃_i‖²`.
///
/// `relaxed` is `m x l`, `codes` is `n x l`, `s` is `m x n`, and `omega[i]`
/// is the anchor proposition of row `i`.
pub fn pairwise_loss(
    relaxed: ArrayView2<f64>,
    codes: ArrayView2<f64>,
    s: ArrayView2<f64>,
    omega: &[usize],
    gamma: f64,
) -> Result<f64> {
    check_shapes(&relaxed, &codes, &s, omega)?;
    let l = relaxed.ncols() as f64;
    let residual = relaxed.dot(&codes.t()) - &(&s * l);
    let fit = residual.iter().map(|r| r * r).sum::<f64>();
    let quant = omega
        .iter()
        .zip(relaxed.outer_iter())
        .map(|(&j, row)| {
            codes
                .row(j)
                .iter()
                .zip(row)
                .map(|(h, v)| (h - v) * (h - v))
                .sum::<f64>()
        })
        .sum::<f64>();
    Ok(fit + gamma * quant)
}

/// Code-side objective with the `H`-independent constant dropped:
/// `‖ṼHᵀ‖² − 2l·tr(HᵀSᵀṼ) − 2γ·Σ_i h_{ω(i)}ᵀṽ_i`.
///
/// For ±1 codes this differs from [`pairwise_loss`] by a quantity that does
/// not depend on `H`.
pub fn code_objective(
    relaxed: ArrayView2<f64>,
    codes: ArrayView2<f64>,
    s: ArrayView2<f64>,
    omega: &[usize],
    gamma: f64,
) -> Result<f64> {
    check_shapes(&relaxed, &codes, &s, omega)?;
    let l = relaxed.ncols() as f64;
    let vh = relaxed.dot(&codes.t());
    let quad = vh.iter().map(|x| x * x).sum::<f64>();
    let st_v = s.t().dot(&relaxed);
    let cross = (&codes * &st_v).sum();
    let anchor = omega
        .iter()
        .zip(relaxed.outer_iter())
        .map(|(&j, row)| codes.row(j).dot(&row))
        .sum::<f64>();
    Ok(quad - 2.0 * l * cross - 2.0 * gamma * anchor)
}

/// Gradient of one row's loss terms with respect to the head parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGradient {
    /// `l x d`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl HeadGradient {
    pub fn zeros(bits: usize, input_dim: usize) -> Self {
        HeadGradient {
            weights: vec![0.0; bits * input_dim],
            bias: vec![0.0; bits],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.weights
            .iter()
            .chain(&self.bias)
            .fold(0.0, |m, g| m.max(g.abs()))
    }

    pub(crate) fn accumulate(&mut self, pre: &[f64], v: &[f32]) {
        let d = v.len();
        for (k, &g) in pre.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            self.bias[k] += g;
            for (w, &x) in self.weights[k * d..(k + 1) * d].iter_mut().zip(v) {
                *w += g * f64::from(x);
            }
        }
    }
}

/// `∂L/∂u` for one row, where `h̃ = tanh(β·u)`:
/// `{2 Σ_j (h̃ᵀh_j − l·S_j) h_j + 2γ(h̃ − h_ω)} ⊙ (1 − h̃²) · β`.
pub(crate) fn preactivation_gradient(
    relaxed: ArrayView1<f64>,
    codes: ArrayView2<f64>,
    s_row: ArrayView1<f64>,
    anchor: usize,
    gamma: f64,
    beta: f64,
) -> Array1<f64> {
    let l = relaxed.len() as f64;
    let residual = codes.dot(&relaxed) - &(&s_row * l);
    let mut g = codes.t().dot(&residual) * 2.0;
    let anchor_code = codes.row(anchor);
    for k in 0..g.len() {
        let h = relaxed[k];
        g[k] = (g[k] + 2.0 * gamma * (h - anchor_code[k])) * (1.0 - h * h) * beta;
    }
    g
}

/// Gradient of row `i`'s contribution to [`pairwise_loss`] with respect to
/// the head's weights and bias, where row `i`'s relaxed code is
/// `tanh(β · head(v))` and its anchor proposition is `anchor`.
pub fn theta_step_gradient(
    head: &ProjectionHead,
    v: &[f32],
    codes: ArrayView2<f64>,
    s_row: ArrayView1<f64>,
    beta: f64,
    gamma: f64,
    anchor: usize,
) -> Result<HeadGradient> {
    let l = head.bits();
    if codes.ncols() != l {
        return Err(Error::Shape(format!(
            "head emits {l} bits, code matrix has {}",
            codes.ncols()
        )));
    }
    if s_row.len() != codes.nrows() {
        return Err(Error::Shape(format!(
            "supervision row has {} entries for {} codes",
            s_row.len(),
            codes.nrows()
        )));
    }
    if anchor >= codes.nrows() {
        return Err(Error::OutOfRange {
            what: "anchor index",
            value: anchor,
            min: 0,
            max: codes.nrows() - 1,
        });
    }
    let relaxed = Array1::from(head.relaxed_code(v, beta)?);
    let pre = preactivation_gradient(relaxed.view(), codes, s_row, anchor, gamma, beta);
    let mut grad = HeadGradient::zeros(l, head.input_dim());
    grad.accumulate(pre.as_slice().expect("contiguous"), v);
    Ok(grad)
}

/// Relaxed codes of several rows stacked into an `m x l` matrix.
pub(crate) fn relaxed_matrix<'a>(
    head: &ProjectionHead,
    rows: impl ExactSizeIterator<Item = &'a [f32]>,
    beta: f64,
) -> Result<Array2<f64>> {
    let m = rows.len();
    let mut out = Array2::zeros((m, head.bits()));
    for (mut dst, v) in out.axis_iter_mut(Axis(0)).zip(rows) {
        let code = head.relaxed_code(v, beta)?;
        dst.assign(&ArrayView1::from(&code));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn perfect_match_has_zero_loss() {
        let h = array![[1.0, -1.0, 1.0, 1.0]];
        let loss = pairwise_loss(h.view(), h.view(), array![[1.0]].view(), &[0], 0.0).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn antipodal_pair_costs_sixty_four() {
        let h = array![[1.0, -1.0, 1.0, 1.0]];
        let neg = -&h;
        let loss = pairwise_loss(neg.view(), h.view(), array![[1.0]].view(), &[0], 0.0).unwrap();
        assert_eq!(loss, 64.0);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let v = Array2::<f64>::zeros((2, 4));
        let h = Array2::<f64>::ones((3, 4));
        let s = Array2::<f64>::ones((2, 2));
        assert!(matches!(
            pairwise_loss(v.view(), h.view(), s.view(), &[0, 1], 1.0),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn zero_gradient_at_exact_fit() {
        // Saturating bias makes h̃ = h exactly; S = +1 so h̃ᵀh = l.
        let head = ProjectionHead::with_any_width(vec![0.0; 4], vec![40.0, -40.0, 40.0, 40.0], 1)
            .unwrap();
        let h = array![[1.0, -1.0, 1.0, 1.0]];
        let g = theta_step_gradient(&head, &[0.3], h.view(), array![1.0].view(), 1.0, 5.0, 0)
            .unwrap();
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn saturated_code_has_vanishing_gradient() {
        // h̃ saturated but wrong: the (1 - h̃²) factor kills the gradient.
        let head = ProjectionHead::with_any_width(vec![0.0; 4], vec![40.0; 4], 1).unwrap();
        let h = array![[-1.0, -1.0, 1.0, -1.0], [1.0, 1.0, -1.0, 1.0]];
        let g = theta_step_gradient(
            &head,
            &[1.0],
            h.view(),
            array![1.0, -1.0].view(),
            1.0,
            10.0,
            0,
        )
        .unwrap();
        assert!(g.max_abs() < 1e-12);
    }
}
