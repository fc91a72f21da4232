//! Dense double-precision matrices and the forward/backward kernel set.
//!
//! Every forward op here has a matching analytic backward; the pair is what
//! the gradient-check harness verifies against central finite differences.

use crate::error::{Error, Result};

/// Additive-mask sentinel for disallowed attention positions.
pub const MASK_OFF: f64 = f64::NEG_INFINITY;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "matrix {}x{} needs {} values, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Build from nested rows; rows must have equal widths.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Precondition("matrix needs at least one row".into()));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        Ok(Matrix { rows: rows.len(), cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Standard matrix product. Row-blocked so the hot inner loop stays
    /// contiguous; this path carries almost all of the training cost.
    pub fn matmul(&self, b: &Matrix) -> Result<Matrix> {
        if self.cols != b.rows {
            return Err(Error::Dimension(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, b.rows, b.cols
            )));
        }
        let (m, k, n) = (self.rows, self.cols, b.cols);
        let mut c = Matrix::zeros(m, n);
        const RB: usize = 4;
        let mut i0 = 0;
        while i0 < m {
            let iend = (i0 + RB).min(m);
            for t in 0..k {
                let brow = &b.data[t * n..t * n + n];
                for i in i0..iend {
                    let a_it = self.data[i * k + t];
                    if a_it == 0.0 {
                        continue;
                    }
                    let crow = &mut c.data[i * n..i * n + n];
                    for (cv, bv) in crow.iter_mut().zip(brow.iter()) {
                        *cv = a_it.mul_add(*bv, *cv);
                    }
                }
            }
            i0 = iend;
        }
        Ok(c)
    }

    /// `self * b^T` without materializing the transpose of `b`.
    pub fn matmul_nt(&self, b: &Matrix) -> Result<Matrix> {
        if self.cols != b.cols {
            return Err(Error::Dimension(format!(
                "matmul_nt {}x{} by {}x{}^T",
                self.rows, self.cols, b.rows, b.cols
            )));
        }
        self.matmul(&b.transpose())
    }

    pub fn scale(&self, s: f64) -> Matrix {
        let data = self.data.iter().map(|v| v * s).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale_in_place(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    /// `self += other`, in place.
    pub fn add_assign(&mut self, other: &Matrix) -> Result<()> {
        self.check_same_shape(other, "add")?;
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
        Ok(())
    }

    /// `self += s * other`, in place.
    pub fn add_scaled(&mut self, other: &Matrix, s: f64) -> Result<()> {
        self.check_same_shape(other, "add_scaled")?;
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a = s.mul_add(*b, *a);
        }
        Ok(())
    }

    fn check_same_shape(&self, other: &Matrix, op: &str) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension(format!(
                "{op} {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }
}

/// Elementwise sum.
pub fn elem_add(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let mut out = a.clone();
    out.add_assign(b)?;
    Ok(out)
}

/// Elementwise (Hadamard) product.
pub fn elem_mul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    a.check_same_shape(b, "elem_mul")?;
    let data = a.data.iter().zip(b.data.iter()).map(|(x, y)| x * y).collect();
    Ok(Matrix { rows: a.rows, cols: a.cols, data })
}

/// Gradients of `C = A*B` given upstream `dC`.
pub fn matmul_backward(a: &Matrix, b: &Matrix, d_c: &Matrix) -> Result<(Matrix, Matrix)> {
    let d_a = d_c.matmul_nt(b)?;
    let d_b = a.transpose().matmul(d_c)?;
    Ok((d_a, d_b))
}

#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(x: &Matrix) -> Matrix {
    let data = x.data.iter().map(|&v| sigmoid_scalar(v)).collect();
    Matrix { rows: x.rows, cols: x.cols, data }
}

/// Backward for sigmoid given the forward output `y`.
pub fn sigmoid_backward(y: &Matrix, d_y: &Matrix) -> Matrix {
    let data = y
        .data
        .iter()
        .zip(d_y.data.iter())
        .map(|(&s, &g)| g * s * (1.0 - s))
        .collect();
    Matrix { rows: y.rows, cols: y.cols, data }
}

pub fn relu(x: &Matrix) -> Matrix {
    let data = x.data.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
    Matrix { rows: x.rows, cols: x.cols, data }
}

/// Backward for relu given the forward *input* `x`.
pub fn relu_backward(x: &Matrix, d_y: &Matrix) -> Matrix {
    let data = x
        .data
        .iter()
        .zip(d_y.data.iter())
        .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
        .collect();
    Matrix { rows: x.rows, cols: x.cols, data }
}

/// Row-wise softmax with an optional additive mask of `{0, -inf}` entries.
///
/// Rows whose every position is masked fall back to unmasked softmax so a
/// degenerate mask can never poison the output with NaN.
pub fn row_softmax(x: &Matrix, additive_mask: Option<&Matrix>) -> Result<Matrix> {
    if let Some(m) = additive_mask {
        x.check_same_shape(m, "row_softmax mask")?;
    }
    let mut out = Matrix::zeros(x.rows, x.cols);
    for i in 0..x.rows {
        let xr = x.row(i);
        let mr = additive_mask.map(|m| m.row(i));
        // Row max over allowed entries; -inf means the whole row is masked.
        let mut max = f64::NEG_INFINITY;
        for j in 0..x.cols {
            let v = xr[j] + mr.map_or(0.0, |m| m[j]);
            if v > max {
                max = v;
            }
        }
        let use_mask = max.is_finite();
        if !use_mask {
            max = xr.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        }
        let or = out.row_mut(i);
        let mut sum = 0.0;
        for j in 0..x.cols {
            let masked_off = use_mask && mr.map_or(false, |m| m[j] == MASK_OFF);
            let e = if masked_off { 0.0 } else { (xr[j] - max).exp() };
            or[j] = e;
            sum += e;
        }
        let inv = 1.0 / sum;
        for v in or.iter_mut() {
            *v *= inv;
        }
    }
    Ok(out)
}

/// Backward for row softmax given the forward output `y`.
///
/// Masked positions have `y == 0` and therefore receive zero gradient.
pub fn row_softmax_backward(y: &Matrix, d_y: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(y.rows, y.cols);
    for i in 0..y.rows {
        let yr = y.row(i);
        let gr = d_y.row(i);
        let dot: f64 = yr.iter().zip(gr.iter()).map(|(a, b)| a * b).sum();
        let or = out.row_mut(i);
        for j in 0..y.cols {
            or[j] = yr[j] * (gr[j] - dot);
        }
    }
    out
}

/// Columnwise max over a stack of equal-width rows, with winner indices.
///
/// Ties break to the lowest stack index so the backward routing is
/// deterministic.
pub fn maxpool_rows(stack: &[&[f64]]) -> Result<(Vec<f64>, Vec<usize>)> {
    if stack.is_empty() {
        return Err(Error::Precondition("maxpool over empty stack".into()));
    }
    let width = stack[0].len();
    if stack.iter().any(|r| r.len() != width) {
        return Err(Error::Dimension("maxpool rows differ in width".into()));
    }
    let mut best = stack[0].to_vec();
    let mut arg = vec![0usize; width];
    for (r, row) in stack.iter().enumerate().skip(1) {
        for j in 0..width {
            if row[j] > best[j] {
                best[j] = row[j];
                arg[j] = r;
            }
        }
    }
    Ok((best, arg))
}

/// Numerically stable `ln(1 + e^x)`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Derivative of softplus, i.e. the logistic function.
#[inline]
pub fn softplus_grad(x: f64) -> f64 {
    sigmoid_scalar(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[Vec<f64>]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn matmul_identity() {
        let a = m(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let c = Matrix::identity(2).matmul(&a).unwrap();
        assert_eq!(c, a);
    }

    #[test]
    fn matmul_hand_oracle() {
        // [1 2] * [3;4] = [11]
        let a = m(&[vec![1.0, 2.0]]);
        let b = m(&[vec![3.0], vec![4.0]]);
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.data(), &[11.0]);
    }

    #[test]
    fn matmul_shape_mismatch() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 3);
        assert!(matches!(a.matmul(&b), Err(Error::Dimension(_))));
    }

    #[test]
    fn matmul_matches_naive_on_random_sizes() {
        let mut seed = 0x2545F4914F6CDD1Du64;
        let mut next = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for &(p, q, r) in &[(1, 1, 1), (3, 5, 2), (7, 4, 9), (8, 8, 8), (13, 6, 5)] {
            let a = Matrix::from_vec(p, q, (0..p * q).map(|_| next()).collect()).unwrap();
            let b = Matrix::from_vec(q, r, (0..q * r).map(|_| next()).collect()).unwrap();
            let c = a.matmul(&b).unwrap();
            for i in 0..p {
                for j in 0..r {
                    let want: f64 = (0..q).map(|t| a.get(i, t) * b.get(t, j)).sum();
                    assert!((c.get(i, j) - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn softmax_uniform_on_zero_row() {
        let y = row_softmax(&Matrix::zeros(1, 4), None).unwrap();
        for &v in y.data() {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_single_allowed_position() {
        let x = m(&[vec![0.0, 0.0]]);
        let mask = m(&[vec![0.0, MASK_OFF]]);
        let y = row_softmax(&x, Some(&mask)).unwrap();
        assert_eq!(y.data(), &[1.0, 0.0]);
    }

    #[test]
    fn softmax_direct_evaluation() {
        let x = m(&[vec![1.0, 2.0, 3.0]]);
        let y = row_softmax(&x, None).unwrap();
        let want = [0.090031, 0.244728, 0.665241];
        for (a, b) in y.data().iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let x = m(&[vec![3.0, -2.0, 0.5, 9.0], vec![-40.0, 40.0, 0.0, 1.0]]);
        let mask = m(&[vec![0.0, MASK_OFF, 0.0, 0.0], vec![0.0; 4]]);
        let y = row_softmax(&x, Some(&mask)).unwrap();
        for i in 0..2 {
            let s: f64 = y.row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
        assert_eq!(y.get(0, 1), 0.0);
    }

    #[test]
    fn softmax_fully_masked_row_falls_back() {
        let x = m(&[vec![1.0, 2.0]]);
        let mask = m(&[vec![MASK_OFF, MASK_OFF]]);
        let y = row_softmax(&x, Some(&mask)).unwrap();
        let unmasked = row_softmax(&x, None).unwrap();
        assert_eq!(y, unmasked);
        assert!(y.all_finite());
    }

    #[test]
    fn sigmoid_values() {
        let y = sigmoid(&m(&[vec![0.0, 20.0, -20.0]]));
        assert!((y.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((y.get(0, 1) - 1.0).abs() < 1e-8);
        assert!(y.get(0, 2).abs() < 1e-8);
    }

    #[test]
    fn relu_values() {
        let y = relu(&m(&[vec![-3.0, 3.0]]));
        assert_eq!(y.data(), &[0.0, 3.0]);
    }

    #[test]
    fn maxpool_single_row() {
        let row = [1.0, 2.0];
        let (y, arg) = maxpool_rows(&[&row]).unwrap();
        assert_eq!(y, vec![1.0, 2.0]);
        assert_eq!(arg, vec![0, 0]);
    }

    #[test]
    fn maxpool_hand_oracle() {
        let (y, arg) = maxpool_rows(&[&[1.0, 5.0], &[4.0, 2.0]]).unwrap();
        assert_eq!(y, vec![4.0, 5.0]);
        assert_eq!(arg, vec![1, 0]);
    }

    #[test]
    fn maxpool_ties_take_lowest_index() {
        let (y, arg) = maxpool_rows(&[&[3.0, 3.0], &[3.0, 3.0]]).unwrap();
        assert_eq!(y, vec![3.0, 3.0]);
        assert_eq!(arg, vec![0, 0]);
    }

    #[test]
    fn maxpool_empty_is_error() {
        assert!(matches!(maxpool_rows(&[]), Err(Error::Precondition(_))));
    }

    #[test]
    fn maxpool_backward_routes_one_unit_per_column() {
        let rows: [&[f64]; 3] = [&[1.0, 9.0, 2.0], &[5.0, 0.0, 2.5], &[4.0, 8.0, -1.0]];
        let (_, arg) = maxpool_rows(&rows).unwrap();
        // Route an upstream gradient of 1 per column and check conservation.
        let mut routed = vec![vec![0.0; 3]; 3];
        for (j, &r) in arg.iter().enumerate() {
            routed[r][j] += 1.0;
        }
        for j in 0..3 {
            let total: f64 = routed.iter().map(|r| r[j]).sum();
            assert_eq!(total, 1.0);
        }
    }

    #[test]
    fn softplus_matches_reference() {
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((softplus(30.0) - 30.0).abs() < 1e-9);
        assert!(softplus(-30.0) > 0.0);
    }
}
