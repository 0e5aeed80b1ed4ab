//! Dense linear algebra and the activation/loss primitives used by the
//! trainer. Vectors are plain `Vec<f64>` / `&[f64]`; matrices are row-major.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Lower clamp applied to predictions before taking logarithms.
pub const PROB_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_len("matrix data", rows * cols, data.len())?;
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("non-finite matrix entry {bad}")));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_len("matrix row", cols, r.len())?;
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    /// Copies the sub-block starting at (`row0`, `col0`), truncated at the
    /// matrix edge.
    pub fn block(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> Self {
        let r_end = (row0 + rows).min(self.rows);
        let c_end = (col0 + cols).min(self.cols);
        Self::from_fn(r_end - row0, c_end - col0, |i, j| self.get(row0 + i, col0 + j))
    }
}

/// Dot product with eight independent accumulators. The summation order
/// depends only on the length, so results are reproducible.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

pub fn matvec(m: &Matrix, v: &[f64]) -> Result<Vec<f64>> {
    check_len("matvec", m.cols, v.len())?;
    Ok((0..m.rows).map(|i| dot(m.row(i), v)).collect())
}

pub fn outer(u: &[f64], v: &[f64]) -> Matrix {
    Matrix::from_fn(u.len(), v.len(), |i, j| u[i] * v[j])
}

pub fn hadamard(u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    check_len("hadamard", u.len(), v.len())?;
    Ok(u.iter().zip(v).map(|(a, b)| a * b).collect())
}

/// `c = a · bᵀ + beta·c` where `a` is `m×k`, `b` is `n×k` and `c` is `m×n`,
/// all row-major.
pub(crate) fn gemm_nt(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], beta: f64, c: &mut [f64]) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), n * k);
    assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: slice lengths are checked above against the strides passed.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            1,
            k as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `c += alpha · aᵀ · b` where `a` is `k×m`, `b` is `k×n` and `c` is `m×n`.
pub(crate) fn gemm_tn_acc(m: usize, k: usize, n: usize, alpha: f64, a: &[f64], b: &[f64], c: &mut [f64]) {
    assert_eq!(a.len(), k * m);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    // SAFETY: slice lengths are checked above against the strides passed.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            1,
            m as isize,
            b.as_ptr(),
            n as isize,
            1,
            1.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub fn relu(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| x.max(0.0)).collect()
}

/// Step derivative of ReLU; the derivative at exactly zero is taken as 0.
pub fn relu_prime(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| if x > 0.0 { 1.0 } else { 0.0 }).collect()
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let z = x.exp();
        z / (1.0 + z)
    }
}

/// How the per-output binary cross-entropy terms are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    /// Sum over output units.
    #[default]
    Sum,
    /// Mean over output units.
    Mean,
}

impl Reduction {
    fn factor(self, dim: usize) -> f64 {
        match self {
            Reduction::Sum => 1.0,
            Reduction::Mean => 1.0 / dim as f64,
        }
    }
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

pub fn bce_loss(yhat: &[f64], y: &[f64], reduction: Reduction) -> Result<f64> {
    check_len("bce_loss", y.len(), yhat.len())?;
    let total: f64 = yhat
        .iter()
        .zip(y)
        .map(|(&p, &t)| {
            let p = clamp_prob(p);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum();
    Ok(total * reduction.factor(y.len()))
}

/// Gradient of [`bce_loss`] with respect to the pre-activation of logistic
/// output units: `(ŷ − y)` times the reduction factor.
pub fn bce_output_error(yhat: &[f64], y: &[f64], reduction: Reduction) -> Result<Vec<f64>> {
    check_len("bce_output_error", y.len(), yhat.len())?;
    let f = reduction.factor(y.len());
    Ok(yhat
        .iter()
        .zip(y)
        .map(|(&p, &t)| (clamp_prob(p) - t) * f)
        .collect())
}

/// Gradient of [`bce_loss`] with respect to the predictions themselves.
pub fn bce_prediction_gradient(yhat: &[f64], y: &[f64], reduction: Reduction) -> Result<Vec<f64>> {
    check_len("bce_prediction_gradient", y.len(), yhat.len())?;
    let f = reduction.factor(y.len());
    Ok(yhat
        .iter()
        .zip(y)
        .map(|(&p, &t)| {
            let p = clamp_prob(p);
            (p - t) / (p * (1.0 - p)) * f
        })
        .collect())
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn naive_matvec(m: &Matrix, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; m.rows()];
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                out[i] += m.get(i, j) * v[j];
            }
        }
        out
    }

    #[test]
    fn matvec_examples() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(matvec(&m, &[1.0, 1.0]).unwrap(), vec![3.0, 7.0]);
        assert_eq!(matvec(&m, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let v = [0.3, -2.0, 7.5];
        assert_eq!(matvec(&Matrix::identity(3), &v).unwrap(), v.to_vec());
    }

    #[test]
    fn matvec_dimension_error() {
        let m = Matrix::zeros(2, 3);
        let err = matvec(&m, &[1.0, 2.0]).unwrap_err();
        assert!(err.to_string().contains("expected 3, found 2"), "{err}");
    }

    #[test]
    fn matvec_matches_naive_oracle() {
        let mut rng = seeded_rng(11);
        for _ in 0..20 {
            let m = Matrix::from_fn(50, 50, |_, _| rng.random_range(-1.0..1.0));
            let v: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fast = matvec(&m, &v).unwrap();
            let slow = naive_matvec(&m, &v);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn rejects_non_finite() {
        assert!(Matrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Matrix::new(1, 2, vec![1.0]).is_err());
    }

    #[test]
    fn outer_and_hadamard_examples() {
        let o = outer(&[1.0, 2.0], &[3.0]);
        assert_eq!(o.shape(), (2, 1));
        assert_eq!(o.as_slice(), &[3.0, 6.0]);
        assert_eq!(outer(&[0.0, 0.0], &[4.0, 5.0]).max_abs(), 0.0);
        assert_eq!(outer(&[1.0], &[1.0]).as_slice(), &[1.0]);

        assert_eq!(hadamard(&[1.0, 2.0, 3.0], &[0.0, 1.0, 2.0]).unwrap(), vec![0.0, 2.0, 6.0]);
        let u = [1.5, -2.0];
        assert_eq!(hadamard(&u, &[1.0, 1.0]).unwrap(), u.to_vec());
        assert_eq!(hadamard(&u, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert!(hadamard(&u, &[1.0]).is_err());
    }

    #[test]
    fn gemm_helpers_match_loops() {
        let mut rng = seeded_rng(3);
        let (m, k, n) = (5, 7, 3);
        let a: Vec<f64> = (0..m * k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..n * k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut c = vec![0.0; m * n];
        gemm_nt(m, k, n, &a, &b, 0.0, &mut c);
        for i in 0..m {
            for j in 0..n {
                let want: f64 = (0..k).map(|t| a[i * k + t] * b[j * k + t]).sum();
                assert!((c[i * n + j] - want).abs() < 1e-12);
            }
        }
        // aᵀ·b with a: k×m, b: k×n
        let a2: Vec<f64> = (0..k * m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b2: Vec<f64> = (0..k * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut c2 = vec![1.0; m * n];
        gemm_tn_acc(m, k, n, -0.5, &a2, &b2, &mut c2);
        for i in 0..m {
            for j in 0..n {
                let s: f64 = (0..k).map(|t| a2[t * m + i] * b2[t * n + j]).sum();
                assert!((c2[i * n + j] - (1.0 - 0.5 * s)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn relu_examples() {
        assert_eq!(relu(&[-1.0, 0.0, 2.0]), vec![0.0, 0.0, 2.0]);
        assert_eq!(relu_prime(&[-1.0, 0.0, 2.0]), vec![0.0, 0.0, 1.0]);
        assert_eq!(relu_prime(&[5.0]), vec![1.0]);
    }

    #[test]
    fn bce_examples() {
        let y = [0.0, 1.0, 0.0];
        let e = bce_output_error(&y, &y, Reduction::Mean).unwrap();
        assert!(e.iter().all(|v| v.abs() < 1e-11));

        // logistic-BCE gradient at ŷ = 0.5, y = 1 is ŷ − y = −0.5; dim = 1.
        for r in [Reduction::Sum, Reduction::Mean] {
            assert_eq!(bce_output_error(&[0.5], &[1.0], r).unwrap(), vec![-0.5]);
        }
        let e = bce_output_error(&[0.5, 0.5], &[1.0, 0.0], Reduction::Mean).unwrap();
        assert_eq!(e, vec![-0.25, 0.25]);

        let yhat = [0.2, 0.9, 0.4];
        let flipped_yhat: Vec<f64> = yhat.iter().map(|p| 1.0 - p).collect();
        let flipped_y: Vec<f64> = y.iter().map(|t| 1.0 - t).collect();
        let a = bce_loss(&yhat, &y, Reduction::Mean).unwrap();
        let b = bce_loss(&flipped_yhat, &flipped_y, Reduction::Mean).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!(bce_loss(&yhat, &[1.0], Reduction::Sum).is_err());
    }

    #[test]
    fn bce_error_matches_finite_differences() {
        let mut rng = seeded_rng(5);
        let h = 1e-5;
        for reduction in [Reduction::Sum, Reduction::Mean] {
            for _ in 0..10 {
                let a: Vec<f64> = (0..10).map(|_| rng.random_range(-3.0..3.0)).collect();
                let mut y = vec![0.0; 10];
                y[rng.random_range(0..10)] = 1.0;
                let yhat: Vec<f64> = a.iter().map(|&v| sigmoid(v)).collect();
                let e = bce_output_error(&yhat, &y, reduction).unwrap();
                for i in 0..10 {
                    let loss_at = |d: f64| {
                        let p: Vec<f64> = a
                            .iter()
                            .enumerate()
                            .map(|(j, &v)| sigmoid(if j == i { v + d } else { v }))
                            .collect();
                        bce_loss(&p, &y, reduction).unwrap()
                    };
                    let fd = (loss_at(h) - loss_at(-h)) / (2.0 * h);
                    assert!((fd - e[i]).abs() < 1e-6, "{fd} vs {}", e[i]);
                }
            }
        }
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(-800.0), 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn hadamard_and_outer_are_bilinear(
            u in prop::collection::vec(-10.0f64..10.0, 1..12),
            c in -5.0f64..5.0,
        ) {
            let v: Vec<f64> = u.iter().rev().cloned().collect();
            let cu: Vec<f64> = u.iter().map(|x| c * x).collect();
            let h1 = hadamard(&cu, &v).unwrap();
            let h2 = hadamard(&u, &v).unwrap();
            for (a, b) in h1.iter().zip(&h2) {
                prop_assert!((a - c * b).abs() <= 1e-12 * (1.0 + b.abs() * c.abs()));
            }
            let o1 = outer(&cu, &v);
            let o2 = outer(&u, &v).scaled(c);
            for (a, b) in o1.as_slice().iter().zip(o2.as_slice()) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }

        #[test]
        fn relu_prime_times_x_is_relu(x in prop::collection::vec(-1e3f64..1e3, 0..20)) {
            let r = relu(&x);
            let d = relu_prime(&x);
            for i in 0..x.len() {
                if x[i] != 0.0 {
                    prop_assert_eq!(d[i] * x[i], r[i]);
                }
            }
        }
    }
}
