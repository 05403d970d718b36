use crate::{Error, Result};

/// Row-major dense tensor of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::ShapeMismatch(format!("zero-sized dimension in {shape:?}")));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    /// 2-D tensor from rows of equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        Self::new(vec![rows.len(), cols], rows.concat())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// First dimension.
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Product of all dimensions after the first.
    pub fn cols(&self) -> usize {
        self.shape[1..].iter().product()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }
}

/// `out[m×n] (+)= a[m×k] · wᵀ`, with `w` stored `n×k` row-major.
pub(crate) fn matmul_a_bt(a: &[f64], w: &[f64], out: &mut [f64], m: usize, k: usize, n: usize, accumulate: bool) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(w.len(), n * k);
    debug_assert_eq!(out.len(), m * n);
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: slice lengths are checked above; strides describe the stated shapes.
    unsafe {
        matrixmultiply::dgemm(
            m, k, n, 1.0,
            a.as_ptr(), k as isize, 1,
            w.as_ptr(), 1, k as isize,
            beta,
            out.as_mut_ptr(), n as isize, 1,
        );
    }
}

/// `out[m×k] = g[m×n] · w[n×k]`.
pub(crate) fn matmul_a_b(g: &[f64], w: &[f64], out: &mut [f64], m: usize, n: usize, k: usize) {
    debug_assert_eq!(g.len(), m * n);
    debug_assert_eq!(w.len(), n * k);
    debug_assert_eq!(out.len(), m * k);
    // SAFETY: as above.
    unsafe {
        matrixmultiply::dgemm(
            m, n, k, 1.0,
            g.as_ptr(), n as isize, 1,
            w.as_ptr(), k as isize, 1,
            0.0,
            out.as_mut_ptr(), k as isize, 1,
        );
    }
}

/// `out[n×k] = gᵀ · x`, with `g` stored `m×n` and `x` stored `m×k`.
pub(crate) fn matmul_at_b(g: &[f64], x: &[f64], out: &mut [f64], m: usize, n: usize, k: usize) {
    debug_assert_eq!(g.len(), m * n);
    debug_assert_eq!(x.len(), m * k);
    debug_assert_eq!(out.len(), n * k);
    // SAFETY: as above.
    unsafe {
        matrixmultiply::dgemm(
            n, m, k, 1.0,
            g.as_ptr(), 1, n as isize,
            x.as_ptr(), k as isize, 1,
            0.0,
            out.as_mut_ptr(), k as isize, 1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_checks() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(vec![0, 3], vec![]).is_err());
        let t = Tensor::new(vec![2, 3], (0..6).map(f64::from).collect()).unwrap();
        assert_eq!(t.row(1), &[3.0, 4.0, 5.0]);
    }

    #[test]
    fn products_match_loops() {
        let (m, k, n) = (5, 7, 3);
        let a: Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.37).sin()).collect();
        let w: Vec<f64> = (0..n * k).map(|i| (i as f64 * 0.11).cos()).collect();
        let mut out = vec![0.0; m * n];
        matmul_a_bt(&a, &w, &mut out, m, k, n, false);
        for i in 0..m {
            for j in 0..n {
                let e: f64 = (0..k).map(|t| a[i * k + t] * w[j * k + t]).sum();
                assert!((out[i * n + j] - e).abs() < 1e-12);
            }
        }
        let g: Vec<f64> = (0..m * n).map(|i| i as f64 * 0.5 - 3.0).collect();
        let mut dx = vec![0.0; m * k];
        matmul_a_b(&g, &w, &mut dx, m, n, k);
        let mut dw = vec![0.0; n * k];
        matmul_at_b(&g, &a, &mut dw, m, n, k);
        for i in 0..m {
            for t in 0..k {
                let e: f64 = (0..n).map(|j| g[i * n + j] * w[j * k + t]).sum();
                assert!((dx[i * k + t] - e).abs() < 1e-12);
            }
        }
        for j in 0..n {
            for t in 0..k {
                let e: f64 = (0..m).map(|i| g[i * n + j] * a[i * k + t]).sum();
                assert!((dw[j * k + t] - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rows_independent_of_batch_size() {
        let (k, n) = (84, 64);
        let w: Vec<f64> = (0..n * k).map(|i| (i as f64 * 0.013).sin()).collect();
        let a: Vec<f64> = (0..37 * k).map(|i| (i as f64 * 0.07).cos()).collect();
        let mut full = vec![0.0; 37 * n];
        matmul_a_bt(&a, &w, &mut full, 37, k, n, false);
        for i in 0..37 {
            let mut one = vec![0.0; n];
            matmul_a_bt(&a[i * k..(i + 1) * k], &w, &mut one, 1, k, n, false);
            assert_eq!(&full[i * n..(i + 1) * n], &one[..]);
        }
    }
}
