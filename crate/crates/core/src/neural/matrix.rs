use crate::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "Matrix::from_vec",
                format!("{} values for {rows}x{cols}", rows * cols),
                data.len(),
            ));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("non-finite matrix entry {bad}")));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds from nested rows; every row must have the same length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::shape("Matrix::from_rows", cols, r.len()));
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(rows.len(), cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics; a zero-width matrix has no data to walk.
        let width = self.cols.max(1);
        self.data
            .chunks_exact(width)
            .take(if self.cols == 0 { 0 } else { self.rows })
    }

    /// Rows picked by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(idx.len(), self.cols);
        for (dst, &src) in idx.iter().enumerate() {
            out.row_mut(dst).copy_from_slice(self.row(src));
        }
        out
    }

    /// Columns `[start, start + width)` as a new matrix.
    pub fn column_block(&self, start: usize, width: usize) -> Matrix {
        let mut out = Matrix::zeros(self.rows, width);
        for r in 0..self.rows {
            out.row_mut(r)
                .copy_from_slice(&self.row(r)[start..start + width]);
        }
        out
    }

    /// `[self | other]` side by side.
    pub fn hconcat(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::shape("Matrix::hconcat", self.rows, other.rows));
        }
        let cols = self.cols + other.cols;
        let mut out = Matrix::zeros(self.rows, cols);
        for r in 0..self.rows {
            let dst = out.row_mut(r);
            dst[..self.cols].copy_from_slice(self.row(r));
            dst[self.cols..].copy_from_slice(other.row(r));
        }
        Ok(out)
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn map_inplace(&mut self, f: impl Fn(f64) -> f64) {
        self.data.iter_mut().for_each(|x| *x = f(*x));
    }
}

/// `out = x · w + bias` (bias broadcast over rows). `w` is `in × out`.
pub(crate) fn affine(x: &Matrix, w: &Matrix, bias: &[f64]) -> Matrix {
    debug_assert_eq!(x.cols, w.rows);
    debug_assert_eq!(bias.len(), w.cols);
    let mut out = Matrix::zeros(x.rows, w.cols);
    for i in 0..x.rows {
        let orow = &mut out.data[i * w.cols..(i + 1) * w.cols];
        orow.copy_from_slice(bias);
        for (k, &xv) in x.row(i).iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let wrow = &w.data[k * w.cols..(k + 1) * w.cols];
            for (o, &wv) in orow.iter_mut().zip(wrow) {
                *o += xv * wv;
            }
        }
    }
    out
}

/// `grad_w += xᵀ · dy`, `grad_b += Σ_rows dy`.
pub(crate) fn accumulate_weight_grad(
    x: &Matrix,
    dy: &Matrix,
    grad_w: &mut Matrix,
    grad_b: &mut [f64],
) {
    debug_assert_eq!(x.rows, dy.rows);
    let out_w = dy.cols;
    for i in 0..x.rows {
        let drow = dy.row(i);
        for (b, &d) in grad_b.iter_mut().zip(drow) {
            *b += d;
        }
        for (k, &xv) in x.row(i).iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let grow = &mut grad_w.data[k * out_w..(k + 1) * out_w];
            for (g, &d) in grow.iter_mut().zip(drow) {
                *g += xv * d;
            }
        }
    }
}

/// Dot product with four independent accumulators so the loop vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `dx = dy · wᵀ`.
pub(crate) fn backprop_input(dy: &Matrix, w: &Matrix) -> Matrix {
    debug_assert_eq!(dy.cols, w.cols);
    let mut dx = Matrix::zeros(dy.rows, w.rows);
    for i in 0..dy.rows {
        let drow = dy.row(i);
        let xrow = &mut dx.data[i * w.rows..(i + 1) * w.rows];
        for (k, slot) in xrow.iter_mut().enumerate() {
            let wrow = &w.data[k * w.cols..(k + 1) * w.cols];
            *slot = dot(wrow, drow);
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length_and_finiteness() {
        assert!(Matrix::from_vec(2, 2, vec![1.0; 3]).is_err());
        assert!(Matrix::from_vec(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Matrix::from_vec(0, 5, vec![]).is_ok());
    }

    #[test]
    fn affine_and_backprop_match_hand_values() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [0.0, -1.0]]).unwrap();
        let w = Matrix::from_rows(&[[1.0, 0.0, 2.0], [3.0, -1.0, 1.0]]).unwrap();
        let y = affine(&x, &w, &[0.5, 0.0, -1.0]);
        assert_eq!(y.as_slice(), &[7.5, -2.0, 3.0, -2.5, 1.0, -2.0]);

        let dy = Matrix::from_rows(&[[1.0, 1.0, 1.0], [0.0, 2.0, 0.0]]).unwrap();
        let dx = backprop_input(&dy, &w);
        assert_eq!(dx.as_slice(), &[3.0, 3.0, 0.0, -2.0]);

        let mut gw = Matrix::zeros(2, 3);
        let mut gb = vec![0.0; 3];
        accumulate_weight_grad(&x, &dy, &mut gw, &mut gb);
        assert_eq!(gw.as_slice(), &[1.0, 1.0, 1.0, 2.0, 0.0, 2.0]);
        assert_eq!(gb, vec![1.0, 3.0, 1.0]);
    }

    #[test]
    fn row_helpers() {
        let m = Matrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(m.select_rows(&[1, 0]).as_slice(), &[4.0, 5.0, 6.0, 1.0, 2.0, 3.0]);
        assert_eq!(m.column_block(1, 2).as_slice(), &[2.0, 3.0, 5.0, 6.0]);
        let joined = m.column_block(0, 1).hconcat(&m.column_block(2, 1)).unwrap();
        assert_eq!(joined.as_slice(), &[1.0, 3.0, 4.0, 6.0]);
        assert_eq!(m.iter_rows().count(), 2);
        assert_eq!(Matrix::zeros(3, 0).iter_rows().count(), 0);
    }
}
