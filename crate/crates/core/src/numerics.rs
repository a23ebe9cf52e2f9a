//! Dense complex linear algebra for the zero-forcing path.
//!
//! Matrices are small (K ≤ a few hundred rows) and short-lived, so a plain
//! row-major container is enough. The pseudo-inverse goes through a Cholesky
//! solve of the K×K Gram matrix; eigenvalue extremes and the SVD fallback are
//! delegated to `nalgebra`.

use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default relative rank tolerance on the Gram eigenvalue ratio.
pub const DEFAULT_RTOL: f64 = 1e-10;

/// Gram condition numbers above this switch the pseudo-inverse to the SVD route.
pub const SVD_SWITCH_CONDITION: f64 = 1e10;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::from_row_major(rows.len(), cols, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// Conjugate transpose.
    pub fn hermitian(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let rrow = rhs.row(k);
                let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, b) in orow.iter_mut().zip(rrow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Matrix-vector product.
    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.cols {
            return Err(Error::Shape(format!(
                "cannot apply {}x{} to length-{} vector",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::Shape("subtraction of unequal shapes".into()));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt()
    }

    /// `A·Aᴴ`, the row Gram matrix.
    pub fn gram(&self) -> Self {
        let n = self.rows;
        let mut out = Self::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = inner(self.row(j), self.row(i));
                out[(i, j)] = v;
                out[(j, i)] = v.conj();
            }
        }
        out
    }

    fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    fn from_nalgebra(m: &DMatrix<Complex64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// `Σ conj(a_i)·b_i`, i.e. `aᴴb`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(Complex64::norm_sqr).sum()
}

/// Lower Cholesky factor of a Hermitian positive-definite matrix.
/// Returns `None` when a pivot is not strictly positive.
pub fn cholesky(a: &ComplexMatrix) -> Option<ComplexMatrix> {
    let n = a.rows();
    debug_assert_eq!(n, a.cols());
    let mut l = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = Complex64::new(djj, 0.0);
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

/// Solves `L·Lᴴ·X = B` given the lower Cholesky factor.
pub fn cholesky_solve(l: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let n = l.rows();
    let mut x = b.clone();
    for c in 0..b.cols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)].re;
        }
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in i + 1..n {
                s -= l[(k, i)].conj() * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)].re;
        }
    }
    x
}

/// Inverse of a Hermitian positive-definite matrix, or `None` if the
/// Cholesky factorization breaks down.
pub fn hermitian_pd_inverse(a: &ComplexMatrix) -> Option<ComplexMatrix> {
    let l = cholesky(a)?;
    Some(cholesky_solve(&l, &ComplexMatrix::identity(a.rows())))
}

/// Ratio of the extreme eigenvalues of a Hermitian positive semi-definite
/// matrix. Numerically singular input reports `f64::INFINITY`.
pub fn hermitian_condition(a: &ComplexMatrix) -> f64 {
    let n = a.rows();
    if n == 0 {
        return 1.0;
    }
    if n == 1 {
        return if a[(0, 0)].re > 0.0 { 1.0 } else { f64::INFINITY };
    }
    let eig = nalgebra::SymmetricEigen::new(a.to_nalgebra());
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min <= max * f64::EPSILON * n as f64 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Ratio of the extreme eigenvalues of `G·Gᴴ`.
pub fn gram_condition(g: &ComplexMatrix) -> f64 {
    hermitian_condition(&g.gram())
}

/// Condition of a Gram matrix after scaling it to unit diagonal. Rank
/// deficiency is judged on this, so rows of very different strength (a
/// stratospheric hop next to a short terrestrial one) are not mistaken for
/// collinear rows.
pub fn equilibrated_condition(gram: &ComplexMatrix) -> f64 {
    let n = gram.rows();
    let d: Vec<f64> = (0..n).map(|i| gram[(i, i)].re).collect();
    if d.iter().any(|v| !(*v > 0.0)) {
        return f64::INFINITY;
    }
    let s: Vec<f64> = d.iter().map(|v| 1.0 / v.sqrt()).collect();
    hermitian_condition(&ComplexMatrix::from_fn(n, n, |i, j| gram[(i, j)] * (s[i] * s[j])))
}

/// Right pseudo-inverse `Gᴴ(G·Gᴴ)⁻¹` of a full-row-rank `K×N` matrix.
pub fn pseudo_inverse(g: &ComplexMatrix, rtol: f64) -> Result<ComplexMatrix> {
    if g.rows() > g.cols() {
        return Err(Error::Shape(format!(
            "pseudo-inverse needs K <= N, got {}x{}",
            g.rows(),
            g.cols()
        )));
    }
    let gram = g.gram();
    let condition = equilibrated_condition(&gram);
    let limit = 1.0 / rtol;
    if !(condition < limit) {
        return Err(Error::SingularChannel { condition, limit });
    }
    if condition <= SVD_SWITCH_CONDITION {
        if let Some(l) = cholesky(&gram) {
            let x = cholesky_solve(&l, &ComplexMatrix::identity(g.rows()));
            return g.hermitian().matmul(&x);
        }
    }
    svd_pseudo_inverse(g, rtol)
}

fn svd_pseudo_inverse(g: &ComplexMatrix, rtol: f64) -> Result<ComplexMatrix> {
    let svd = g.to_nalgebra().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let pinv = svd
        .pseudo_inverse(smax * rtol.sqrt())
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(ComplexMatrix::from_nalgebra(&pinv))
}
