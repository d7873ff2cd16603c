//! Dense matrix primitives shared by the transforms, the denoiser and the
//! factorization baseline.
//!
//! [`Matrix`] is a plain row-major `f64` buffer. Every constructor rejects
//! non-finite entries, so downstream code never has to re-check for NaN.
//! Heavier decompositions (SVD) are delegated to `nalgebra` through
//! [`Matrix::to_dmatrix`] and [`Matrix::from_dmatrix`].

use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Variances at or below this value are treated as zero when forming
/// correlation coefficients.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Dense row-major matrix of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
            });
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
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        Self::new(m.rows, m.cols, m.data)
    }

    /// Builds a matrix from nested rows; all rows must have equal length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · rhs` without materializing the transpose.
    pub fn tr_matmul(&self, rhs: &Matrix) -> Result<Self> {
        if self.rows != rhs.rows {
            return Err(Error::Dimension(format!(
                "cannot form AᵀB for {}x{} and {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.cols, rhs.cols);
        for k in 0..self.rows {
            let b_row = rhs.row(k);
            for (i, &a) in self.row(k).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    fn zip_with(&self, rhs: &Matrix, op: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape() != rhs.shape() {
            return Err(Error::Dimension(format!(
                "shape mismatch {:?} vs {:?}",
                self.shape(),
                rhs.shape()
            )));
        }
        let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| op(a, b)).collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn add(&self, rhs: &Matrix) -> Result<Self> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Matrix) -> Result<Self> {
        self.zip_with(rhs, |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    /// Largest `|A[i,j] − A[j,i]|`; zero for exactly symmetric input.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols.min(self.rows) {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_square() && self.max_asymmetry() <= tol
    }

    /// `(A + Aᵀ) / 2`, exactly symmetric.
    pub fn symmetrized(&self) -> Self {
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)]);
                out[(i, j)] = avg;
                out[(j, i)] = avg;
            }
        }
        out
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> Result<Self> {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// An unordered pair of distinct variable indices, stored with `j < k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RotationPair {
    pub j: usize,
    pub k: usize,
}

impl RotationPair {
    pub fn new(j: usize, k: usize) -> Result<Self> {
        if j == k {
            return Err(Error::Index(format!("rotation pair needs distinct indices, got ({j}, {k})")));
        }
        Ok(Self {
            j: j.min(k),
            k: j.max(k),
        })
    }

    pub fn check_bounds(&self, n: usize) -> Result<()> {
        if self.j >= n || self.k >= n {
            return Err(Error::Index(format!(
                "pair ({}, {}) out of range for dimension {n}",
                self.j, self.k
            )));
        }
        Ok(())
    }
}

/// A Givens rotation `J`: the identity except for
/// `J[j,j] = c, J[j,k] = −s, J[k,j] = s, J[k,k] = c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobiRotation {
    pub j: usize,
    pub k: usize,
    pub c: f64,
    pub s: f64,
    pub level: usize,
}

impl JacobiRotation {
    pub fn identity(pair: RotationPair, level: usize) -> Self {
        Self {
            j: pair.j,
            k: pair.k,
            c: 1.0,
            s: 0.0,
            level,
        }
    }

    pub fn pair(&self) -> RotationPair {
        RotationPair { j: self.j, k: self.k }
    }

    /// Dense `n×n` form, for tests and diagnostics.
    pub fn to_matrix(&self, n: usize) -> Result<Matrix> {
        self.pair().check_bounds(n)?;
        let mut m = Matrix::identity(n);
        m[(self.j, self.j)] = self.c;
        m[(self.j, self.k)] = -self.s;
        m[(self.k, self.j)] = self.s;
        m[(self.k, self.k)] = self.c;
        Ok(m)
    }
}

/// Sample covariance of the columns of `x` (divisor `n − 1`).
pub fn compute_covariance(x: &Matrix) -> Result<Matrix> {
    let (n, p) = x.shape();
    if n < 2 {
        return Err(Error::Dimension(format!("covariance needs at least 2 rows, got {n}")));
    }
    if p < 2 {
        return Err(Error::Dimension(format!("covariance needs at least 2 columns, got {p}")));
    }
    let means: Vec<f64> = (0..p)
        .map(|j| (0..n).map(|i| x[(i, j)]).sum::<f64>() / n as f64)
        .collect();
    let centered = Matrix::from_fn(n, p, |i, j| x[(i, j)] - means[j])?;
    let cov = centered.tr_matmul(&centered)?.scale(1.0 / (n - 1) as f64);
    Ok(cov.symmetrized())
}

/// Correlation coefficient for a single entry under the variance floor rule.
#[inline]
pub(crate) fn correlation_entry(sigma: &Matrix, j: usize, k: usize) -> f64 {
    let vj = sigma[(j, j)];
    let vk = sigma[(k, k)];
    if vj <= VARIANCE_FLOOR || vk <= VARIANCE_FLOOR {
        return 0.0;
    }
    if j == k {
        return 1.0;
    }
    (sigma[(j, k)] / (vj * vk).sqrt()).clamp(-1.0, 1.0)
}

/// Correlation matrix of a covariance. Entries touching a variance at or
/// below [`VARIANCE_FLOOR`] are zero, including the diagonal.
pub fn compute_correlation(sigma: &Matrix) -> Result<Matrix> {
    if !sigma.is_square() {
        return Err(Error::Dimension("correlation needs a square matrix".into()));
    }
    let p = sigma.rows();
    let mut rho = Matrix::zeros(p, p);
    for j in 0..p {
        for k in j..p {
            let r = correlation_entry(sigma, j, k);
            rho[(j, k)] = r;
            rho[(k, j)] = r;
        }
    }
    Ok(rho)
}

/// `off(A) = Σ_{j≠k} A[j,k]²`.
pub fn off_diagonal_norm(a: &Matrix) -> f64 {
    let mut total = 0.0;
    for i in 0..a.rows() {
        for (j, v) in a.row(i).iter().enumerate() {
            if i != j {
                total += v * v;
            }
        }
    }
    total
}

/// Returns `JᵀΣJ`.
pub fn apply_rotation_symmetric(sigma: &Matrix, rot: &JacobiRotation) -> Result<Matrix> {
    let mut out = sigma.clone();
    apply_rotation_symmetric_in_place(&mut out, rot)?;
    Ok(out)
}

/// In-place `Σ ← JᵀΣJ`, touching only rows and columns `j` and `k`.
/// The result is exactly symmetric.
pub fn apply_rotation_symmetric_in_place(sigma: &mut Matrix, rot: &JacobiRotation) -> Result<()> {
    if !sigma.is_square() {
        return Err(Error::Dimension("rotation needs a square matrix".into()));
    }
    let p = sigma.rows();
    let (j, k) = (rot.j, rot.k);
    if j >= p || k >= p || j == k {
        return Err(Error::Index(format!("rotation pair ({j}, {k}) invalid for dimension {p}")));
    }
    let (c, s) = (rot.c, rot.s);
    let a = sigma[(j, j)];
    let d = sigma[(k, k)];
    let b = 0.5 * (sigma[(j, k)] + sigma[(k, j)]);

    for m in 0..p {
        if m == j || m == k {
            continue;
        }
        let sj = 0.5 * (sigma[(j, m)] + sigma[(m, j)]);
        let sk = 0.5 * (sigma[(k, m)] + sigma[(m, k)]);
        let nj = c * sj + s * sk;
        let nk = -s * sj + c * sk;
        sigma[(j, m)] = nj;
        sigma[(m, j)] = nj;
        sigma[(k, m)] = nk;
        sigma[(m, k)] = nk;
    }
    let cs2 = 2.0 * c * s * b;
    sigma[(j, j)] = c * c * a + cs2 + s * s * d;
    sigma[(k, k)] = s * s * a - cs2 + c * c * d;
    let off = c * s * (d - a) + (c * c - s * s) * b;
    sigma[(j, k)] = off;
    sigma[(k, j)] = off;
    Ok(())
}

/// In-place `B ← B·J` (rotates columns `j` and `k`).
pub fn rotate_columns_in_place(basis: &mut Matrix, rot: &JacobiRotation) -> Result<()> {
    let p = basis.cols();
    if rot.j >= p || rot.k >= p || rot.j == rot.k {
        return Err(Error::Index(format!(
            "rotation pair ({}, {}) invalid for {} columns",
            rot.j, rot.k, p
        )));
    }
    for i in 0..basis.rows() {
        let bj = basis[(i, rot.j)];
        let bk = basis[(i, rot.k)];
        basis[(i, rot.j)] = rot.c * bj + rot.s * bk;
        basis[(i, rot.k)] = -rot.s * bj + rot.c * bk;
    }
    Ok(())
}

/// Orthogonal `R` minimizing `‖R·A − B‖_F`, from the SVD of `B·Aᵀ`.
pub fn orthogonal_procrustes(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "procrustes needs equal shapes, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let cross = b.matmul(&a.transpose())?;
    let svd = cross.to_dmatrix().svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Degenerate("SVD did not produce singular vectors".into())),
    };
    Matrix::from_dmatrix(&(u * v_t))
}

/// Pearson correlation over the flattened entries of two equal-shape matrices.
pub fn pearson_correlation(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "pearson needs equal shapes, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let n = a.as_slice().len();
    if n < 2 {
        return Err(Error::Dimension("pearson needs at least 2 entries".into()));
    }
    let ma = a.mean();
    let mb = b.mean();
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.as_slice().iter().zip(b.as_slice()) {
        let dx = x - ma;
        let dy = y - mb;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation("one input is constant".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}
