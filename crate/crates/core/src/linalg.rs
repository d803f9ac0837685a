//! Dense symmetric positive-definite linear algebra for the GP layer.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Relative diagonal boosts tried in order, scaled by the mean diagonal of the input.
pub const DEFAULT_JITTER_SCHEDULE: [f64; 4] = [0.0, 1e-8, 1e-6, 1e-4];

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
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

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
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

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        Ok(out)
    }

    pub fn mat_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::Shape(format!(
                "mat_vec {}x{} by vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean_diagonal(&self) -> f64 {
        let n = self.rows.min(self.cols);
        if n == 0 {
            return 0.0;
        }
        (0..n).map(|i| self[(i, i)]).sum::<f64>() / n as f64
    }

    pub fn add_diagonal(&mut self, value: f64) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)] += value;
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lower-triangular `L` with `L·Lᵀ = A + jitter·I`.
#[derive(Clone, Debug)]
pub struct CholeskyFactor {
    l: Matrix,
    jitter: f64,
}

/// Factor a symmetric positive-definite matrix, escalating diagonal jitter
/// through `schedule` (relative to the mean diagonal) until it succeeds.
pub fn cholesky(a: &Matrix, schedule: &[f64]) -> Result<CholeskyFactor> {
    if !a.is_square() {
        return Err(Error::Shape(format!(
            "cholesky of a {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in 0..i {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::Domain(format!(
                    "cholesky input is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let base = a.mean_diagonal().abs();
    let mut last = 0.0;
    for &rel in schedule {
        let jitter = rel * base;
        last = jitter;
        if let Some(l) = try_factor(a, jitter) {
            return Ok(CholeskyFactor { l, jitter });
        }
    }
    Err(Error::NotPositiveDefinite {
        max_jitter: last,
        series: None,
    })
}

fn try_factor(a: &Matrix, jitter: f64) -> Option<Matrix> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let lj = l.row(j)[..j].to_vec();
        let diag = a[(j, j)] + jitter - dot(&lj, &lj);
        if !(diag > 0.0) || !diag.is_finite() {
            return None;
        }
        let d = diag.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let s = a[(i, j)] - dot(&l.row(i)[..j], &lj);
            l[(i, j)] = s / d;
        }
    }
    Some(l)
}

impl CholeskyFactor {
    /// Wrap an existing lower-triangular factor. Entries above the diagonal are ignored.
    pub fn from_lower(l: Matrix) -> Result<Self> {
        if !l.is_square() {
            return Err(Error::Shape("cholesky factor must be square".into()));
        }
        Ok(Self { l, jitter: 0.0 })
    }

    pub fn lower(&self) -> &Matrix {
        &self.l
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    fn pivot(&self, i: usize) -> Result<f64> {
        let d = self.l[(i, i)];
        if d == 0.0 {
            return Err(Error::Singular { row: i });
        }
        Ok(d)
    }

    /// Solve `L·x = b` (or `Lᵀ·x = b` when `transpose`).
    pub fn solve_triangular(&self, b: &[f64], transpose: bool) -> Result<Vec<f64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::Shape(format!(
                "triangular solve: factor is {n}x{n}, rhs has length {}",
                b.len()
            )));
        }
        let mut x = b.to_vec();
        if !transpose {
            for i in 0..n {
                let s = x[i] - dot(&self.l.row(i)[..i], &x[..i]);
                x[i] = s / self.pivot(i)?;
            }
        } else {
            for i in (0..n).rev() {
                let mut s = x[i];
                for k in i + 1..n {
                    s -= self.l[(k, i)] * x[k];
                }
                x[i] = s / self.pivot(i)?;
            }
        }
        Ok(x)
    }

    /// Column-wise triangular solve against an `n×m` right-hand side.
    pub fn solve_triangular_matrix(&self, b: &Matrix, transpose: bool) -> Result<Matrix> {
        let bt = b.transpose();
        let mut out = Vec::with_capacity(b.rows() * b.cols());
        for j in 0..bt.rows() {
            out.extend(self.solve_triangular(bt.row(j), transpose)?);
        }
        Ok(Matrix::from_vec(b.cols(), b.rows(), out)?.transpose())
    }

    /// `(A + jitter·I)⁻¹ b` via forward then backward substitution.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let y = self.solve_triangular(b, false)?;
        self.solve_triangular(&y, true)
    }

    /// `log det(A + jitter·I) = 2 Σ log L_jj`.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| self.l[(i, i)].ln()).sum::<f64>()
    }

    /// Explicit `(A + jitter·I)⁻¹`.
    pub fn inverse(&self) -> Result<Matrix> {
        let n = self.dim();
        // Row j of `u` holds column j of L⁻¹, i.e. u = L⁻ᵀ.
        let mut u = Matrix::zeros(n, n);
        for j in 0..n {
            let mut col = vec![0.0; n];
            col[j] = 1.0 / self.pivot(j)?;
            for i in j + 1..n {
                let mut s = 0.0;
                for k in j..i {
                    s -= self.l[(i, k)] * col[k];
                }
                col[i] = s / self.pivot(i)?;
            }
            u.data[j * n..(j + 1) * n].copy_from_slice(&col);
        }
        let mut inv = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = dot(&u.row(i)[i..], &u.row(j)[i..]);
                inv[(i, j)] = v;
                inv[(j, i)] = v;
            }
        }
        Ok(inv)
    }

    /// `L·Lᵀ`, for reconstruction checks.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.dim();
        Matrix::from_fn(n, n, |i, j| {
            let k = i.min(j) + 1;
            dot(&self.l.row(i)[..k], &self.l.row(j)[..k])
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_factors_to_identity() {
        let f = cholesky(&Matrix::identity(3), &DEFAULT_JITTER_SCHEDULE).unwrap();
        assert_eq!(f.lower(), &Matrix::identity(3));
        assert_eq!(f.jitter(), 0.0);
        assert_eq!(f.log_det(), 0.0);
    }

    #[test]
    fn two_by_two_by_hand() {
        let a = Matrix::from_vec(2, 2, vec![4.0, 2.0, 2.0, 3.0]).unwrap();
        let f = cholesky(&a, &DEFAULT_JITTER_SCHEDULE).unwrap();
        let l = f.lower();
        assert_eq!(l[(0, 0)], 2.0);
        assert_eq!(l[(0, 1)], 0.0);
        assert_eq!(l[(1, 0)], 1.0);
        assert!((l[(1, 1)] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn forward_and_identity_solves() {
        let f = cholesky(&Matrix::identity(2), &[0.0]).unwrap();
        assert_eq!(f.solve_triangular(&[5.0, 7.0], false).unwrap(), vec![5.0, 7.0]);

        let l = Matrix::from_vec(2, 2, vec![2.0, 0.0, 1.0, 2f64.sqrt()]).unwrap();
        let f = CholeskyFactor::from_lower(l).unwrap();
        let x = f.solve_triangular(&[4.0, 4.0], false).unwrap();
        assert_eq!(x[0], 2.0);
        assert!((x[1] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn log_det_of_diagonal() {
        let a = Matrix::from_vec(2, 2, vec![4.0, 0.0, 0.0, 9.0]).unwrap();
        let f = cholesky(&a, &[0.0]).unwrap();
        assert!((f.log_det() - 36f64.ln()).abs() < 1e-14);
        assert!((f.log_det() - 3.58352).abs() < 1e-5);
    }

    #[test]
    fn zero_pivot_is_singular() {
        let l = Matrix::from_vec(2, 2, vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        let f = CholeskyFactor::from_lower(l).unwrap();
        assert!(matches!(
            f.solve_triangular(&[1.0, 1.0], false),
            Err(Error::Singular { row: 1 })
        ));
    }

    #[test]
    fn indefinite_fails_after_schedule() {
        let a = Matrix::from_vec(2, 2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(matches!(
            cholesky(&a, &DEFAULT_JITTER_SCHEDULE),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn jitter_rescues_singular_psd() {
        // Rank one: exact factorization fails at the second pivot.
        let a = Matrix::from_vec(2, 2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let f = cholesky(&a, &DEFAULT_JITTER_SCHEDULE).unwrap();
        assert!(f.jitter() > 0.0);
        let mut expected = a.clone();
        expected.add_diagonal(f.jitter());
        let r = f.reconstruct();
        for i in 0..2 {
            for j in 0..2 {
                assert!((r[(i, j)] - expected[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn asymmetric_input_rejected() {
        let a = Matrix::from_vec(2, 2, vec![2.0, 1.0, 0.0, 2.0]).unwrap();
        assert!(matches!(cholesky(&a, &[0.0]), Err(Error::Domain(_))));
    }
}
