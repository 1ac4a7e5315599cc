//! Minimal dense real linear algebra: vectors, square matrices, products,
//! norms, and linear-system solution with partial pivoting.
//!
//! Matrix inverses are never formed; every `A^{-1} b` product in the solver
//! goes through [`solve_linear`], which reports near-singularity through
//! [`LinalgError::SingularMatrix`] instead of returning garbage.

use thiserror::Error;

/// Relative pivot threshold below which a matrix is declared singular.
pub const SINGULAR_PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is numerically singular at pivot {pivot_index}")]
    SingularMatrix { pivot_index: usize },
    #[error("non-finite entry at index {0}")]
    NonFinite(usize),
}

/// A dense real column vector. All entries are finite by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(entries: Vec<f64>) -> Result<Self, LinalgError> {
        if entries.is_empty() {
            return Err(LinalgError::DimensionMismatch(
                "vector dimension must be at least 1".into(),
            ));
        }
        if let Some(i) = entries.iter().position(|x| !x.is_finite()) {
            return Err(LinalgError::NonFinite(i));
        }
        Ok(Vector(entries))
    }

    pub fn zeros(n: usize) -> Self {
        Vector(vec![0.0; n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// Componentwise difference, `self - other`.
    pub fn sub(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, s: f64) -> Vector {
        Vector(self.0.iter().map(|a| a * s).collect())
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Vec<f64> {
        v.0
    }
}

/// A dense square real matrix in row-major order. Entries are finite by
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if n == 0 || data.len() != n * n {
            return Err(LinalgError::DimensionMismatch(format!(
                "expected {n}x{n} entries, got {}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(LinalgError::NonFinite(i));
        }
        Ok(Matrix { n, data })
    }

    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(LinalgError::DimensionMismatch(
                    "rows must form a square matrix".into(),
                ));
            }
            data.extend_from_slice(row);
        }
        Matrix::new(n, data)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `self + diag(d)`.
    pub fn add_diagonal(&self, d: &[f64]) -> Matrix {
        debug_assert_eq!(self.n, d.len());
        let mut out = self.clone();
        for (i, di) in d.iter().enumerate() {
            let v = out.get(i, i) + di;
            out.set(i, i, v);
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!(self.n, other.n);
        Matrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn mat_vec(&self, v: &Vector) -> Vector {
        debug_assert_eq!(self.n, v.dim());
        let out = (0..self.n)
            .map(|i| {
                let row = &self.data[i * self.n..(i + 1) * self.n];
                row.iter().zip(v.as_slice()).map(|(a, b)| a * b).sum()
            })
            .collect();
        Vector(out)
    }
}

/// Standard matrix product.
pub fn mat_mul(a: &Matrix, b: &Matrix) -> Result<Matrix, LinalgError> {
    if a.n != b.n {
        return Err(LinalgError::DimensionMismatch(format!(
            "cannot multiply {0}x{0} by {1}x{1}",
            a.n, b.n
        )));
    }
    let n = a.n;
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a.get(i, k);
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                data[i * n + j] += aik * b.get(k, j);
            }
        }
    }
    Ok(Matrix { n, data })
}

/// Solves `a x = b` by LU factorization with partial pivoting.
///
/// A pivot smaller than [`SINGULAR_PIVOT_TOL`] times the largest initial
/// magnitude of its column is reported as [`LinalgError::SingularMatrix`]
/// with the offending pivot index.
pub fn solve_linear(a: &Matrix, b: &Vector) -> Result<Vector, LinalgError> {
    let n = a.n;
    if b.dim() != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "matrix is {n}x{n} but rhs has dimension {}",
            b.dim()
        )));
    }
    // Per-column magnitude of the unfactored matrix sets the singularity scale.
    let col_scale: Vec<f64> = (0..n)
        .map(|j| (0..n).fold(0.0f64, |m, i| m.max(a.get(i, j).abs())))
        .collect();

    let mut lu = a.data.clone();
    let mut x: Vec<f64> = b.as_slice().to_vec();

    for k in 0..n {
        // Partial pivoting: largest magnitude in column k at or below the diagonal.
        let mut p = k;
        let mut pmax = lu[k * n + k].abs();
        for i in (k + 1)..n {
            let v = lu[i * n + k].abs();
            if v > pmax {
                pmax = v;
                p = i;
            }
        }
        if pmax < SINGULAR_PIVOT_TOL * col_scale[k] || pmax == 0.0 {
            return Err(LinalgError::SingularMatrix { pivot_index: k });
        }
        if p != k {
            for j in 0..n {
                lu.swap(k * n + j, p * n + j);
            }
            x.swap(k, p);
        }
        let pivot = lu[k * n + k];
        for i in (k + 1)..n {
            let factor = lu[i * n + k] / pivot;
            if factor == 0.0 {
                continue;
            }
            lu[i * n + k] = factor;
            for j in (k + 1)..n {
                lu[i * n + j] -= factor * lu[k * n + j];
            }
            x[i] -= factor * x[k];
        }
    }

    // Back substitution on the upper triangle.
    for i in (0..n).rev() {
        let mut sum = x[i];
        for j in (i + 1)..n {
            sum -= lu[i * n + j] * x[j];
        }
        x[i] = sum / lu[i * n + i];
    }
    Vector::new(x)
}

/// Euclidean norm.
pub fn norm2(v: &Vector) -> f64 {
    v.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Maximum absolute entry.
pub fn norm_inf(v: &Vector) -> f64 {
    v.as_slice().iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vec2(a: f64, b: f64) -> Vector {
        Vector::new(vec![a, b]).unwrap()
    }

    #[test]
    fn construction_rejects_non_finite() {
        assert!(Vector::new(vec![1.0, f64::NAN]).is_err());
        assert!(Matrix::new(2, vec![1.0, 0.0, f64::INFINITY, 1.0]).is_err());
        assert!(Vector::new(vec![]).is_err());
    }

    #[test]
    fn mat_mul_identity() {
        let a = Matrix::from_rows(&[
            vec![2.0, -1.0, 0.5],
            vec![3.0, 4.0, -2.0],
            vec![0.0, 1.0, 7.0],
        ])
        .unwrap();
        let i = Matrix::identity(3);
        assert_eq!(mat_mul(&i, &a).unwrap(), a);
        assert_eq!(mat_mul(&a, &i).unwrap(), a);
    }

    #[test]
    fn mat_mul_hand_value() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let sq = mat_mul(&a, &a).unwrap();
        assert_eq!(sq, Matrix::from_rows(&[vec![7.0, 10.0], vec![15.0, 22.0]]).unwrap());
    }

    #[test]
    fn mat_mul_dimension_mismatch() {
        let a = Matrix::identity(2);
        let b = Matrix::identity(3);
        assert!(matches!(
            mat_mul(&a, &b),
            Err(LinalgError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn solve_identity_and_diagonal() {
        let x = solve_linear(&Matrix::identity(2), &vec2(3.0, -1.0)).unwrap();
        assert_eq!(x.as_slice(), &[3.0, -1.0]);

        let d = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 4.0]]).unwrap();
        let x = solve_linear(&d, &vec2(2.0, 8.0)).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn solve_zero_matrix_is_singular() {
        let z = Matrix::zeros(2);
        match solve_linear(&z, &vec2(1.0, 1.0)) {
            Err(LinalgError::SingularMatrix { pivot_index }) => assert_eq!(pivot_index, 0),
            other => panic!("expected SingularMatrix, got {other:?}"),
        }
    }

    #[test]
    fn solve_rank_deficient_reports_pivot() {
        // Second column is twice the first; failure shows up at pivot 1.
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        match solve_linear(&a, &vec2(1.0, 2.0)) {
            Err(LinalgError::SingularMatrix { pivot_index }) => assert_eq!(pivot_index, 1),
            other => panic!("expected SingularMatrix, got {other:?}"),
        }
    }

    #[test]
    fn solve_rhs_dimension_mismatch() {
        let a = Matrix::identity(3);
        assert!(matches!(
            solve_linear(&a, &vec2(1.0, 2.0)),
            Err(LinalgError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn solve_residual_contract() {
        let a = Matrix::from_rows(&[
            vec![4.0, 1.0, -0.5],
            vec![0.3, 5.0, 1.0],
            vec![-1.0, 2.0, 6.0],
        ])
        .unwrap();
        let b = Vector::new(vec![1.0, -2.0, 3.0]).unwrap();
        let x = solve_linear(&a, &b).unwrap();
        let r = a.mat_vec(&x).sub(&b);
        assert!(norm_inf(&r) <= 1e-10 * (1.0 + norm_inf(&b)));
    }

    #[test]
    fn norms() {
        assert_eq!(norm2(&Vector::new(vec![0.0, 0.0, 0.0]).unwrap()), 0.0);
        assert_eq!(norm2(&vec2(3.0, 4.0)), 5.0);
        assert_eq!(norm2(&Vector::new(vec![1.0; 4]).unwrap()), 2.0);
        assert_eq!(norm_inf(&vec2(0.0, 0.0)), 0.0);
        assert_eq!(norm_inf(&vec2(-3.0, 2.0)), 3.0);
        assert_eq!(norm_inf(&Vector::new(vec![1.0, -5.0, 4.0]).unwrap()), 5.0);
    }

    fn finite_f64() -> impl Strategy<Value = f64> {
        -1e3..1e3f64
    }

    proptest! {
        #[test]
        fn norm2_squared_is_dot(entries in prop::collection::vec(finite_f64(), 1..8)) {
            let v = Vector::new(entries).unwrap();
            let n2 = norm2(&v);
            let dot = v.dot(&v);
            prop_assert!((n2 * n2 - dot).abs() <= 1e-12 * (1.0 + dot.abs()));
        }

        #[test]
        fn diagonally_dominant_solve_is_accurate(
            off in prop::collection::vec(finite_f64(), 16),
            rhs in prop::collection::vec(finite_f64(), 4),
        ) {
            let n = 4;
            let mut m = Matrix::zeros(n);
            for i in 0..n {
                let mut row_sum = 0.0;
                for j in 0..n {
                    if i != j {
                        let v = off[i * n + j];
                        m.set(i, j, v);
                        row_sum += v.abs();
                    }
                }
                m.set(i, i, row_sum + 1.0);
            }
            let b = Vector::new(rhs).unwrap();
            let x = solve_linear(&m, &b).unwrap();
            let r = m.mat_vec(&x).sub(&b);
            prop_assert!(norm_inf(&r) <= 1e-8 * (1.0 + norm_inf(&b)));
        }

        #[test]
        fn mat_mul_is_associative(
            a in prop::collection::vec(-10.0..10.0f64, 16),
            b in prop::collection::vec(-10.0..10.0f64, 16),
            c in prop::collection::vec(-10.0..10.0f64, 16),
        ) {
            let a = Matrix::new(4, a).unwrap();
            let b = Matrix::new(4, b).unwrap();
            let c = Matrix::new(4, c).unwrap();
            let ab_c = mat_mul(&mat_mul(&a, &b).unwrap(), &c).unwrap();
            let a_bc = mat_mul(&a, &mat_mul(&b, &c).unwrap()).unwrap();
            let scale: f64 = ab_c.data.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            for (x, y) in ab_c.data.iter().zip(&a_bc.data) {
                prop_assert!((x - y).abs() <= 1e-9 * scale);
            }
        }
    }
}
