use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerance::Tolerances;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Square complex matrix stored row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for k in 0..dim {
            m[(k, k)] = ONE;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from row-major entries; `entries.len()` must be a
    /// positive perfect square.
    pub fn from_row_major(entries: Vec<Complex64>) -> Result<Self> {
        let dim = (entries.len() as f64).sqrt().round() as usize;
        if dim == 0 || dim * dim != entries.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Ok(Self { dim, data: entries })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { dim, data })
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (k, &v) in diag.iter().enumerate() {
            m[(k, k)] = Complex64::new(v, 0.0);
        }
        m
    }

    /// Matrix whose `k`-th column is `columns[k]`.
    pub fn from_columns(columns: &[Vec<Complex64>]) -> Result<Self> {
        let dim = columns.len();
        let mut m = Self::zeros(dim.max(1));
        if dim == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        for (k, col) in columns.iter().enumerate() {
            if col.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: col.len(),
                });
            }
            for (i, &v) in col.iter().enumerate() {
                m[(i, k)] = v;
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [Complex64] {
        let d = self.dim;
        &mut self.data[i * d..(i + 1) * d]
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.dim).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.dim).map(|k| self[(k, k)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|k| self[(k, k)]).sum()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    /// `diag(left) · self · diag(right)` for real diagonal factors.
    pub fn diag_sandwich(&self, left: &[f64], right: &[f64]) -> Self {
        Self::from_fn(self.dim, |i, j| self[(i, j)] * (left[i] * right[j]))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_off_diagonal(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                if i != j {
                    m = m.max(self[(i, j)].norm());
                }
            }
        }
        m
    }

    /// Max entrywise |M - M†|.
    pub fn hermitian_deviation(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                m = m.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        m
    }

    /// Max entrywise |M†M - I|.
    pub fn unitary_deviation(&self) -> f64 {
        (&self.adjoint() * self).max_abs_diff(&Self::identity(self.dim))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitary_deviation() <= tol
    }

    pub fn ensure_unitary(&self) -> Result<()> {
        let deviation = self.unitary_deviation();
        if deviation <= Tolerances::current().unitary {
            Ok(())
        } else {
            Err(Error::NotUnitary { deviation })
        }
    }

    /// Kronecker product with `self` as the outer factor.
    pub fn kron(&self, other: &Self) -> Self {
        let (da, db) = (self.dim, other.dim);
        Self::from_fn(da * db, |i, j| {
            self[(i / db, j / db)] * other[(i % db, j % db)]
        })
    }

    /// `self · M · self†`.
    pub fn conjugate(&self, m: &Self) -> Self {
        &(self * m) * &self.adjoint()
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.dim)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in product");
        let d = self.dim;
        let mut out = ComplexMatrix::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..d {
                    out.data[i * d + j] += a * rhs.data[k * d + j];
                }
            }
        }
        out
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim);
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim);
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            let row: Vec<String> = self
                .row(i)
                .iter()
                .map(|z| format!("{:+.6}{:+.6}i", z.re, z.im))
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Assembles a unitary from pairwise orthonormal columns.
pub fn unitary_from_columns(columns: &[Vec<Complex64>]) -> Result<ComplexMatrix> {
    let m = ComplexMatrix::from_columns(columns)?;
    let deviation = m.unitary_deviation();
    if deviation > Tolerances::current().unitary {
        return Err(Error::NotOrthonormal { deviation });
    }
    Ok(m)
}

/// Square real matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for k in 0..dim {
            m[(k, k)] = 1.0;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self[(i, j)]).sum())
            .collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|j| (0..self.dim).map(|i| self[(i, j)]).sum())
            .collect()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| self.data[i * self.dim..(i + 1) * self.dim].to_vec())
            .collect()
    }
}

impl Index<(usize, usize)> for RealMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for RealMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn standard_basis_in_order_is_identity() {
        let cols: Vec<Vec<Complex64>> = (0..3)
            .map(|k| (0..3).map(|i| if i == k { ONE } else { ZERO }).collect())
            .collect();
        let u = unitary_from_columns(&cols).unwrap();
        assert_eq!(u, ComplexMatrix::identity(3));
    }

    #[test]
    fn reversed_qubit_basis_is_not_gate() {
        let u = unitary_from_columns(&[vec![ZERO, ONE], vec![ONE, ZERO]]).unwrap();
        let not = ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(u, not);
    }

    #[test]
    fn hadamard_from_columns() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let u = unitary_from_columns(&[vec![c(h), c(h)], vec![c(h), c(-h)]]).unwrap();
        let expected = ComplexMatrix::from_real_rows(&[vec![h, h], vec![h, -h]]).unwrap();
        assert!(u.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn non_orthonormal_columns_rejected() {
        let err = unitary_from_columns(&[vec![ONE, ZERO], vec![ONE, ZERO]]).unwrap_err();
        assert!(matches!(err, Error::NotOrthonormal { .. }));
    }

    #[test]
    fn kron_of_identities() {
        let a = ComplexMatrix::identity(2);
        let b = ComplexMatrix::identity(3);
        assert_eq!(a.kron(&b), ComplexMatrix::identity(6));
    }

    #[test]
    fn kron_places_outer_factor_in_blocks() {
        let x = ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let z = ComplexMatrix::from_real_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        let k = x.kron(&z);
        assert_eq!(k[(0, 2)], c(1.0));
        assert_eq!(k[(1, 3)], c(-1.0));
        assert_eq!(k[(0, 0)], ZERO);
    }

    #[test]
    fn from_row_major_rejects_non_square() {
        assert!(ComplexMatrix::from_row_major(vec![ONE; 3]).is_err());
    }
}
