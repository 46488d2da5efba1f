//! Dense real symmetric matrices and their spectral calculus.
//!
//! [`SymMatrix`] carries every matrix-valued quantity in the crate: the
//! summands `X_i`, partial sums `S_n`, coefficient matrices and variance
//! proxies `V_n`. Symmetry is enforced at construction; all values are
//! immutable afterwards.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::policy::NumericPolicy;
use crate::{Error, Result};

const EIGEN_MAX_ITER: usize = 10_000;

/// A dense real symmetric `d x d` matrix with finite entries.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixLiteral", into = "MatrixLiteral")]
pub struct SymMatrix {
    data: DMatrix<f64>,
}

/// JSON literal `{"dim": d, "rows": [[...], ...]}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixLiteral {
    dim: usize,
    rows: Vec<Vec<f64>>,
}

impl TryFrom<MatrixLiteral> for SymMatrix {
    type Error = Error;

    fn try_from(lit: MatrixLiteral) -> Result<Self> {
        if lit.rows.len() != lit.dim {
            return Err(Error::Shape(format!("dim = {} but {} rows given", lit.dim, lit.rows.len())));
        }
        SymMatrix::from_rows(&lit.rows)
    }
}

impl From<SymMatrix> for MatrixLiteral {
    fn from(m: SymMatrix) -> Self {
        MatrixLiteral { dim: m.dim(), rows: m.to_rows() }
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymMatrix").field("dim", &self.dim()).field("rows", &self.to_rows()).finish()
    }
}

impl SymMatrix {
    /// Builds a matrix from rows, symmetrizing `(A + Aᵀ)/2` when the
    /// asymmetry is within the global tolerance and rejecting otherwise.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::Shape("dimension must be at least 1".into()));
        }
        let mut entries = Vec::with_capacity(dim * dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::Shape(format!("row {i} has {} entries, expected {dim}", row.len())));
            }
            entries.extend_from_slice(row);
        }
        Self::from_row_major(dim, &entries)
    }

    pub fn from_row_major(dim: usize, entries: &[f64]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("dimension must be at least 1".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::Shape(format!("{} entries for a {dim}x{dim} matrix", entries.len())));
        }
        let data = DMatrix::from_row_slice(dim, dim, entries);
        Self::from_dmatrix(data)
    }

    /// Validates and symmetrizes an arbitrary square matrix.
    pub fn from_dmatrix(data: DMatrix<f64>) -> Result<Self> {
        let dim = data.nrows();
        if dim == 0 || data.ncols() != dim {
            return Err(Error::Shape(format!("{}x{} is not a nonempty square matrix", data.nrows(), data.ncols())));
        }
        let mut max_abs = 0.0f64;
        for j in 0..dim {
            for i in 0..dim {
                let v = data[(i, j)];
                if !v.is_finite() {
                    return Err(Error::NonFinite { i, j });
                }
                max_abs = max_abs.max(v.abs());
            }
        }
        let tol = NumericPolicy::global().symmetry_rel_tol * max_abs.max(1.0);
        for i in 0..dim {
            for j in (i + 1)..dim {
                let gap = (data[(i, j)] - data[(j, i)]).abs();
                if gap > tol {
                    return Err(Error::NotSymmetric { i, j, gap, tol });
                }
            }
        }
        Ok(Self::symmetrized(data))
    }

    /// Symmetrizes without validation; used for results of operations that
    /// are symmetric in exact arithmetic.
    fn symmetrized(mut data: DMatrix<f64>) -> Self {
        let dim = data.nrows();
        for i in 0..dim {
            for j in (i + 1)..dim {
                let m = 0.5 * (data[(i, j)] + data[(j, i)]);
                data[(i, j)] = m;
                data[(j, i)] = m;
            }
        }
        SymMatrix { data }
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        SymMatrix { data: DMatrix::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        SymMatrix { data: DMatrix::identity(dim, dim) }
    }

    /// Diagonal matrix. Panics on an empty or non-finite diagonal.
    pub fn diag(values: &[f64]) -> Self {
        assert!(!values.is_empty(), "dimension must be at least 1");
        assert!(values.iter().all(|v| v.is_finite()), "diagonal must be finite");
        SymMatrix { data: DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(values)) }
    }

    /// 1x1 matrix.
    pub fn scalar(value: f64) -> Self {
        Self::diag(&[value])
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim()).map(|i| (0..self.dim()).map(|j| self.data[(i, j)]).collect()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, factor: f64) -> Self {
        SymMatrix { data: &self.data * factor }
    }

    /// `A²`, symmetrized to absorb rounding.
    pub fn square(&self) -> Self {
        Self::symmetrized(&self.data * &self.data)
    }

    pub fn add_assign(&mut self, other: &SymMatrix) {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        self.data += &other.data;
    }

    /// `self += factor * other`.
    pub fn add_scaled_assign(&mut self, factor: f64, other: &SymMatrix) {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        self.data.zip_apply(&other.data, |a, b| *a += factor * b);
    }

    pub fn checked_add(&self, other: &SymMatrix) -> Result<Self> {
        self.same_dim(other)?;
        Ok(SymMatrix { data: &self.data + &other.data })
    }

    pub fn checked_sub(&self, other: &SymMatrix) -> Result<Self> {
        self.same_dim(other)?;
        Ok(SymMatrix { data: &self.data - &other.data })
    }

    fn same_dim(&self, other: &SymMatrix) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { left: self.dim(), right: other.dim() });
        }
        Ok(())
    }

    pub fn trace(&self) -> f64 {
        self.data.trace()
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut values = match self.dim() {
            1 => vec![self.data[(0, 0)]],
            2 => {
                let (a, b, c) = (self.data[(0, 0)], self.data[(0, 1)], self.data[(1, 1)]);
                let mean = 0.5 * (a + c);
                let radius = (0.5 * (a - c)).hypot(b);
                vec![mean + radius, mean - radius]
            }
            _ => self.data.symmetric_eigenvalues().iter().copied().collect(),
        };
        values.sort_by(|x, y| y.total_cmp(x));
        values
    }

    /// Full spectral decomposition with eigenvalues sorted descending.
    pub fn eigh(&self) -> Result<Spectrum> {
        let dim = self.dim();
        let eig = SymmetricEigen::try_new(self.data.clone(), f64::EPSILON, EIGEN_MAX_ITER).ok_or_else(|| {
            Error::EigenSolver { dim, max_abs: self.max_abs(), frobenius: self.data.norm() }
        })?;
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let eigenvectors = DMatrix::from_fn(dim, dim, |i, k| eig.eigenvectors[(i, order[k])]);
        Ok(Spectrum { eigenvalues, eigenvectors })
    }

    /// `f(A) = Q f(Λ) Qᵀ`.
    pub fn apply_spectral_fn(&self, f: impl Fn(f64) -> f64) -> Result<SymMatrix> {
        self.eigh()?.map(f)
    }

    /// `tr f(A) = Σ f(λ_j)` without forming eigenvectors.
    pub fn trace_spectral_fn(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        let mut total = 0.0;
        for lambda in self.eigenvalues() {
            let value = f(lambda);
            if !value.is_finite() {
                return Err(Error::SpectralDomain { eigenvalue: lambda, value });
            }
            total += value;
        }
        Ok(total)
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn lambda_min(&self) -> f64 {
        *self.eigenvalues().last().expect("dim >= 1")
    }

    /// `‖A‖ = max(λ_max, -λ_min)`.
    pub fn op_norm(&self) -> f64 {
        let values = self.eigenvalues();
        values[0].abs().max(values[values.len() - 1].abs())
    }

    /// PSD test under the global tolerance `λ_min >= -tol * max(1, ‖A‖)`.
    pub fn check_psd(&self) -> Result<()> {
        let values = self.eigenvalues();
        let norm = values[0].abs().max(values[values.len() - 1].abs());
        let tol = NumericPolicy::global().psd_rel_tol * norm.max(1.0);
        let lambda_min = values[values.len() - 1];
        if lambda_min < -tol {
            return Err(Error::NotPsd { lambda_min, tol });
        }
        Ok(())
    }

    /// Intrinsic dimension `tr(A)/‖A‖` of a nonzero PSD matrix.
    pub fn intrinsic_dimension(&self) -> Result<f64> {
        let values = self.eigenvalues();
        let norm = values[0].abs().max(values[values.len() - 1].abs());
        if norm == 0.0 {
            return Err(Error::ZeroMatrix);
        }
        let lambda_min = values[values.len() - 1];
        let tol = NumericPolicy::global().psd_rel_tol * norm;
        if lambda_min < -tol {
            return Err(Error::NotPsd { lambda_min, tol });
        }
        Ok(self.trace() / norm)
    }

    /// `A ⪯ B` up to `tol`: true iff `λ_min(B - A) >= -tol`.
    pub fn loewner_leq(&self, other: &SymMatrix, tol: f64) -> Result<bool> {
        let diff = other.checked_sub(self)?;
        Ok(diff.lambda_min() >= -tol)
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;

    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        self.checked_add(rhs).expect("dimension mismatch")
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;

    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        self.checked_sub(rhs).expect("dimension mismatch")
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;

    fn mul(self, rhs: f64) -> SymMatrix {
        self.scale(rhs)
    }
}

impl Neg for &SymMatrix {
    type Output = SymMatrix;

    fn neg(self) -> SymMatrix {
        self.scale(-1.0)
    }
}

/// Eigenvalues (descending) and matching orthonormal eigenvectors; column
/// `k` of `eigenvectors` pairs with `eigenvalues[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `Q f(Λ) Qᵀ`; fails on the first eigenvalue where `f` is not finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<SymMatrix> {
        let dim = self.dim();
        let mut scaled = self.eigenvectors.clone();
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            let value = f(lambda);
            if !value.is_finite() {
                return Err(Error::SpectralDomain { eigenvalue: lambda, value });
            }
            scaled.column_mut(k).scale_mut(value);
        }
        let data = &scaled * self.eigenvectors.transpose();
        debug_assert_eq!(data.nrows(), dim);
        Ok(SymMatrix::symmetrized(data))
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.map(|x| x).expect("eigenvalues are finite")
    }
}
