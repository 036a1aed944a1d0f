//! Left-invariant metrics as inner products `g_ij = <e_i, e_j>` on the Lie algebra.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Condition number above which curvature reports carry a warning.
pub const ILL_CONDITIONED: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Diagonal,
    Full,
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Diagonal(Vec<f64>),
    Full(DMatrix<f64>),
}

/// A symmetric positive-definite metric in the fixed algebra basis.
///
/// Diagonal metrics keep only their diagonal, and their inverse is formed
/// entrywise so that off-diagonal entries of `g^{-1}` are exactly zero.
#[derive(Debug, Clone)]
pub struct MetricState {
    repr: Repr,
    inverse: OnceLock<DMatrix<f64>>,
}

impl PartialEq for MetricState {
    fn eq(&self, other: &Self) -> bool {
        self.repr == other.repr
    }
}

impl MetricState {
    pub fn diagonal(diag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::Domain("metric must have positive dimension".into()));
        }
        if let Some((i, v)) = diag.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::NotPositiveDefinite(format!("diagonal entry {} is {v}", i + 1)));
        }
        Ok(MetricState { repr: Repr::Diagonal(diag), inverse: OnceLock::new() })
    }

    /// A full metric; symmetry is checked to `1e-12` relative and positivity via Cholesky.
    pub fn full(mat: DMatrix<f64>) -> Result<Self> {
        let n = mat.nrows();
        if n == 0 || mat.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: mat.ncols() });
        }
        if mat.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite("non-finite entry".into()));
        }
        let scale = mat.amax();
        for i in 0..n {
            for j in i + 1..n {
                if (mat[(i, j)] - mat[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::NotPositiveDefinite(format!(
                        "not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        let sym = (&mat + mat.transpose()) * 0.5;
        let chol = sym
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorisation failed".into()))?;
        let inverse = OnceLock::new();
        let _ = inverse.set(chol.inverse());
        Ok(MetricState { repr: Repr::Full(sym), inverse })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::diagonal(vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        match &self.repr {
            Repr::Diagonal(d) => d.len(),
            Repr::Full(m) => m.nrows(),
        }
    }

    pub fn kind(&self) -> MetricKind {
        match self.repr {
            Repr::Diagonal(_) => MetricKind::Diagonal,
            Repr::Full(_) => MetricKind::Full,
        }
    }

    /// Diagonal entries when the metric is stored diagonally.
    pub fn as_diagonal(&self) -> Option<&[f64]> {
        match &self.repr {
            Repr::Diagonal(d) => Some(d),
            Repr::Full(_) => None,
        }
    }

    /// Diagonal entries regardless of representation.
    pub fn diagonal_entries(&self) -> Vec<f64> {
        match &self.repr {
            Repr::Diagonal(d) => d.clone(),
            Repr::Full(m) => m.diagonal().iter().copied().collect(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.repr {
            Repr::Diagonal(d) => {
                if i == j {
                    d[i]
                } else {
                    0.0
                }
            }
            Repr::Full(m) => m[(i, j)],
        }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        match &self.repr {
            Repr::Diagonal(d) => DMatrix::from_diagonal(&DVector::from_column_slice(d)),
            Repr::Full(m) => m.clone(),
        }
    }

    /// `g^{ij}`, computed once.
    pub fn inverse(&self) -> &DMatrix<f64> {
        self.inverse.get_or_init(|| match &self.repr {
            Repr::Diagonal(d) => DMatrix::from_diagonal(&DVector::from_iterator(d.len(), d.iter().map(|v| 1.0 / v))),
            Repr::Full(m) => m.clone().cholesky().expect("checked at construction").inverse(),
        })
    }

    /// Ratio of the extreme eigenvalues.
    pub fn condition_number(&self) -> f64 {
        match &self.repr {
            Repr::Diagonal(d) => {
                let (lo, hi) = d.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
                hi / lo
            }
            Repr::Full(m) => {
                let eig = m.clone().symmetric_eigen().eigenvalues;
                eig.max() / eig.min()
            }
        }
    }

    pub fn is_ill_conditioned(&self) -> bool {
        self.condition_number() > ILL_CONDITIONED
    }

    /// `lambda * g` for `lambda > 0`.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        match &self.repr {
            Repr::Diagonal(d) => Self::diagonal(d.iter().map(|v| v * lambda).collect()),
            Repr::Full(m) => Self::full(m * lambda),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_positive() {
        assert!(matches!(MetricState::diagonal(vec![1.0, 0.0]), Err(Error::NotPositiveDefinite(_))));
        assert!(matches!(MetricState::diagonal(vec![1.0, f64::NAN]), Err(Error::NotPositiveDefinite(_))));
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(MetricState::full(m), Err(Error::NotPositiveDefinite(_))));
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.2, 1.0]);
        assert!(matches!(MetricState::full(m), Err(Error::NotPositiveDefinite(m)) if m.contains("symmetric")));
    }

    #[test]
    fn inverse_round_trip() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let g = MetricState::full(m.clone()).unwrap();
        let e = (g.inverse() * &m - DMatrix::identity(3, 3)).amax();
        assert!(e < 1e-12);
        let d = MetricState::diagonal(vec![2.0, 4.0]).unwrap();
        assert_eq!(d.inverse()[(0, 0)], 0.5);
        assert_eq!(d.inverse()[(0, 1)], 0.0);
        assert_eq!(d.condition_number(), 2.0);
    }
}
