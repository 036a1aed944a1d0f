//! Small dense helpers: index-flattened tensors and pivoted elimination.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Dense rank-3 array `t[i][j][k]` of side `dim`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor3 {
    dim: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dim: usize) -> Self {
        Tensor3 { dim, data: vec![0.0; dim * dim * dim] }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dim + j) * self.dim + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let o = self.offset(i, j, k);
        self.data[o] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let o = self.offset(i, j, k);
        self.data[o] += v;
    }

    /// The contiguous fibre `t[i][j][..]`.
    #[inline]
    pub fn fibre(&self, i: usize, j: usize) -> &[f64] {
        let o = self.offset(i, j, 0);
        &self.data[o..o + self.dim]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Dense rank-4 array `t[i][j][k][l]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor4 {
    dim: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(dim: usize) -> Self {
        Tensor4 { dim, data: vec![0.0; dim * dim * dim * dim] }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.dim + j) * self.dim + k) * self.dim + l
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[self.offset(i, j, k, l)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        let o = self.offset(i, j, k, l);
        self.data[o] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Row-echelon basis of the span of `vectors` (all of length `len`), by
/// Gaussian elimination with partial pivoting. Pivots smaller than
/// `tol * scale` are treated as zero, where `scale` is the largest input entry.
pub fn row_basis(vectors: &[Vec<f64>], len: usize, tol: f64) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = vectors.to_vec();
    let scale = rows
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Vec::new();
    }
    let eps = tol * scale.max(1.0);
    let mut rank = 0;
    for col in 0..len {
        if rank == rows.len() {
            break;
        }
        let (best, best_val) = (rank..rows.len())
            .map(|r| (r, rows[r][col].abs()))
            .fold((rank, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best_val <= eps {
            continue;
        }
        rows.swap(rank, best);
        let pivot = rows[rank][col];
        for r in rank + 1..rows.len() {
            let f = rows[r][col] / pivot;
            if f != 0.0 {
                for c in col..len {
                    let v = rows[rank][c];
                    rows[r][c] -= f * v;
                }
                rows[r][col] = 0.0;
            }
        }
        rank += 1;
    }
    rows.truncate(rank);
    rows
}

/// Orthonormal basis (as columns) of the null space of a square symmetric
/// positive-semidefinite matrix, via reduced row-echelon form with complete
/// pivoting followed by Gram-Schmidt.
pub fn null_space_psd(gram: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = gram.nrows();
    let mut a = gram.clone();
    let scale = a.amax().max(1.0);
    let eps = tol * scale;
    // column permutation: perm[c] = original column index
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rank = 0;
    while rank < n {
        let mut best = (rank, rank, 0.0);
        for r in rank..n {
            for c in rank..n {
                let v = a[(r, c)].abs();
                if v > best.2 {
                    best = (r, c, v);
                }
            }
        }
        if best.2 <= eps {
            break;
        }
        a.swap_rows(rank, best.0);
        a.swap_columns(rank, best.1);
        perm.swap(rank, best.1);
        let pivot = a[(rank, rank)];
        for c in rank..n {
            a[(rank, c)] /= pivot;
        }
        for r in 0..n {
            if r == rank {
                continue;
            }
            let f = a[(r, rank)];
            if f != 0.0 {
                for c in rank..n {
                    let v = a[(rank, c)];
                    a[(r, c)] -= f * v;
                }
            }
        }
        rank += 1;
    }
    let nullity = n - rank;
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(nullity);
    for free in rank..n {
        let mut v = vec![0.0; n];
        v[perm[free]] = 1.0;
        for r in 0..rank {
            v[perm[r]] = -a[(r, free)];
        }
        basis.push(v);
    }
    // two passes of modified Gram-Schmidt
    let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(nullity);
    for mut v in basis {
        for _ in 0..2 {
            for q in &ortho {
                let p = dot(&v, q);
                v.iter_mut().zip(q).for_each(|(x, y)| *x -= p * y);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > tol {
            v.iter_mut().for_each(|x| *x /= norm);
            ortho.push(v);
        }
    }
    DMatrix::from_fn(n, ortho.len(), |r, c| ortho[c][r])
}
