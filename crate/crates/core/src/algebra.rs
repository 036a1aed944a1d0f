//! Nilpotent Lie algebras described by structure constants `[e_i, e_j] = c_ij^k e_k`.
//!
//! Only entries with `i < j` are stored; the antisymmetric completion is built
//! once at construction as a dense tensor so that contractions can read
//! `c_ij^k` for any ordering of `i, j`. Indices are 0-based in memory and
//! 1-based in files and reports.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{row_basis, Tensor3};

/// Jacobi residual above which a user-supplied algebra is rejected.
pub const JACOBI_TOL: f64 = 1e-12;

/// Which generator produced an algebra, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// The `(2n+1)`-dimensional Heisenberg algebra.
    Heisenberg(usize),
    /// Strictly upper-triangular `n x n` matrices.
    Unitriangular(usize),
    Custom,
}

/// One stored structure constant `c_ij^k` with `i < j` (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub value: f64,
}

/// Flattening of the double indices `ij` (`i < j`) of the unitriangular basis.
///
/// Pairs are sorted by `(j - i, i)`, so each superdiagonal of the matrix
/// picture occupies a contiguous block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexMap {
    n: usize,
    pairs: Vec<(usize, usize)>,
    flat: BTreeMap<(usize, usize), usize>,
}

impl IndexMap {
    /// Index map for `ut_n`; pairs are 1-based `(i, j)` with `1 <= i < j <= n`.
    pub fn unitriangular(n: usize) -> Self {
        let mut pairs: Vec<(usize, usize)> = (1..=n)
            .flat_map(|i| (i + 1..=n).map(move |j| (i, j)))
            .collect();
        pairs.sort_by_key(|&(i, j)| (j - i, i));
        let flat = pairs.iter().enumerate().map(|(k, &p)| (p, k)).collect();
        IndexMap { n, pairs, flat }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Flat 0-based index of the 1-based pair `(i, j)`.
    pub fn flat_of_pair(&self, i: usize, j: usize) -> Option<usize> {
        self.flat.get(&(i, j)).copied()
    }

    /// 1-based pair of the flat 0-based index `k`.
    pub fn pair_of_flat(&self, k: usize) -> Option<(usize, usize)> {
        self.pairs.get(k).copied()
    }

    pub fn labels(&self) -> Vec<String> {
        self.pairs.iter().map(|(i, j)| format!("{i}{j}")).collect()
    }
}

/// A real Lie algebra given by its structure constants in a fixed basis.
#[derive(Debug, Clone)]
pub struct LieAlgebraSpec {
    dim: usize,
    entries: Vec<Bracket>,
    labels: Option<Vec<String>>,
    family: Family,
    constants: Tensor3,
}

impl PartialEq for LieAlgebraSpec {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.entries == other.entries && self.labels == other.labels
    }
}

impl LieAlgebraSpec {
    /// Builds an algebra from 0-based entries. Zero values are dropped;
    /// entries must satisfy `i < j < dim`, `k < dim` and be unique.
    pub fn new(dim: usize, entries: Vec<Bracket>, labels: Option<Vec<String>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("algebra dimension must be positive".into()));
        }
        if let Some(l) = &labels {
            if l.len() != dim {
                return Err(Error::Structural(format!(
                    "{} labels supplied for dimension {dim}",
                    l.len()
                )));
            }
        }
        let mut seen = BTreeMap::new();
        let mut kept = Vec::with_capacity(entries.len());
        for (pos, b) in entries.into_iter().enumerate() {
            let name = || format!("entry #{} (i={}, j={}, k={})", pos + 1, b.i + 1, b.j + 1, b.k + 1);
            if b.i >= b.j {
                return Err(Error::Structural(format!("{}: requires i < j", name())));
            }
            if b.j >= dim || b.k >= dim {
                return Err(Error::Structural(format!("{}: index out of range 1..={dim}", name())));
            }
            if !b.value.is_finite() {
                return Err(Error::Structural(format!("{}: non-finite value", name())));
            }
            if seen.insert((b.i, b.j, b.k), pos).is_some() {
                return Err(Error::Structural(format!("{}: duplicate key", name())));
            }
            if b.value != 0.0 {
                kept.push(b);
            }
        }
        let mut spec = Self::from_parts(dim, kept, labels, Family::Custom);
        spec.family = spec.detect_family();
        Ok(spec)
    }

    /// Trusted constructor for generated families; entries are already canonical.
    fn from_parts(dim: usize, mut entries: Vec<Bracket>, labels: Option<Vec<String>>, family: Family) -> Self {
        entries.sort_by_key(|b| (b.i, b.j, b.k));
        let mut constants = Tensor3::zeros(dim);
        for b in &entries {
            constants.set(b.i, b.j, b.k, b.value);
            constants.set(b.j, b.i, b.k, -b.value);
        }
        LieAlgebraSpec { dim, entries, labels, family, constants }
    }

    /// The abelian algebra of the given dimension.
    pub fn abelian(dim: usize) -> Result<Self> {
        Self::new(dim, Vec::new(), None)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Bracket] {
        &self.entries
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Display label of basis vector `i` (0-based); falls back to `i + 1`.
    pub fn label(&self, i: usize) -> String {
        match &self.labels {
            Some(l) => l[i].clone(),
            None => (i + 1).to_string(),
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn is_abelian(&self) -> bool {
        self.entries.is_empty()
    }

    /// Dense antisymmetric structure constants `c[i][j][k] = c_ij^k`.
    pub fn constants(&self) -> &Tensor3 {
        &self.constants
    }

    /// Bracket of two coordinate vectors.
    pub fn bracket(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for b in &self.entries {
            out[b.k] += b.value * (x[b.i] * y[b.j] - x[b.j] * y[b.i]);
        }
        out
    }

    fn has_integer_constants(&self) -> bool {
        self.entries.iter().all(|b| b.value.fract() == 0.0)
    }

    fn detect_family(&self) -> Family {
        let heis = || {
            if self.dim % 2 == 1 && self.dim >= 3 {
                let n = (self.dim - 1) / 2;
                if heisenberg(n).is_ok_and(|h| h.entries == self.entries) {
                    return Some(Family::Heisenberg(n));
                }
            }
            None
        };
        let ut = || {
            // n(n-1)/2 = dim
            let n = ((1.0 + (1.0 + 8.0 * self.dim as f64).sqrt()) / 2.0).round() as usize;
            if n >= 3 && n * (n - 1) / 2 == self.dim && unitriangular(n).is_ok_and(|u| u.entries == self.entries) {
                return Some(Family::Unitriangular(n));
            }
            None
        };
        // ut_3 and heisenberg(1) share entries; pair labels break the tie
        let found = if self.labels.is_some() { ut().or_else(heis) } else { heis().or_else(ut) };
        if let Some(f) = found {
            return f;
        }
        Family::Custom
    }
}

/// `heisenberg(n)`: basis `E_1..E_n, E_{1+n}..E_{2n}, E_N` with `[E_i, E_{i+n}] = E_N`.
pub fn heisenberg(n: usize) -> Result<LieAlgebraSpec> {
    if n == 0 {
        return Err(Error::Domain("heisenberg(n) requires n >= 1".into()));
    }
    let dim = 2 * n + 1;
    let entries = (0..n).map(|i| Bracket { i, j: i + n, k: dim - 1, value: 1.0 }).collect();
    Ok(LieAlgebraSpec::from_parts(dim, entries, None, Family::Heisenberg(n)))
}

/// `unitriangular(n)`: the algebra `ut_n` in the `(j - i, i)` flat order of [`IndexMap`].
pub fn unitriangular(n: usize) -> Result<LieAlgebraSpec> {
    if n < 2 {
        return Err(Error::Domain("unitriangular(n) requires n >= 2".into()));
    }
    let map = IndexMap::unitriangular(n);
    let mut entries = Vec::new();
    // [B_ij, B_kl] = delta_jk B_il - delta_il B_kj
    for (a, &(i, j)) in map.pairs().iter().enumerate() {
        for (b, &(k, l)) in map.pairs().iter().enumerate() {
            if a >= b {
                continue;
            }
            if j == k {
                let target = map.flat_of_pair(i, l).expect("i < l");
                entries.push(Bracket { i: a, j: b, k: target, value: 1.0 });
            }
            if i == l {
                let target = map.flat_of_pair(k, j).expect("k < j");
                entries.push(Bracket { i: a, j: b, k: target, value: -1.0 });
            }
        }
    }
    Ok(LieAlgebraSpec::from_parts(map.len(), entries, Some(map.labels()), Family::Unitriangular(n)))
}

/// Outcome of [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub dim: usize,
    /// Max absolute Jacobiator component over all basis triples.
    pub jacobi_residual: f64,
    /// Dimensions of `g = g^1 ⊇ g^2 ⊇ ...` until it vanishes or stabilises.
    pub lower_central_series: Vec<usize>,
    /// Smallest `s` with `g^{s+1} = 0`, or `None` when the series stalls.
    pub nilpotency_step: Option<usize>,
    pub passed: bool,
}

/// Jacobi identity and nilpotency of an algebra.
pub fn validate(spec: &LieAlgebraSpec) -> ValidationReport {
    let jacobi_residual = jacobi_residual(spec);
    let tol = if spec.has_integer_constants() { 1e-12 } else { 1e-10 };
    let (series, step) = lower_central_series(spec, tol);
    ValidationReport {
        dim: spec.dim,
        jacobi_residual,
        lower_central_series: series,
        nilpotency_step: step,
        passed: jacobi_residual <= JACOBI_TOL && step.is_some(),
    }
}

fn basis_vector(dim: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[i] = 1.0;
    v
}

fn jacobi_residual(spec: &LieAlgebraSpec) -> f64 {
    let d = spec.dim;
    let c = spec.constants();
    let mut worst: f64 = 0.0;
    // the Jacobiator is totally antisymmetric, so i < j < k suffices
    for i in 0..d {
        for j in i + 1..d {
            for k in j + 1..d {
                for l in 0..d {
                    let mut s = 0.0;
                    for m in 0..d {
                        s += c.get(i, j, m) * c.get(m, k, l)
                            + c.get(j, k, m) * c.get(m, i, l)
                            + c.get(k, i, m) * c.get(m, j, l);
                    }
                    worst = worst.max(s.abs());
                }
            }
        }
    }
    worst
}

fn lower_central_series(spec: &LieAlgebraSpec, tol: f64) -> (Vec<usize>, Option<usize>) {
    let d = spec.dim;
    let mut current: Vec<Vec<f64>> = (0..d).map(|i| basis_vector(d, i)).collect();
    let mut dims = vec![d];
    loop {
        let mut images = Vec::new();
        for a in 0..d {
            let ea = basis_vector(d, a);
            for v in &current {
                let w = spec.bracket(&ea, v);
                if w.iter().any(|x| *x != 0.0) {
                    images.push(w);
                }
            }
        }
        let next = row_basis(&images, d, tol);
        let next_dim = next.len();
        if next_dim == 0 {
            dims.push(0);
            let step = dims.len() - 1;
            return (dims, Some(step));
        }
        if next_dim == *dims.last().unwrap() {
            dims.push(next_dim);
            return (dims, None);
        }
        dims.push(next_dim);
        current = next;
    }
}

/// Max over `i < j` of `|D[e_i,e_j] - [De_i,e_j] - [e_i,De_j]|_inf`; zero iff `D` is a derivation.
pub fn is_derivation(spec: &LieAlgebraSpec, d: &DMatrix<f64>) -> Result<f64> {
    let n = spec.dim;
    if d.nrows() != n || d.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: d.nrows().max(d.ncols()) });
    }
    let c = spec.constants();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            for r in 0..n {
                let mut v = 0.0;
                for k in 0..n {
                    v += d[(r, k)] * c.get(i, j, k);
                    v -= d[(k, i)] * c.get(k, j, r);
                    v -= d[(k, j)] * c.get(i, k, r);
                }
                worst = worst.max(v.abs());
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn commutator(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        a * b - b * a
    }

    #[test]
    fn abelian_is_one_step() {
        let r = validate(&LieAlgebraSpec::abelian(3).unwrap());
        assert!(r.passed);
        assert_eq!(r.nilpotency_step, Some(1));
        assert_eq!(r.jacobi_residual, 0.0);
    }

    #[test]
    fn heisenberg_entries() {
        let h1 = heisenberg(1).unwrap();
        assert_eq!(h1.dim(), 3);
        assert_eq!(h1.entries(), &[Bracket { i: 0, j: 1, k: 2, value: 1.0 }]);
        let h2 = heisenberg(2).unwrap();
        assert_eq!(
            h2.entries(),
            &[Bracket { i: 0, j: 2, k: 4, value: 1.0 }, Bracket { i: 1, j: 3, k: 4, value: 1.0 }]
        );
        assert!(matches!(heisenberg(0), Err(Error::Domain(_))));
    }

    #[test]
    fn families_validate_with_expected_steps() {
        for n in 1..=5 {
            let r = validate(&heisenberg(n).unwrap());
            assert!(r.passed);
            assert_eq!(r.jacobi_residual, 0.0);
            assert_eq!(r.nilpotency_step, Some(2));
        }
        for n in 2..=7 {
            let r = validate(&unitriangular(n).unwrap());
            assert!(r.passed, "ut_{n}");
            assert_eq!(r.jacobi_residual, 0.0);
            assert_eq!(r.nilpotency_step, Some((n - 1).max(1)));
        }
        assert!(matches!(unitriangular(1), Err(Error::Domain(_))));
    }

    #[test]
    fn non_nilpotent_is_rejected() {
        let spec = LieAlgebraSpec::new(2, vec![Bracket { i: 0, j: 1, k: 0, value: 1.0 }], None).unwrap();
        let r = validate(&spec);
        assert_eq!(r.nilpotency_step, None);
        assert!(!r.passed);
    }

    #[test]
    fn jacobi_violation_is_detected() {
        // [e1,e2]=e3, [e2,e3]=e1, [e3,e1]=e1 breaks Jacobi
        let spec = LieAlgebraSpec::new(
            3,
            vec![
                Bracket { i: 0, j: 1, k: 2, value: 1.0 },
                Bracket { i: 1, j: 2, k: 0, value: 1.0 },
                Bracket { i: 0, j: 2, k: 0, value: -1.0 },
            ],
            None,
        )
        .unwrap();
        assert!(validate(&spec).jacobi_residual > 0.5);
    }

    #[test]
    fn malformed_entries_are_named() {
        let e = LieAlgebraSpec::new(3, vec![Bracket { i: 1, j: 0, k: 2, value: 1.0 }], None).unwrap_err();
        assert!(matches!(&e, Error::Structural(m) if m.contains("entry #1") && m.contains("i < j")));
        let e = LieAlgebraSpec::new(3, vec![Bracket { i: 0, j: 3, k: 2, value: 1.0 }], None).unwrap_err();
        assert!(matches!(&e, Error::Structural(m) if m.contains("out of range")));
        let dup = vec![Bracket { i: 0, j: 1, k: 2, value: 1.0 }, Bracket { i: 0, j: 1, k: 2, value: 2.0 }];
        let e = LieAlgebraSpec::new(3, dup, None).unwrap_err();
        assert!(matches!(&e, Error::Structural(m) if m.contains("entry #2") && m.contains("duplicate")));
    }

    #[test]
    fn unitriangular_three_is_heisenberg_one() {
        let u = unitriangular(3).unwrap();
        assert_eq!(u.labels().unwrap(), &["12", "23", "13"]);
        // flat order (12, 23, 13) already matches E_1, E_2, E_3
        assert_eq!(u.entries(), heisenberg(1).unwrap().entries());
        assert_eq!(u.family(), Family::Unitriangular(3));
    }

    #[test]
    fn unitriangular_matches_matrix_commutators() {
        for n in 2..=5 {
            let spec = unitriangular(n).unwrap();
            let map = IndexMap::unitriangular(n);
            let elem = |(i, j): (usize, usize)| {
                let mut m = DMatrix::zeros(n, n);
                m[(i - 1, j - 1)] = 1.0;
                m
            };
            let mut count = 0;
            for a in 0..map.len() {
                for b in 0..map.len() {
                    let comm = commutator(&elem(map.pair_of_flat(a).unwrap()), &elem(map.pair_of_flat(b).unwrap()));
                    let mut expected = vec![0.0; map.len()];
                    for (p, q) in map.pairs().iter().copied() {
                        expected[map.flat_of_pair(p, q).unwrap()] = comm[(p - 1, q - 1)];
                    }
                    // nothing may land on or below the diagonal
                    assert!((0..n).all(|r| (0..=r).all(|s| comm[(r, s)] == 0.0)));
                    if a < b && expected.iter().any(|v| *v != 0.0) {
                        count += 1;
                    }
                    let mut ea = vec![0.0; map.len()];
                    let mut eb = vec![0.0; map.len()];
                    ea[a] = 1.0;
                    eb[b] = 1.0;
                    assert_eq!(spec.bracket(&ea, &eb), expected);
                }
            }
            assert_eq!(count, spec.entries().len());
        }
    }

    #[test]
    fn index_map_is_bijective() {
        let m = IndexMap::unitriangular(6);
        assert_eq!(m.len(), 15);
        for k in 0..m.len() {
            let (i, j) = m.pair_of_flat(k).unwrap();
            assert_eq!(m.flat_of_pair(i, j), Some(k));
        }
        assert_eq!(m.pair_of_flat(0), Some((1, 2)));
        assert_eq!(m.pair_of_flat(14), Some((1, 6)));
        assert_eq!(m.flat_of_pair(2, 1), None);
    }

    #[test]
    fn derivation_examples() {
        let ab = LieAlgebraSpec::abelian(3).unwrap();
        assert_eq!(is_derivation(&ab, &DMatrix::identity(3, 3)).unwrap(), 0.0);
        let h = heisenberg(1).unwrap();
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0]));
        assert!(is_derivation(&h, &d).unwrap() < 1e-15);
        assert_eq!(is_derivation(&h, &DMatrix::identity(3, 3)).unwrap(), 1.0);
        assert!(matches!(
            is_derivation(&h, &DMatrix::identity(2, 2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn family_detection_round_trips() {
        let h = heisenberg(3).unwrap();
        let copy = LieAlgebraSpec::new(h.dim(), h.entries().to_vec(), None).unwrap();
        assert_eq!(copy.family(), Family::Heisenberg(3));
        let u = unitriangular(5).unwrap();
        let copy = LieAlgebraSpec::new(u.dim(), u.entries().to_vec(), None).unwrap();
        assert_eq!(copy.family(), Family::Unitriangular(5));
        assert_eq!(LieAlgebraSpec::abelian(3).unwrap().family(), Family::Custom);
    }
}
