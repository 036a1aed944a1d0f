//! Explicit nilsoliton metrics, the scaling diffeomorphisms relating them
//! across time, and a certificate for `Ric = cI + D` with `D` a derivation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::algebra::{heisenberg, is_derivation, unitriangular, IndexMap, LieAlgebraSpec};
use crate::asymptotics::AsymptoticProfile;
use crate::curvature::Geometry;
use crate::error::{Error, Result};
use crate::flow::{self, RhsMode};
use crate::linalg::null_space_psd;
use crate::metric::MetricState;

/// Both certificate residuals must fall below this.
pub const CERTIFICATE_TOL: f64 = 1e-10;

/// A diagonal scaling of the coframe, `θ^I ↦ k_I s^{e_I} θ^I`, so that
/// `g_I ↦ (k_I s^{e_I})^2 g_I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingDiffeo {
    pub coefficients: Vec<f64>,
    pub exponents: Vec<f64>,
}

impl ScalingDiffeo {
    pub fn power(exponents: Vec<f64>) -> Self {
        ScalingDiffeo { coefficients: vec![1.0; exponents.len()], exponents }
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    /// Scale factor of `θ^I` at `s`.
    pub fn factor(&self, i: usize, s: f64) -> f64 {
        self.coefficients[i] * s.powf(self.exponents[i])
    }
}

/// `(a, b) = (-(n+1)/(2(n+2)), -(n+1)/(n+2))`.
pub fn heisenberg_eta_exponents(n: usize) -> (f64, f64) {
    let a = -0.5 * (n as f64 + 1.0) / (n as f64 + 2.0);
    (a, 2.0 * a)
}

/// Solves `1/(n+2) = 2a + 1` and `-n/(n+2) = 2b + 1`, the conditions for
/// `t η_t^* g_∞(1)` to reproduce the power laws of `g_∞(t)`.
pub fn solve_heisenberg_exponents(n: usize) -> (f64, f64) {
    let m = n as f64 + 2.0;
    ((1.0 / m - 1.0) / 2.0, (-(n as f64) / m - 1.0) / 2.0)
}

/// `η_t` on `heisenberg(n)`.
pub fn heisenberg_eta(n: usize) -> ScalingDiffeo {
    let (a, b) = heisenberg_eta_exponents(n);
    let mut e = vec![a; 2 * n];
    e.push(b);
    ScalingDiffeo::power(e)
}

/// `η_t` on `unitriangular(n)`, exponents `-(j-i)/n` in [`IndexMap`] order.
pub fn unitriangular_eta(n: usize) -> ScalingDiffeo {
    let map = IndexMap::unitriangular(n);
    ScalingDiffeo::power(map.pairs().iter().map(|&(i, j)| -((j - i) as f64) / n as f64).collect())
}

/// Blowdown diffeomorphism `φ_s` for a Heisenberg profile.
pub fn heisenberg_phi(profile: &AsymptoticProfile) -> ScalingDiffeo {
    let n = profile.n;
    let m = n as f64 + 2.0;
    let base = m.powf(-1.0 / (2.0 * m)) * profile.c.powf(-1.0 / (4.0 * m));
    let e = (n as f64 + 1.0) / (2.0 * m);
    let mut coefficients: Vec<f64> = profile.a.iter().map(|a| base * a.powf(-0.25)).collect();
    coefficients.extend(profile.b().iter().map(|b| base * b.powf(-0.25)));
    coefficients.push(coefficients[0] * coefficients[n]);
    let mut exponents = vec![e; 2 * n];
    exponents.push(2.0 * e);
    ScalingDiffeo { coefficients, exponents }
}

/// Pulls a diagonal metric back along `diffeo` at parameter `s`.
pub fn pullback(g: &MetricState, diffeo: &ScalingDiffeo, s: f64) -> Result<MetricState> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("pullback parameter must be positive, got {s}")));
    }
    let d = g.as_diagonal().ok_or_else(|| Error::Unsupported("pullback acts on diagonal metrics".into()))?;
    if d.len() != diffeo.dim() {
        return Err(Error::DimensionMismatch { expected: diffeo.dim(), got: d.len() });
    }
    MetricState::diagonal(d.iter().enumerate().map(|(i, v)| v * diffeo.factor(i, s).powi(2)).collect())
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("soliton time must be positive, got {t}")));
    }
    Ok(())
}

/// `g_∞(t) = diag(t^{1/(n+2)}, ..., t^{1/(n+2)}, t^{-n/(n+2)} / (n+2))`.
pub fn soliton_heisenberg(n: usize, t: f64) -> Result<MetricState> {
    if n == 0 {
        return Err(Error::Domain("heisenberg soliton needs n >= 1".into()));
    }
    check_time(t)?;
    let m = n as f64 + 2.0;
    let mut d = vec![t.powf(1.0 / m); 2 * n];
    d.push(t.powf(-(n as f64) / m) / m);
    MetricState::diagonal(d)
}

/// Time derivative of [`soliton_heisenberg`].
pub fn soliton_heisenberg_derivative(n: usize, t: f64) -> Result<Vec<f64>> {
    let g = soliton_heisenberg(n, t)?;
    let m = n as f64 + 2.0;
    let d = g.as_diagonal().expect("diagonal");
    let mut v: Vec<f64> = d[..2 * n].iter().map(|x| x / (m * t)).collect();
    v.push(-(n as f64) / m * d[2 * n] / t);
    Ok(v)
}

/// `g_ij(t) = A^{j-i} n^{-(j-i-1)} t^{1 - 2(j-i)/n}` in [`IndexMap`] order.
pub fn soliton_unitriangular(n: usize, t: f64, a: f64) -> Result<MetricState> {
    if n < 2 {
        return Err(Error::Domain("unitriangular soliton needs n >= 2".into()));
    }
    check_time(t)?;
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Domain(format!("soliton parameter A must be positive, got {a}")));
    }
    let nf = n as f64;
    let map = IndexMap::unitriangular(n);
    MetricState::diagonal(
        map.pairs()
            .iter()
            .map(|&(i, j)| {
                let k = (j - i) as f64;
                a.powf(k) * nf.powf(1.0 - k) * t.powf(1.0 - 2.0 * k / nf)
            })
            .collect(),
    )
}

/// Time derivative of [`soliton_unitriangular`].
pub fn soliton_unitriangular_derivative(n: usize, t: f64, a: f64) -> Result<Vec<f64>> {
    let g = soliton_unitriangular(n, t, a)?;
    let map = IndexMap::unitriangular(n);
    Ok(g.as_diagonal()
        .expect("diagonal")
        .iter()
        .zip(map.pairs())
        .map(|(v, &(i, j))| v * (1.0 - 2.0 * (j - i) as f64 / n as f64) / t)
        .collect())
}

/// `max_I |rhs(g(t))_I - g_I'(t)|` for a soliton, with the flow's diagonal right-hand side.
pub fn soliton_flow_residual(spec: &LieAlgebraSpec, g: &MetricState, derivative: &[f64]) -> Result<f64> {
    let mode = flow::auto_mode(spec, g);
    if mode == RhsMode::General {
        return Err(Error::Unsupported("soliton check needs a family algebra and a diagonal metric".into()));
    }
    let v = flow::rhs(spec, mode, g)?.diagonal();
    Ok(v.iter().zip(derivative).fold(0.0, |m: f64, (x, y)| m.max((x - y).abs())))
}

pub fn heisenberg_soliton_residual(n: usize, t: f64) -> Result<f64> {
    soliton_flow_residual(&heisenberg(n)?, &soliton_heisenberg(n, t)?, &soliton_heisenberg_derivative(n, t)?)
}

pub fn unitriangular_soliton_residual(n: usize, t: f64, a: f64) -> Result<f64> {
    soliton_flow_residual(
        &unitriangular(n)?,
        &soliton_unitriangular(n, t, a)?,
        &soliton_unitriangular_derivative(n, t, a)?,
    )
}

/// `(1/s) φ_s^* g_asym(st)` for the profile's asymptotic solution.
pub fn blowdown_at(profile: &AsymptoticProfile, t: f64, s: f64) -> Result<MetricState> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("blowdown parameter must be positive, got {s}")));
    }
    let g = MetricState::diagonal(profile.evaluate(s * t)?)?;
    pullback(&g, &heisenberg_phi(profile), s)?.scaled(1.0 / s)
}

/// Parameters at which [`blowdown_limit`] confirms `s`-independence.
pub const BLOWDOWN_CHECKS: [f64; 3] = [1.0, 10.0, 1e3];

/// The blowdown limit of the profile at time `t`.
///
/// The rescaled asymptotic solution is independent of `s`, so the limit is
/// read off at `s = 1` once the values at [`BLOWDOWN_CHECKS`] agree.
pub fn blowdown_limit(profile: &AsymptoticProfile, t: f64) -> Result<MetricState> {
    let first = blowdown_at(profile, t, BLOWDOWN_CHECKS[0])?;
    let base = first.diagonal_entries();
    for s in &BLOWDOWN_CHECKS[1..] {
        let other = blowdown_at(profile, t, *s)?.diagonal_entries();
        let spread = base.iter().zip(&other).fold(0.0, |m: f64, (x, y)| m.max((x - y).abs() / x.abs()));
        if spread > 1e-12 {
            return Err(Error::Domain(format!("blowdown differs by {spread:e} between s = 1 and s = {s}")));
        }
    }
    Ok(first)
}

/// Evidence that `Ric_endo = cI + D` with `D` a derivation.
#[derive(Debug, Clone, PartialEq)]
pub struct SolitonCertificate {
    pub c: f64,
    pub d: DMatrix<f64>,
    /// `max |Ric_endo - cI - D|`
    pub ricci_residual: f64,
    /// Largest entry of `D[x,y] - [Dx,y] - [x,Dy]` on basis pairs.
    pub derivation_residual: f64,
    pub valid: bool,
}

/// Rows of the linear map `D ↦ D[e_i,e_j] - [De_i,e_j] - [e_i,De_j]`, with
/// `D_pq` at column `p * dim + q`.
fn derivation_constraints(spec: &LieAlgebraSpec) -> DMatrix<f64> {
    let n = spec.dim();
    let c = spec.constants();
    let pairs = n * (n.saturating_sub(1)) / 2;
    let mut m = DMatrix::zeros(pairs * n, n * n);
    let mut row = 0;
    for i in 0..n {
        for j in i + 1..n {
            for r in 0..n {
                for k in 0..n {
                    m[(row, r * n + k)] += c.get(i, j, k);
                    m[(row, k * n + i)] -= c.get(k, j, r);
                    m[(row, k * n + j)] -= c.get(i, k, r);
                }
                row += 1;
            }
        }
    }
    m
}

/// Orthonormal basis of the derivation algebra, one flattened `D` per column.
pub fn derivation_basis(spec: &LieAlgebraSpec) -> DMatrix<f64> {
    let m = derivation_constraints(spec);
    null_space_psd(&(m.transpose() * &m), 1e-10)
}

/// Least-squares fit of `Ric_endo` by `cI + D` over derivations `D`.
///
/// `D` ranges over the derivation algebra exactly, so the derivation
/// residual only carries rounding error; among optimal pairs the one of
/// minimal norm is returned (for abelian algebras `c = 0`, `D = 0`).
pub fn lauret_certify(spec: &LieAlgebraSpec, g: &MetricState) -> Result<SolitonCertificate> {
    let n = spec.dim();
    let ric = Geometry::new(spec, g)?.ricci_endomorphism();
    let basis = derivation_basis(spec);
    let r = basis.ncols();
    let mut design = DMatrix::zeros(n * n, 1 + r);
    for i in 0..n {
        design[(i * n + i, 0)] = 1.0;
    }
    design.view_mut((0, 1), (n * n, r)).copy_from(&basis);
    let target = DVector::from_fn(n * n, |k, _| ric[(k / n, k % n)]);
    let svd = design.svd(true, true);
    let tol = 1e-12 * svd.singular_values.max().max(1.0);
    let x = svd.solve(&target, tol).map_err(|e| Error::Domain(e.to_string()))?;
    let c = x[0];
    let dvec = &basis * x.rows(1, r);
    let d = DMatrix::from_fn(n, n, |p, q| dvec[p * n + q]);
    let mut fit = d.clone();
    for i in 0..n {
        fit[(i, i)] += c;
    }
    let ricci_residual = (&ric - fit).amax();
    let derivation_residual = is_derivation(spec, &d)?;
    Ok(SolitonCertificate {
        c,
        valid: ricci_residual < CERTIFICATE_TOL && derivation_residual < CERTIFICATE_TOL,
        d,
        ricci_residual,
        derivation_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::predict;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn heisenberg_soliton_values() {
        assert_eq!(soliton_heisenberg(1, 1.0).unwrap().diagonal_entries(), vec![1.0, 1.0, 1.0 / 3.0]);
        let g = soliton_heisenberg(4, 1.0).unwrap().diagonal_entries();
        assert_eq!(g, [vec![1.0; 8], vec![1.0 / 6.0]].concat());
        assert!(soliton_heisenberg(1, 0.0).is_err());
    }

    #[test]
    fn unitriangular_soliton_values() {
        let t: f64 = 2.5;
        let g = soliton_unitriangular(3, t, 1.0).unwrap().diagonal_entries();
        assert!(close(&g, &[t.cbrt(), t.cbrt(), 1.0 / (3.0 * t.cbrt())], 1e-15));
        let g = soliton_unitriangular(4, 1.0, 1.0).unwrap().diagonal_entries();
        assert_eq!(g, vec![1.0, 1.0, 1.0, 0.25, 0.25, 1.0 / 16.0]);
        assert!(soliton_unitriangular(4, 1.0, 0.0).is_err());
        assert!(soliton_unitriangular(4, -1.0, 1.0).is_err());
    }

    #[test]
    fn solitons_solve_the_flow() {
        for t in [1.0, 10.0] {
            for n in 1..=5 {
                assert!(heisenberg_soliton_residual(n, t).unwrap() < 1e-12);
            }
        }
        for n in 3..=10 {
            assert!(unitriangular_soliton_residual(n, 1.0, 1.0).unwrap() < 1e-12);
        }
    }

    #[test]
    fn eta_exponents_agree_with_linear_solve() {
        for n in 1..=6 {
            let (a, b) = heisenberg_eta_exponents(n);
            let (sa, sb) = solve_heisenberg_exponents(n);
            assert!((a - sa).abs() < 1e-15 && (b - sb).abs() < 1e-15);
        }
        assert!((heisenberg_eta_exponents(1).0 + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn eta_pullback_generates_solitons() {
        let g1 = soliton_heisenberg(1, 1.0).unwrap();
        assert_eq!(pullback(&g1, &heisenberg_eta(1), 1.0).unwrap(), g1);
        for t in [0.5, 2.0, 10.0] {
            let g = pullback(&g1, &heisenberg_eta(1), t).unwrap().scaled(t).unwrap();
            assert!(close(&g.diagonal_entries(), &soliton_heisenberg(1, t).unwrap().diagonal_entries(), 1e-15));
            let u1 = soliton_unitriangular(5, 1.0, 1.0).unwrap();
            let u = pullback(&u1, &unitriangular_eta(5), t).unwrap().scaled(t).unwrap();
            assert!(close(&u.diagonal_entries(), &soliton_unitriangular(5, t, 1.0).unwrap().diagonal_entries(), 1e-14));
        }
        assert!(pullback(&g1, &heisenberg_eta(1), 0.0).is_err());
    }

    #[test]
    fn phi_satisfies_the_centre_constraint() {
        let p = predict(2, &[0.5, 2.0, 1.5, 0.7, 3.0]).unwrap();
        let phi = heisenberg_phi(&p);
        for s in [1.0, 7.0] {
            for i in 0..2 {
                let lhs = phi.factor(4, s);
                assert!((lhs / (phi.factor(i, s) * phi.factor(i + 2, s)) - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn blowdown_of_unit_nil3() {
        let p = predict(1, &[1.0, 1.0, 1.0]).unwrap();
        let g = blowdown_limit(&p, 1.0).unwrap().diagonal_entries();
        assert!(close(&g, &[1.0, 1.0, 1.0 / 3.0], 1e-14), "{g:?}");
    }

    #[test]
    fn blowdown_is_s_independent() {
        let g0 = crate::random::random_diag_metric(7, 3, crate::random::DEFAULT_RANGE);
        let p = predict(3, g0.as_diagonal().unwrap()).unwrap();
        let expect = soliton_heisenberg(3, 2.0).unwrap().diagonal_entries();
        for s in [1.0, 10.0, 1e3, 1e6] {
            let g = blowdown_at(&p, 2.0, s).unwrap().diagonal_entries();
            assert!(close(&g, &expect, 1e-12), "{s}: {g:?}");
        }
    }

    #[test]
    fn nil3_soliton_certificate() {
        let h = heisenberg(1).unwrap();
        let cert = lauret_certify(&h, &soliton_heisenberg(1, 1.0).unwrap()).unwrap();
        assert!(cert.valid);
        assert!((cert.c + 0.5).abs() < 1e-10);
        let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0]));
        assert!((&cert.d - expect).amax() < 1e-10, "{}", cert.d);
        assert!(cert.derivation_residual < 1e-12);
    }

    #[test]
    fn abelian_certificate_is_zero() {
        let ab = LieAlgebraSpec::abelian(3).unwrap();
        let g = crate::random::random_full_metric(3, 4);
        let cert = lauret_certify(&ab, &g).unwrap();
        assert!(cert.valid);
        assert!(cert.c.abs() < 1e-14 && cert.d.amax() < 1e-14);
    }

    #[test]
    fn every_diagonal_nil3_metric_certifies() {
        let h = heisenberg(1).unwrap();
        for d in [vec![1.0, 1.0, 1.0], vec![1.0, 1.3, 0.7]] {
            let cert = lauret_certify(&h, &MetricState::diagonal(d).unwrap()).unwrap();
            assert!(cert.valid, "{cert:?}");
        }
        let cert = lauret_certify(&h, &MetricState::identity(3).unwrap()).unwrap();
        assert!((cert.c + 1.5).abs() < 1e-10);
    }

    /// Independent oracle: stacked least squares over all `(c, D)` with the
    /// derivation rows weighted by 1e6.
    fn weighted_residual(spec: &LieAlgebraSpec, g: &MetricState) -> f64 {
        let n = spec.dim();
        let ric = Geometry::new(spec, g).unwrap().ricci_endomorphism();
        let cons = derivation_constraints(spec);
        let rows = n * n + cons.nrows();
        let mut a = DMatrix::zeros(rows, 1 + n * n);
        let mut b = DVector::zeros(rows);
        for p in 0..n {
            for q in 0..n {
                let k = p * n + q;
                a[(k, 1 + k)] = 1.0;
                if p == q {
                    a[(k, 0)] = 1.0;
                }
                b[k] = ric[(p, q)];
            }
        }
        a.view_mut((n * n, 1), (cons.nrows(), n * n)).copy_from(&(cons * 1e6));
        let x = a.clone().svd(true, true).solve(&b, 1e-9).unwrap();
        (0..n * n).map(|k| (ric[(k / n, k % n)] - x[0] * ((k / n == k % n) as u8 as f64) - x[1 + k]).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn non_soliton_on_heisenberg_two() {
        let h = heisenberg(2).unwrap();
        let g = MetricState::diagonal(vec![1.0, 2.0, 1.0, 1.0, 1.0]).unwrap();
        let cert = lauret_certify(&h, &g).unwrap();
        assert!(!cert.valid);
        assert!(cert.ricci_residual > 1e-3, "{cert:?}");
        assert!(weighted_residual(&h, &g) > 1e-3);
        let soliton = soliton_heisenberg(2, 1.0).unwrap();
        assert!(weighted_residual(&h, &soliton) < 1e-6);
    }

    #[test]
    fn unitriangular_certificates_share_c() {
        let u = unitriangular(4).unwrap();
        let cs: Vec<f64> = [0.5, 1.0, 2.0]
            .iter()
            .map(|a| {
                let cert = lauret_certify(&u, &soliton_unitriangular(4, 1.0, *a).unwrap()).unwrap();
                assert!(cert.valid, "{cert:?}");
                let off = cert.d.clone() - DMatrix::from_diagonal(&cert.d.diagonal());
                assert!(off.amax() < 1e-10);
                cert.c
            })
            .collect();
        assert!((cs[0] - cs[1]).abs() < 1e-10 && (cs[1] - cs[2]).abs() < 1e-10, "{cs:?}");
    }
}
