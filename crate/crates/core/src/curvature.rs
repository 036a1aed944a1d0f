//! Curvature of left-invariant metrics, computed purely from structure
//! constants and metric components in a fixed (not necessarily orthonormal)
//! basis.
//!
//! Conventions: `<R(X,Y)Z,W> = <∇_X Z, ∇_Y W> - <∇_Y Z, ∇_X W> - <∇_[X,Y] Z, W>`,
//! so `R_ijji / (g_ii g_jj - g_ij^2)` is the sectional curvature of the plane
//! `e_i ∧ e_j` and `R_ij = g^km R_kijm`.
//!
//! Every quantity is expressed through three lowered tensors that are built
//! once per metric:
//!
//! * `<[e_i, e_j], e_l> = c_ij^m g_ml`,
//! * the adjoint constants `a_ij^k = c_il^m g_jm g^kl` of `(ad_{e_i})^*`,
//! * their symmetrisation `a_ij^k + a_ji^k`, raw and lowered.
//!
//! Ricci is contracted directly in `O(dim^4)` without materialising the
//! Riemann tensor, which is only built on request.

use nalgebra::DMatrix;

use crate::algebra::{IndexMap, LieAlgebraSpec};
use crate::error::{Error, Result};
use crate::linalg::{dot, Tensor3, Tensor4};
use crate::metric::MetricState;

/// Default absolute tolerance on curvature components.
pub const CURVATURE_TOL: f64 = 1e-12;

/// Planes with `g_ii g_jj - g_ij^2` below this are rejected.
pub const DEGENERATE_PLANE: f64 = 1e-14;

/// Precomputed contractions for one `(algebra, metric)` pair.
#[derive(Debug, Clone)]
pub struct Geometry<'a> {
    spec: &'a LieAlgebraSpec,
    g: DMatrix<f64>,
    ginv: DMatrix<f64>,
    /// `<[e_i, e_j], e_l>`
    bracket_low: Tensor3,
    adjoint: Tensor3,
    /// `a_ij^k + a_ji^k`
    sym: Tensor3,
    /// `(a_ij^p + a_ji^p) g_pq`
    sym_low: Tensor3,
    ill_conditioned: bool,
}

fn check_dims(spec: &LieAlgebraSpec, g: &MetricState) -> Result<()> {
    if spec.dim() != g.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: g.dim() });
    }
    Ok(())
}

impl<'a> Geometry<'a> {
    pub fn new(spec: &'a LieAlgebraSpec, metric: &MetricState) -> Result<Self> {
        check_dims(spec, metric)?;
        let d = spec.dim();
        let g = metric.matrix();
        let ginv = metric.inverse().clone();

        let mut bracket_low = Tensor3::zeros(d);
        for b in spec.entries() {
            for l in 0..d {
                let v = b.value * g[(b.k, l)];
                if v != 0.0 {
                    bracket_low.add(b.i, b.j, l, v);
                    bracket_low.add(b.j, b.i, l, -v);
                }
            }
        }

        // a_ij^k = g^kl <[e_i, e_l], e_j>
        let mut adjoint = Tensor3::zeros(d);
        for i in 0..d {
            for l in 0..d {
                let row = bracket_low.fibre(i, l);
                for j in 0..d {
                    let v = row[j];
                    if v == 0.0 {
                        continue;
                    }
                    for k in 0..d {
                        let gk = ginv[(k, l)];
                        if gk != 0.0 {
                            adjoint.add(i, j, k, gk * v);
                        }
                    }
                }
            }
        }

        let mut sym = Tensor3::zeros(d);
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    sym.set(i, j, k, adjoint.get(i, j, k) + adjoint.get(j, i, k));
                }
            }
        }
        let sym_low = lower(&sym, &g);

        Ok(Geometry {
            spec,
            g,
            ginv,
            bracket_low,
            adjoint,
            sym,
            sym_low,
            ill_conditioned: metric.is_ill_conditioned(),
        })
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn ill_conditioned(&self) -> bool {
        self.ill_conditioned
    }

    pub fn adjoint_constants(&self) -> &Tensor3 {
        &self.adjoint
    }

    /// `γ_ij^k` with `∇_{e_i} e_j = γ_ij^k e_k`.
    pub fn christoffel(&self) -> Tensor3 {
        let d = self.dim();
        let bl = &self.bracket_low;
        let mut out = Tensor3::zeros(d);
        let mut inner = vec![0.0; d];
        for i in 0..d {
            for j in 0..d {
                for (l, slot) in inner.iter_mut().enumerate() {
                    *slot = bl.get(i, j, l) - bl.get(i, l, j) - bl.get(j, l, i);
                }
                if inner.iter().all(|v| *v == 0.0) {
                    continue;
                }
                for k in 0..d {
                    let v: f64 = (0..d).map(|l| self.ginv[(k, l)] * inner[l]).sum();
                    out.set(i, j, k, 0.5 * v);
                }
            }
        }
        out
    }

    /// One component `R_ijkl` of the (4,0) Riemann tensor.
    pub fn riemann_component(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let c = self.spec.constants();
        let bl = &self.bracket_low;
        let pair = |a: usize, b: usize, x: usize, y: usize| dot(bl.fibre(a, b), c.fibre(x, y));
        let mut s = 2.0 * pair(i, j, k, l) + pair(i, k, j, l) - pair(i, l, j, k);
        for p in 0..self.dim() {
            let cij = c.get(i, j, p);
            if cij != 0.0 {
                s += cij * (bl.get(p, l, k) - bl.get(p, k, l));
            }
            let ckl = c.get(k, l, p);
            if ckl != 0.0 {
                s += ckl * (bl.get(p, j, i) - bl.get(p, i, j));
            }
        }
        s += dot(self.sym_low.fibre(i, k), self.sym.fibre(j, l));
        s -= dot(self.sym_low.fibre(i, l), self.sym.fibre(j, k));
        0.25 * s
    }

    /// The full `dim^4` Riemann tensor.
    pub fn riemann(&self) -> Tensor4 {
        let d = self.dim();
        let mut out = Tensor4::zeros(d);
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        out.set(i, j, k, l, self.riemann_component(i, j, k, l));
                    }
                }
            }
        }
        out
    }

    /// Ricci `(0,2)` tensor by direct contraction of the component formula.
    pub fn ricci(&self) -> DMatrix<f64> {
        let d = self.dim();
        let c = self.spec.constants();
        let bl = &self.bracket_low;
        let ginv = &self.ginv;

        // w[j][k][q] = g^km c_jm^q
        let w = raise_middle(c, ginv);
        // v[p][j][k] = <[e_p, e_j], e_m> g^km
        let mut v = Tensor3::zeros(d);
        // u[p][k][j] = g^km <[e_p, e_m], e_j>
        let mut u = Tensor3::zeros(d);
        for p in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let mut sv = 0.0;
                    let mut su = 0.0;
                    for m in 0..d {
                        let gkm = ginv[(k, m)];
                        if gkm != 0.0 {
                            sv += bl.get(p, j, m) * gkm;
                            su += bl.get(p, m, j) * gkm;
                        }
                    }
                    v.set(p, j, k, sv);
                    u.set(p, k, j, su);
                }
            }
        }
        // sw[i][k][q] = g^km (a_im^q + a_mi^q)
        let sw = raise_middle(&self.sym, ginv);

        // traces over the contracted pair
        let mut h = vec![0.0; d];
        let mut s = vec![0.0; d];
        for k in 0..d {
            for m in 0..d {
                let gkm = ginv[(k, m)];
                if gkm == 0.0 {
                    continue;
                }
                for q in 0..d {
                    h[q] += gkm * bl.get(k, m, q);
                    s[q] += gkm * self.sym.get(k, m, q);
                }
            }
        }

        let mut x = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += dot(bl.fibre(k, i), w.fibre(j, k));
                }
                x[(i, j)] = acc;
            }
        }

        let mut ric = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let mut t = 2.0 * x[(i, j)] + x[(j, i)];
                t -= dot(&h, c.fibre(i, j));
                for k in 0..d {
                    for p in 0..d {
                        let cki = c.get(k, i, p);
                        if cki != 0.0 {
                            t += cki * (u.get(p, k, j) - v.get(p, j, k));
                        }
                        let cjk = c.get(j, k, p);
                        if cjk != 0.0 {
                            t += cjk * (v.get(p, i, k) - u.get(p, k, i));
                        }
                    }
                    t += dot(self.sym_low.fibre(k, j), sw.fibre(i, k));
                }
                t -= dot(&s, self.sym_low.fibre(i, j));
                ric[(i, j)] = 0.25 * t;
            }
        }
        ric
    }

    /// Ricci endomorphism `g^{-1} Ric`.
    pub fn ricci_endomorphism(&self) -> DMatrix<f64> {
        &self.ginv * self.ricci()
    }

    /// Sectional curvature of the plane `e_i ∧ e_j`.
    pub fn sectional(&self, i: usize, j: usize) -> Result<f64> {
        let d = self.dim();
        if i >= d || j >= d {
            return Err(Error::DimensionMismatch { expected: d, got: i.max(j) + 1 });
        }
        if i == j {
            return Err(Error::DegeneratePlane { i: i + 1, j: j + 1, area: 0.0 });
        }
        let area = self.g[(i, i)] * self.g[(j, j)] - self.g[(i, j)] * self.g[(i, j)];
        if area <= DEGENERATE_PLANE {
            return Err(Error::DegeneratePlane { i: i + 1, j: j + 1, area });
        }
        Ok(self.riemann_component(i, j, j, i) / area)
    }

    /// Scalar curvature `g^ij R_ij`.
    pub fn scalar(&self) -> f64 {
        scalar_from_ricci(&self.ricci(), &self.ginv)
    }

    pub fn metric_inverse(&self) -> &DMatrix<f64> {
        &self.ginv
    }
}

fn scalar_from_ricci(ric: &DMatrix<f64>, ginv: &DMatrix<f64>) -> f64 {
    ric.component_mul(ginv).sum()
}

/// `out[i][j][q] = t[i][j][p] g_pq`
fn lower(t: &Tensor3, g: &DMatrix<f64>) -> Tensor3 {
    let d = t.dim();
    let mut out = Tensor3::zeros(d);
    for i in 0..d {
        for j in 0..d {
            let f = t.fibre(i, j);
            if f.iter().all(|v| *v == 0.0) {
                continue;
            }
            for q in 0..d {
                let v: f64 = (0..d).map(|p| f[p] * g[(p, q)]).sum();
                out.set(i, j, q, v);
            }
        }
    }
    out
}

/// `out[i][k][q] = g^km t[i][m][q]`
fn raise_middle(t: &Tensor3, ginv: &DMatrix<f64>) -> Tensor3 {
    let d = t.dim();
    let mut out = Tensor3::zeros(d);
    for i in 0..d {
        for m in 0..d {
            let f = t.fibre(i, m);
            if f.iter().all(|v| *v == 0.0) {
                continue;
            }
            for k in 0..d {
                let gkm = ginv[(k, m)];
                if gkm == 0.0 {
                    continue;
                }
                for (q, val) in f.iter().enumerate() {
                    out.add(i, k, q, gkm * val);
                }
            }
        }
    }
    out
}

/// Adjoint structure constants `a_ij^k = c_il^m g_jm g^kl`.
pub fn adjoint_constants(spec: &LieAlgebraSpec, g: &MetricState) -> Result<Tensor3> {
    Ok(Geometry::new(spec, g)?.adjoint.clone())
}

pub fn christoffel(spec: &LieAlgebraSpec, g: &MetricState) -> Result<Tensor3> {
    Ok(Geometry::new(spec, g)?.christoffel())
}

pub fn ricci_general(spec: &LieAlgebraSpec, g: &MetricState) -> Result<DMatrix<f64>> {
    Ok(Geometry::new(spec, g)?.ricci())
}

pub fn riemann_general(spec: &LieAlgebraSpec, g: &MetricState) -> Result<Tensor4> {
    Ok(Geometry::new(spec, g)?.riemann())
}

/// Sectional curvature; `i`, `j` are 0-based.
pub fn sectional(spec: &LieAlgebraSpec, g: &MetricState, i: usize, j: usize) -> Result<f64> {
    Geometry::new(spec, g)?.sectional(i, j)
}

pub fn scalar(spec: &LieAlgebraSpec, g: &MetricState) -> Result<f64> {
    Ok(Geometry::new(spec, g)?.scalar())
}

fn check_positive(g: &[f64], expected: usize) -> Result<()> {
    if g.len() != expected {
        return Err(Error::DimensionMismatch { expected, got: g.len() });
    }
    if let Some((i, v)) = g.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::NotPositiveDefinite(format!("diagonal entry {} is {v}", i + 1)));
    }
    Ok(())
}

/// Closed-form diagonal Ricci of `heisenberg(n)` for a diagonal metric
/// `(g_1..g_n, g_{1+n}..g_{2n}, g_N)`.
pub fn ricci_heisenberg_diag(n: usize, g: &[f64]) -> Result<Vec<f64>> {
    check_positive(g, 2 * n + 1)?;
    let gn = g[2 * n];
    let sigma: f64 = (0..n).map(|k| 1.0 / (g[k] * g[k + n])).sum();
    let mut r = vec![0.0; 2 * n + 1];
    for i in 0..n {
        r[i] = -0.5 * gn / g[i + n];
        r[i + n] = -0.5 * gn / g[i];
    }
    r[2 * n] = 0.5 * gn * gn * sigma;
    Ok(r)
}

/// Closed-form diagonal Ricci of `unitriangular(n)`; `g` is in [`IndexMap`] order.
pub fn ricci_unitriangular_diag(n: usize, g: &[f64]) -> Result<Vec<f64>> {
    let map = IndexMap::unitriangular(n);
    check_positive(g, map.len())?;
    let at = |i: usize, j: usize| g[map.flat_of_pair(i, j).expect("valid pair")];
    let mut r = vec![0.0; map.len()];
    for (flat, &(i, j)) in map.pairs().iter().enumerate() {
        let gij = g[flat];
        let left: f64 = (1..i).map(|p| at(p, j) / at(p, i)).sum();
        let middle: f64 = (i + 1..j).map(|q| 1.0 / (at(i, q) * at(q, j))).sum();
        let right: f64 = (j + 1..=n).map(|s| at(i, s) / at(j, s)).sum();
        r[flat] = 0.5 * (-left + gij * gij * middle - right);
    }
    Ok(r)
}

/// Which sectional curvatures to include in a [`CurvatureBundle`].
#[derive(Debug, Clone, Default, PartialEq)]
pub enum SectionalRequest {
    #[default]
    None,
    /// 0-based planes.
    Planes(Vec<(usize, usize)>),
    All,
}

#[derive(Debug, Clone, Default)]
pub struct CurvatureOptions {
    pub riemann: bool,
    pub sectional: SectionalRequest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectionalValue {
    /// 0-based plane indices.
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// Every curvature quantity of one `(algebra, metric)` pair.
#[derive(Debug, Clone)]
pub struct CurvatureBundle {
    pub dim: usize,
    pub christoffel: Tensor3,
    pub riemann: Option<Tensor4>,
    pub ricci: DMatrix<f64>,
    pub scalar: f64,
    pub sectional: Option<Vec<SectionalValue>>,
    pub ill_conditioned: bool,
}

impl CurvatureBundle {
    pub fn compute(spec: &LieAlgebraSpec, g: &MetricState, opts: &CurvatureOptions) -> Result<Self> {
        let geo = Geometry::new(spec, g)?;
        let ricci = geo.ricci();
        let scalar = scalar_from_ricci(&ricci, geo.metric_inverse());
        let planes: Vec<(usize, usize)> = match &opts.sectional {
            SectionalRequest::None => Vec::new(),
            SectionalRequest::Planes(p) => p.clone(),
            SectionalRequest::All => {
                let d = spec.dim();
                (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect()
            }
        };
        let sectional = if matches!(opts.sectional, SectionalRequest::None) {
            None
        } else {
            Some(
                planes
                    .into_iter()
                    .map(|(i, j)| geo.sectional(i, j).map(|value| SectionalValue { i, j, value }))
                    .collect::<Result<Vec<_>>>()?,
            )
        };
        Ok(CurvatureBundle {
            dim: spec.dim(),
            christoffel: geo.christoffel(),
            riemann: opts.riemann.then(|| geo.riemann()),
            ricci,
            scalar,
            sectional,
            ill_conditioned: geo.ill_conditioned(),
        })
    }

    /// Trace of the Ricci endomorphism, computed independently of `scalar`.
    pub fn ricci_trace(&self, g: &MetricState) -> f64 {
        (g.inverse() * &self.ricci).trace()
    }
}

/// Diagonal of a square matrix as a vector.
pub fn diagonal_of(m: &DMatrix<f64>) -> Vec<f64> {
    m.diagonal().iter().copied().collect()
}

/// Largest off-diagonal magnitude.
pub fn max_off_diagonal(m: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                worst = worst.max(m[(i, j)].abs());
            }
        }
    }
    worst
}
