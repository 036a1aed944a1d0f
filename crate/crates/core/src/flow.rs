//! Ricci flow `dg/dt = -2 Ric(g)` on left-invariant metrics.
//!
//! Three right-hand sides are available. The general one contracts the full
//! Ricci tensor and evolves the packed lower triangle of `g`; the two
//! diagonal ones are the explicit ODE systems of the Heisenberg and
//! unitriangular families, valid because their natural bases keep diagonal
//! metrics diagonal.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::algebra::{Family, IndexMap, LieAlgebraSpec};
use crate::curvature::ricci_general;
use crate::error::{Error, Result};
use crate::metric::{MetricKind, MetricState};
use crate::ode::{self, OdeOptions, OdeSystem, StepStats};

pub const DEFAULT_RTOL: f64 = 1e-10;
pub const DEFAULT_ATOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsMode {
    General,
    HeisenbergDiag,
    UnitriangularDiag,
}

/// Where a trajectory is sampled.
#[derive(Debug, Clone, PartialEq)]
pub enum Sampling {
    /// `k >= 2` evenly spaced times including both endpoints.
    Linear(usize),
    /// `t0`, then `per_decade` log-uniform points per decade from
    /// `max(t0, start)` up to `t1`.
    Log { per_decade: usize, start: f64 },
    /// Explicit increasing times inside the span.
    Times(Vec<f64>),
}

impl Sampling {
    pub fn times(&self, t0: f64, t1: f64) -> Result<Vec<f64>> {
        match self {
            Sampling::Linear(k) => {
                if *k < 2 {
                    return Err(Error::Domain("linear sampling needs at least two points".into()));
                }
                let mut v: Vec<f64> = (0..*k).map(|i| t0 + (t1 - t0) * i as f64 / (*k - 1) as f64).collect();
                v[*k - 1] = t1;
                Ok(v)
            }
            Sampling::Log { per_decade, start } => {
                let lo = start.max(t0);
                if !(lo > 0.0) || *per_decade == 0 {
                    return Err(Error::Domain("log sampling needs a positive start and per_decade >= 1".into()));
                }
                let mut v = vec![t0];
                if lo >= t1 {
                    v.push(t1);
                    return Ok(v);
                }
                let decades = (t1 / lo).log10();
                let count = (decades * *per_decade as f64).ceil() as usize;
                for i in 0..=count {
                    let t = lo * 10f64.powf(decades * i as f64 / count as f64);
                    if t > *v.last().unwrap() {
                        v.push(t.min(t1));
                    }
                }
                *v.last_mut().unwrap() = t1;
                Ok(v)
            }
            Sampling::Times(ts) => Ok(ts.clone()),
        }
    }
}

/// Initial-value problem for the Ricci flow.
#[derive(Debug, Clone)]
pub struct FlowProblem {
    pub algebra: LieAlgebraSpec,
    pub g0: MetricState,
    pub t_span: (f64, f64),
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub rhs_mode: RhsMode,
    pub sampling: Sampling,
}

impl FlowProblem {
    /// Problem with default tolerances, 101 linear samples and the fastest
    /// right-hand side compatible with the inputs.
    pub fn new(algebra: LieAlgebraSpec, g0: MetricState, t_span: (f64, f64)) -> Result<Self> {
        let rhs_mode = auto_mode(&algebra, &g0);
        let p = FlowProblem {
            algebra,
            g0,
            t_span,
            rtol: DEFAULT_RTOL,
            atol: DEFAULT_ATOL,
            max_step: f64::INFINITY,
            rhs_mode,
            sampling: Sampling::Linear(101),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_mode(mut self, mode: RhsMode) -> Result<Self> {
        self.rhs_mode = mode;
        self.validate()?;
        Ok(self)
    }

    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    pub fn with_sampling(mut self, sampling: Sampling) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (t0, t1) = self.t_span;
        if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
            return Err(Error::Domain(format!("t_span requires t1 > t0, got ({t0}, {t1})")));
        }
        if !(self.rtol > 0.0 && self.atol > 0.0 && self.max_step > 0.0) {
            return Err(Error::Domain("tolerances and max_step must be positive".into()));
        }
        if self.algebra.dim() != self.g0.dim() {
            return Err(Error::DimensionMismatch { expected: self.algebra.dim(), got: self.g0.dim() });
        }
        check_mode(&self.algebra, self.rhs_mode, &self.g0)
    }

    /// Velocity `dg/dt` at `g` in this problem's mode.
    pub fn rhs(&self, t: f64, g: &MetricState) -> Result<Velocity> {
        rhs(&self.algebra, self.rhs_mode, g).map_err(|e| match e {
            Error::NotPositiveDefinite(reason) => Error::FlowBreakdown { t, reason },
            other => other,
        })
    }
}

/// Picks a diagonal fast path when the algebra is a known family and `g0` is diagonal.
pub fn auto_mode(algebra: &LieAlgebraSpec, g0: &MetricState) -> RhsMode {
    if g0.kind() != MetricKind::Diagonal {
        return RhsMode::General;
    }
    match algebra.family() {
        Family::Heisenberg(_) => RhsMode::HeisenbergDiag,
        Family::Unitriangular(_) => RhsMode::UnitriangularDiag,
        Family::Custom => RhsMode::General,
    }
}

fn check_mode(algebra: &LieAlgebraSpec, mode: RhsMode, g: &MetricState) -> Result<()> {
    let diag_required = |name: &str| {
        if g.kind() != MetricKind::Diagonal {
            return Err(Error::Unsupported(format!("{name} mode requires a diagonal metric")));
        }
        Ok(())
    };
    match (mode, algebra.family()) {
        (RhsMode::General, _) => Ok(()),
        (RhsMode::HeisenbergDiag, Family::Heisenberg(_)) => diag_required("heisenberg_diag"),
        (RhsMode::UnitriangularDiag, Family::Unitriangular(_)) => diag_required("unitriangular_diag"),
        (m, f) => Err(Error::Unsupported(format!("rhs mode {m:?} does not apply to algebra family {f:?}"))),
    }
}

/// `dg/dt` in the layout of the mode that produced it.
#[derive(Debug, Clone, PartialEq)]
pub enum Velocity {
    Diagonal(Vec<f64>),
    Full(DMatrix<f64>),
}

impl Velocity {
    pub fn to_matrix(&self) -> DMatrix<f64> {
        match self {
            Velocity::Diagonal(d) => DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)),
            Velocity::Full(m) => m.clone(),
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        match self {
            Velocity::Diagonal(d) => d.clone(),
            Velocity::Full(m) => m.diagonal().iter().copied().collect(),
        }
    }
}

/// Ricci-flow velocity `-2 Ric(g)` in the requested mode.
pub fn rhs(algebra: &LieAlgebraSpec, mode: RhsMode, g: &MetricState) -> Result<Velocity> {
    check_mode(algebra, mode, g)?;
    match mode {
        RhsMode::General => Ok(Velocity::Full(ricci_general(algebra, g)? * -2.0)),
        RhsMode::HeisenbergDiag => {
            let Family::Heisenberg(n) = algebra.family() else { unreachable!() };
            Ok(Velocity::Diagonal(heisenberg_velocity(n, g.as_diagonal().expect("checked"))))
        }
        RhsMode::UnitriangularDiag => {
            let Family::Unitriangular(n) = algebra.family() else { unreachable!() };
            Ok(Velocity::Diagonal(unitriangular_velocity(n, g.as_diagonal().expect("checked"))))
        }
    }
}

/// `g_i' = g_N / g_{i+n}`, `g_{i+n}' = g_N / g_i`, `g_N' = -g_N^2 Σ 1/(g_k g_{k+n})`.
pub fn heisenberg_velocity(n: usize, g: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; 2 * n + 1];
    heisenberg_velocity_into(n, g, &mut out);
    out
}

fn heisenberg_velocity_into(n: usize, g: &[f64], out: &mut [f64]) {
    let gn = g[2 * n];
    let mut sigma = 0.0;
    for i in 0..n {
        out[i] = gn / g[i + n];
        out[i + n] = gn / g[i];
        sigma += 1.0 / (g[i] * g[i + n]);
    }
    out[2 * n] = -gn * gn * sigma;
}

/// `g_ij' = Σ_{p<i} g_pj/g_pi - g_ij^2 Σ_{i<q<j} 1/(g_iq g_qj) + Σ_{r>j} g_ir/g_jr`,
/// with `g` in [`IndexMap`] order.
pub fn unitriangular_velocity(n: usize, g: &[f64]) -> Vec<f64> {
    let map = IndexMap::unitriangular(n);
    let mut out = vec![0.0; map.len()];
    unitriangular_velocity_into(&map, g, &mut out);
    out
}

fn unitriangular_velocity_into(map: &IndexMap, g: &[f64], out: &mut [f64]) {
    let n = map.n();
    let at = |i: usize, j: usize| g[map.flat_of_pair(i, j).expect("valid pair")];
    for (flat, &(i, j)) in map.pairs().iter().enumerate() {
        let gij = g[flat];
        let left: f64 = (1..i).map(|p| at(p, j) / at(p, i)).sum();
        let middle: f64 = (i + 1..j).map(|q| 1.0 / (at(i, q) * at(q, j))).sum();
        let right: f64 = (j + 1..=n).map(|r| at(i, r) / at(j, r)).sum();
        out[flat] = left - gij * gij * middle + right;
    }
}

fn pack_lower(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut v = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in 0..=i {
            v.push(m[(i, j)]);
        }
    }
    v
}

fn unpack_lower(v: &[f64], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in 0..=i {
            m[(i, j)] = v[k];
            m[(j, i)] = v[k];
            k += 1;
        }
    }
    m
}

struct FlowSystem<'a> {
    algebra: &'a LieAlgebraSpec,
    mode: RhsMode,
    dim: usize,
    map: Option<IndexMap>,
}

impl FlowSystem<'_> {
    fn state_len(&self) -> usize {
        match self.mode {
            RhsMode::General => self.dim * (self.dim + 1) / 2,
            _ => self.dim,
        }
    }

    fn metric(&self, y: &[f64]) -> Result<MetricState> {
        match self.mode {
            RhsMode::General => MetricState::full(unpack_lower(y, self.dim)),
            _ => MetricState::diagonal(y.to_vec()),
        }
    }
}

impl OdeSystem for FlowSystem<'_> {
    fn dim(&self) -> usize {
        self.state_len()
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> std::result::Result<(), String> {
        match self.mode {
            RhsMode::HeisenbergDiag => {
                heisenberg_velocity_into((self.dim - 1) / 2, y, dy);
                Ok(())
            }
            RhsMode::UnitriangularDiag => {
                unitriangular_velocity_into(self.map.as_ref().expect("set for this mode"), y, dy);
                Ok(())
            }
            RhsMode::General => {
                let g = self.metric(y).map_err(|e| e.to_string())?;
                let ric = ricci_general(self.algebra, &g).map_err(|e| e.to_string())?;
                dy.copy_from_slice(&pack_lower(&(ric * -2.0)));
                Ok(())
            }
        }
    }

    fn admissible(&self, y: &[f64]) -> bool {
        match self.mode {
            RhsMode::General => self.metric(y).is_ok(),
            _ => y.iter().all(|v| v.is_finite() && *v > 0.0),
        }
    }
}

/// The Heisenberg conserved quantities at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservedSet {
    /// `A_i = g_i / g_{i+n}`
    pub a: Vec<f64>,
    /// `B_{i+n} = g_{i+n} / g_i`
    pub b: Vec<f64>,
    /// `C_1 = g_1 ... g_n g_N`
    pub c1: f64,
    /// `C_2 = g_{1+n} ... g_{2n} g_N`
    pub c2: f64,
    /// `C = g_1 ... g_{2n} g_N^2 = C_1 C_2`
    pub c: f64,
}

impl ConservedSet {
    pub fn from_diagonal(n: usize, g: &[f64]) -> Result<Self> {
        if g.len() != 2 * n + 1 {
            return Err(Error::DimensionMismatch { expected: 2 * n + 1, got: g.len() });
        }
        let gn = g[2 * n];
        let a: Vec<f64> = (0..n).map(|i| g[i] / g[i + n]).collect();
        let b: Vec<f64> = (0..n).map(|i| g[i + n] / g[i]).collect();
        let c1 = g[..n].iter().product::<f64>() * gn;
        let c2 = g[n..2 * n].iter().product::<f64>() * gn;
        let c = g[..2 * n].iter().product::<f64>() * gn * gn;
        Ok(ConservedSet { a, b, c1, c2, c })
    }
}

/// A sampled solution of the flow.
#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    pub family: Family,
    /// True when the algebra has no brackets (the flow is static).
    pub abelian: bool,
    pub labels: Vec<String>,
    pub times: Vec<f64>,
    pub states: Vec<MetricState>,
    pub conserved: Option<Vec<ConservedSet>>,
    pub step_stats: StepStats,
}

impl FlowTrajectory {
    /// Builds a trajectory from externally computed diagonal states.
    pub fn from_diagonal_samples(algebra: &LieAlgebraSpec, times: Vec<f64>, states: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != states.len() {
            return Err(Error::DimensionMismatch { expected: times.len(), got: states.len() });
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("trajectory times must be strictly increasing".into()));
        }
        let states = states.into_iter().map(MetricState::diagonal).collect::<Result<Vec<_>>>()?;
        let mut traj = FlowTrajectory {
            family: algebra.family(),
            abelian: algebra.is_abelian(),
            labels: (0..algebra.dim()).map(|i| algebra.label(i)).collect(),
            times,
            states,
            conserved: None,
            step_stats: StepStats::default(),
        };
        traj.conserved = traj.conserved_ledger();
        Ok(traj)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Diagonal components of every state.
    pub fn diagonals(&self) -> Vec<Vec<f64>> {
        self.states.iter().map(|g| g.diagonal_entries()).collect()
    }

    fn heisenberg_n(&self) -> Option<usize> {
        match self.family {
            Family::Heisenberg(n) => Some(n),
            _ if self.abelian && self.labels.len() % 2 == 1 && self.labels.len() >= 3 => Some((self.labels.len() - 1) / 2),
            _ => None,
        }
    }

    fn conserved_ledger(&self) -> Option<Vec<ConservedSet>> {
        let n = self.heisenberg_n()?;
        self.states
            .iter()
            .map(|g| {
                let diagonal = g.as_diagonal().is_some() || crate::curvature::max_off_diagonal(&g.matrix()) == 0.0;
                diagonal.then(|| ConservedSet::from_diagonal(n, &g.diagonal_entries()).ok()).flatten()
            })
            .collect()
    }
}

/// Integrates the problem and samples it on `problem.sampling`.
pub fn integrate(problem: &FlowProblem) -> Result<FlowTrajectory> {
    problem.validate()?;
    let (t0, t1) = problem.t_span;
    let samples = problem.sampling.times(t0, t1)?;
    let dim = problem.algebra.dim();
    let map = match problem.algebra.family() {
        Family::Unitriangular(n) => Some(IndexMap::unitriangular(n)),
        _ => None,
    };
    let sys = FlowSystem { algebra: &problem.algebra, mode: problem.rhs_mode, dim, map };
    let y0 = match problem.rhs_mode {
        RhsMode::General => pack_lower(&problem.g0.matrix()),
        _ => problem.g0.as_diagonal().expect("validated").to_vec(),
    };
    let opts = OdeOptions {
        rtol: problem.rtol,
        atol: problem.atol,
        max_step: problem.max_step,
        ..OdeOptions::default()
    };
    let sol = ode::integrate(&sys, t0, t1, &y0, &samples, &opts)?;
    let mut states = Vec::with_capacity(sol.states.len());
    for (t, y) in sol.times.iter().zip(&sol.states) {
        let g = sys.metric(y).map_err(|e| Error::FlowBreakdown { t: *t, reason: e.to_string() })?;
        states.push(g);
    }
    let mut traj = FlowTrajectory {
        family: problem.algebra.family(),
        abelian: problem.algebra.is_abelian(),
        labels: (0..dim).map(|i| problem.algebra.label(i)).collect(),
        times: sol.times,
        states,
        conserved: None,
        step_stats: sol.stats,
    };
    traj.conserved = traj.conserved_ledger();
    Ok(traj)
}

/// Worst relative drift `max_t |Q(t)/Q(t0) - 1|` of each conserved quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c1: f64,
    pub c2: f64,
    pub c: f64,
    /// Largest of all the above.
    pub max: f64,
}

pub fn conserved(trajectory: &FlowTrajectory) -> Result<DriftReport> {
    if trajectory.heisenberg_n().is_none() {
        return Err(Error::Unsupported(format!(
            "conserved quantities are defined for the Heisenberg family, not {:?}",
            trajectory.family
        )));
    }
    let ledger = trajectory
        .conserved
        .as_ref()
        .ok_or_else(|| Error::Unsupported("conserved quantities need diagonal states".into()))?;
    let first = ledger.first().ok_or_else(|| Error::Domain("empty trajectory".into()))?;
    let rel = |q: f64, q0: f64| (q / q0 - 1.0).abs();
    let mut report = DriftReport {
        a: vec![0.0; first.a.len()],
        b: vec![0.0; first.b.len()],
        c1: 0.0,
        c2: 0.0,
        c: 0.0,
        max: 0.0,
    };
    for q in ledger {
        for i in 0..first.a.len() {
            report.a[i] = report.a[i].max(rel(q.a[i], first.a[i]));
            report.b[i] = report.b[i].max(rel(q.b[i], first.b[i]));
        }
        report.c1 = report.c1.max(rel(q.c1, first.c1));
        report.c2 = report.c2.max(rel(q.c2, first.c2));
        report.c = report.c.max(rel(q.c, first.c));
    }
    report.max = report
        .a
        .iter()
        .chain(&report.b)
        .chain([&report.c1, &report.c2, &report.c])
        .fold(0.0, |m, v| m.max(*v));
    Ok(report)
}

/// Lower bound `g_N(t) >= 1 / (g_N(0)^{-1} + Σ(0) t)` for Heisenberg diagonal flows.
pub fn heisenberg_center_lower_bound(n: usize, g0: &[f64], t: f64) -> f64 {
    let sigma0: f64 = (0..n).map(|k| 1.0 / (g0[k] * g0[k + n])).sum();
    1.0 / (1.0 / g0[2 * n] + sigma0 * t)
}

/// Exact solution of the three-dimensional Heisenberg flow from `(A0, B0, C0)`.
pub fn nil3_closed_form(a0: f64, b0: f64, c0: f64, t: f64) -> Result<(f64, f64, f64)> {
    if !(a0 > 0.0 && b0 > 0.0 && c0 > 0.0) {
        return Err(Error::Domain("initial components must be positive".into()));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("closed form is evaluated for t >= 0, got {t}")));
    }
    let k = a0 * b0 / (3.0 * c0);
    let grow = ((t + k) / k).cbrt();
    Ok((a0 * grow, b0 * grow, c0 / grow))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{heisenberg, unitriangular};

    #[test]
    fn heisenberg_rhs_example() {
        let h = heisenberg(1).unwrap();
        let g = MetricState::diagonal(vec![1.0, 2.0, 3.0]).unwrap();
        let v = rhs(&h, RhsMode::HeisenbergDiag, &g).unwrap();
        assert_eq!(v, Velocity::Diagonal(vec![1.5, 3.0, -4.5]));
        let general = rhs(&h, RhsMode::General, &g).unwrap().to_matrix();
        assert!((general - v.to_matrix()).amax() < 1e-14);
    }

    #[test]
    fn unitriangular_three_rhs_matches_nil3() {
        let u = unitriangular(3).unwrap();
        let g = MetricState::diagonal(vec![1.0, 2.0, 3.0]).unwrap();
        let v = rhs(&u, RhsMode::UnitriangularDiag, &g).unwrap();
        assert_eq!(v, Velocity::Diagonal(vec![1.5, 3.0, -4.5]));
    }

    #[test]
    fn abelian_rhs_is_zero() {
        let ab = LieAlgebraSpec::abelian(4).unwrap();
        let g = MetricState::diagonal(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(rhs(&ab, RhsMode::General, &g).unwrap().to_matrix().amax(), 0.0);
    }

    #[test]
    fn mode_mismatch_is_rejected() {
        let h = heisenberg(1).unwrap();
        let g = MetricState::identity(3).unwrap();
        assert!(matches!(rhs(&h, RhsMode::UnitriangularDiag, &g), Err(Error::Unsupported(_))));
        let full = crate::random::random_full_metric(3, 1);
        assert!(matches!(rhs(&h, RhsMode::HeisenbergDiag, &full), Err(Error::Unsupported(_))));
    }

    #[test]
    fn nil3_closed_form_values() {
        assert_eq!(nil3_closed_form(1.0, 1.0, 1.0, 0.0).unwrap(), (1.0, 1.0, 1.0));
        let (a, b, c) = nil3_closed_form(1.0, 1.0, 1.0, 1.0).unwrap();
        let f = 4f64.cbrt();
        assert!((a - f).abs() < 1e-15 && (b - f).abs() < 1e-15 && (c - 1.0 / f).abs() < 1e-15);
        assert!(nil3_closed_form(-1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn nil3_closed_form_solves_the_ode() {
        // central differences, error O(h^2)
        let (a0, b0, c0) = (2.0, 1.0, 3.0);
        for t in [0.5, 1.0, 4.0] {
            let mut errs = Vec::new();
            for h in [1e-2, 5e-3] {
                let (ap, _, _) = nil3_closed_form(a0, b0, c0, t + h).unwrap();
                let (am, _, _) = nil3_closed_form(a0, b0, c0, t - h).unwrap();
                let (_, b, c) = nil3_closed_form(a0, b0, c0, t).unwrap();
                errs.push(((ap - am) / (2.0 * h) - c / b).abs());
            }
            assert!(errs[0] < 1e-4, "{errs:?}");
            // halving h quarters the error
            assert!(errs[1] < 0.3 * errs[0], "{errs:?}");
        }
    }

    #[test]
    fn nil3_integration_matches_closed_form() {
        let p = FlowProblem::new(heisenberg(1).unwrap(), MetricState::identity(3).unwrap(), (0.0, 1.0)).unwrap();
        let traj = integrate(&p).unwrap();
        let last = traj.states.last().unwrap().diagonal_entries();
        let f = 4f64.cbrt();
        assert!((last[0] / f - 1.0).abs() < 1e-9);
        assert!((last[2] * f - 1.0).abs() < 1e-9);
    }

    #[test]
    fn abelian_trajectory_is_constant_and_conserves() {
        let g0 = MetricState::diagonal(vec![1.0, 2.0, 3.0]).unwrap();
        let p = FlowProblem::new(LieAlgebraSpec::abelian(3).unwrap(), g0.clone(), (0.0, 5.0)).unwrap();
        let traj = integrate(&p).unwrap();
        assert!(traj.states.iter().all(|g| (g.matrix() - g0.matrix()).amax() == 0.0));
        assert_eq!(conserved(&traj).unwrap().max, 0.0);
    }

    #[test]
    fn conserved_rejects_unitriangular() {
        let p = FlowProblem::new(unitriangular(4).unwrap(), MetricState::identity(6).unwrap(), (0.0, 1.0)).unwrap();
        let traj = integrate(&p).unwrap();
        assert!(matches!(conserved(&traj), Err(Error::Unsupported(_))));
    }

    #[test]
    fn closed_form_trajectory_conserves() {
        let h = heisenberg(1).unwrap();
        let times: Vec<f64> = (0..50).map(|k| k as f64 * 3.0).collect();
        let states = times
            .iter()
            .map(|t| {
                let (a, b, c) = nil3_closed_form(2.0, 0.5, 1.5, *t).unwrap();
                vec![a, b, c]
            })
            .collect();
        let traj = FlowTrajectory::from_diagonal_samples(&h, times, states).unwrap();
        assert!(conserved(&traj).unwrap().max < 1e-10);
    }

    #[test]
    fn general_mode_on_full_metric_stays_positive() {
        let h = heisenberg(1).unwrap();
        let g0 = crate::random::random_full_metric(3, 8);
        let p = FlowProblem::new(h, g0, (0.0, 2.0)).unwrap();
        assert_eq!(p.rhs_mode, RhsMode::General);
        let traj = integrate(&p).unwrap();
        assert_eq!(traj.len(), 101);
        assert!(traj.conserved.is_none());
    }

    #[test]
    fn log_sampling_covers_span() {
        let ts = Sampling::Log { per_decade: 10, start: 1.0 }.times(0.0, 1e3).unwrap();
        assert_eq!(ts[0], 0.0);
        assert_eq!(ts[1], 1.0);
        assert_eq!(*ts.last().unwrap(), 1e3);
        assert_eq!(ts.len(), 32);
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn packing_round_trips() {
        let g = crate::random::random_full_metric(4, 2).matrix();
        assert_eq!(unpack_lower(&pack_lower(&g), 4), g);
    }
}
