//! Named experiments that reproduce each result as a JSON report plus CSV tables.

use std::path::PathBuf;
use std::time::Instant;

use clap::ValueEnum;
use nilflow::asymptotics::{check_heisenberg_asymptotics, predict, AsymptoticsReport};
use nilflow::curvature::{max_off_diagonal, ricci_general, ricci_heisenberg_diag, ricci_unitriangular_diag};
use nilflow::flow::{self, nil3_closed_form, rhs, FlowProblem, RhsMode, Sampling};
use nilflow::random::{random_diag_metric, DEFAULT_RANGE};
use nilflow::soliton::{
    blowdown_at, blowdown_limit, heisenberg_soliton_residual, lauret_certify, pullback, soliton_heisenberg,
    soliton_unitriangular, unitriangular_eta, unitriangular_soliton_residual,
};
use nilflow::{heisenberg, unitriangular, Error, Family, LieAlgebraSpec, MetricState, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ExperimentKind {
    Nil3Reference,
    HeisenbergAsymptotics,
    HeisenbergSoliton,
    UtSoliton,
    RicciDiagSweep,
    OracleEquivalence,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Nil3Reference => "nil3_reference",
            ExperimentKind::HeisenbergAsymptotics => "heisenberg_asymptotics",
            ExperimentKind::HeisenbergSoliton => "heisenberg_soliton",
            ExperimentKind::UtSoliton => "ut_soliton",
            ExperimentKind::RicciDiagSweep => "ricci_diag_sweep",
            ExperimentKind::OracleEquivalence => "oracle_equivalence",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Heisenberg,
    Unitriangular,
}

impl FamilyName {
    pub fn build(self, n: usize) -> Result<LieAlgebraSpec> {
        match self {
            FamilyName::Heisenberg => heisenberg(n),
            FamilyName::Unitriangular => unitriangular(n),
        }
    }
}

/// Experiment parameters; unset fields take per-experiment defaults, and the
/// report echoes the resolved values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<usize>>,
    /// Number of random initial metrics per size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_base: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Soliton scale parameters `A`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_values: Option<Vec<f64>>,
    /// Largest `n` for which unitriangular certificates are computed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certify_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn named(experiment: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment,
            family: None,
            sizes: None,
            seeds: None,
            seed_base: None,
            rtol: None,
            atol: None,
            t_end: None,
            threshold: None,
            a_values: None,
            certify_max: None,
            out_dir: None,
        }
    }

    /// Fills every unset field with the experiment's default and checks ranges.
    pub fn resolve(mut self) -> Result<Self> {
        use ExperimentKind::*;
        let kind = self.experiment;
        let (sizes, t_end): (Vec<usize>, f64) = match kind {
            Nil3Reference => (vec![1], 10.0),
            HeisenbergAsymptotics => (vec![1, 2], 1e6),
            HeisenbergSoliton => ((1..=5).collect(), 10.0),
            UtSoliton => ((3..=10).collect(), 10.0),
            RicciDiagSweep => (vec![6], 0.0),
            OracleEquivalence => (vec![4], 0.0),
        };
        self.sizes.get_or_insert(sizes);
        if matches!(kind, HeisenbergAsymptotics | Nil3Reference) {
            self.t_end.get_or_insert(t_end);
        }
        let seeds = match kind {
            HeisenbergAsymptotics => 3,
            HeisenbergSoliton => 3,
            RicciDiagSweep | OracleEquivalence => 100,
            _ => 0,
        };
        if seeds > 0 {
            self.seeds.get_or_insert(seeds);
            self.seed_base.get_or_insert(0);
        }
        if matches!(kind, Nil3Reference | HeisenbergAsymptotics) {
            self.rtol.get_or_insert(flow::DEFAULT_RTOL);
            self.atol.get_or_insert(flow::DEFAULT_ATOL);
        }
        match kind {
            Nil3Reference => {
                self.threshold.get_or_insert(1e-6);
            }
            HeisenbergAsymptotics => {
                self.threshold.get_or_insert(0.02);
            }
            HeisenbergSoliton | UtSoliton => {
                self.threshold.get_or_insert(1e-12);
            }
            RicciDiagSweep => {
                self.threshold.get_or_insert(1e-13);
                self.family.get_or_insert(FamilyName::Unitriangular);
            }
            OracleEquivalence => {
                self.threshold.get_or_insert(1e-12);
            }
        }
        if kind == UtSoliton {
            self.a_values.get_or_insert(vec![0.5, 1.0, 2.0]);
            self.certify_max.get_or_insert(8);
        }
        self.check()?;
        Ok(self)
    }

    fn check(&self) -> Result<()> {
        let min = match (self.experiment, self.family) {
            (ExperimentKind::UtSoliton, _) => 3,
            (ExperimentKind::RicciDiagSweep, Some(FamilyName::Unitriangular)) => 3,
            (ExperimentKind::Nil3Reference, _) => 1,
            _ => 1,
        };
        let sizes = self.sizes.as_deref().unwrap_or(&[]);
        if sizes.is_empty() {
            return Err(Error::Domain("sizes must not be empty".into()));
        }
        if let Some(n) = sizes.iter().find(|n| **n < min || **n > 12) {
            return Err(Error::Domain(format!("family size {n} outside {min}..=12")));
        }
        if self.experiment == ExperimentKind::Nil3Reference && sizes != [1] {
            return Err(Error::Domain("nil3_reference is defined for size 1 only".into()));
        }
        for (name, v) in [("t_end", self.t_end), ("rtol", self.rtol), ("atol", self.atol), ("threshold", self.threshold)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Domain(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if self.experiment == ExperimentKind::HeisenbergAsymptotics && self.t_end.unwrap_or(0.0) < 100.0 {
            return Err(Error::Domain("heisenberg_asymptotics needs t_end >= 100".into()));
        }
        if let Some(a) = self.a_values.as_deref() {
            if a.is_empty() || a.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::Domain("a_values must be nonempty and positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Criterion {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Criterion {
    fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Criterion { name: name.into(), value, threshold, pass: value < threshold }
    }

    fn holds(name: impl Into<String>, ok: bool) -> Self {
        Criterion { name: name.into(), value: if ok { 1.0 } else { 0.0 }, threshold: 1.0, pass: ok }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub experiment: ExperimentKind,
    pub version: &'static str,
    pub inputs: ExperimentConfig,
    pub metrics: Value,
    pub criteria: Vec<Criterion>,
    pub pass: bool,
    pub wall_clock_seconds: f64,
}

/// A CSV table written next to the report.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub file_name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

fn num_rows(rows: Vec<Vec<f64>>) -> Vec<Vec<String>> {
    rows.into_iter().map(|r| r.into_iter().map(|v| v.to_string()).collect()).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

struct Outcome {
    metrics: Value,
    criteria: Vec<Criterion>,
    artifacts: Vec<Artifact>,
}

pub fn run(config: ExperimentConfig) -> Result<(Report, Vec<Artifact>)> {
    let config = config.resolve()?;
    let start = Instant::now();
    let outcome = match config.experiment {
        ExperimentKind::Nil3Reference => nil3_reference(&config)?,
        ExperimentKind::HeisenbergAsymptotics => heisenberg_asymptotics(&config)?,
        ExperimentKind::HeisenbergSoliton => heisenberg_soliton_check(&config)?,
        ExperimentKind::UtSoliton => ut_soliton(&config)?,
        ExperimentKind::RicciDiagSweep => ricci_diag_sweep(&config)?,
        ExperimentKind::OracleEquivalence => oracle_equivalence(&config)?,
    };
    let report = Report {
        experiment: config.experiment,
        version: nilflow::VERSION,
        pass: outcome.criteria.iter().all(|c| c.pass),
        inputs: config,
        metrics: outcome.metrics,
        criteria: outcome.criteria,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((report, outcome.artifacts))
}

fn nil3_reference(cfg: &ExperimentConfig) -> Result<Outcome> {
    let t_end = cfg.t_end.expect("resolved");
    let p = FlowProblem::new(heisenberg(1)?, MetricState::identity(3)?, (0.0, t_end))?
        .with_tolerances(cfg.rtol.expect("resolved"), cfg.atol.expect("resolved"))
        .with_sampling(Sampling::Linear(201));
    let traj = flow::integrate(&p)?;
    let mut worst: f64 = 0.0;
    let mut rows = Vec::with_capacity(traj.len());
    for (t, g) in traj.times.iter().zip(&traj.states) {
        let (a, b, c) = nil3_closed_form(1.0, 1.0, 1.0, *t)?;
        let d = g.diagonal_entries();
        for (x, y) in d.iter().zip([a, b, c]) {
            worst = worst.max((x / y - 1.0).abs());
        }
        rows.push(vec![*t, d[0], d[1], d[2], a, b, c]);
    }
    Ok(Outcome {
        metrics: json!({
            "max_relative_error": worst,
            "final_state": traj.states.last().map(|g| g.diagonal_entries()),
            "accepted_steps": traj.step_stats.accepted,
            "rejected_steps": traj.step_stats.rejected,
        }),
        criteria: vec![Criterion::below("max relative error vs closed form", worst, cfg.threshold.expect("resolved"))],
        artifacts: vec![Artifact {
            file_name: "nil3_reference.csv".into(),
            header: ["t", "g_1", "g_2", "g_3", "exact_1", "exact_2", "exact_3"].map(String::from).to_vec(),
            rows: num_rows(rows),
        }],
    })
}

fn heisenberg_asymptotics(cfg: &ExperimentConfig) -> Result<Outcome> {
    let sizes = cfg.sizes.clone().expect("resolved");
    let (seeds, base) = (cfg.seeds.expect("resolved"), cfg.seed_base.expect("resolved"));
    let t_end = cfg.t_end.expect("resolved");
    let threshold = cfg.threshold.expect("resolved");
    let jobs: Vec<(usize, u64)> = sizes.iter().flat_map(|&n| (0..seeds).map(move |s| (n, base + s))).collect();
    let reports: Vec<AsymptoticsReport> = jobs
        .par_iter()
        .map(|&(n, seed)| {
            let g0 = random_diag_metric(2 * n + 1, seed, DEFAULT_RANGE);
            check_heisenberg_asymptotics(n, g0.as_diagonal().expect("diagonal"), t_end, threshold)
        })
        .collect::<Result<_>>()?;
    let mut criteria = Vec::new();
    let mut rows = Vec::new();
    for ((n, seed), rep) in jobs.iter().zip(&reports) {
        criteria.push(Criterion::below(format!("n={n} seed={seed}: deviation at t_end"), rep.final_deviation, threshold));
        criteria.push(Criterion::holds(
            format!("n={n} seed={seed}: deviation decreases over the last two decades"),
            rep.final_deviation < rep.earlier_deviation,
        ));
        for d in &rep.decades {
            rows.push(vec![n.to_string(), seed.to_string(), d.t.to_string(), d.max.to_string()]);
        }
    }
    Ok(Outcome {
        metrics: json!({ "runs": reports }),
        criteria,
        artifacts: vec![Artifact {
            file_name: "heisenberg_asymptotics.csv".into(),
            header: ["n", "seed", "t", "max_deviation"].map(String::from).to_vec(),
            rows,
        }],
    })
}

fn heisenberg_soliton_check(cfg: &ExperimentConfig) -> Result<Outcome> {
    let sizes = cfg.sizes.clone().expect("resolved");
    let (seeds, base) = (cfg.seeds.expect("resolved"), cfg.seed_base.expect("resolved"));
    let tol = cfg.threshold.expect("resolved");
    let times = [0.5, 1.0, 2.0, 10.0];
    let mut criteria = Vec::new();
    let mut per_n = Vec::new();
    for &n in &sizes {
        let mut residual: f64 = 0.0;
        for t in times {
            residual = residual.max(heisenberg_soliton_residual(n, t)?);
        }
        let (mut spread, mut distance) = (0.0_f64, 0.0_f64);
        for seed in base..base + seeds {
            let g0 = random_diag_metric(2 * n + 1, seed, DEFAULT_RANGE);
            let profile = predict(n, g0.as_diagonal().expect("diagonal"))?;
            for t in times {
                let limit = blowdown_limit(&profile, t)?.diagonal_entries();
                distance = distance.max(max_abs_diff(&limit, &soliton_heisenberg(n, t)?.diagonal_entries()));
                for s in [1.0, 10.0, 1e3, 1e6] {
                    spread = spread.max(max_abs_diff(&blowdown_at(&profile, t, s)?.diagonal_entries(), &limit));
                }
            }
        }
        let cert = lauret_certify(&heisenberg(n)?, &soliton_heisenberg(n, 1.0)?)?;
        criteria.push(Criterion::below(format!("n={n}: flow residual"), residual, tol));
        criteria.push(Criterion::below(format!("n={n}: blowdown s-spread"), spread, tol));
        criteria.push(Criterion::below(format!("n={n}: blowdown vs soliton"), distance, tol));
        criteria.push(Criterion::holds(format!("n={n}: certificate valid"), cert.valid));
        per_n.push(json!({
            "n": n,
            "flow_residual": residual,
            "blowdown_spread": spread,
            "blowdown_distance": distance,
            "certificate": nilflow::io::certificate_json(&cert),
        }));
    }
    Ok(Outcome { metrics: json!({ "sizes": per_n }), criteria, artifacts: Vec::new() })
}

fn ut_soliton(cfg: &ExperimentConfig) -> Result<Outcome> {
    let sizes = cfg.sizes.clone().expect("resolved");
    let tol = cfg.threshold.expect("resolved");
    let a_values = cfg.a_values.clone().expect("resolved");
    let certify_max = cfg.certify_max.expect("resolved");
    let results: Vec<(usize, f64, f64, Option<Vec<nilflow::SolitonCertificate>>)> = sizes
        .par_iter()
        .map(|&n| {
            let mut residual: f64 = 0.0;
            let mut eta: f64 = 0.0;
            for &a in &a_values {
                let g1 = soliton_unitriangular(n, 1.0, a)?;
                for t in [0.5, 1.0, 2.0, 10.0] {
                    residual = residual.max(unitriangular_soliton_residual(n, t, a)?);
                    let pulled = pullback(&g1, &unitriangular_eta(n), t)?.scaled(t)?;
                    eta = eta.max(max_abs_diff(&pulled.diagonal_entries(), &soliton_unitriangular(n, t, a)?.diagonal_entries()));
                }
            }
            let certs = if n <= certify_max {
                let spec = unitriangular(n)?;
                Some(a_values.iter().map(|&a| lauret_certify(&spec, &soliton_unitriangular(n, 1.0, a)?)).collect::<Result<Vec<_>>>()?)
            } else {
                None
            };
            Ok((n, residual, eta, certs))
        })
        .collect::<Result<_>>()?;
    let mut criteria = Vec::new();
    let mut per_n = Vec::new();
    let mut rows = Vec::new();
    for (n, residual, eta, certs) in &results {
        criteria.push(Criterion::below(format!("n={n}: flow residual"), *residual, tol));
        criteria.push(Criterion::below(format!("n={n}: eta identity"), *eta, tol));
        let mut cert_json = Vec::new();
        if let Some(certs) = certs {
            let cs: Vec<f64> = certs.iter().map(|c| c.c).collect();
            let spread = cs.iter().fold(0.0_f64, |m, c| m.max((c - cs[0]).abs()));
            criteria.push(Criterion::holds(format!("n={n}: certificates valid"), certs.iter().all(|c| c.valid)));
            criteria.push(Criterion::below(format!("n={n}: c independent of A"), spread, 1e-10));
            for (a, c) in a_values.iter().zip(certs) {
                cert_json.push(json!({
                    "A": a,
                    "c": c.c,
                    "D_diagonal": c.d.diagonal().iter().copied().collect::<Vec<f64>>(),
                    "ricci_residual": c.ricci_residual,
                    "derivation_residual": c.derivation_residual,
                    "valid": c.valid,
                }));
            }
        }
        rows.push(vec![n.to_string(), residual.to_string(), eta.to_string()]);
        per_n.push(json!({ "n": n, "flow_residual": residual, "eta_identity": eta, "certificates": cert_json }));
    }
    Ok(Outcome {
        metrics: json!({ "sizes": per_n }),
        criteria,
        artifacts: vec![Artifact {
            file_name: "ut_soliton.csv".into(),
            header: ["n", "flow_residual", "eta_identity"].map(String::from).to_vec(),
            rows,
        }],
    })
}

/// Per-seed (max off-diagonal, closed-form relative error).
fn diag_sweep(spec: &LieAlgebraSpec, seeds: std::ops::Range<u64>) -> Result<Vec<(u64, f64, f64)>> {
    seeds
        .into_par_iter()
        .map(|seed| {
            let g = random_diag_metric(spec.dim(), seed, DEFAULT_RANGE);
            let ric = ricci_general(spec, &g)?;
            let diag: Vec<f64> = ric.diagonal().iter().copied().collect();
            let d = g.as_diagonal().expect("diagonal");
            let closed = match spec.family() {
                Family::Heisenberg(n) => ricci_heisenberg_diag(n, d)?,
                Family::Unitriangular(n) => ricci_unitriangular_diag(n, d)?,
                Family::Custom => return Err(Error::Unsupported("sweep needs a family algebra".into())),
            };
            let scale = diag.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            Ok((seed, max_off_diagonal(&ric), max_abs_diff(&closed, &diag) / scale))
        })
        .collect()
}

fn ricci_diag_sweep(cfg: &ExperimentConfig) -> Result<Outcome> {
    let family = cfg.family.expect("resolved");
    let (seeds, base) = (cfg.seeds.expect("resolved"), cfg.seed_base.expect("resolved"));
    let mut criteria = Vec::new();
    let mut rows = Vec::new();
    let mut per_n = Vec::new();
    for &n in cfg.sizes.as_deref().expect("resolved") {
        let spec = family.build(n)?;
        let sweep = diag_sweep(&spec, base..base + seeds)?;
        let off = sweep.iter().fold(0.0_f64, |m, s| m.max(s.1));
        criteria.push(Criterion::below(format!("n={n}: max off-diagonal Ricci"), off, cfg.threshold.expect("resolved")));
        for (seed, o, r) in &sweep {
            rows.push(vec![n.to_string(), seed.to_string(), o.to_string(), r.to_string()]);
        }
        per_n.push(json!({ "n": n, "dim": spec.dim(), "max_off_diagonal": off }));
    }
    Ok(Outcome {
        metrics: json!({ "family": family, "sizes": per_n }),
        criteria,
        artifacts: vec![Artifact {
            file_name: "ricci_diag_sweep.csv".into(),
            header: ["n", "seed", "max_off_diagonal", "closed_form_rel_err"].map(String::from).to_vec(),
            rows,
        }],
    })
}

/// Closed-form Ricci and diagonal flow right-hand sides against the general
/// contraction, for Heisenberg sizes `1..=m` and unitriangular sizes `3..=m+2`.
fn oracle_equivalence(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (seeds, base) = (cfg.seeds.expect("resolved"), cfg.seed_base.expect("resolved"));
    let tol = cfg.threshold.expect("resolved");
    let m = cfg.sizes.as_deref().expect("resolved").iter().copied().max().expect("nonempty");
    let mut specs: Vec<(LieAlgebraSpec, RhsMode)> = (1..=m).map(|n| Ok((heisenberg(n)?, RhsMode::HeisenbergDiag))).collect::<Result<_>>()?;
    for n in 3..=m + 2 {
        specs.push((unitriangular(n)?, RhsMode::UnitriangularDiag));
    }
    let mut criteria = Vec::new();
    let mut per_algebra = Vec::new();
    for (spec, mode) in &specs {
        let sweep = diag_sweep(spec, base..base + seeds)?;
        let ricci_err = sweep.iter().fold(0.0_f64, |m, s| m.max(s.2));
        let rhs_err = (base..base + seeds)
            .into_par_iter()
            .map(|seed| {
                let g = random_diag_metric(spec.dim(), seed, DEFAULT_RANGE);
                let fast = rhs(spec, *mode, &g)?.to_matrix();
                let slow = rhs(spec, RhsMode::General, &g)?.to_matrix();
                Ok((&fast - &slow).amax() / slow.amax())
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0_f64, f64::max);
        let name = format!("{:?}", spec.family());
        criteria.push(Criterion::below(format!("{name}: closed-form Ricci"), ricci_err, tol));
        criteria.push(Criterion::below(format!("{name}: diagonal flow rhs"), rhs_err, tol));
        per_algebra.push(json!({ "family": spec.family(), "ricci_rel_err": ricci_err, "rhs_rel_err": rhs_err }));
    }
    Ok(Outcome { metrics: json!({ "algebras": per_algebra }), criteria, artifacts: Vec::new() })
}
