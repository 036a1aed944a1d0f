//! The ten acceptance criteria. Each prints one PASS/FAIL line; the test
//! fails if any criterion does.

use std::time::Instant;

use nilflow::asymptotics::{check_heisenberg_asymptotics, comparison_lemma_check, predict, DEFAULT_THRESHOLD};
use nilflow::curvature::{max_off_diagonal, ricci_general, ricci_heisenberg_diag, ricci_unitriangular_diag, Geometry};
use nilflow::flow::{self, conserved, heisenberg_center_lower_bound, nil3_closed_form, FlowProblem, Sampling};
use nilflow::random::{random_diag_metric, random_full_metric, DEFAULT_RANGE};
use nilflow::soliton::{
    blowdown_at, blowdown_limit, lauret_certify, pullback, soliton_heisenberg, soliton_unitriangular,
    unitriangular_eta, unitriangular_soliton_residual,
};
use nilflow::{heisenberg, unitriangular, LieAlgebraSpec, MetricState};

type Outcome = Result<String, String>;

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn nil3_reference() -> Outcome {
    let start = Instant::now();
    let p = FlowProblem::new(heisenberg(1).unwrap(), MetricState::identity(3).unwrap(), (0.0, 10.0))
        .unwrap()
        .with_sampling(Sampling::Linear(201));
    let traj = flow::integrate(&p).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    let mut worst: f64 = 0.0;
    for (t, g) in traj.times.iter().zip(&traj.states) {
        let (a, b, c) = nil3_closed_form(1.0, 1.0, 1.0, *t).unwrap();
        let d = g.diagonal_entries();
        for (x, y) in d.iter().zip([a, b, c]) {
            worst = worst.max((x / y - 1.0).abs());
        }
    }
    let msg = format!("max rel err {worst:.2e}, {elapsed:.3} s");
    if worst < 1e-6 && elapsed < 1.0 { Ok(msg) } else { Err(msg) }
}

fn family_sweep() -> Vec<(String, LieAlgebraSpec, Vec<MetricState>)> {
    let mut out = Vec::new();
    for n in 1..=4 {
        let spec = heisenberg(n).unwrap();
        let metrics = (0..100).map(|s| random_diag_metric(spec.dim(), 10_000 + 100 * n as u64 + s, DEFAULT_RANGE)).collect();
        out.push((format!("heisenberg({n})"), spec, metrics));
    }
    for n in 3..=6 {
        let spec = unitriangular(n).unwrap();
        let metrics = (0..100).map(|s| random_diag_metric(spec.dim(), 20_000 + 100 * n as u64 + s, DEFAULT_RANGE)).collect();
        out.push((format!("unitriangular({n})"), spec, metrics));
    }
    out
}

fn closed_form_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (_, spec, metrics) in family_sweep() {
        for g in &metrics {
            let general = ricci_general(&spec, g).map_err(|e| e.to_string())?;
            let diag: Vec<f64> = general.diagonal().iter().copied().collect();
            let d = g.as_diagonal().unwrap();
            let closed = match spec.family() {
                nilflow::Family::Heisenberg(n) => ricci_heisenberg_diag(n, d),
                nilflow::Family::Unitriangular(n) => ricci_unitriangular_diag(n, d),
                nilflow::Family::Custom => unreachable!(),
            }
            .map_err(|e| e.to_string())?;
            worst = worst.max(max_abs_diff(&closed, &diag) / max_abs(&diag));
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let msg = format!("800 metrics, max rel err {worst:.2e}, {elapsed:.2} s");
    if worst < 1e-12 && elapsed < 30.0 { Ok(msg) } else { Err(msg) }
}

fn ricci_diagonal() -> Outcome {
    let mut worst: f64 = 0.0;
    for (_, spec, metrics) in family_sweep() {
        for g in &metrics {
            worst = worst.max(max_off_diagonal(&ricci_general(&spec, g).map_err(|e| e.to_string())?));
        }
    }
    let msg = format!("max off-diagonal |Ric| {worst:.2e}");
    if worst < 1e-13 { Ok(msg) } else { Err(msg) }
}

fn conserved_quantities() -> Outcome {
    let mut drift: f64 = 0.0;
    let mut bound_ok = true;
    for seed in 0..5 {
        let g0 = random_diag_metric(5, 30_000 + seed, DEFAULT_RANGE);
        let d0 = g0.diagonal_entries();
        let p = FlowProblem::new(heisenberg(2).unwrap(), g0, (0.0, 100.0))
            .unwrap()
            .with_tolerances(1e-10, 1e-12)
            .with_sampling(Sampling::Linear(501));
        let traj = flow::integrate(&p).map_err(|e| e.to_string())?;
        drift = drift.max(conserved(&traj).map_err(|e| e.to_string())?.max);
        for (t, g) in traj.times.iter().zip(&traj.states) {
            let bound = heisenberg_center_lower_bound(2, &d0, *t);
            bound_ok &= g.diagonal_entries()[4] >= bound * (1.0 - 1e-12);
        }
    }
    let msg = format!("max drift {drift:.2e}, lower bound {}", if bound_ok { "holds" } else { "violated" });
    if drift < 1e-8 && bound_ok { Ok(msg) } else { Err(msg) }
}

fn heisenberg_asymptotics() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for n in [1usize, 2] {
        for seed in 0..3 {
            let g0 = random_diag_metric(2 * n + 1, 40_000 + 10 * n as u64 + seed, DEFAULT_RANGE);
            let start = Instant::now();
            let rep = check_heisenberg_asymptotics(n, g0.as_diagonal().unwrap(), 1e6, DEFAULT_THRESHOLD)
                .map_err(|e| e.to_string())?;
            let elapsed = start.elapsed().as_secs_f64();
            ok &= rep.pass && elapsed < 60.0;
            lines.push(format!(
                "n={n} seed={seed}: {:.2e} at 1e6 vs {:.2e} at 1e4 ({elapsed:.2} s)",
                rep.final_deviation, rep.earlier_deviation
            ));
        }
    }
    let msg = lines.join("; ");
    if ok { Ok(msg) } else { Err(msg) }
}

fn heisenberg_blowdown() -> Outcome {
    let mut spread: f64 = 0.0;
    let mut err: f64 = 0.0;
    for n in 1..=5 {
        for seed in 0..3 {
            let g0 = random_diag_metric(2 * n + 1, 50_000 + 10 * n as u64 + seed, DEFAULT_RANGE);
            let profile = predict(n, g0.as_diagonal().unwrap()).map_err(|e| e.to_string())?;
            for t in [0.5, 1.0, 2.0, 10.0] {
                let limit = blowdown_limit(&profile, t).map_err(|e| e.to_string())?.diagonal_entries();
                let soliton = soliton_heisenberg(n, t).unwrap().diagonal_entries();
                err = err.max(max_abs_diff(&limit, &soliton));
                for s in [1.0, 10.0, 1e3, 1e6] {
                    let at = blowdown_at(&profile, t, s).unwrap().diagonal_entries();
                    spread = spread.max(max_abs_diff(&at, &limit));
                }
            }
        }
    }
    let msg = format!("s-spread {spread:.2e}, distance to soliton {err:.2e}");
    if spread < 1e-12 && err < 1e-12 { Ok(msg) } else { Err(msg) }
}

fn unitriangular_soliton() -> Outcome {
    let mut residual: f64 = 0.0;
    let mut eta: f64 = 0.0;
    for n in 3..=10 {
        let g1 = soliton_unitriangular(n, 1.0, 1.0).unwrap();
        for t in [0.5, 1.0, 2.0, 10.0] {
            residual = residual.max(unitriangular_soliton_residual(n, t, 1.0).map_err(|e| e.to_string())?);
            let pulled = pullback(&g1, &unitriangular_eta(n), t).unwrap().scaled(t).unwrap().diagonal_entries();
            eta = eta.max(max_abs_diff(&pulled, &soliton_unitriangular(n, t, 1.0).unwrap().diagonal_entries()));
        }
    }
    let msg = format!("flow residual {residual:.2e}, eta identity {eta:.2e}");
    if residual < 1e-12 && eta < 1e-12 { Ok(msg) } else { Err(msg) }
}

fn lauret_certificates() -> Outcome {
    let h1 = heisenberg(1).unwrap();
    let cert = lauret_certify(&h1, &MetricState::diagonal(vec![1.0, 1.0, 1.0 / 3.0]).unwrap()).map_err(|e| e.to_string())?;
    let expect = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0]));
    let mut ok = (cert.c + 0.5).abs() < 1e-10 && (&cert.d - expect).amax() < 1e-10 && cert.derivation_residual < 1e-12;
    let mut worst: f64 = 0.0;
    for n in 1..=5 {
        let c = lauret_certify(&heisenberg(n).unwrap(), &soliton_heisenberg(n, 1.0).unwrap()).map_err(|e| e.to_string())?;
        ok &= c.valid;
        worst = worst.max(c.ricci_residual).max(c.derivation_residual);
    }
    let mut c_spread: f64 = 0.0;
    for n in 2..=8 {
        let spec = unitriangular(n).unwrap();
        let mut cs = Vec::new();
        for a in [0.5, 1.0, 2.0] {
            let c = lauret_certify(&spec, &soliton_unitriangular(n, 1.0, a).unwrap()).map_err(|e| e.to_string())?;
            ok &= c.valid;
            worst = worst.max(c.ricci_residual).max(c.derivation_residual);
            cs.push(c.c);
        }
        c_spread = c_spread.max(max_abs_diff(&cs[..2], &cs[1..]));
    }
    ok &= c_spread < 1e-10;
    let msg = format!(
        "nil3 c = {:.12}, worst residual {worst:.2e}, c spread over A {c_spread:.2e}",
        cert.c
    );
    if ok { Ok(msg) } else { Err(msg) }
}

fn comparison_lemma() -> Outcome {
    let slow = (comparison_lemma_check(1.0, |t| 1.0 / (1.0 + t), 1e6).map_err(|e| e.to_string())? - 1.0).abs();
    let fast = (comparison_lemma_check(1.0, |t| 1.0 / ((1.0 + t) * (1.0 + t)), 1e6).map_err(|e| e.to_string())? - 1.0).abs();
    let msg = format!("|u/v - 1| = {slow:.2e} and {fast:.2e}");
    if slow < 1e-4 && fast < 1e-4 { Ok(msg) } else { Err(msg) }
}

fn curvature_symmetries() -> Outcome {
    let mut specs: Vec<LieAlgebraSpec> = (1..=4).map(|n| heisenberg(n).unwrap()).collect();
    specs.extend((3..=5).map(|n| unitriangular(n).unwrap()));
    let mut worst: f64 = 0.0;
    for (k, spec) in specs.iter().enumerate() {
        for seed in 0..3 {
            let g = random_full_metric(spec.dim(), 60_000 + 10 * k as u64 + seed);
            let r = Geometry::new(spec, &g).map_err(|e| e.to_string())?.riemann();
            let d = spec.dim();
            for i in 0..d {
                for j in 0..d {
                    for a in 0..d {
                        for b in 0..d {
                            let v = r.get(i, j, a, b);
                            worst = worst
                                .max((v + r.get(j, i, a, b)).abs())
                                .max((v + r.get(i, j, b, a)).abs())
                                .max((v - r.get(a, b, i, j)).abs())
                                .max((v + r.get(j, a, i, b) + r.get(a, i, j, b)).abs());
                        }
                    }
                }
            }
        }
    }
    let msg = format!("max violation {worst:.2e}");
    if worst < 1e-12 { Ok(msg) } else { Err(msg) }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("Nil3 reference solution", nil3_reference),
        ("closed-form vs general Ricci", closed_form_oracle),
        ("stably Ricci-diagonal", ricci_diagonal),
        ("conserved quantities", conserved_quantities),
        ("Heisenberg asymptotics", heisenberg_asymptotics),
        ("Heisenberg blowdown", heisenberg_blowdown),
        ("unitriangular soliton", unitriangular_soliton),
        ("soliton certificates", lauret_certificates),
        ("comparison lemma", comparison_lemma),
        ("curvature symmetries", curvature_symmetries),
    ];
    let mut failed = Vec::new();
    for (k, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(msg) => println!("criterion {}: PASS  {name}: {msg}", k + 1),
            Err(msg) => {
                println!("criterion {}: FAIL  {name}: {msg}", k + 1);
                failed.push(k + 1);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
