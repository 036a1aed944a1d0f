//! WebAssembly bindings for the browser demo.
//!
//! Each export takes plain numbers and returns a JSON string. The `*_json`
//! functions carry the logic so they can be tested natively.

use nilflow::asymptotics::predict;
use nilflow::curvature::{ricci_heisenberg_diag, ricci_unitriangular_diag, scalar};
use nilflow::flow::{integrate, FlowProblem, Sampling};
use nilflow::soliton::{lauret_certify, soliton_unitriangular, unitriangular_soliton_residual};
use nilflow::{heisenberg, unitriangular, MetricState};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Largest size the page accepts; keeps each call interactive.
pub const MAX_N: usize = 8;

fn labels(spec: &nilflow::LieAlgebraSpec) -> Vec<String> {
    (0..spec.dim()).map(|i| spec.label(i)).collect()
}

fn check_size(n: usize, min: usize) -> Result<(), String> {
    if n < min || n > MAX_N {
        return Err(format!("n must be between {min} and {MAX_N}, got {n}"));
    }
    Ok(())
}

/// Integrates the diagonal flow on the Heisenberg algebra of dimension
/// 2n+1 from `g0` up to `t_end`, sampled log-uniformly, and pairs each
/// sample with the predicted large-time profile.
pub fn heisenberg_flow_json(n: usize, g0: &[f64], t_end: f64, per_decade: usize) -> Result<String, String> {
    check_size(n, 1)?;
    if !(t_end > 0.0 && t_end <= 1e8) {
        return Err(format!("t_end must lie in (0, 1e8], got {t_end}"));
    }
    let spec = heisenberg(n).map_err(|e| e.to_string())?;
    let g = MetricState::diagonal(g0.to_vec()).map_err(|e| e.to_string())?;
    let profile = predict(n, g0).map_err(|e| e.to_string())?;
    let problem = FlowProblem::new(spec, g, (0.0, t_end))
        .map_err(|e| e.to_string())?
        .with_sampling(Sampling::Log { per_decade: per_decade.clamp(1, 50), start: 1e-3 });
    let traj = integrate(&problem).map_err(|e| e.to_string())?;
    let states = traj.diagonals();
    let predicted: Vec<Vec<f64>> = traj
        .times
        .iter()
        .map(|&t| if t > 0.0 { profile.evaluate(t).unwrap_or_default() } else { Vec::new() })
        .collect();
    let last = states.last().cloned().unwrap_or_default();
    let deviation = profile.deviation(t_end, &last).map_err(|e| e.to_string())?;
    Ok(json!({
        "labels": traj.labels,
        "times": traj.times,
        "states": states,
        "predicted": predicted,
        "gamma": profile.gamma,
        "exponents": profile.exponents,
        "final_deviation": deviation,
        "accepted_steps": traj.step_stats.accepted,
    })
    .to_string())
}

/// Evaluates the explicit soliton on the unitriangular algebra of n x n
/// matrices at time `t`, with its flow residual and, optionally, a
/// Lauret certificate for the metric at that time.
pub fn unitriangular_soliton_json(n: usize, a: f64, t: f64, certify: bool) -> Result<String, String> {
    check_size(n, 2)?;
    let g = soliton_unitriangular(n, t, a).map_err(|e| e.to_string())?;
    let residual = unitriangular_soliton_residual(n, t, a).map_err(|e| e.to_string())?;
    let spec = unitriangular(n).map_err(|e| e.to_string())?;
    let certificate = if certify {
        let cert = lauret_certify(&spec, &g).map_err(|e| e.to_string())?;
        json!({
            "c": cert.c,
            "d_diagonal": (0..cert.d.nrows()).map(|i| cert.d[(i, i)]).collect::<Vec<_>>(),
            "ricci_residual": cert.ricci_residual,
            "derivation_residual": cert.derivation_residual,
            "valid": cert.valid,
        })
    } else {
        serde_json::Value::Null
    };
    Ok(json!({
        "labels": labels(&spec),
        "metric": g.diagonal_entries(),
        "flow_residual": residual,
        "certificate": certificate,
    })
    .to_string())
}

/// Closed-form diagonal Ricci curvature for a diagonal metric on either
/// family. `family` is "heisenberg" or "unitriangular".
pub fn ricci_diagonal_json(family: &str, n: usize, g: &[f64]) -> Result<String, String> {
    let (spec, ricci) = match family {
        "heisenberg" => {
            check_size(n, 1)?;
            (heisenberg(n), ricci_heisenberg_diag(n, g))
        }
        "unitriangular" => {
            check_size(n, 2)?;
            (unitriangular(n), ricci_unitriangular_diag(n, g))
        }
        other => return Err(format!("unknown family {other:?}")),
    };
    let spec = spec.map_err(|e| e.to_string())?;
    let ricci = ricci.map_err(|e| e.to_string())?;
    let metric = MetricState::diagonal(g.to_vec()).map_err(|e| e.to_string())?;
    let s = scalar(&spec, &metric).map_err(|e| e.to_string())?;
    let endo: Vec<f64> = ricci.iter().zip(g).map(|(r, gi)| r / gi).collect();
    Ok(json!({
        "labels": labels(&spec),
        "ricci": ricci,
        "ricci_endomorphism": endo,
        "scalar": s,
    })
    .to_string())
}

fn to_js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn heisenberg_flow(n: usize, g0: &[f64], t_end: f64, per_decade: usize) -> Result<String, JsError> {
    to_js(heisenberg_flow_json(n, g0, t_end, per_decade))
}

#[wasm_bindgen]
pub fn unitriangular_soliton(n: usize, a: f64, t: f64, certify: bool) -> Result<String, JsError> {
    to_js(unitriangular_soliton_json(n, a, t, certify))
}

#[wasm_bindgen]
pub fn ricci_diagonal(family: &str, n: usize, g: &[f64]) -> Result<String, JsError> {
    to_js(ricci_diagonal_json(family, n, g))
}

#[wasm_bindgen]
pub fn version() -> String {
    nilflow::VERSION.to_string()
}
