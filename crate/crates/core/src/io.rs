//! JSON file formats. Indices in files are 1-based; in memory they are 0-based.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::algebra::{validate, Bracket, LieAlgebraSpec, JACOBI_TOL};
use crate::curvature::CurvatureBundle;
use crate::error::{Error, Result};
use crate::flow::FlowTrajectory;
use crate::linalg::{Tensor3, Tensor4};
use crate::metric::{MetricKind, MetricState};
use crate::soliton::SolitonCertificate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketEntry {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub c: f64,
}

/// `{ "dim": N, "labels": [...]?, "brackets": [{"i":1,"j":2,"k":3,"c":1.0}, ...] }`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraFile {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub brackets: Vec<BracketEntry>,
}

impl AlgebraFile {
    pub fn from_spec(spec: &LieAlgebraSpec) -> Self {
        AlgebraFile {
            dim: spec.dim(),
            labels: spec.labels().map(|l| l.to_vec()),
            brackets: spec
                .entries()
                .iter()
                .map(|b| BracketEntry { i: b.i + 1, j: b.j + 1, k: b.k + 1, c: b.value })
                .collect(),
        }
    }

    /// Converts to an algebra, rejecting malformed entries and Jacobi failures.
    pub fn into_spec(self) -> Result<LieAlgebraSpec> {
        let spec = self.into_unchecked_spec()?;
        let report = validate(&spec);
        if report.jacobi_residual > JACOBI_TOL {
            return Err(Error::Structural(format!(
                "Jacobi identity fails with residual {:e}",
                report.jacobi_residual
            )));
        }
        Ok(spec)
    }

    /// Like [`AlgebraFile::into_spec`] but without the Jacobi check, for validation reports.
    pub fn into_unchecked_spec(self) -> Result<LieAlgebraSpec> {
        let mut entries = Vec::with_capacity(self.brackets.len());
        for (pos, b) in self.brackets.iter().enumerate() {
            if b.i == 0 || b.j == 0 || b.k == 0 {
                return Err(Error::Structural(format!(
                    "entry #{} (i={}, j={}, k={}): indices are 1-based",
                    pos + 1,
                    b.i,
                    b.j,
                    b.k
                )));
            }
            entries.push(Bracket { i: b.i - 1, j: b.j - 1, k: b.k - 1, value: b.c });
        }
        LieAlgebraSpec::new(self.dim, entries, self.labels)
    }
}

pub fn parse_algebra(text: &str) -> Result<LieAlgebraSpec> {
    serde_json::from_str::<AlgebraFile>(text)?.into_spec()
}

pub fn algebra_to_json(spec: &LieAlgebraSpec) -> String {
    serde_json::to_string_pretty(&AlgebraFile::from_spec(spec)).expect("plain data serialises")
}

pub fn read_algebra(path: &Path) -> Result<LieAlgebraSpec> {
    parse_algebra(&read(path)?)
}

pub fn read_algebra_file(path: &Path) -> Result<AlgebraFile> {
    Ok(serde_json::from_str(&read(path)?)?)
}

/// `{ "dim": N, "diag": [..] }` or `{ "dim": N, "mat": [[..], ..] }`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricFile {
    Diag { dim: usize, diag: Vec<f64> },
    Full { dim: usize, mat: Vec<Vec<f64>> },
}

impl MetricFile {
    pub fn from_metric(g: &MetricState) -> Self {
        match g.kind() {
            MetricKind::Diagonal => MetricFile::Diag { dim: g.dim(), diag: g.diagonal_entries() },
            MetricKind::Full => MetricFile::Full { dim: g.dim(), mat: rows(&g.matrix()) },
        }
    }

    pub fn into_metric(self) -> Result<MetricState> {
        match self {
            MetricFile::Diag { dim, diag } => {
                if diag.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: diag.len() });
                }
                MetricState::diagonal(diag)
            }
            MetricFile::Full { dim, mat } => {
                if mat.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: mat.len() });
                }
                if let Some(r) = mat.iter().find(|r| r.len() != dim) {
                    return Err(Error::DimensionMismatch { expected: dim, got: r.len() });
                }
                MetricState::full(DMatrix::from_fn(dim, dim, |i, j| mat[i][j]))
            }
        }
    }
}

pub fn parse_metric(text: &str) -> Result<MetricState> {
    serde_json::from_str::<MetricFile>(text)
        .map_err(|e| Error::Structural(format!("metric file needs \"dim\" and \"diag\" or \"mat\": {e}")))?
        .into_metric()
}

pub fn metric_to_json(g: &MetricState) -> String {
    serde_json::to_string_pretty(&MetricFile::from_metric(g)).expect("plain data serialises")
}

pub fn read_metric(path: &Path) -> Result<MetricState> {
    parse_metric(&read(path)?)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Writes `text` to `path`, creating parent directories.
pub fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn tensor3_json(t: &Tensor3) -> Value {
    let n = t.dim();
    Value::from(
        (0..n)
            .map(|i| (0..n).map(|j| t.fibre(i, j).to_vec()).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
    )
}

fn tensor4_json(t: &Tensor4) -> Value {
    let n = t.dim();
    Value::from(
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|k| (0..n).map(|l| t.get(i, j, k, l)).collect::<Vec<_>>()).collect::<Vec<_>>())
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>(),
    )
}

/// Curvature bundle with tensors as nested arrays `[i][j][k]...` and 1-based planes.
pub fn bundle_json(spec: &LieAlgebraSpec, bundle: &CurvatureBundle) -> Value {
    let labels: Vec<String> = (0..spec.dim()).map(|i| spec.label(i)).collect();
    json!({
        "dim": bundle.dim,
        "labels": labels,
        "christoffel": tensor3_json(&bundle.christoffel),
        "riemann": bundle.riemann.as_ref().map(tensor4_json),
        "ricci": rows(&bundle.ricci),
        "scalar": bundle.scalar,
        "sectional": bundle.sectional.as_ref().map(|v| v
            .iter()
            .map(|s| json!({ "i": s.i + 1, "j": s.j + 1, "value": s.value }))
            .collect::<Vec<_>>()),
        "ill_conditioned": bundle.ill_conditioned,
    })
}

pub fn certificate_json(cert: &SolitonCertificate) -> Value {
    json!({
        "c": cert.c,
        "D": rows(&cert.d),
        "ricci_residual": cert.ricci_residual,
        "derivation_residual": cert.derivation_residual,
        "valid": cert.valid,
    })
}

/// Column names for trajectory tables: `g_<label>` for diagonal states,
/// `g_<a>_<b>` (upper triangle) for full ones.
pub fn trajectory_header(traj: &FlowTrajectory) -> Vec<String> {
    let mut header = vec!["t".to_string()];
    let full = traj.states.iter().any(|g| g.kind() == MetricKind::Full);
    let l = &traj.labels;
    if full {
        for i in 0..l.len() {
            for j in i..l.len() {
                header.push(format!("g_{}_{}", l[i], l[j]));
            }
        }
    } else {
        header.extend(l.iter().map(|x| format!("g_{x}")));
    }
    header
}

/// One row per sample, aligned with [`trajectory_header`].
pub fn trajectory_rows(traj: &FlowTrajectory) -> Vec<Vec<f64>> {
    let full = traj.states.iter().any(|g| g.kind() == MetricKind::Full);
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(t, g)| {
            let mut row = vec![*t];
            if full {
                let n = g.dim();
                for i in 0..n {
                    for j in i..n {
                        row.push(g.get(i, j));
                    }
                }
            } else {
                row.extend(g.diagonal_entries());
            }
            row
        })
        .collect()
}

pub fn trajectory_json(traj: &FlowTrajectory) -> Value {
    let states: Vec<Value> = traj.states.iter().map(|g| serde_json::to_value(MetricFile::from_metric(g)).expect("plain data")).collect();
    json!({
        "family": traj.family,
        "labels": traj.labels,
        "times": traj.times,
        "states": states,
        "conserved": traj.conserved,
        "step_stats": {
            "accepted": traj.step_stats.accepted,
            "rejected": traj.step_stats.rejected,
            "guarded": traj.step_stats.guarded,
            "rhs_evals": traj.step_stats.rhs_evals,
        },
    })
}
