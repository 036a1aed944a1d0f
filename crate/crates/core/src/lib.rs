//! Left-invariant geometry of nilpotent Lie groups: curvature from structure
//! constants, Ricci flow of diagonal metrics on the Heisenberg and
//! unitriangular families, their long-time asymptotics, and explicit
//! nilsoliton metrics with a derivation-based certificate.

pub mod algebra;
pub mod asymptotics;
pub mod curvature;
pub mod error;
pub mod flow;
pub mod io;
pub mod linalg;
pub mod metric;
pub mod ode;
pub mod random;
pub mod soliton;

pub use algebra::{heisenberg, unitriangular, Family, IndexMap, LieAlgebraSpec};
pub use error::{Error, Result};
pub use metric::{MetricKind, MetricState};
pub use curvature::{CurvatureBundle, Geometry};
pub use flow::{FlowProblem, FlowTrajectory, RhsMode, Sampling};
pub use soliton::SolitonCertificate;

/// Crate version, recorded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
