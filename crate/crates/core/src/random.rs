//! Reproducible random metrics.
//!
//! All sampling goes through [`ChaCha8Rng`] seeded with [`seed_rng`], whose
//! output stream is fixed by the algorithm and identical on every platform.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::metric::MetricState;

/// Range of diagonal entries drawn by [`random_diag_metric`].
pub const DEFAULT_RANGE: (f64, f64) = (0.1, 10.0);

pub fn seed_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Log-uniform diagonal entries in `[lo, hi]`.
pub fn log_uniform_vec<R: Rng>(rng: &mut R, dim: usize, (lo, hi): (f64, f64)) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..dim).map(|_| (a + (b - a) * rng.random::<f64>()).exp()).collect()
}

/// Diagonal metric with log-uniform entries in `range`.
pub fn random_diag_metric(dim: usize, seed: u64, range: (f64, f64)) -> MetricState {
    let mut rng = seed_rng(seed);
    MetricState::diagonal(log_uniform_vec(&mut rng, dim, range)).expect("entries are positive")
}

/// Dense positive-definite metric: a log-uniform diagonal plus `B B^T / dim`
/// with `B` uniform in `[-1, 1]`.
pub fn random_full_metric(dim: usize, seed: u64) -> MetricState {
    let mut rng = seed_rng(seed);
    let diag = log_uniform_vec(&mut rng, dim, (0.5, 2.0));
    let b = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    let mut m = &b * b.transpose() / dim as f64;
    for (i, v) in diag.iter().enumerate() {
        m[(i, i)] += v;
    }
    MetricState::full(m).expect("diagonally shifted Gram matrix is positive definite")
}
