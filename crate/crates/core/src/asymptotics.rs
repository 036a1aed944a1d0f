//! Long-time behaviour of diagonal Heisenberg flows.
//!
//! Every diagonal solution on `heisenberg(n)` is asymptotic to the power law
//! `g_I(t) ~ γ_I t^{e_I}`, where the exponents are `1/(n+2)` on the first
//! `2n` components and `-n/(n+2)` on the centre, and the constants are fixed
//! by the conserved quantities of the initial metric.

use serde::{Deserialize, Serialize};

use crate::algebra::heisenberg;
use crate::error::{Error, Result};
use crate::flow::{self, ConservedSet, FlowProblem, FlowTrajectory, Sampling};
use crate::metric::MetricState;
use crate::ode::{self, FnSystem, OdeOptions};

/// Default deviation threshold at the end of a long run.
pub const DEFAULT_THRESHOLD: f64 = 0.02;
/// Output points per decade for long-horizon runs.
pub const SAMPLES_PER_DECADE: usize = 50;

/// Predicted asymptotes `γ_I t^{e_I}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticProfile {
    pub n: usize,
    pub gamma: Vec<f64>,
    pub exponents: Vec<f64>,
    /// `A_i = g_i(0) / g_{i+n}(0)`
    pub a: Vec<f64>,
    /// `C = g_1(0) ... g_{2n}(0) g_N(0)^2`
    pub c: f64,
}

impl AsymptoticProfile {
    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }

    /// `B_{i+n} = 1 / A_i`.
    pub fn b(&self) -> Vec<f64> {
        self.a.iter().map(|a| 1.0 / a).collect()
    }

    /// The asymptotic solution `γ_I t^{e_I}` at `t > 0`.
    pub fn evaluate(&self, t: f64) -> Result<Vec<f64>> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("asymptotes are evaluated for t > 0, got {t}")));
        }
        Ok(self.gamma.iter().zip(&self.exponents).map(|(g, e)| g * t.powf(*e)).collect())
    }

    /// `|g_I / (γ_I t^{e_I}) - 1|` for one diagonal state.
    pub fn deviation(&self, t: f64, g: &[f64]) -> Result<Vec<f64>> {
        if g.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: g.len() });
        }
        Ok(self.evaluate(t)?.iter().zip(g).map(|(p, v)| (v / p - 1.0).abs()).collect())
    }
}

/// Asymptotic profile of the diagonal solution on `heisenberg(n)` starting at `g0`.
pub fn predict(n: usize, g0: &[f64]) -> Result<AsymptoticProfile> {
    let q = ConservedSet::from_diagonal(n, g0)?;
    if let Some((i, v)) = g0.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::NotPositiveDefinite(format!("diagonal entry {} is {v}", i + 1)));
    }
    let m = (n + 2) as f64;
    let lead = m.powf(1.0 / m);
    let cpow = q.c.powf(1.0 / (2.0 * m));
    let mut gamma = Vec::with_capacity(2 * n + 1);
    gamma.extend(q.a.iter().map(|a| lead * a.sqrt() * cpow));
    gamma.extend(q.b.iter().map(|b| lead * b.sqrt() * cpow));
    gamma.push(m.powf(-(n as f64) / m) * q.c.powf(1.0 / m));
    let mut exponents = vec![1.0 / m; 2 * n];
    exponents.push(-(n as f64) / m);
    Ok(AsymptoticProfile { n, gamma, exponents, a: q.a, c: q.c })
}

/// Worst deviation from the profile over a time window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub window: (f64, f64),
    /// Per-component sup over the samples in the window.
    pub sup: Vec<f64>,
    /// Per-component deviation at the last sample in the window.
    pub at_end: Vec<f64>,
    pub samples: usize,
}

impl RatioReport {
    pub fn max_sup(&self) -> f64 {
        self.sup.iter().fold(0.0, |m, v| m.max(*v))
    }

    pub fn max_at_end(&self) -> f64 {
        self.at_end.iter().fold(0.0, |m, v| m.max(*v))
    }
}

fn check_heisenberg(traj: &FlowTrajectory, profile: &AsymptoticProfile) -> Result<()> {
    match traj.family {
        crate::Family::Heisenberg(n) if n == profile.n => Ok(()),
        f => Err(Error::Unsupported(format!(
            "profile for heisenberg({}) does not apply to a {f:?} trajectory",
            profile.n
        ))),
    }
}

/// Per-component `sup |g_I(t) / (γ_I t^{e_I}) - 1|` over the samples with `t` in `window`.
pub fn ratio_convergence(traj: &FlowTrajectory, profile: &AsymptoticProfile, window: (f64, f64)) -> Result<RatioReport> {
    check_heisenberg(traj, profile)?;
    let (lo, hi) = window;
    let (t0, t1) = match (traj.times.first(), traj.times.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => return Err(Error::Domain("empty trajectory".into())),
    };
    if !(lo > 0.0 && lo <= hi && lo >= t0 && hi <= t1 * (1.0 + 1e-12)) {
        return Err(Error::Window { lo, hi, t0, t1 });
    }
    let mut sup = vec![0.0_f64; profile.dim()];
    let mut at_end = sup.clone();
    let mut samples = 0;
    for (t, g) in traj.times.iter().zip(&traj.states) {
        if *t < lo || *t > hi {
            continue;
        }
        let dev = profile.deviation(*t, &g.diagonal_entries())?;
        for (s, d) in sup.iter_mut().zip(&dev) {
            *s = s.max(*d);
        }
        at_end = dev;
        samples += 1;
    }
    if samples == 0 {
        return Err(Error::Window { lo, hi, t0, t1 });
    }
    Ok(RatioReport { window, sup, at_end, samples })
}

/// Deviation from the profile at the sample time closest to `t` (within 1e-9 relative).
pub fn deviation_at(traj: &FlowTrajectory, profile: &AsymptoticProfile, t: f64) -> Result<Vec<f64>> {
    check_heisenberg(traj, profile)?;
    let k = traj
        .times
        .iter()
        .position(|s| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
        .ok_or_else(|| Error::Window {
            lo: t,
            hi: t,
            t0: traj.times.first().copied().unwrap_or(f64::NAN),
            t1: traj.times.last().copied().unwrap_or(f64::NAN),
        })?;
    profile.deviation(traj.times[k], &traj.states[k].diagonal_entries())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecadePoint {
    pub t: f64,
    pub deviation: Vec<f64>,
    pub max: f64,
}

/// Outcome of a long-horizon run checked against its profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub n: usize,
    pub g0: Vec<f64>,
    pub t_end: f64,
    pub threshold: f64,
    pub profile: AsymptoticProfile,
    /// Deviations at `t = 1, 10, 100, ...` up to `t_end`.
    pub decades: Vec<DecadePoint>,
    pub final_deviation: f64,
    /// Deviation at `t_end / 100`, the comparison point for the trend check.
    pub earlier_deviation: f64,
    pub accepted_steps: usize,
    pub pass: bool,
}

/// Integrates `heisenberg(n)` from `g0` to `t_end` on a log grid and compares
/// with [`predict`]. Passes when the final deviation is below `threshold` and
/// below the deviation two decades earlier.
pub fn check_heisenberg_asymptotics(n: usize, g0: &[f64], t_end: f64, threshold: f64) -> Result<AsymptoticsReport> {
    if !(t_end >= 100.0) {
        return Err(Error::Domain(format!("t_end must be at least 100, got {t_end}")));
    }
    let profile = predict(n, g0)?;
    let problem = FlowProblem::new(heisenberg(n)?, MetricState::diagonal(g0.to_vec())?, (0.0, t_end))?
        .with_sampling(Sampling::Log { per_decade: SAMPLES_PER_DECADE, start: 1.0 });
    let traj = flow::integrate(&problem)?;
    let mut decades = Vec::new();
    let mut t = 1.0;
    while t <= t_end * (1.0 + 1e-12) {
        let deviation = deviation_at(&traj, &profile, t)?;
        let max = deviation.iter().fold(0.0, |m: f64, v| m.max(*v));
        decades.push(DecadePoint { t, deviation, max });
        t *= 10.0;
    }
    let last = traj.states.last().expect("nonempty").diagonal_entries();
    let final_deviation = profile.deviation(t_end, &last)?.iter().fold(0.0, |m: f64, v| m.max(*v));
    let earlier = nearest_sample(&traj, t_end / 100.0);
    let earlier_deviation = profile
        .deviation(traj.times[earlier], &traj.states[earlier].diagonal_entries())?
        .iter()
        .fold(0.0, |m: f64, v| m.max(*v));
    Ok(AsymptoticsReport {
        n,
        g0: g0.to_vec(),
        t_end,
        threshold,
        pass: final_deviation < threshold && final_deviation < earlier_deviation,
        profile,
        decades,
        final_deviation,
        earlier_deviation,
        accepted_steps: traj.step_stats.accepted,
    })
}

fn nearest_sample(traj: &FlowTrajectory, t: f64) -> usize {
    let mut best = 0;
    for (k, s) in traj.times.iter().enumerate() {
        if (s - t).abs() < (traj.times[best] - t).abs() {
            best = k;
        }
    }
    best
}

/// Integrates `u' = c`, `v' = c (1 + ε(t))` from `u(0) = v(0) = 1` and returns `u/v` at `t_end`.
pub fn comparison_lemma_check<F>(c: f64, epsilon: F, t_end: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(c > 0.0) || !(t_end > 0.0) {
        return Err(Error::Domain("comparison lemma needs c > 0 and t_end > 0".into()));
    }
    let sys = FnSystem::new(2, |t, _y: &[f64], dy: &mut [f64]| {
        dy[0] = c;
        dy[1] = c * (1.0 + epsilon(t));
    });
    let sol = ode::integrate(&sys, 0.0, t_end, &[1.0, 1.0], &[t_end], &OdeOptions::default())?;
    let y = &sol.states[0];
    Ok(y[0] / y[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::nil3_closed_form;

    #[test]
    fn nil3_unit_profile() {
        let p = predict(1, &[1.0, 1.0, 1.0]).unwrap();
        let g = 3f64.cbrt();
        assert!((p.gamma[0] - g).abs() < 1e-15);
        assert!((p.gamma[1] - g).abs() < 1e-15);
        // C(t) = K^{1/3} (t + K)^{-1/3} with K = 1/3
        assert!((p.gamma[2] - 1.0 / g).abs() < 1e-15);
        assert_eq!(p.exponents, vec![1.0 / 3.0, 1.0 / 3.0, -1.0 / 3.0]);
    }

    #[test]
    fn nil3_profile_matches_closed_form_constant() {
        for (a0, b0, c0) in [(2.0, 1.0, 3.0), (0.3, 5.0, 0.7)] {
            let p = predict(1, &[a0, b0, c0]).unwrap();
            let k: f64 = a0 * b0 / (3.0 * c0);
            assert!((p.gamma[0] / (a0 * k.powf(-1.0 / 3.0)) - 1.0).abs() < 1e-14);
            assert!((p.gamma[1] / (b0 * k.powf(-1.0 / 3.0)) - 1.0).abs() < 1e-14);
            assert!((p.gamma[2] / (c0 * k.cbrt()) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn scaling_the_initial_metric() {
        let g0 = [0.5, 2.0, 1.5, 0.7, 3.0];
        let lambda: f64 = 3.7;
        let scaled: Vec<f64> = g0.iter().map(|v| v * lambda).collect();
        let (p, q) = (predict(2, &g0).unwrap(), predict(2, &scaled).unwrap());
        assert!((q.c / p.c - lambda.powi(6)).abs() < 1e-10 * lambda.powi(6));
        assert_eq!(p.a.len(), 2);
        for (x, y) in p.a.iter().zip(&q.a) {
            assert!((x - y).abs() < 1e-15);
        }
        let expected = lambda.powf(6.0 / 8.0);
        for i in 0..4 {
            assert!((q.gamma[i] / p.gamma[i] - expected).abs() < 1e-13);
        }
    }

    #[test]
    fn profile_products_are_the_conserved_products() {
        for n in 1..=3 {
            let g0 = crate::random::random_diag_metric(2 * n + 1, n as u64, crate::random::DEFAULT_RANGE);
            let g0 = g0.as_diagonal().unwrap();
            let p = predict(n, g0).unwrap();
            let q = ConservedSet::from_diagonal(n, g0).unwrap();
            let p1: f64 = p.gamma[..n].iter().product::<f64>() * p.gamma[2 * n];
            let p2: f64 = p.gamma[n..2 * n].iter().product::<f64>() * p.gamma[2 * n];
            assert!((p1 / q.c1 - 1.0).abs() < 1e-12);
            assert!((p2 / q.c2 - 1.0).abs() < 1e-12);
            let e = &p.exponents;
            assert!((n as f64 * e[0] + e[2 * n]).abs() < 1e-15);
        }
    }

    #[test]
    fn predict_rejects_bad_input() {
        assert!(matches!(predict(2, &[1.0, 1.0, 1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(predict(1, &[1.0, -1.0, 1.0]).is_err());
    }

    fn closed_form_traj(times: Vec<f64>) -> FlowTrajectory {
        let states = times
            .iter()
            .map(|t| {
                let (a, b, c) = nil3_closed_form(1.0, 1.0, 1.0, *t).unwrap();
                vec![a, b, c]
            })
            .collect();
        FlowTrajectory::from_diagonal_samples(&heisenberg(1).unwrap(), times, states).unwrap()
    }

    #[test]
    fn closed_form_ratio_in_late_window() {
        let times = Sampling::Log { per_decade: 50, start: 1.0 }.times(0.0, 1e6).unwrap();
        let traj = closed_form_traj(times);
        let p = predict(1, &[1.0, 1.0, 1.0]).unwrap();
        let r = ratio_convergence(&traj, &p, (1e4, 1e6)).unwrap();
        assert!(r.max_sup() < 1e-2);
        // (t + K)^{1/3} / t^{1/3} - 1 ~ K / (3t) with K = 1/3
        assert!((r.at_end[0] - 1.0 / 9e6).abs() < 1e-9);
        assert!(matches!(ratio_convergence(&traj, &p, (1e4, 1e7)), Err(Error::Window { .. })));
        assert!(matches!(ratio_convergence(&traj, &p, (0.0, 1.0)), Err(Error::Window { .. })));
    }

    #[test]
    fn soliton_trajectory_has_zero_deviation() {
        let times: Vec<f64> = (1..40).map(|k| k as f64 * 0.5).collect();
        let states = times.iter().map(|t| crate::soliton::soliton_heisenberg(1, *t).unwrap().diagonal_entries()).collect();
        let traj = FlowTrajectory::from_diagonal_samples(&heisenberg(1).unwrap(), times, states).unwrap();
        let p = predict(1, &[1.0, 1.0, 1.0 / 3.0]).unwrap();
        let r = ratio_convergence(&traj, &p, (0.5, 19.5)).unwrap();
        assert!(r.max_sup() < 1e-15, "{r:?}");
    }

    #[test]
    fn comparison_lemma_cases() {
        assert_eq!(comparison_lemma_check(1.0, |_| 0.0, 1e6).unwrap(), 1.0);
        let r = comparison_lemma_check(1.0, |t| 1.0 / ((1.0 + t) * (1.0 + t)), 1e6).unwrap();
        assert!((r - 1.0).abs() < 1e-5);
        let r = comparison_lemma_check(1.0, |t| 1.0 / (1.0 + t), 1e6).unwrap();
        let exact = (1.0 + 1e6) / (1.0 + 1e6 + (1.0f64 + 1e6).ln());
        assert!((r - exact).abs() < 1e-9, "{r} vs {exact}");
        assert!((r - 1.0).abs() < 2e-5);
    }

    #[test]
    fn integrated_heisenberg_two_converges() {
        let g0 = crate::random::random_diag_metric(5, 11, crate::random::DEFAULT_RANGE);
        let rep = check_heisenberg_asymptotics(2, g0.as_diagonal().unwrap(), 1e4, DEFAULT_THRESHOLD).unwrap();
        assert_eq!(rep.decades.len(), 5);
        let maxes: Vec<f64> = rep.decades.iter().map(|d| d.max).collect();
        assert!(maxes.windows(2).skip(1).all(|w| w[1] < w[0]), "{maxes:?}");
    }
}
