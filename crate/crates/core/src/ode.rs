//! Adaptive Dormand-Prince 5(4) integrator with PI step control, a
//! step-rejection admissibility guard and fourth-order dense output.

use crate::error::{Error, Result};

/// A first-order system `y' = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;

    /// Evaluates `f(t, y)` into `dy`. An `Err` rejects the current trial step.
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> std::result::Result<(), String>;

    /// States for which this returns false are never accepted; the step is
    /// retried at half its size instead.
    fn admissible(&self, _y: &[f64]) -> bool {
        true
    }
}

/// Adapter turning a closure into an [`OdeSystem`].
pub struct FnSystem<F> {
    dim: usize,
    f: F,
}

impl<F> FnSystem<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    pub fn new(dim: usize, f: F) -> Self {
        FnSystem { dim, f }
    }
}

impl<F> OdeSystem for FnSystem<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> std::result::Result<(), String> {
        (self.f)(t, y, dy);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub first_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-10, atol: 1e-12, max_step: f64::INFINITY, first_step: None, max_steps: 5_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Rejections caused by inadmissible states or failed evaluations.
    pub guarded: usize,
    pub rhs_evals: usize,
}

#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub stats: StepStats,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;

/// Relative step-size floor: steps below `MIN_STEP_FRACTION * |t1 - t0|` abort.
pub const MIN_STEP_FRACTION: f64 = 1e-14;

struct Dense {
    t: f64,
    h: f64,
    r: [Vec<f64>; 5],
}

impl Dense {
    fn eval(&self, t: f64, out: &mut [f64]) {
        let th = (t - self.t) / self.h;
        let th1 = 1.0 - th;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.r[0][i]
                + th * (self.r[1][i] + th1 * (self.r[2][i] + th * (self.r[3][i] + th1 * self.r[4][i])));
        }
    }
}

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], opts: &OdeOptions) -> f64 {
    let n = err.len() as f64;
    let s: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = opts.atol + opts.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

fn initial_step<S: OdeSystem>(sys: &S, t0: f64, y0: &[f64], f0: &[f64], span: f64, opts: &OdeOptions) -> f64 {
    let n = y0.len();
    let sc: Vec<f64> = y0.iter().map(|y| opts.atol + opts.rtol * y.abs()).collect();
    let norm = |v: &[f64]| (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / n as f64).sqrt();
    let d0 = norm(y0);
    let d1 = norm(f0);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span).min(opts.max_step);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; n];
    if sys.rhs(t0 + h0, &y1, &mut f1).is_err() || !sys.admissible(&y1) {
        return h0 * 1e-3;
    }
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1).min(span).min(opts.max_step)
}

/// Integrates from `t0` to `t1 > t0`, reporting the state at each of the
/// increasing `samples` (which must lie in `[t0, t1]`). Values between
/// accepted steps come from the dense-output interpolant.
pub fn integrate<S: OdeSystem>(
    sys: &S,
    t0: f64,
    t1: f64,
    y0: &[f64],
    samples: &[f64],
    opts: &OdeOptions,
) -> Result<OdeSolution> {
    let n = sys.dim();
    if y0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y0.len() });
    }
    if !(t1 > t0) {
        return Err(Error::Domain(format!("integration span requires t1 > t0, got [{t0}, {t1}]")));
    }
    if samples.windows(2).any(|w| w[1] < w[0]) || samples.iter().any(|s| *s < t0 || *s > t1) {
        return Err(Error::Domain("sample times must be increasing and inside [t0, t1]".into()));
    }
    if !sys.admissible(y0) {
        return Err(Error::FlowBreakdown { t: t0, reason: "initial state is not admissible".into() });
    }
    let span = t1 - t0;
    let h_min = MIN_STEP_FRACTION * span;

    let mut stats = StepStats::default();
    let mut out_t = Vec::with_capacity(samples.len());
    let mut out_y = Vec::with_capacity(samples.len());
    let mut next_sample = 0;
    while next_sample < samples.len() && samples[next_sample] == t0 {
        out_t.push(t0);
        out_y.push(y0.to_vec());
        next_sample += 1;
    }

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    sys.rhs(t, &y, &mut k1).map_err(|reason| Error::FlowBreakdown { t, reason })?;
    stats.rhs_evals += 1;

    let mut h = opts.first_step.unwrap_or_else(|| initial_step(sys, t, &y, &k1, span, opts));
    stats.rhs_evals += 1;
    let mut fac_old: f64 = 1e-4;
    let mut last_rejected = false;

    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut ys = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut err = vec![0.0; n];

    while t < t1 {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::FlowBreakdown { t, reason: format!("step budget of {} exhausted", opts.max_steps) });
        }
        h = h.min(opts.max_step);
        let last = t + h >= t1 - 1e-15 * t1.abs().max(1.0);
        if last {
            h = t1 - t;
        }
        if h < h_min {
            return Err(Error::FlowBreakdown { t, reason: format!("step size underflow (h = {h:e})") });
        }

        let stage = |ys: &mut [f64], coeffs: &[(f64, &[f64])]| {
            for i in 0..n {
                let mut acc = y[i];
                for (a, k) in coeffs {
                    acc += h * a * k[i];
                }
                ys[i] = acc;
            }
        };

        let trial: std::result::Result<(), String> = (|| {
            stage(&mut ys, &[(A21, &k1)]);
            sys.rhs(t + C2 * h, &ys, &mut k2)?;
            stage(&mut ys, &[(A31, &k1), (A32, &k2)]);
            sys.rhs(t + C3 * h, &ys, &mut k3)?;
            stage(&mut ys, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
            sys.rhs(t + C4 * h, &ys, &mut k4)?;
            stage(&mut ys, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
            sys.rhs(t + C5 * h, &ys, &mut k5)?;
            stage(&mut ys, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
            sys.rhs(t + h, &ys, &mut k6)?;
            stage(&mut y_new, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            if !sys.admissible(&y_new) {
                return Err("inadmissible state".into());
            }
            sys.rhs(t + h, &y_new, &mut k7)?;
            Ok(())
        })();
        stats.rhs_evals += 6;

        if trial.is_err() {
            stats.rejected += 1;
            stats.guarded += 1;
            h *= 0.5;
            last_rejected = true;
            continue;
        }

        for i in 0..n {
            err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let e = error_norm(&err, &y, &y_new, opts);
        let expo = 0.2 - BETA * 0.75;
        let fac11 = e.powf(expo);

        if e <= 1.0 {
            let mut fac = fac11 / fac_old.powf(BETA);
            fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            if last_rejected {
                h_new = h_new.min(h);
            }
            fac_old = e.max(1e-4);

            let t_new = if last { t1 } else { t + h };
            if next_sample < samples.len() && samples[next_sample] <= t_new {
                let mut r0 = y.clone();
                let mut r1 = vec![0.0; n];
                let mut r2 = vec![0.0; n];
                let mut r3 = vec![0.0; n];
                let mut r4 = vec![0.0; n];
                for i in 0..n {
                    let ydiff = y_new[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    r1[i] = ydiff;
                    r2[i] = bspl;
                    r3[i] = ydiff - h * k7[i] - bspl;
                    r4[i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
                r0.truncate(n);
                let dense = Dense { t, h, r: [r0, r1, r2, r3, r4] };
                while next_sample < samples.len() && samples[next_sample] <= t_new {
                    let ts = samples[next_sample];
                    let mut v = vec![0.0; n];
                    if ts == t_new {
                        v.copy_from_slice(&y_new);
                    } else {
                        dense.eval(ts, &mut v);
                    }
                    out_t.push(ts);
                    out_y.push(v);
                    next_sample += 1;
                }
            }

            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            t = t_new;
            stats.accepted += 1;
            last_rejected = false;
            h = h_new;
        } else {
            stats.rejected += 1;
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            last_rejected = true;
        }
    }

    Ok(OdeSolution { times: out_t, states: out_y, stats })
}
