//! Drift-diffusion model: Wiener first-passage-time density, simulation and
//! maximum-likelihood fitting.
//!
//! Evidence starts at `bias * alpha` and diffuses with drift `delta` and unit
//! diffusion coefficient until it leaves `(0, alpha)`. The observed response
//! time adds the non-decision time `tau`.
//!
//! The density uses the large-time series. For the lower boundary, with
//! `t = rt - tau`,
//!
//! ```text
//! f(t) = (pi / alpha^2) exp(-(2 alpha beta delta + delta^2 t) / 2)
//!        * sum_k k sin(pi k beta) exp(-k^2 pi^2 t / (2 alpha^2))
//! ```
//!
//! and the upper boundary is the lower one with `(1 - beta, -delta)`.

use alloc::vec;
use alloc::vec::Vec;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math;
use crate::numcore::{stream, Purpose};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const MAX_TERMS: usize = 1000;
pub const DEFAULT_DT: f64 = 1e-4;
/// Simulated decision time after which a trial is censored, in seconds.
pub const CENSOR_S: f64 = 60.0;
pub const MIN_FIT_TRIALS: usize = 50;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DdmError {
    #[error("invalid parameter: {0}")]
    InvalidParams(&'static str),
    #[error("series did not reach tolerance within {terms} terms at rt - tau = {t}")]
    NoConvergence { t: f64, terms: usize },
    #[error("trial {index} has a non-positive or non-finite response time")]
    InvalidTrial { index: usize },
    #[error("need at least {min} trials, got {found}")]
    NotEnoughTrials { found: usize, min: usize },
    #[error("log-likelihood is not finite at the initial point; tau must be below the fastest response time {min_rt}")]
    NonFiniteInit { min_rt: f64 },
    #[error("invalid option: {0}")]
    InvalidOption(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DdmParams {
    pub alpha: f64,
    pub tau: f64,
    pub delta: f64,
    pub bias: f64,
}

impl DdmParams {
    /// Unbiased start point.
    pub fn new(alpha: f64, tau: f64, delta: f64) -> Self {
        Self {
            alpha,
            tau,
            delta,
            bias: 0.5,
        }
    }

    pub fn validate(&self) -> Result<(), DdmError> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(DdmError::InvalidParams("alpha must be positive"));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(DdmError::InvalidParams("tau must be non-negative"));
        }
        if !self.delta.is_finite() {
            return Err(DdmError::InvalidParams("delta must be finite"));
        }
        if !(self.bias > 0.0 && self.bias < 1.0) {
            return Err(DdmError::InvalidParams("bias must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Probability of absorption at the upper boundary.
    pub fn upper_probability(&self) -> f64 {
        let z = self.bias * self.alpha;
        if self.delta == 0.0 {
            return self.bias;
        }
        let num = -math::expm1(-2.0 * self.delta * z);
        let den = -math::expm1(-2.0 * self.delta * self.alpha);
        num / den
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Choice {
    Lower = 0,
    Upper = 1,
}

impl Choice {
    pub fn from_index(c: u8) -> Option<Self> {
        match c {
            0 => Some(Choice::Lower),
            1 => Some(Choice::Upper),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub rt: f64,
    pub choice: Choice,
}

/// Density value with the number of series terms summed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Density {
    pub value: f64,
    pub terms: usize,
}

pub fn wfpt_density(rt: f64, choice: Choice, p: &DdmParams, tol: f64) -> Result<f64, DdmError> {
    Ok(wfpt_density_terms(rt, choice, p, tol)?.value)
}

pub fn wfpt_density_terms(rt: f64, choice: Choice, p: &DdmParams, tol: f64) -> Result<Density, DdmError> {
    p.validate()?;
    if !(tol > 0.0) {
        return Err(DdmError::InvalidOption("tol must be positive"));
    }
    let t = rt - p.tau;
    if !(t > 0.0) {
        return Ok(Density { value: 0.0, terms: 0 });
    }
    let (beta, delta) = match choice {
        Choice::Lower => (p.bias, p.delta),
        Choice::Upper => (1.0 - p.bias, -p.delta),
    };
    let a2 = p.alpha * p.alpha;
    let pre = math::PI / a2 * math::exp(-0.5 * (2.0 * p.alpha * beta * delta + delta * delta * t));
    let c = math::PI * math::PI * t / (2.0 * a2);
    // k * exp(-k^2 c) peaks at k = 1 / sqrt(2c); the bound only shrinks past it.
    let peak = 1.0 / math::sqrt(2.0 * c);
    let mut sum = 0.0;
    for k in 1..=MAX_TERMS {
        let kf = k as f64;
        let decay = kf * math::exp(-kf * kf * c);
        sum += decay * math::sin(math::PI * kf * beta);
        if kf > peak && pre * decay < tol {
            return Ok(Density {
                value: (pre * sum).max(0.0),
                terms: k,
            });
        }
    }
    Err(DdmError::NoConvergence { t, terms: MAX_TERMS })
}

/// Sum of log densities with bookkeeping for trials that cannot contribute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLik {
    /// `-inf` whenever any trial is flagged.
    pub value: f64,
    /// Trials with zero density (including `rt <= tau`).
    pub nonfinite: usize,
    /// Trials where the series hit the term cap.
    pub unconverged: usize,
}

impl LogLik {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

pub fn wfpt_loglik(trials: &[Trial], p: &DdmParams) -> Result<LogLik, DdmError> {
    wfpt_loglik_tol(trials, p, DEFAULT_TOL)
}

pub fn wfpt_loglik_tol(trials: &[Trial], p: &DdmParams, tol: f64) -> Result<LogLik, DdmError> {
    p.validate()?;
    let mut out = LogLik {
        value: 0.0,
        nonfinite: 0,
        unconverged: 0,
    };
    for (index, tr) in trials.iter().enumerate() {
        if !(tr.rt > 0.0 && tr.rt.is_finite()) {
            return Err(DdmError::InvalidTrial { index });
        }
        match wfpt_density(tr.rt, tr.choice, p, tol) {
            Ok(d) if d > 0.0 => out.value += math::log(d),
            Ok(_) => out.nonfinite += 1,
            Err(DdmError::NoConvergence { .. }) => out.unconverged += 1,
            Err(e) => return Err(e),
        }
    }
    if out.nonfinite + out.unconverged > 0 {
        out.value = f64::NEG_INFINITY;
    }
    Ok(out)
}

/// A trial that had not reached a boundary by [`CENSOR_S`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Censored {
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Simulation {
    pub trials: Vec<Trial>,
    pub censored: Vec<Censored>,
}

/// Euler-Maruyama path of trial `index`, drawn from its own stream.
pub fn simulate_trial(p: &DdmParams, dt: f64, seed: u64, index: usize) -> Result<Trial, Censored> {
    let mut rng = stream(seed, Purpose::Simulation, index as u64);
    let sd = math::sqrt(dt);
    let step = p.delta * dt;
    let max_steps = math::round(CENSOR_S / dt) as u64;
    let mut x = p.bias * p.alpha;
    let mut n: u64 = 0;
    while n < max_steps {
        let e: f64 = StandardNormal.sample(&mut rng);
        x += step + sd * e;
        n += 1;
        let choice = if x <= 0.0 {
            Choice::Lower
        } else if x >= p.alpha {
            Choice::Upper
        } else {
            continue;
        };
        return Ok(Trial {
            rt: p.tau + n as f64 * dt,
            choice,
        });
    }
    Err(Censored { index })
}

pub fn simulate_ddm(p: &DdmParams, n_trials: usize, dt: f64, seed: u64) -> Result<Simulation, DdmError> {
    p.validate()?;
    if !(dt > 0.0) {
        return Err(DdmError::InvalidOption("dt must be positive"));
    }
    if n_trials == 0 {
        return Err(DdmError::NotEnoughTrials { found: 0, min: 1 });
    }
    let mut sim = Simulation::default();
    for i in 0..n_trials {
        match simulate_trial(p, dt, seed, i) {
            Ok(t) => sim.trials.push(t),
            Err(c) => sim.censored.push(c),
        }
    }
    Ok(sim)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Simplex diameter in the transformed space at which the search stops.
    pub xtol: f64,
    pub density_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            xtol: 1e-6,
            density_tol: DEFAULT_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: DdmParams,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Maximum-likelihood `(alpha, tau, delta)` with the bias held at 0.5.
///
/// The simplex search runs on `(ln alpha, logit(tau / min_rt), delta)`, so
/// every vertex maps to valid parameters with `tau` below the fastest
/// response.
pub fn fit_mle(trials: &[Trial], init: &DdmParams, opts: &FitOptions) -> Result<FitResult, DdmError> {
    init.validate()?;
    if trials.len() < MIN_FIT_TRIALS {
        return Err(DdmError::NotEnoughTrials {
            found: trials.len(),
            min: MIN_FIT_TRIALS,
        });
    }
    if !(opts.xtol > 0.0) || opts.max_iter == 0 {
        return Err(DdmError::InvalidOption("xtol and max_iter must be positive"));
    }
    if let Some(index) = trials.iter().position(|t| !(t.rt > 0.0 && t.rt.is_finite())) {
        return Err(DdmError::InvalidTrial { index });
    }
    let min_rt = trials.iter().map(|t| t.rt).fold(f64::INFINITY, f64::min);
    if init.tau >= min_rt {
        return Err(DdmError::NonFiniteInit { min_rt });
    }

    let decode = |v: &[f64; 3]| DdmParams::new(math::exp(v[0]), min_rt * math::sigmoid(v[1]), v[2]);
    let objective = |v: &[f64; 3]| -> f64 {
        match wfpt_loglik_tol(trials, &decode(v), opts.density_tol) {
            Ok(ll) if ll.value.is_finite() => -ll.value,
            _ => f64::INFINITY,
        }
    };
    let frac = (init.tau / min_rt).clamp(1e-6, 1.0 - 1e-6);
    let start = [math::log(init.alpha), math::log(frac / (1.0 - frac)), init.delta];
    if !objective(&start).is_finite() {
        return Err(DdmError::NonFiniteInit { min_rt });
    }

    let first = nelder_mead(&objective, start, [0.1, 0.5, 0.2], opts.xtol, opts.max_iter);
    // One restart around the optimum guards against a collapsed simplex.
    let budget = opts.max_iter.saturating_sub(first.iterations).max(1);
    let second = nelder_mead(&objective, first.x, [0.02, 0.1, 0.05], opts.xtol, budget);
    let best = if second.f <= first.f { second } else { first };
    Ok(FitResult {
        params: decode(&best.x),
        loglik: -best.f,
        iterations: first.iterations + second.iterations,
        converged: first.converged && second.converged,
    })
}

#[derive(Clone, Copy)]
struct Simplex {
    x: [f64; 3],
    f: f64,
    iterations: usize,
    converged: bool,
}

fn nelder_mead(f: &impl Fn(&[f64; 3]) -> f64, x0: [f64; 3], step: [f64; 3], xtol: f64, max_iter: usize) -> Simplex {
    const N: usize = 3;
    let mut pts: Vec<([f64; N], f64)> = vec![(x0, f(&x0))];
    for i in 0..N {
        let mut x = x0;
        x[i] += step[i];
        pts.push((x, f(&x)));
    }
    let lerp = |a: &[f64; N], b: &[f64; N], t: f64| -> [f64; N] {
        let mut out = [0.0; N];
        for i in 0..N {
            out[i] = a[i] + t * (b[i] - a[i]);
        }
        out
    };
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        pts.sort_by(|a, b| a.1.total_cmp(&b.1));
        let diameter = pts[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(&pts[0].0).map(|(a, b)| math::fabs(a - b)).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diameter < xtol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = [0.0; N];
        for (x, _) in &pts[..N] {
            for i in 0..N {
                centroid[i] += x[i] / N as f64;
            }
        }
        let worst = pts[N];
        let xr = lerp(&centroid, &worst.0, -1.0);
        let fr = f(&xr);
        if fr < pts[0].1 {
            let xe = lerp(&centroid, &worst.0, -2.0);
            let fe = f(&xe);
            pts[N] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < pts[N - 1].1 {
            pts[N] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let xc = lerp(&centroid, &worst.0, -0.5);
                (xc, f(&xc))
            } else {
                let xc = lerp(&centroid, &worst.0, 0.5);
                (xc, f(&xc))
            };
            if fc < worst.1.min(fr) {
                pts[N] = (xc, fc);
            } else {
                let best = pts[0].0;
                for p in pts.iter_mut().skip(1) {
                    let x = lerp(&best, &p.0, 0.5);
                    *p = (x, f(&x));
                }
            }
        }
    }
    pts.sort_by(|a, b| a.1.total_cmp(&b.1));
    Simplex {
        x: pts[0].0,
        f: pts[0].1,
        iterations,
        converged,
    }
}
