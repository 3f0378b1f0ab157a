//! Monte Carlo oracle for the degenerate pricing SDE.
//!
//! Simulates `dX_s = σ (b(s) − X_s) dw_s` from a start `(t, x)` to maturity
//! and estimates `u(t, x) = E f(X_T)` by sample averaging. Two schemes:
//!
//! * `euler-x` — Euler–Maruyama directly on `X`:
//!   `X_{k+1} = X_k + σ (b(s_k) − X_k) ΔW_k`.
//! * `exact-y` — works on `Y = X − b`, which satisfies
//!   `dY = −σ Y dw − b′ ds`. Each step applies the exact exponential factor
//!   of the homogeneous equation and a left-endpoint drift weight:
//!   `Y_{k+1} = e^{−σΔW_k − σ²Δs/2} (Y_k + (−b′(s_k)) Δs)`.
//!   Every factor is nonnegative, so `Y ≥ 0` propagates pathwise without
//!   exception — the positivity that forces `u₂ ≡ 0` above the drift curve
//!   holds *exactly* in the discretization, not just in the limit.
//!
//! All accumulation is in `f64` (single precision is not offered here).
//! Paths draw from counter-based per-path streams, so ensembles are
//! bit-for-bit reproducible regardless of thread count, and endpoints are
//! pathwise *affine* in the start value `x` for fixed seed — which makes
//! convex-payoff estimates convex in `x` up to rounding.

pub mod rng;

use std::io::{self, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::strategy::DriftCurve;
use rng::PathRng;

#[derive(Debug, Error)]
pub enum SdeError {
    #[error("start time {t} must satisfy 0 <= t < maturity {maturity}")]
    BadStartTime { t: f64, maturity: f64 },
    #[error("start value must be finite (got {0})")]
    BadStartValue(f64),
    #[error("n_paths must be >= 1")]
    NoPaths,
    #[error("n_steps must be >= 1")]
    NoSteps,
    #[error("volatility must be positive and finite (got {0})")]
    BadVolatility(f64),
    #[error("ensemble is empty")]
    EmptyEnsemble,
    #[error("simulation produced a non-finite endpoint on path {0}")]
    NonFinite(usize),
    #[error("payoff table invalid: {0}")]
    BadTable(String),
}

/// Time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Euler–Maruyama on `X`.
    EulerX,
    /// Exact-exponential scheme on `Y = X − b`; preserves `Y ≥ 0` pathwise.
    ExactY,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::EulerX => "euler-x",
            Scheme::ExactY => "exact-y",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "euler-x" => Some(Scheme::EulerX),
            "exact-y" => Some(Scheme::ExactY),
            _ => None,
        }
    }
}

/// Continuous piecewise-linear payoff table; ends extrapolate linearly.
#[derive(Debug, Clone)]
pub struct PayoffTable {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PayoffTable {
    pub fn new(points: &[(f64, f64)]) -> Result<Self, SdeError> {
        if points.len() < 2 {
            return Err(SdeError::BadTable("need at least 2 points".into()));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(SdeError::BadTable(format!(
                    "abscissas must increase strictly ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if points.iter().any(|&(x, y)| !(x.is_finite() && y.is_finite())) {
            return Err(SdeError::BadTable("non-finite entry".into()));
        }
        Ok(Self {
            xs: points.iter().map(|p| p.0).collect(),
            ys: points.iter().map(|p| p.1).collect(),
        })
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let i = match self.xs.partition_point(|&xi| xi <= x) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

/// Payoff `f` applied to endpoints.
#[derive(Debug, Clone)]
pub enum Payoff {
    /// `f(x) = x₊` (the full option payoff).
    CallXPlus,
    /// `f(x) = x` (martingale control).
    Linear,
    /// `f(x) = (−x)₊` (the singular component's data).
    NegPart,
    /// Continuous piecewise-linear table.
    Table(PayoffTable),
}

impl Payoff {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Payoff::CallXPlus => x.max(0.0),
            Payoff::Linear => x,
            Payoff::NegPart => (-x).max(0.0),
            Payoff::Table(t) => t.eval(x),
        }
    }
}

/// Simulated endpoints with full reproduction metadata.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    pub start_t: f64,
    pub start_x: f64,
    pub endpoints: Vec<f64>,
    pub scheme: Scheme,
    pub n_steps: usize,
    pub seed: u64,
    pub sigma: f64,
    /// Fingerprint of the drift curve the paths were driven by.
    pub drift_id: u64,
}

/// Simulates `n_paths` endpoints of `X_T` started at `(t, x)`.
///
/// `sigma` scales the Brownian increments (the time change `s ↦ σ²s` in
/// closed form). Results are bit-for-bit reproducible for identical
/// `(seed, scheme, n_steps, start)` regardless of parallelism.
pub fn simulate_endpoints(
    drift: &DriftCurve<f64>,
    t: f64,
    x: f64,
    n_paths: usize,
    n_steps: usize,
    scheme: Scheme,
    seed: u64,
    sigma: f64,
) -> Result<PathEnsemble, SdeError> {
    let maturity = drift.maturity();
    if !(t >= 0.0 && t < maturity) {
        return Err(SdeError::BadStartTime { t, maturity });
    }
    if !x.is_finite() {
        return Err(SdeError::BadStartValue(x));
    }
    if n_paths == 0 {
        return Err(SdeError::NoPaths);
    }
    if n_steps == 0 {
        return Err(SdeError::NoSteps);
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(SdeError::BadVolatility(sigma));
    }

    let ds = (maturity - t) / n_steps as f64;
    let sqrt_ds = ds.sqrt();
    // Step-grid curve data, shared read-only across paths.
    let mut b_at = Vec::with_capacity(n_steps);
    let mut neg_slope_at = Vec::with_capacity(n_steps);
    for k in 0..n_steps {
        let s = t + k as f64 * ds;
        b_at.push(drift.eval_clamped(s));
        neg_slope_at.push(drift.neg_slope_clamped(s));
    }
    let y0 = x - drift.eval_clamped(t);
    let half_var = 0.5 * sigma * sigma * ds;

    let endpoints: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = PathRng::new(seed, p as u64);
            match scheme {
                Scheme::EulerX => {
                    let mut xk = x;
                    for bk in &b_at {
                        let dw = sqrt_ds * rng.next_normal();
                        xk += sigma * (bk - xk) * dw;
                    }
                    xk
                }
                Scheme::ExactY => {
                    let mut y = y0;
                    for nsk in &neg_slope_at {
                        let dw = sqrt_ds * rng.next_normal();
                        let factor = (-sigma * dw - half_var).exp();
                        y = factor * (y + nsk * ds);
                    }
                    y // X_T = Y_T + b(T) and b(T) = 0
                }
            }
        })
        .collect();

    if let Some(p) = endpoints.iter().position(|e| !e.is_finite()) {
        return Err(SdeError::NonFinite(p));
    }
    Ok(PathEnsemble {
        start_t: t,
        start_x: x,
        endpoints,
        scheme,
        n_steps,
        seed,
        sigma,
        drift_id: drift.fingerprint(),
    })
}

/// Sample mean and standard error of `f(endpoint)`.
pub fn estimate_u(ensemble: &PathEnsemble, payoff: &Payoff) -> Result<(f64, f64), SdeError> {
    let n = ensemble.endpoints.len();
    if n == 0 {
        return Err(SdeError::EmptyEnsemble);
    }
    let mut sum = 0.0;
    for &e in &ensemble.endpoints {
        sum += payoff.eval(e);
    }
    let mean = sum / n as f64;
    if n == 1 {
        return Ok((mean, 0.0));
    }
    let mut ss = 0.0;
    for &e in &ensemble.endpoints {
        let d = payoff.eval(e) - mean;
        ss += d * d;
    }
    let stderr = (ss / ((n - 1) as f64 * n as f64)).sqrt();
    Ok((mean, stderr))
}

/// Fraction of endpoints `≥ 0`.
pub fn positivity_fraction(ensemble: &PathEnsemble) -> f64 {
    if ensemble.endpoints.is_empty() {
        return 0.0;
    }
    let count = ensemble.endpoints.iter().filter(|&&e| e >= 0.0).count();
    count as f64 / ensemble.endpoints.len() as f64
}

impl PathEnsemble {
    /// One endpoint per line, after a metadata header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "# scheme={},n_steps={},seed={},start_t={},start_x={},sigma={},drift_id={:016x},n_paths={}",
            self.scheme.name(),
            self.n_steps,
            self.seed,
            self.start_t,
            self.start_x,
            self.sigma,
            self.drift_id,
            self.endpoints.len()
        )?;
        writeln!(w, "endpoint")?;
        for e in &self.endpoints {
            writeln!(w, "{e}")?;
        }
        Ok(())
    }
}
