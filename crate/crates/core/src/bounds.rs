//! Vanishing-rate certificates near the degeneracy curve.
//!
//! The singular pricing component is `O(√r · e^{−k₀/r})` in sup norm on
//! shrinking parabolic windows of radius `r` around any point of the curve,
//! with every constant explicit in the curve's slope window `[m₁, m₂]`:
//!
//! ```text
//! sup_{U'_r} |v| ≤ N₀ √r e^{−k₀/r} sup_D |v|,
//! N₀ = 8(m₁+2m₂)/(√π m₁),   k₀ = m₁²/(16(m₁+2m₂)²).
//! ```
//!
//! The same mechanism covers coefficients degenerating like a power
//! `Λ|φ(x) − t|^μ` off a Lipschitz graph in n space dimensions, with the
//! rate `e^{−k₀ r^{1−μ}}`. This module builds the scaling frames, evaluates
//! both sides of the bounds on computed solutions (with a refinement-based
//! noise floor), and fits observed decay rates for comparison against `k₀`.

use thiserror::Error;

use crate::pde::probe::derivatives_at;
use crate::pde::solve::solve_u2;
use crate::pde::{Component, GridSolution, PdeError};
use crate::scalar::Scalar;
use crate::strategy::DriftCurve;

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("slope window must satisfy 0 < m1 <= m2 (got {m1}, {m2})")]
    BadSlopes { m1: f64, m2: f64 },
    #[error("radius must lie in (0, 1) (got {0})")]
    BadRadius(f64),
    #[error("closed cylinder escapes the domain: {0}")]
    NotContained(String),
    #[error("grid too coarse for r = {r}: need spacing (dt, dx) <= ({dt_max:.3e}, {dx_max:.3e}), have ({dt:.3e}, {dx:.3e})")]
    UnderResolved {
        r: f64,
        dt: f64,
        dx: f64,
        dt_max: f64,
        dx_max: f64,
    },
    #[error("solution solves a different problem than this check expects")]
    WrongComponent,
    #[error("solution was computed for a different drift curve")]
    DriftMismatch,
    #[error("coefficient carries no graph-distance metadata")]
    MetadataMissing,
    #[error("frame does not match the solution's coefficient: {0}")]
    FrameMismatch(String),
    #[error("z0 = ({t0}, {x0}) is not on the graph (phi(x0) = {phi})")]
    NotOnGraph { t0: f64, x0: f64, phi: f64 },
    #[error("degeneracy power must exceed 1 (got {0})")]
    BadMu(f64),
    #[error("ellipticity window must satisfy 0 < lambda <= Lambda")]
    BadEllipticity,
    #[error("dimension must be positive (and 1 for grid checks)")]
    BadDimension,
    #[error("Lipschitz bound must be positive and finite (got {0})")]
    BadLipschitz(f64),
    #[error("noise floor must be nonnegative and finite (got {0})")]
    BadNoiseFloor(f64),
    #[error("need at least 4 samples above the noise floor (got {0})")]
    TooFewSamples(usize),
    #[error(transparent)]
    Pde(#[from] PdeError),
}

/// Scaling frame for the curve bound: window `(t₀, x₀) ± (r, (m₁/2)r)`
/// with the constants `c`, `N₀`, `k₀` it certifies.
#[derive(Debug, Clone, Copy)]
pub struct RescaleFrame<T> {
    pub t0: T,
    pub x0: T,
    pub r: T,
    pub m1: T,
    pub m2: T,
    /// Spatial rescaling gain: `x ↦ x₀ + c r^{3/2} x`.
    pub c: T,
    pub n0: T,
    pub k0: T,
}

/// Builds the frame at `z0 = (t0, x0)`, checking that the closed cylinder
/// stays inside `(0, t_horizon) × (0, ell)` and that `r ∈ (0, 1)`.
///
/// `m1 <= curve slope <= m2` must hold on the whole horizon; `z0` is meant
/// to sit on the curve (the bound is about windows centred there).
pub fn key_frame<T: Scalar>(
    m1: T,
    m2: T,
    z0: (T, T),
    r: T,
    t_horizon: T,
    ell: T,
) -> Result<RescaleFrame<T>, BoundsError> {
    if !(m1 > T::zero() && m2 >= m1) || !m2.is_finite() {
        return Err(BoundsError::BadSlopes {
            m1: m1.as_f64(),
            m2: m2.as_f64(),
        });
    }
    if !(r > T::zero() && r < T::one()) {
        return Err(BoundsError::BadRadius(r.as_f64()));
    }
    let (t0, x0) = z0;
    let half_x = m1 / T::of(2.0) * r;
    if t0 - r <= T::zero() || t0 + r >= t_horizon {
        return Err(BoundsError::NotContained(format!(
            "t in [{}, {}] vs (0, {})",
            (t0 - r).as_f64(),
            (t0 + r).as_f64(),
            t_horizon.as_f64()
        )));
    }
    if x0 - half_x <= T::zero() || x0 + half_x >= ell {
        return Err(BoundsError::NotContained(format!(
            "x in [{}, {}] vs (0, {})",
            (x0 - half_x).as_f64(),
            (x0 + half_x).as_f64(),
            ell.as_f64()
        )));
    }
    let sum = m1 + T::of(2.0) * m2;
    Ok(RescaleFrame {
        t0,
        x0,
        r,
        m1,
        m2,
        c: sum / T::of(8.0).sqrt(),
        n0: T::of(8.0) * sum / (T::PI().sqrt() * m1),
        k0: m1 * m1 / (T::of(16.0) * sum * sum),
    })
}

impl<T: Scalar> RescaleFrame<T> {
    pub fn in_cylinder(&self, t: T, x: T) -> bool {
        (t - self.t0).abs() < self.r && (x - self.x0).abs() < self.m1 / T::of(2.0) * self.r
    }

    /// Membership in `U_r`: the cylinder cut to below the curve,
    /// `psi_at_t` being the curve value at `t`.
    pub fn in_u(&self, t: T, x: T, psi_at_t: T) -> bool {
        self.in_cylinder(t, x) && x < psi_at_t
    }

    /// Membership in the inner window `U'_r` (half the spatial width).
    pub fn in_u_prime(&self, t: T, x: T, psi_at_t: T) -> bool {
        self.in_u(t, x, psi_at_t) && (x - self.x0).abs() < self.m1 / T::of(4.0) * self.r
    }

    /// Right-hand-side gain `N₀ √r e^{−k₀/r}`.
    pub fn decay_factor(&self) -> T {
        self.n0 * self.r.sqrt() * (-self.k0 / self.r).exp()
    }
}

/// Scaling frame for power-degenerate coefficients `a ≍ |φ(x) − t|^μ`
/// off a graph with Lipschitz constant `M₀`, in `n` space dimensions.
#[derive(Debug, Clone, Copy)]
pub struct GeneralFrame<T> {
    pub n: usize,
    pub mu: T,
    pub lambda_min: T,
    pub lambda_max: T,
    pub m0: T,
    /// Spatial rescaling gain: `x ↦ x₀ + c r^{(1+μ)/2} x`.
    pub c: T,
    pub n0: T,
    pub k0: T,
}

pub fn general_frame<T: Scalar>(
    n: usize,
    mu: T,
    lambda_min: T,
    lambda_max: T,
    m0: T,
) -> Result<GeneralFrame<T>, BoundsError> {
    if n == 0 {
        return Err(BoundsError::BadDimension);
    }
    if !(mu > T::one()) || !mu.is_finite() {
        return Err(BoundsError::BadMu(mu.as_f64()));
    }
    if !(lambda_min > T::zero() && lambda_max >= lambda_min) || !lambda_max.is_finite() {
        return Err(BoundsError::BadEllipticity);
    }
    if !(m0 > T::zero()) || !m0.is_finite() {
        return Err(BoundsError::BadLipschitz(m0.as_f64()));
    }
    let c = lambda_max.sqrt() * T::of(1.5).powf(mu / T::of(2.0));
    let two_pi = T::of(2.0) * T::PI();
    Ok(GeneralFrame {
        n,
        mu,
        lambda_min,
        lambda_max,
        m0,
        c,
        n0: T::of(32.0) * T::of_usize(n) * c * m0 / two_pi.sqrt(),
        k0: T::one() / (T::of(128.0) * c * c * m0 * m0),
    })
}

impl<T: Scalar> GeneralFrame<T> {
    /// Right-hand-side gain `N₀ r^{(μ−1)/2} e^{−k₀ r^{1−μ}}`.
    pub fn decay_factor(&self, r: T) -> T {
        let half = T::of(0.5);
        self.n0
            * r.powf((self.mu - T::one()) * half)
            * (-self.k0 * r.powf(T::one() - self.mu)).exp()
    }
}

/// Both sides of a vanishing-rate bound at one radius.
#[derive(Debug, Clone, Copy)]
pub struct BoundReport<T> {
    pub r: T,
    /// `sup |v|` over the inner window `U'_r` (grid nodes).
    pub lhs: T,
    /// Certified ceiling: decay factor times the reference sup.
    pub rhs: T,
    pub ratio: T,
    /// Discretization-error estimate on the lhs from one grid refinement.
    pub noise_floor: T,
}

fn ratio_of<T: Scalar>(lhs: T, rhs: T) -> T {
    if rhs > T::zero() {
        lhs / rhs
    } else if lhs == T::zero() {
        T::zero()
    } else {
        T::infinity()
    }
}

fn require_resolved<T: Scalar>(
    dt: T,
    dx: T,
    r: T,
    x_width: T,
) -> Result<(), BoundsError> {
    // "Resolves r": at least 8 nodes across the cylinder in each direction.
    let slack = T::one() + T::of(1e-9);
    let dt_max = T::of(2.0) * r / T::of(8.0);
    let dx_max = x_width / T::of(8.0);
    if dt > dt_max * slack || dx > dx_max * slack {
        return Err(BoundsError::UnderResolved {
            r: r.as_f64(),
            dt: dt.as_f64(),
            dx: dx.as_f64(),
            dt_max: dt_max.as_f64(),
            dx_max: dx_max.as_f64(),
        });
    }
    Ok(())
}

/// Evaluates the curve bound on a pricing solution, re-solving once on a
/// 2× finer grid to estimate the discretization noise floor on the lhs.
pub fn check_key_lemma<T: Scalar>(
    sol: &GridSolution<T>,
    drift: &DriftCurve<T>,
    frame: &RescaleFrame<T>,
) -> Result<BoundReport<T>, BoundsError> {
    let sigma = match sol.component {
        Component::U2 { drift_id, sigma } => {
            if drift_id != drift.fingerprint() {
                return Err(BoundsError::DriftMismatch);
            }
            sigma
        }
        _ => return Err(BoundsError::WrongComponent),
    };
    let refined = solve_u2(drift, &sol.grid.refined(), sigma)?;
    check_key_lemma_with(sol, &refined, drift, frame)
}

/// Same as [`check_key_lemma`] with a caller-supplied refined solution
/// (any strictly finer grid on the same box).
pub fn check_key_lemma_with<T: Scalar>(
    sol: &GridSolution<T>,
    refined: &GridSolution<T>,
    drift: &DriftCurve<T>,
    frame: &RescaleFrame<T>,
) -> Result<BoundReport<T>, BoundsError> {
    let g = &sol.grid;
    require_resolved(g.dt(), g.dx(), frame.r, frame.m1 * frame.r)?;

    let ell = drift.ell();
    let mut lhs = T::zero();
    let mut noise = T::zero();
    let mut sup_domain = T::zero();
    for n in 0..g.n_t {
        let t = g.t_at(n);
        let psi = drift.psi_clamped(t);
        for i in 0..g.n_x {
            let x = g.x_at(i);
            let v = sol.value(n, i);
            if x >= T::zero() && x <= ell {
                sup_domain = sup_domain.max(v.abs());
            }
            if frame.in_u_prime(t, x, psi) {
                lhs = lhs.max(v.abs());
                noise = noise.max((refined.value_at(t, x)? - v).abs());
            }
        }
    }
    let rhs = frame.decay_factor() * sup_domain;
    Ok(BoundReport {
        r: frame.r,
        lhs,
        rhs,
        ratio: ratio_of(lhs, rhs),
        noise_floor: noise,
    })
}

/// One radius of the derivative-decay experiment: the scaled derivative
/// aggregate `q(r)` against the envelope shape `√r e^{−k₀/r}`.
#[derive(Debug, Clone, Copy)]
pub struct DecaySample<T> {
    pub r: T,
    pub q: T,
    pub envelope: T,
}

/// Samples `q(r) = r^{3/2}|v_x| + r³|v_xx| + r|v_t|` at `(t₀ + r, x₀)` for
/// each frame, using centered differences on the grid.
pub fn check_derivative_decay<T: Scalar>(
    sol: &GridSolution<T>,
    frames: &[RescaleFrame<T>],
) -> Result<Vec<DecaySample<T>>, BoundsError> {
    let mut out = Vec::with_capacity(frames.len());
    for f in frames {
        let (v_t, v_x, v_xx) = derivatives_at(sol, (f.t0 + f.r, f.x0))?;
        let r = f.r;
        let q = r.powf(T::of(1.5)) * v_x.abs() + r * r * r * v_xx.abs() + r * v_t.abs();
        out.push(DecaySample {
            r,
            q,
            envelope: r.sqrt() * (-f.k0 / r).exp(),
        });
    }
    Ok(out)
}

/// Fitted decay rate from a set of samples.
#[derive(Debug, Clone, Copy)]
pub struct DecayFit<T> {
    /// `k` in the model `q ≈ e^{a − k·r^{1−μ}}`; compare against `k₀`.
    pub k_fit: T,
    pub intercept: T,
    pub n_used: usize,
}

/// Least-squares fit of `log q` against `r^{1−μ}` (`1/r` for the curve
/// bound, where μ = 2). Samples at or below `noise_floor` are dropped;
/// at least 4 must survive.
pub fn fit_decay_rate<T: Scalar>(
    samples: &[DecaySample<T>],
    mu: T,
    noise_floor: T,
) -> Result<DecayFit<T>, BoundsError> {
    if !(mu > T::one()) || !mu.is_finite() {
        return Err(BoundsError::BadMu(mu.as_f64()));
    }
    if !(noise_floor >= T::zero()) || !noise_floor.is_finite() {
        return Err(BoundsError::BadNoiseFloor(noise_floor.as_f64()));
    }
    let usable: Vec<(T, T)> = samples
        .iter()
        .filter(|s| s.q > noise_floor && s.q > T::zero())
        .map(|s| (s.r.powf(T::one() - mu), s.q.ln()))
        .collect();
    if usable.len() < 4 {
        return Err(BoundsError::TooFewSamples(usable.len()));
    }
    let k = T::of_usize(usable.len());
    let (mut sw, mut sy, mut sww, mut swy) = (T::zero(), T::zero(), T::zero(), T::zero());
    for &(w, y) in &usable {
        sw += w;
        sy += y;
        sww += w * w;
        swy += w * y;
    }
    let slope = (k * swy - sw * sy) / (k * sww - sw * sw);
    Ok(DecayFit {
        k_fit: -slope,
        intercept: (sy - slope * sw) / k,
        n_used: usable.len(),
    })
}

/// Evaluates the power-degeneracy bound on a general solve at radius `r`
/// around `z0` (which must lie on the graph). A caller-supplied refined
/// solution feeds the noise floor; without one the floor reads 0.
pub fn check_general_bound<T: Scalar>(
    sol: &GridSolution<T>,
    frame: &GeneralFrame<T>,
    z0: (T, T),
    r: T,
    refined: Option<&GridSolution<T>>,
) -> Result<BoundReport<T>, BoundsError> {
    if frame.n != 1 {
        return Err(BoundsError::BadDimension);
    }
    if !(r > T::zero()) || !r.is_finite() {
        return Err(BoundsError::BadRadius(r.as_f64()));
    }
    let (coefficient, graph) = match &sol.component {
        Component::General { coefficient, graph } => (coefficient, graph),
        _ => return Err(BoundsError::WrongComponent),
    };
    let meta = coefficient.meta().ok_or(BoundsError::MetadataMissing)?;
    let tol_rel = T::one() + T::of(1e-12);
    if (meta.mu - frame.mu).abs() > T::of(1e-12) * frame.mu.abs() {
        return Err(BoundsError::FrameMismatch(format!(
            "mu {} vs {}",
            meta.mu.as_f64(),
            frame.mu.as_f64()
        )));
    }
    if meta.lambda_max > frame.lambda_max * tol_rel {
        return Err(BoundsError::FrameMismatch(format!(
            "Lambda {} exceeds frame's {}",
            meta.lambda_max.as_f64(),
            frame.lambda_max.as_f64()
        )));
    }
    if graph.max_abs_slope() > frame.m0 * tol_rel {
        return Err(BoundsError::FrameMismatch(format!(
            "graph slope {} exceeds frame's M0 {}",
            graph.max_abs_slope().as_f64(),
            frame.m0.as_f64()
        )));
    }

    let (t0, x0) = z0;
    let phi0 = graph.eval(x0);
    if (phi0 - t0).abs() > T::of(1e-9) * t0.abs().max(T::one()) {
        return Err(BoundsError::NotOnGraph {
            t0: t0.as_f64(),
            x0: x0.as_f64(),
            phi: phi0.as_f64(),
        });
    }

    let g = &sol.grid;
    let half_x = r / (T::of(2.0) * frame.m0);
    let quarter_x = r / (T::of(4.0) * frame.m0);
    if t0 - r < g.t_min || t0 + r > g.t_max || x0 - half_x < g.x_min || x0 + half_x > g.x_max {
        return Err(BoundsError::NotContained(format!(
            "cylinder [{}, {}] x [{}, {}] vs grid box",
            (t0 - r).as_f64(),
            (t0 + r).as_f64(),
            (x0 - half_x).as_f64(),
            (x0 + half_x).as_f64()
        )));
    }
    require_resolved(g.dt(), g.dx(), r, r / frame.m0)?;

    let mut lhs = T::zero();
    let mut sup_u = T::zero();
    let mut noise = T::zero();
    for n in 0..g.n_t {
        let t = g.t_at(n);
        if (t - t0).abs() >= r {
            continue;
        }
        for i in 0..g.n_x {
            let x = g.x_at(i);
            if (x - x0).abs() >= half_x || t <= graph.eval(x) {
                continue;
            }
            let v = sol.value(n, i);
            sup_u = sup_u.max(v.abs());
            if (x - x0).abs() < quarter_x {
                lhs = lhs.max(v.abs());
                if let Some(fine) = refined {
                    noise = noise.max((fine.value_at(t, x)? - v).abs());
                }
            }
        }
    }
    let rhs = frame.decay_factor(r) * sup_u;
    Ok(BoundReport {
        r,
        lhs,
        rhs,
        ratio: ratio_of(lhs, rhs),
        noise_floor: noise,
    })
}

/// The diffusion coefficient seen through the frame's parabolic rescaling:
/// `a(t, x) = (x₀ + c r^{3/2} x − ψ(t₀ + r t))² / (2 (c r)²)` for the
/// unit-volatility pricing problem. Bounded by 1 on the rescaled cylinder
/// `|t| < 1, |x| < (m₁/2c) r^{−1/2}` — the normalization the constants
/// `N₀, k₀` come from.
pub fn rescaled_coefficient<T: Scalar>(
    drift: &DriftCurve<T>,
    frame: &RescaleFrame<T>,
    t: T,
    x: T,
) -> T {
    let cr = frame.c * frame.r;
    let shift = frame.x0 + frame.c * frame.r.powf(T::of(1.5)) * x
        - drift.psi_clamped(frame.t0 + frame.r * t);
    shift * shift / (T::of(2.0) * cr * cr)
}
