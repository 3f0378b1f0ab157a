//! Heat-kernel barrier function with certified series truncation.
//!
//! The barrier is the caloric function
//!
//! ```text
//! v(t, x) = 2 ∫_E Φ(t, x − y) dy,    E = ∪_j ((4j+1)R, (4j+3)R),
//! ```
//!
//! where `Φ(t, x) = e^{−x²/4t}/√(4πt)` solves `v_t = v_xx`. On the strip
//! `|x| < R` it vanishes at `t = 0`, equals 1 on `|x| = R`, is even, convex
//! in `x`, and nondecreasing in `t` — which makes it a supersolution
//! dominating any solution of `u_t = a·u_xx` with `0 ≤ a ≤ 1` that vanishes
//! on part of the parabolic boundary. Its midstrip value obeys the closed
//! form [`barrier_bound`]: `v(2, x) ≤ (16/√(2π)) R⁻¹ e^{−R²/32}` for
//! `|x| ≤ R/2`.
//!
//! Each interval contributes a difference of error-function values, and the
//! infinite series is truncated at a `J` certified by a Gaussian tail bound:
//! the neglected mass is below `TAIL_TOL = 1e−12` or the evaluation refuses
//! to answer. Sums are accumulated in `f64` regardless of the exposed scalar
//! type, so accuracy exceeds every consuming tolerance.

use thiserror::Error;

use crate::scalar::Scalar;

/// Neglected series mass above this bound is an error, never silent.
pub const TAIL_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum BarrierError {
    #[error("time must be positive (got {0})")]
    NonpositiveTime(f64),
    #[error("half-width R must be positive and finite (got {0})")]
    BadHalfWidth(f64),
    #[error("truncation_J must be >= 1")]
    BadTruncation,
    #[error("dim_n must be >= 1")]
    BadDimension,
    #[error(
        "truncation J = {j} leaves tail {tail:.3e} > {budget:.0e} at (t, x) = ({t}, {x})"
    )]
    InsufficientTruncation { j: usize, tail: f64, t: f64, x: f64, budget: f64 },
    #[error("series value {value} outside [0, 1] beyond tolerance")]
    RangeViolation { value: f64 },
    #[error("coordinate count {got} does not match dim_n = {expect}")]
    DimensionMismatch { got: usize, expect: usize },
    #[error("no truncation J <= {0} certifies the requested domain")]
    TruncationSearchFailed(usize),
}

/// Error function, delegated to libm's sub-ulp implementation and widened
/// through `f64` so `f32` instantiations lose nothing upstream.
pub fn erf<T: Scalar>(x: T) -> T {
    T::of(libm::erf(x.as_f64()))
}

/// Complementary error function, accurate for large arguments.
pub fn erfc<T: Scalar>(x: T) -> T {
    T::of(libm::erfc(x.as_f64()))
}

/// Fundamental solution `Φ(t, x) = e^{−x²/4t}/√(4πt)` of `u_t = u_xx`.
pub fn heat_kernel<T: Scalar>(t: T, x: T) -> Result<T, BarrierError> {
    if !(t > T::zero() && t.is_finite()) {
        return Err(BarrierError::NonpositiveTime(t.as_f64()));
    }
    let t = t.as_f64();
    let x = x.as_f64();
    Ok(T::of((-x * x / (4.0 * t)).exp() / (4.0 * std::f64::consts::PI * t).sqrt()))
}

/// Barrier configuration: strip half-width `R`, series cutoff `J`, and the
/// coordinate count `n` for the summed barrier [`BarrierSpec::barrier_nd`].
#[derive(Debug, Clone, Copy)]
pub struct BarrierSpec<T> {
    /// Strip half-width `R > 0`.
    pub half_width: T,
    /// Series cutoff: terms `|j| ≤ J` are summed.
    pub truncation_j: usize,
    /// Coordinate count of the summed barrier.
    pub dim_n: usize,
}

/// Conservative bound on the neglected series mass at distance
/// `d = (4J−3)R − |x|`: the omitted intervals lie beyond `d`, so their total
/// Gaussian mass is below `2·erfc(d/(2√t))`.
fn tail_bound(r: f64, j: usize, t: f64, x: f64) -> f64 {
    let d = (4.0 * j as f64 - 3.0) * r - x.abs();
    if d <= 0.0 {
        return f64::INFINITY;
    }
    2.0 * libm::erfc(d / (2.0 * t.sqrt()))
}

impl<T: Scalar> BarrierSpec<T> {
    pub fn new(half_width: T, truncation_j: usize, dim_n: usize) -> Result<Self, BarrierError> {
        if !(half_width > T::zero() && half_width.is_finite()) {
            return Err(BarrierError::BadHalfWidth(half_width.as_f64()));
        }
        if truncation_j < 1 {
            return Err(BarrierError::BadTruncation);
        }
        if dim_n < 1 {
            return Err(BarrierError::BadDimension);
        }
        Ok(Self {
            half_width,
            truncation_j,
            dim_n,
        })
    }

    /// Picks the smallest `J` whose certified tail stays below [`TAIL_TOL`]
    /// everywhere on `t ≤ t_max`, `|x| ≤ x_max`.
    pub fn for_domain(half_width: T, dim_n: usize, t_max: T, x_max: T) -> Result<Self, BarrierError> {
        let r = half_width.as_f64();
        if !(r > 0.0 && half_width.is_finite()) {
            return Err(BarrierError::BadHalfWidth(r));
        }
        const J_CAP: usize = 1_000;
        for j in 1..=J_CAP {
            if tail_bound(r, j, t_max.as_f64(), x_max.as_f64()) < TAIL_TOL {
                return Self::new(half_width, j, dim_n);
            }
        }
        Err(BarrierError::TruncationSearchFailed(J_CAP))
    }

    /// The one-dimensional barrier `v(t, x)`, accumulated in `f64`. Values
    /// are clamped into `[0, 1]` only when the overshoot is below 1e−12;
    /// larger overshoots and uncertified tails are errors.
    pub fn barrier_1d(&self, t: T, x: T) -> Result<T, BarrierError> {
        if !(t > T::zero() && t.is_finite()) {
            return Err(BarrierError::NonpositiveTime(t.as_f64()));
        }
        let r = self.half_width.as_f64();
        let tf = t.as_f64();
        let xf = x.as_f64();
        let j = self.truncation_j;
        let tail = tail_bound(r, j, tf, xf);
        if !(tail < TAIL_TOL) {
            return Err(BarrierError::InsufficientTruncation {
                j,
                tail,
                t: tf,
                x: xf,
                budget: TAIL_TOL,
            });
        }
        let s = 2.0 * tf.sqrt();
        let mut sum = 0.0;
        // 2·∫_a^b Φ(t, x−y) dy = erf((b−x)/(2√t)) − erf((a−x)/(2√t));
        // summed from the far ends inward so the tiny terms are not lost.
        for k in 0..=2 * j {
            let jj = if k % 2 == 0 {
                j as i64 - (k / 2) as i64
            } else {
                -(j as i64) + (k / 2) as i64
            };
            let a = (4.0 * jj as f64 + 1.0) * r;
            let b = (4.0 * jj as f64 + 3.0) * r;
            sum += libm::erf((b - xf) / s) - libm::erf((a - xf) / s);
        }
        if !(-TAIL_TOL..=1.0 + TAIL_TOL).contains(&sum) {
            return Err(BarrierError::RangeViolation { value: sum });
        }
        Ok(T::of(sum.clamp(0.0, 1.0)))
    }

    /// The summed barrier `V(t, x₁, …, xₙ) = Σ_k v(t + 1, x_k)` on the
    /// shifted time interval `t ∈ (−1, 1]`.
    pub fn barrier_nd(&self, t: T, xs: &[T]) -> Result<T, BarrierError> {
        if xs.len() != self.dim_n {
            return Err(BarrierError::DimensionMismatch {
                got: xs.len(),
                expect: self.dim_n,
            });
        }
        let shifted = t + T::one();
        let mut total = T::zero();
        for &xk in xs {
            total += self.barrier_1d(shifted, xk)?;
        }
        Ok(total)
    }
}

/// Closed-form midstrip bound `(16/√(2π)) R⁻¹ e^{−R²/32}` on `v(2, x)` for
/// `|x| ≤ R/2`.
pub fn barrier_bound<T: Scalar>(half_width: T) -> T {
    let r = half_width.as_f64();
    T::of(16.0 / (2.0 * std::f64::consts::PI).sqrt() / r * (-r * r / 32.0).exp())
}
