//! Market data and the drift curve `b(t)`.
//!
//! A market — short rate `r`, maturity `T`, volatility `σ`, dividend density
//! `ν′` and weighting density `ρ` (both piecewise constant on `[0, T]`) —
//! determines the drift curve
//!
//! ```text
//! b(t) = e^{−∫₀ᵀ ν′} · ∫ₜᵀ exp{ −r(T−s) + ∫ₛᵀ ν′ } ρ(s) ds,
//! ```
//!
//! a nonincreasing Lipschitz function with `b(T) = 0`. Because the densities
//! are piecewise constant, every integral is a sum of closed-form exponential
//! pieces, so knot values are exact (no quadrature error) and the negative
//! slope
//!
//! ```text
//! −b′(t) = e^{−∫₀ᵀ ν′} · exp{ −r(T−t) + ∫ₜᵀ ν′ } · ρ(t)
//! ```
//!
//! is available analytically. Its extremes over `[0, T]` give certified slope
//! bounds `0 < m₁ ≤ −b′(t) ≤ m₂`, which the decay-bound checks consume.
//!
//! [`DriftCurve`] is immutable after construction and shared by the PDE
//! solver, the SDE simulator, and the bound checks.

use thiserror::Error;

use crate::scalar::Scalar;

/// Errors from market validation and drift construction.
#[derive(Debug, Error)]
pub enum StrategyError {
    #[error("maturity must be positive and finite (got {0})")]
    BadMaturity(f64),
    #[error("rate must be nonnegative and finite (got {0})")]
    BadRate(f64),
    #[error("volatility must be positive and finite (got {0})")]
    BadVolatility(f64),
    #[error("strike must be finite (got {0})")]
    BadStrike(f64),
    #[error("{name} density invalid: {reason}")]
    BadDensity { name: &'static str, reason: String },
    #[error("weighting density must be bounded away from zero (min {0})")]
    NonpositiveWeight(f64),
    #[error("need at least 2 knots (got {0})")]
    TooFewKnots(usize),
    #[error("time {t} outside domain [0, {maturity}]")]
    TimeOutOfRange { t: f64, maturity: f64 },
    #[error("lower slope bound must be positive (got {0})")]
    DegenerateSlope(f64),
}

/// Piecewise-constant density on `[0, end]`: value `values[i]` holds on
/// `[starts[i], starts[i+1])`, the last piece extending to `end`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstant<T> {
    starts: Vec<T>,
    values: Vec<T>,
    end: T,
}

impl<T: Scalar> PiecewiseConstant<T> {
    /// Builds from `(t_start, value)` pairs; `starts` must begin at 0 and
    /// increase strictly, all inside `[0, end)`.
    pub fn new(pairs: &[(T, T)], end: T, name: &'static str) -> Result<Self, StrategyError> {
        let bad = |reason: String| StrategyError::BadDensity { name, reason };
        if pairs.is_empty() {
            return Err(bad("no pieces".into()));
        }
        if !(end.is_finite() && end > T::zero()) {
            return Err(bad(format!("end {} must be positive", end.as_f64())));
        }
        if pairs[0].0 != T::zero() {
            return Err(bad(format!(
                "first piece must start at 0 (got {})",
                pairs[0].0.as_f64()
            )));
        }
        for w in pairs.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(bad(format!(
                    "piece starts must increase strictly ({} then {})",
                    w[0].0.as_f64(),
                    w[1].0.as_f64()
                )));
            }
        }
        for &(s, v) in pairs {
            if !(s.is_finite() && v.is_finite()) {
                return Err(bad("non-finite entry".into()));
            }
            if s >= end {
                return Err(bad(format!(
                    "piece start {} not inside [0, {})",
                    s.as_f64(),
                    end.as_f64()
                )));
            }
        }
        Ok(Self {
            starts: pairs.iter().map(|p| p.0).collect(),
            values: pairs.iter().map(|p| p.1).collect(),
            end,
        })
    }

    /// Single piece of constant value over `[0, end]`.
    pub fn constant(value: T, end: T, name: &'static str) -> Result<Self, StrategyError> {
        Self::new(&[(T::zero(), value)], end, name)
    }

    /// Value at `t`; pieces are right-continuous, `t = end` takes the last
    /// piece. `t` outside `[0, end]` is clamped (validated upstream).
    pub fn value_at(&self, t: T) -> T {
        let mut i = self.starts.len() - 1;
        while i > 0 && self.starts[i] > t {
            i -= 1;
        }
        self.values[i]
    }

    pub fn min_value(&self) -> T {
        self.values.iter().copied().fold(self.values[0], T::min)
    }

    pub fn max_value(&self) -> T {
        self.values.iter().copied().fold(self.values[0], T::max)
    }

    pub fn starts(&self) -> &[T] {
        &self.starts
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn end(&self) -> T {
        self.end
    }
}

/// Market inputs defining the pricing problem.
#[derive(Debug, Clone)]
pub struct MarketSpec<T> {
    /// Short rate `r ≥ 0`, per year.
    pub rate: T,
    /// Maturity `T > 0`, years.
    pub maturity: T,
    /// Volatility `σ > 0`, per √year.
    pub volatility: T,
    /// Dividend density `ν′ ≥ 0` on `[0, T]`.
    pub dividend_density: PiecewiseConstant<T>,
    /// Averaging weight density `ρ ≥ ρ₀ > 0` on `[0, T]`.
    pub weighting_density: PiecewiseConstant<T>,
    /// Strike `K₁` (0 for the fixed-strike reduction solved here).
    pub strike: T,
}

impl<T: Scalar> MarketSpec<T> {
    /// The reference market: `r = 0`, `ν′ ≡ 0`, `ρ ≡ 1`, `T = 1`, `σ = 1`,
    /// for which `b(t) = 1 − t` exactly.
    pub fn reference() -> Self {
        let one = T::one();
        Self {
            rate: T::zero(),
            maturity: one,
            volatility: one,
            dividend_density: PiecewiseConstant::constant(T::zero(), one, "dividend")
                .expect("static construction"),
            weighting_density: PiecewiseConstant::constant(one, one, "weighting")
                .expect("static construction"),
            strike: T::zero(),
        }
    }

    /// Range-checks every field.
    pub fn validate(&self) -> Result<(), StrategyError> {
        if !(self.maturity.is_finite() && self.maturity > T::zero()) {
            return Err(StrategyError::BadMaturity(self.maturity.as_f64()));
        }
        if !(self.rate.is_finite() && self.rate >= T::zero()) {
            return Err(StrategyError::BadRate(self.rate.as_f64()));
        }
        if !(self.volatility.is_finite() && self.volatility > T::zero()) {
            return Err(StrategyError::BadVolatility(self.volatility.as_f64()));
        }
        if !self.strike.is_finite() {
            return Err(StrategyError::BadStrike(self.strike.as_f64()));
        }
        for (pc, name) in [
            (&self.dividend_density, "dividend"),
            (&self.weighting_density, "weighting"),
        ] {
            if pc.end() != self.maturity {
                return Err(StrategyError::BadDensity {
                    name,
                    reason: format!(
                        "defined on [0, {}] but maturity is {}",
                        pc.end().as_f64(),
                        self.maturity.as_f64()
                    ),
                });
            }
        }
        if self.dividend_density.min_value() < T::zero() {
            return Err(StrategyError::BadDensity {
                name: "dividend",
                reason: format!("negative value {}", self.dividend_density.min_value().as_f64()),
            });
        }
        if self.weighting_density.min_value() <= T::zero() {
            return Err(StrategyError::NonpositiveWeight(
                self.weighting_density.min_value().as_f64(),
            ));
        }
        Ok(())
    }
}

/// Closed-form slope source: everything needed to evaluate
/// `−b′(t) = prefactor · exp{−r(T−t) + N(t)} · ρ(t)` exactly, where
/// `N(t) = ∫ₜᵀ ν′` and `prefactor = e^{−N(0)}`.
#[derive(Debug, Clone)]
struct SlopeSource<T> {
    prefactor: T,
    rate: T,
    maturity: T,
    /// Merged breakpoints of ν′ and ρ: `0 = s₀ < s₁ < … < s_{m−1} < T`.
    seg_starts: Vec<T>,
    /// ν′ and ρ values per merged segment.
    nu: Vec<T>,
    rho: Vec<T>,
    /// `N(sᵢ)` per segment start, plus trailing `N(T) = 0`.
    nu_tail: Vec<T>,
}

impl<T: Scalar> SlopeSource<T> {
    fn segment_of(&self, t: T) -> usize {
        let mut i = self.seg_starts.len() - 1;
        while i > 0 && self.seg_starts[i] > t {
            i -= 1;
        }
        i
    }

    fn seg_end(&self, i: usize) -> T {
        if i + 1 < self.seg_starts.len() {
            self.seg_starts[i + 1]
        } else {
            self.maturity
        }
    }

    /// `f(t) = −r(T−t) + N(t)`, the exponent of the slope formula.
    fn exponent(&self, t: T) -> T {
        let i = self.segment_of(t);
        let n_tail = self.nu_tail[i + 1] + self.nu[i] * (self.seg_end(i) - t);
        -self.rate * (self.maturity - t) + n_tail
    }

    fn neg_slope(&self, t: T) -> T {
        let i = self.segment_of(t);
        self.prefactor * self.rho[i] * self.exponent(t).exp()
    }
}

/// `∫₀^len e^{k s} ds`, stable as `k·len → 0`.
fn exp_integral<T: Scalar>(k: T, len: T) -> T {
    if k == T::zero() {
        len
    } else {
        (k * len).exp_m1() / k
    }
}

/// The drift curve `b(t)` sampled on a uniform knot grid, with certified
/// slope bounds and the analytic slope source.
#[derive(Debug, Clone)]
pub struct DriftCurve<T> {
    knots: Vec<T>,
    values: Vec<T>,
    m1: T,
    m2: T,
    maturity: T,
    spacing: T,
    slope: SlopeSource<T>,
}

/// Builds `b(t)` on `n_knots` uniform knots by exact per-segment integration
/// and certifies the slope bounds `m₁, m₂` from the closed-form `−b′`.
pub fn build_drift<T: Scalar>(
    market: &MarketSpec<T>,
    n_knots: usize,
) -> Result<DriftCurve<T>, StrategyError> {
    market.validate()?;
    if n_knots < 2 {
        return Err(StrategyError::TooFewKnots(n_knots));
    }
    let t_mat = market.maturity;

    // Merge the breakpoints of the two densities so both are constant on
    // every segment.
    let mut seg_starts: Vec<T> = market
        .dividend_density
        .starts()
        .iter()
        .chain(market.weighting_density.starts())
        .copied()
        .collect();
    seg_starts.sort_by(|a, b| a.partial_cmp(b).expect("finite starts"));
    seg_starts.dedup();
    let m = seg_starts.len();
    let nu: Vec<T> = seg_starts
        .iter()
        .map(|&s| market.dividend_density.value_at(s))
        .collect();
    let rho: Vec<T> = seg_starts
        .iter()
        .map(|&s| market.weighting_density.value_at(s))
        .collect();

    // N(sᵢ) = ∫_{sᵢ}^T ν′, accumulated exactly from the right.
    let mut nu_tail = vec![T::zero(); m + 1];
    for i in (0..m).rev() {
        let end = if i + 1 < m { seg_starts[i + 1] } else { t_mat };
        nu_tail[i] = nu_tail[i + 1] + nu[i] * (end - seg_starts[i]);
    }
    let prefactor = (-nu_tail[0]).exp();

    let slope = SlopeSource {
        prefactor,
        rate: market.rate,
        maturity: t_mat,
        seg_starts: seg_starts.clone(),
        nu,
        rho,
        nu_tail,
    };

    // Suffix integrals I_j = ∫_{s_j}^T e^{f(s)} ρ(s) ds. On segment j the
    // exponent is affine with rate k_j = r − ν′_j, so each piece is
    // e^{f(α)}·ρ_j·∫₀^len e^{k_j s} ds in closed form.
    let mut suffix = vec![T::zero(); m + 1];
    for j in (0..m).rev() {
        let a = seg_starts[j];
        let len = slope.seg_end(j) - a;
        let k = market.rate - slope.nu[j];
        suffix[j] = suffix[j + 1] + slope.rho[j] * slope.exponent(a).exp() * exp_integral(k, len);
    }

    let n1 = T::of_usize(n_knots - 1);
    let mut knots = Vec::with_capacity(n_knots);
    let mut values = Vec::with_capacity(n_knots);
    for u in 0..n_knots {
        let t = if u == n_knots - 1 {
            t_mat
        } else {
            t_mat * T::of_usize(u) / n1
        };
        let j = slope.segment_of(t);
        let k = market.rate - slope.nu[j];
        let partial = slope.rho[j] * slope.exponent(t).exp() * exp_integral(k, slope.seg_end(j) - t);
        knots.push(t);
        values.push(prefactor * (partial + suffix[j + 1]));
    }

    // Slope extremes: −b′ is monotone on each segment (exponent is affine,
    // ρ constant), so segment endpoints realize the extremes.
    let mut m1 = T::infinity();
    let mut m2 = T::zero();
    for j in 0..m {
        let a = seg_starts[j];
        let b_end = slope.seg_end(j);
        for s in [slope.neg_slope(a), slope.prefactor * slope.rho[j] * slope.exponent(b_end).exp()]
        {
            m1 = m1.min(s);
            m2 = m2.max(s);
        }
    }
    if !(m1 > T::zero()) {
        return Err(StrategyError::DegenerateSlope(m1.as_f64()));
    }

    debug_assert!(values.windows(2).all(|w| w[1] <= w[0]), "b must be nonincreasing");
    debug_assert_eq!(values[n_knots - 1], T::zero(), "b(T) must vanish");

    Ok(DriftCurve {
        knots,
        values,
        m1,
        m2,
        maturity: t_mat,
        spacing: t_mat / n1,
        slope,
    })
}

impl<T: Scalar> DriftCurve<T> {
    /// Certified bounds `(m₁, m₂)` with `0 < m₁ ≤ −b′(t) ≤ m₂` on `[0, T]`.
    pub fn slope_bounds(&self) -> (T, T) {
        (self.m1, self.m2)
    }

    /// Piecewise-linear interpolation of the knot values.
    pub fn eval(&self, t: T) -> Result<T, StrategyError> {
        if !(t >= T::zero() && t <= self.maturity) {
            return Err(StrategyError::TimeOutOfRange {
                t: t.as_f64(),
                maturity: self.maturity.as_f64(),
            });
        }
        Ok(self.eval_clamped(t))
    }

    /// Interpolation with `t` clamped into `[0, T]`; for solver hot loops
    /// where range errors cannot occur.
    pub(crate) fn eval_clamped(&self, t: T) -> T {
        let n = self.knots.len();
        let pos = (t / self.spacing).floor();
        let mut i = pos.to_usize().unwrap_or(0);
        if i >= n - 1 {
            i = n - 2;
        }
        let frac = (t - self.knots[i]) / self.spacing;
        let frac = frac.max(T::zero()).min(T::one());
        self.values[i] + (self.values[i + 1] - self.values[i]) * frac
    }

    /// Closed-form `−b′(t) ≥ m₁ > 0`.
    pub fn neg_slope(&self, t: T) -> Result<T, StrategyError> {
        if !(t >= T::zero() && t <= self.maturity) {
            return Err(StrategyError::TimeOutOfRange {
                t: t.as_f64(),
                maturity: self.maturity.as_f64(),
            });
        }
        Ok(self.slope.neg_slope(t))
    }

    pub(crate) fn neg_slope_clamped(&self, t: T) -> T {
        self.slope.neg_slope(t.max(T::zero()).min(self.maturity))
    }

    /// The time-reversed curve `ψ(τ) = b(T − τ)`, the degeneracy curve in
    /// solver coordinates. `ψ` is increasing with `ψ′ ∈ [m₁, m₂]`,
    /// `ψ(0) = 0`, `ψ(T) = b(0)`.
    pub fn psi(&self, tau: T) -> Result<T, StrategyError> {
        self.eval(self.maturity - tau)
    }

    pub(crate) fn psi_clamped(&self, tau: T) -> T {
        self.eval_clamped((self.maturity - tau).max(T::zero()).min(self.maturity))
    }

    /// `ℓ = b(0) = ψ(T)`, the curve's initial level.
    pub fn ell(&self) -> T {
        self.values[0]
    }

    pub fn maturity(&self) -> T {
        self.maturity
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// FNV-1a hash of the knot/value bit patterns; identifies the curve in
    /// ensemble and solution metadata.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bits: u64| {
            for byte in bits.to_le_bytes() {
                h ^= u64::from(byte);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for &v in self.knots.iter().chain(&self.values) {
            eat(v.as_f64().to_bits());
        }
        eat(self.m1.as_f64().to_bits());
        eat(self.m2.as_f64().to_bits());
        h
    }
}
