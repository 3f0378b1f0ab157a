//! Backward-Euler marches for the pricing component and the model problems.

use crate::scalar::Scalar;
use crate::strategy::DriftCurve;

use super::tridiag::solve_tridiagonal;
use super::{CoefficientField, Component, Graph, Grid, GridSolution, PdeError};

/// Rows are kept in M-matrix form (diag `1 + 2λᵢ`, off-diag `−λᵢ`, λᵢ ≥ 0),
/// so the elimination never pivots and boundary identity rows pass through
/// the solve bitwise. The excess the check tolerates is pure rounding from
/// interior arithmetic; in practice it is exactly zero.
fn check_max_principle<T: Scalar>(
    values: &[T],
    data_min: T,
    data_max: T,
) -> Result<(), PdeError> {
    let scale = data_min.abs().max(data_max.abs()).max(T::one());
    let tol = T::of(64.0) * T::epsilon() * scale;
    let mut excess = T::zero();
    for &v in values {
        if !v.is_finite() {
            return Err(PdeError::NonFinite);
        }
        excess = excess.max(v - data_max).max(data_min - v);
    }
    if excess > tol {
        return Err(PdeError::MaxPrinciple {
            excess: excess.as_f64(),
        });
    }
    Ok(())
}

struct March<T> {
    lower: Vec<T>,
    diag: Vec<T>,
    upper: Vec<T>,
    level: Vec<T>,
    scratch: Vec<T>,
}

impl<T: Scalar> March<T> {
    fn new(n_x: usize) -> Self {
        Self {
            lower: vec![T::zero(); n_x - 1],
            diag: vec![T::one(); n_x],
            upper: vec![T::zero(); n_x - 1],
            level: vec![T::zero(); n_x],
            scratch: Vec::with_capacity(n_x),
        }
    }

    /// Writes the interior row `i`: `−λ v_{i−1} + (1 + 2λ) v_i − λ v_{i+1}`.
    fn diffusive_row(&mut self, i: usize, lambda: T) {
        self.lower[i - 1] = -lambda;
        self.diag[i] = T::one() + lambda + lambda;
        self.upper[i] = -lambda;
    }

    /// Writes row `i` as `v_i = value`, decoupled from both neighbours.
    fn identity_row(&mut self, i: usize, value: T, n_x: usize) {
        if i > 0 {
            self.lower[i - 1] = T::zero();
        }
        self.diag[i] = T::one();
        if i < n_x - 1 {
            self.upper[i] = T::zero();
        }
        self.level[i] = value;
    }
}

/// Solves the reversed-time pricing component on `grid`:
/// `v_τ = ½σ²(x − ψ(τ))² v_xx`, `v(0, x) = (−x)₊`, with the far-field
/// asymptotes `v = −x` on the left edge and `v = 0` on the right.
///
/// The grid must start at `τ = 0`, end at the drift's maturity, and bracket
/// the curve range: `x_min < 0` and `x_max > b(0)`.
pub fn solve_u2<T: Scalar>(
    drift: &DriftCurve<T>,
    grid: &Grid<T>,
    sigma: T,
) -> Result<GridSolution<T>, PdeError> {
    if !(sigma > T::zero()) || !sigma.is_finite() {
        return Err(PdeError::BadVolatility(sigma.as_f64()));
    }
    let maturity = drift.maturity();
    let tol = T::of(1e-12) * maturity.max(T::one());
    if grid.t_min.abs() > tol || (grid.t_max - maturity).abs() > tol {
        return Err(PdeError::HorizonMismatch {
            expected: maturity.as_f64(),
            got_min: grid.t_min.as_f64(),
            got_max: grid.t_max.as_f64(),
        });
    }
    if !(grid.x_min < T::zero() && grid.x_max > drift.ell()) {
        return Err(PdeError::NonBracketing {
            x_min: grid.x_min.as_f64(),
            x_max: grid.x_max.as_f64(),
            ell: drift.ell().as_f64(),
        });
    }

    let (n_t, n_x) = (grid.n_t, grid.n_x);
    let h = grid.dx();
    let gain = grid.dt() * sigma * sigma / (T::of(2.0) * h * h);

    let mut m = March::new(n_x);
    let mut values = Vec::with_capacity(n_t * n_x);
    for i in 0..n_x {
        m.level[i] = (-grid.x_at(i)).max(T::zero());
    }
    values.extend_from_slice(&m.level);

    for n in 1..n_t {
        let psi = drift.psi_clamped(grid.t_at(n));
        for i in 1..n_x - 1 {
            let d = grid.x_at(i) - psi;
            m.diffusive_row(i, gain * d * d);
        }
        m.identity_row(0, -grid.x_min, n_x);
        m.identity_row(n_x - 1, T::zero(), n_x);
        solve_tridiagonal(&m.lower, &m.diag, &m.upper, &mut m.level, &mut m.scratch)?;
        values.extend_from_slice(&m.level);
    }

    // Data range: (−x)₊ spans [0, −x_min]; the lateral values −x_min and 0
    // sit inside that same interval.
    let (data_min, data_max) = (T::zero(), -grid.x_min);
    check_max_principle(&values, data_min, data_max)?;
    GridSolution::from_parts(
        *grid,
        values,
        Component::U2 {
            drift_id: drift.fingerprint(),
            sigma,
        },
        data_min,
        data_max,
    )
}

/// Solves `u_t = a(t, x) u_xx` on `grid` above the graph `t = φ(x)`, with
/// `u = 0` on and below the graph and `u = data(t, x)` on the active part of
/// the parabolic boundary (initial level and lateral edges).
///
/// When the coefficient carries graph metadata, the graph's slope must stay
/// within the declared Lipschitz bound or the solve is rejected.
pub fn solve_general<T: Scalar>(
    coefficient: &CoefficientField<T>,
    graph: &Graph<T>,
    data: impl Fn(T, T) -> T,
    grid: &Grid<T>,
) -> Result<GridSolution<T>, PdeError> {
    if let Some(meta) = coefficient.meta() {
        let found = graph.max_abs_slope();
        let declared = meta.lipschitz;
        if found > declared * (T::one() + T::of(1e-12)) {
            return Err(PdeError::GraphNotLipschitz {
                declared: declared.as_f64(),
                found: found.as_f64(),
            });
        }
    }

    let (n_t, n_x) = (grid.n_t, grid.n_x);
    let h = grid.dx();
    let gain = grid.dt() / (h * h);
    let phi: Vec<T> = (0..n_x).map(|i| graph.eval(grid.x_at(i))).collect();

    let mut data_min = T::infinity();
    let mut data_max = T::neg_infinity();
    let mut any_inactive = false;
    let mut touch = |v: T| {
        data_min = data_min.min(v);
        data_max = data_max.max(v);
        v
    };

    let mut m = March::new(n_x);
    let mut values = Vec::with_capacity(n_t * n_x);
    let t0 = grid.t_at(0);
    for i in 0..n_x {
        m.level[i] = if t0 > phi[i] {
            touch(data(t0, grid.x_at(i)))
        } else {
            any_inactive = true;
            T::zero()
        };
    }
    values.extend_from_slice(&m.level);

    for n in 1..n_t {
        let t = grid.t_at(n);
        for i in 1..n_x - 1 {
            if t > phi[i] {
                let x = grid.x_at(i);
                let a = coefficient.eval(t, x);
                if !(a >= T::zero()) || !a.is_finite() {
                    return Err(PdeError::BadCoefficient {
                        t: t.as_f64(),
                        x: x.as_f64(),
                        value: a.as_f64(),
                    });
                }
                m.diffusive_row(i, gain * a);
            } else {
                any_inactive = true;
                m.identity_row(i, T::zero(), n_x);
            }
        }
        for i in [0, n_x - 1] {
            let v = if t > phi[i] {
                touch(data(t, grid.x_at(i)))
            } else {
                any_inactive = true;
                T::zero()
            };
            m.identity_row(i, v, n_x);
        }
        solve_tridiagonal(&m.lower, &m.diag, &m.upper, &mut m.level, &mut m.scratch)?;
        values.extend_from_slice(&m.level);
    }

    // Pinned zeros below the graph count as data for the range.
    if any_inactive || data_min > data_max {
        data_min = data_min.min(T::zero());
        data_max = data_max.max(T::zero());
    }
    if !(data_min.is_finite() && data_max.is_finite()) {
        return Err(PdeError::NonFinite);
    }
    check_max_principle(&values, data_min, data_max)?;
    GridSolution::from_parts(
        *grid,
        values,
        Component::General {
            coefficient: coefficient.clone(),
            graph: graph.clone(),
        },
        data_min,
        data_max,
    )
}
