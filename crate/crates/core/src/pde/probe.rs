//! Diagnostics on computed solutions: pointwise derivatives, Hölder
//! seminorm estimates, and mesh-refinement order fits.

use crate::scalar::Scalar;

use super::{GridSolution, PdeError};

/// Centered-difference derivatives `(v_t, v_x, v_xx)` at the grid node
/// nearest `z = (t, x)`.
///
/// The point must lie inside the grid and at least 2 nodes from every edge;
/// on affine data the differences are exact to rounding.
pub fn derivatives_at<T: Scalar>(
    sol: &GridSolution<T>,
    z: (T, T),
) -> Result<(T, T, T), PdeError> {
    let g = &sol.grid;
    let (t, x) = z;
    if !(t >= g.t_min && t <= g.t_max && x >= g.x_min && x <= g.x_max) {
        return Err(PdeError::OutOfDomain {
            t: t.as_f64(),
            x: x.as_f64(),
        });
    }
    let n = ((t - g.t_min) / g.dt()).round().as_f64() as usize;
    let i = ((x - g.x_min) / g.dx()).round().as_f64() as usize;
    if n < 2 || n + 2 > g.n_t - 1 || i < 2 || i + 2 > g.n_x - 1 {
        return Err(PdeError::EdgeProximity);
    }
    let two = T::of(2.0);
    let h = g.dx();
    let v_t = (sol.value(n + 1, i) - sol.value(n - 1, i)) / (two * g.dt());
    let v_x = (sol.value(n, i + 1) - sol.value(n, i - 1)) / (two * h);
    let v_xx = (sol.value(n, i + 1) - two * sol.value(n, i) + sol.value(n, i - 1)) / (h * h);
    Ok((v_t, v_x, v_xx))
}

/// Parabolic distance `max(√|Δt|, |Δx|)`.
fn pdist<T: Scalar>(t1: T, x1: T, t2: T, x2: T) -> T {
    (t1 - t2).abs().sqrt().max((x1 - x2).abs())
}

struct Lcg(u64);

impl Lcg {
    fn next_index(&mut self, len: usize) -> usize {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((self.0 >> 33) as usize) % len
    }
}

/// Estimates the parabolic Hölder seminorm
/// `sup |v(z₁) − v(z₂)| / d(z₁, z₂)^α` over grid nodes inside `subbox =
/// (t_lo, t_hi, x_lo, x_hi)`, with `d` the parabolic distance.
///
/// Pairs sampled: row extremes (min/max columns, which dominate the ratio
/// for monotone or cusped profiles) against every column on three time
/// levels, vertical pairs on a decimated column set, and a fixed-seed batch
/// of pseudo-random pairs. A sampled sup, so a lower bound on the true
/// seminorm; resolution of the subbox controls how sharp.
pub fn holder_seminorm<T: Scalar>(
    sol: &GridSolution<T>,
    subbox: (T, T, T, T),
    alpha: T,
) -> Result<T, PdeError> {
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(PdeError::BadAlpha(alpha.as_f64()));
    }
    let g = &sol.grid;
    let (t_lo, t_hi, x_lo, x_hi) = subbox;
    if !(t_lo <= t_hi && x_lo < x_hi) {
        return Err(PdeError::DegenerateSubbox("inverted bounds".into()));
    }
    if t_lo < g.t_min - g.dt() * T::of(1e-9)
        || t_hi > g.t_max + g.dt() * T::of(1e-9)
        || x_lo < g.x_min - g.dx() * T::of(1e-9)
        || x_hi > g.x_max + g.dx() * T::of(1e-9)
    {
        return Err(PdeError::DegenerateSubbox("outside the grid".into()));
    }
    let eps = T::of(1e-9);
    let n_lo = ((t_lo - g.t_min) / g.dt() - eps).ceil().max(T::zero()).as_f64() as usize;
    let n_hi = (((t_hi - g.t_min) / g.dt() + eps).floor().as_f64() as usize).min(g.n_t - 1);
    let i_lo = ((x_lo - g.x_min) / g.dx() - eps).ceil().max(T::zero()).as_f64() as usize;
    let i_hi = (((x_hi - g.x_min) / g.dx() + eps).floor().as_f64() as usize).min(g.n_x - 1);
    if n_hi < n_lo || i_hi < i_lo + 1 {
        return Err(PdeError::DegenerateSubbox(
            "fewer than 2 columns of nodes inside".into(),
        ));
    }

    let mut sup = T::zero();
    let mut consider = |n1: usize, i1: usize, n2: usize, i2: usize| {
        if n1 == n2 && i1 == i2 {
            return;
        }
        let d = pdist(g.t_at(n1), g.x_at(i1), g.t_at(n2), g.x_at(i2));
        let ratio = (sol.value(n1, i1) - sol.value(n2, i2)).abs() / d.powf(alpha);
        sup = sup.max(ratio);
    };

    let n_mid = (n_lo + n_hi) / 2;
    for n in [n_lo, n_mid, n_hi] {
        let (mut i_min, mut i_max) = (i_lo, i_lo);
        for i in i_lo..=i_hi {
            if sol.value(n, i) < sol.value(n, i_min) {
                i_min = i;
            }
            if sol.value(n, i) > sol.value(n, i_max) {
                i_max = i;
            }
        }
        for anchor in [i_lo, i_hi, (i_lo + i_hi) / 2, i_min, i_max] {
            for i in i_lo..=i_hi {
                consider(n, anchor, n, i);
            }
        }
    }

    if n_hi > n_lo {
        let stride = ((i_hi - i_lo) / 128).max(1);
        let mut i = i_lo;
        while i <= i_hi {
            consider(n_lo, i, n_hi, i);
            consider(n_lo, i, n_mid, i);
            consider(n_mid, i, n_hi, i);
            i += stride;
        }
    }

    let rows = n_hi - n_lo + 1;
    let cols = i_hi - i_lo + 1;
    let mut lcg = Lcg(0x9E3779B97F4A7C15 ^ (rows as u64) ^ ((cols as u64) << 32));
    for _ in 0..4096 {
        let n1 = n_lo + lcg.next_index(rows);
        let i1 = i_lo + lcg.next_index(cols);
        let n2 = n_lo + lcg.next_index(rows);
        let i2 = i_lo + lcg.next_index(cols);
        consider(n1, i1, n2, i2);
    }
    Ok(sup)
}

/// Outcome of a mesh-refinement study.
#[derive(Debug, Clone, PartialEq)]
pub enum OrderEstimate<T> {
    /// All probe errors at rounding level: the scheme reproduces the
    /// solution exactly (e.g. affine data with zero coefficient).
    Exact,
    /// Least-squares slope of `log error` against `log h`.
    Fitted { order: T, errors: Vec<T> },
    /// Errors did not decrease monotonically; reported, not fit.
    NonMonotone { errors: Vec<T> },
}

impl<T: Scalar> OrderEstimate<T> {
    pub fn order(&self) -> Option<T> {
        match self {
            OrderEstimate::Fitted { order, .. } => Some(*order),
            _ => None,
        }
    }
}

/// Runs `solve` on each `(n_t, n_x)` level, measures probe-point deviations
/// from the finest level, and fits the convergence order.
///
/// Levels must be strictly increasing in `n_x` (at least 3 of them), probes
/// nonempty and interior to the common box.
pub fn convergence_order<T, F>(
    mut solve: F,
    levels: &[(usize, usize)],
    probes: &[(T, T)],
) -> Result<OrderEstimate<T>, PdeError>
where
    T: Scalar,
    F: FnMut(usize, usize) -> Result<GridSolution<T>, PdeError>,
{
    if levels.len() < 3 {
        return Err(PdeError::NeedLevels {
            need: 3,
            got: levels.len(),
        });
    }
    for w in levels.windows(2) {
        if w[1].1 <= w[0].1 {
            return Err(PdeError::DuplicateLevel);
        }
    }
    if probes.is_empty() {
        return Err(PdeError::NoProbes);
    }

    let mut sols = Vec::with_capacity(levels.len());
    for &(n_t, n_x) in levels {
        sols.push(solve(n_t, n_x)?);
    }
    let finest = sols.last().unwrap();
    let scale = finest.max_abs().max(T::one());

    let mut errors = Vec::with_capacity(levels.len() - 1);
    let mut hs = Vec::with_capacity(levels.len() - 1);
    for sol in &sols[..sols.len() - 1] {
        let mut e = T::zero();
        for &(t, x) in probes {
            e = e.max((sol.value_at(t, x)? - finest.value_at(t, x)?).abs());
        }
        errors.push(e);
        hs.push(sol.grid.dx());
    }

    if errors.iter().all(|&e| e <= T::of(1e-13) * scale) {
        return Ok(OrderEstimate::Exact);
    }
    let usable = errors.iter().all(|&e| e > T::of(1e-14) * scale)
        && errors.windows(2).all(|w| w[1] < w[0]);
    if !usable {
        return Ok(OrderEstimate::NonMonotone { errors });
    }

    // Least-squares slope of ln e against ln h.
    let k = T::of_usize(errors.len());
    let (mut sx, mut sy, mut sxx, mut sxy) = (T::zero(), T::zero(), T::zero(), T::zero());
    for (&h, &e) in hs.iter().zip(&errors) {
        let (lx, ly) = (h.ln(), e.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    let order = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    Ok(OrderEstimate::Fitted { order, errors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::solve::{solve_general, solve_u2};
    use crate::pde::{CoefficientField, Component, Graph, Grid};
    use crate::strategy::{build_drift, MarketSpec};

    fn synthetic(grid: Grid<f64>, f: impl Fn(f64, f64) -> f64) -> GridSolution<f64> {
        let mut values = Vec::with_capacity(grid.n_t * grid.n_x);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for n in 0..grid.n_t {
            for i in 0..grid.n_x {
                let v = f(grid.t_at(n), grid.x_at(i));
                lo = lo.min(v);
                hi = hi.max(v);
                values.push(v);
            }
        }
        GridSolution::from_parts(
            grid,
            values,
            Component::U2 {
                drift_id: 0,
                sigma: 1.0,
            },
            lo,
            hi,
        )
        .unwrap()
    }

    fn no_graph() -> Graph<f64> {
        Graph::Linear {
            t0: -1.0e6,
            x0: 0.0,
            slope: 0.0,
        }
    }

    #[test]
    fn derivatives_exact_on_polynomials() {
        let grid = Grid::new(0.0, 1.0, -2.0, 2.0, 33, 65).unwrap();
        let sol = synthetic(grid, |t, x| x * x - 0.5 * t + 3.0 * x);
        let (v_t, v_x, v_xx) = derivatives_at(&sol, (0.5, 1.0)).unwrap();
        // Centered differences reproduce quadratics exactly (tol: rounding).
        assert!((v_t - (-0.5)).abs() < 1e-12);
        assert!((v_x - (2.0 + 3.0)).abs() < 1e-11);
        assert!((v_xx - 2.0).abs() < 1e-10);
    }

    #[test]
    fn derivatives_enforce_edge_clearance() {
        let grid = Grid::new(0.0, 1.0, -2.0, 2.0, 9, 9).unwrap();
        let sol = synthetic(grid, |_, x| x);
        assert!(derivatives_at(&sol, (0.5, 0.0)).is_ok());
        // Node index 1 in x is only one node from the edge.
        assert!(matches!(
            derivatives_at(&sol, (0.5, -1.5)),
            Err(PdeError::EdgeProximity)
        ));
        assert!(matches!(
            derivatives_at(&sol, (0.01, 0.0)),
            Err(PdeError::EdgeProximity)
        ));
        assert!(matches!(
            derivatives_at(&sol, (0.5, 7.0)),
            Err(PdeError::OutOfDomain { .. })
        ));
    }

    #[test]
    fn holder_of_constant_is_zero() {
        let grid = Grid::new(0.0, 1.0, -1.0, 1.0, 17, 33).unwrap();
        let sol = synthetic(grid, |_, _| 4.5);
        let s = holder_seminorm(&sol, (0.0, 1.0, -1.0, 1.0), 0.5).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn holder_of_cusp_is_near_one() {
        // |x|^α has seminorm exactly 1 (attained against x = 0, a node here);
        // sampled estimate must land within 10%.
        for alpha in [0.3, 0.5, 0.8] {
            let grid = Grid::new(0.0, 1.0, -1.0, 1.0, 9, 257).unwrap();
            let sol = synthetic(grid, move |_, x| x.abs().powf(alpha));
            let s = holder_seminorm(&sol, (0.0, 1.0, -1.0, 1.0), alpha).unwrap();
            assert!((0.9..=1.1).contains(&s), "alpha {alpha}: seminorm {s}");
        }
    }

    #[test]
    fn holder_sees_time_variation() {
        // v = √t has parabolic 1/2-seminorm 1 via vertical pairs from t = 0.
        let grid = Grid::new(0.0, 1.0, -1.0, 1.0, 65, 17).unwrap();
        let sol = synthetic(grid, |t, _| t.sqrt());
        let s = holder_seminorm(&sol, (0.0, 1.0, -1.0, 1.0), 0.5).unwrap();
        assert!((0.9..=1.1).contains(&s), "seminorm {s}");
    }

    #[test]
    fn holder_rejects_bad_requests() {
        let grid = Grid::new(0.0, 1.0, -1.0, 1.0, 9, 9).unwrap();
        let sol = synthetic(grid, |_, x| x);
        assert!(matches!(
            holder_seminorm(&sol, (0.0, 1.0, -1.0, 1.0), 1.0),
            Err(PdeError::BadAlpha(_))
        ));
        assert!(matches!(
            holder_seminorm(&sol, (0.0, 1.0, -1.0, 1.0), 0.0),
            Err(PdeError::BadAlpha(_))
        ));
        assert!(matches!(
            holder_seminorm(&sol, (0.0, 1.0, 1.0, -1.0), 0.5),
            Err(PdeError::DegenerateSubbox(_))
        ));
        assert!(matches!(
            holder_seminorm(&sol, (0.0, 3.0, -1.0, 1.0), 0.5),
            Err(PdeError::DegenerateSubbox(_))
        ));
        // Only one column of nodes inside.
        assert!(matches!(
            holder_seminorm(&sol, (0.0, 1.0, -0.01, 0.01), 0.5),
            Err(PdeError::DegenerateSubbox(_))
        ));
    }

    #[test]
    fn order_exact_for_affine_data_without_diffusion() {
        let coef = CoefficientField::Constant(0.0);
        let est = convergence_order(
            |n_t, n_x| {
                let grid = Grid::new(0.0, 1.0, -1.0, 1.0, n_t, n_x)?;
                solve_general(&coef, &no_graph(), |_, x| 2.0 * x + 1.0, &grid)
            },
            &[(9, 9), (17, 17), (33, 33)],
            &[(0.5, 0.25), (0.75, -0.3)],
        )
        .unwrap();
        assert_eq!(est, OrderEstimate::Exact);
    }

    #[test]
    fn order_near_two_on_manufactured_solution() {
        // n_t scaled so Δt ∝ h² keeps the backward-Euler time error from
        // masking the O(h²) spatial one.
        let coef = CoefficientField::Constant(1.0);
        let est = convergence_order(
            |n_t, n_x| {
                let grid = Grid::new(0.0, 1.0, -2.0, 2.0, n_t, n_x)?;
                solve_general(&coef, &no_graph(), |t: f64, x: f64| (-t).exp() * x.sin(), &grid)
            },
            &[(65, 17), (257, 33), (1025, 65), (4097, 129)],
            &[(0.5, 0.0), (0.5, 1.0), (0.75, -0.5)],
        )
        .unwrap();
        let order = est.order().expect("expected a fitted order");
        assert!((1.7..=2.3).contains(&order), "order {order}");
    }

    #[test]
    fn order_of_pricing_solver_is_near_two_in_space() {
        let drift = build_drift(&MarketSpec::<f64>::reference(), 513).unwrap();
        let est = convergence_order(
            |n_t, n_x| {
                let grid = Grid::for_drift(&drift, n_t, n_x)?;
                solve_u2(&drift, &grid, 1.0)
            },
            &[(65, 57), (257, 113), (1025, 225), (4097, 449)],
            &[(1.0, 0.5), (1.0, 1.0), (0.5, 0.25)],
        )
        .unwrap();
        let order = est.order().expect("expected a fitted order");
        assert!(order > 1.5, "order {order}");
    }

    #[test]
    fn order_reports_nonmonotone_instead_of_fitting() {
        let grid = Grid::new(0.0, 1.0, -1.0, 1.0, 5, 5).unwrap();
        let est = convergence_order(
            |_, n_x| {
                // Probe deviation against finest: 1.0, 0.5, 0.75, 0 — a dip.
                let c = match n_x {
                    5 => 1.0,
                    6 => 0.5,
                    7 => 0.75,
                    _ => 0.0,
                };
                Ok(synthetic(Grid { n_x, ..grid }, move |_, _| c))
            },
            &[(5, 5), (5, 6), (5, 7), (5, 8)],
            &[(0.5, 0.0)],
        )
        .unwrap();
        match est {
            OrderEstimate::NonMonotone { errors } => {
                assert_eq!(errors, vec![1.0, 0.5, 0.75]);
            }
            other => panic!("expected NonMonotone, got {other:?}"),
        }
    }

    #[test]
    fn order_rejects_bad_level_lists() {
        let solve = |n_t, n_x| {
            let grid = Grid::new(0.0, 1.0, -1.0, 1.0, n_t, n_x)?;
            Ok(synthetic(grid, |_, x| x))
        };
        assert!(matches!(
            convergence_order(solve, &[(5, 5), (9, 9)], &[(0.5, 0.0)]),
            Err(PdeError::NeedLevels { .. })
        ));
        assert!(matches!(
            convergence_order(solve, &[(5, 5), (9, 9), (9, 9)], &[(0.5, 0.0)]),
            Err(PdeError::DuplicateLevel)
        ));
        assert!(matches!(
            convergence_order(solve, &[(5, 5), (9, 9), (17, 17)], &[]),
            Err(PdeError::NoProbes)
        ));
    }
}
