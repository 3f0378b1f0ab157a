//! Degeneracy-aware finite-difference machinery.
//!
//! [`solve::solve_u2`] marches the singular pricing component in reversed
//! time `τ = T − t`: `v_τ = ½σ²(x − ψ(τ))² v_xx` with data `(−x)₊`, where
//! `ψ(τ) = b(T − τ)` is the degeneracy curve. [`solve::solve_general`]
//! handles model problems `u_t = a(t,x) u_xx` on a box, with `u = 0` imposed
//! on and below a Lipschitz graph `t = φ(x)`.
//!
//! Both use backward Euler with centered second differences: the resulting
//! rows form an M-matrix for any step ratio, so solutions obey a discrete
//! maximum principle — asserted after every solve, not assumed — and the
//! vanishing of the coefficient on the degeneracy curve needs no
//! regularization (an `a = 0` row reduces to `v_new = v_old`).

pub mod probe;
pub mod solve;
pub mod tridiag;

use std::io::{self, Write};

use thiserror::Error;

use crate::scalar::Scalar;
use crate::strategy::DriftCurve;
use tridiag::TridiagError;

#[derive(Debug, Error)]
pub enum PdeError {
    #[error("bad grid: {0}")]
    BadGrid(String),
    #[error("grid time interval [{got_min}, {got_max}] must be [0, {expected}] for the pricing solve")]
    HorizonMismatch {
        expected: f64,
        got_min: f64,
        got_max: f64,
    },
    #[error("grid [{x_min}, {x_max}] does not bracket the curve range (0, {ell})")]
    NonBracketing { x_min: f64, x_max: f64, ell: f64 },
    #[error("volatility must be positive and finite (got {0})")]
    BadVolatility(f64),
    #[error("coefficient must be nonnegative and finite (got {value} at ({t}, {x}))")]
    BadCoefficient { t: f64, x: f64, value: f64 },
    #[error("graph slope {found} exceeds declared Lipschitz bound {declared}")]
    GraphNotLipschitz { declared: f64, found: f64 },
    #[error("graph table invalid: {0}")]
    BadGraph(String),
    #[error(transparent)]
    Tridiag(#[from] TridiagError),
    #[error("point ({t}, {x}) outside the grid")]
    OutOfDomain { t: f64, x: f64 },
    #[error("probe needs 2 nodes of clearance from every grid edge")]
    EdgeProximity,
    #[error("degenerate subbox: {0}")]
    DegenerateSubbox(String),
    #[error("alpha must lie in (0, 1) (got {0})")]
    BadAlpha(f64),
    #[error("need at least {need} refinement levels (got {got})")]
    NeedLevels { need: usize, got: usize },
    #[error("refinement levels must be strictly increasing in n_x")]
    DuplicateLevel,
    #[error("need at least one probe point")]
    NoProbes,
    #[error("values length {got} does not match grid ({expect})")]
    ShapeMismatch { got: usize, expect: usize },
    #[error("discrete maximum principle violated by {excess:.3e} (internal scheme bug)")]
    MaxPrinciple { excess: f64 },
    #[error("solver produced non-finite values")]
    NonFinite,
}

/// Uniform space-time mesh on `[t_min, t_max] × [x_min, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid<T> {
    pub t_min: T,
    pub t_max: T,
    pub x_min: T,
    pub x_max: T,
    pub n_t: usize,
    pub n_x: usize,
}

impl<T: Scalar> Grid<T> {
    pub fn new(
        t_min: T,
        t_max: T,
        x_min: T,
        x_max: T,
        n_t: usize,
        n_x: usize,
    ) -> Result<Self, PdeError> {
        for v in [t_min, t_max, x_min, x_max] {
            if !v.is_finite() {
                return Err(PdeError::BadGrid("non-finite extent".into()));
            }
        }
        if !(t_max > t_min && x_max > x_min) {
            return Err(PdeError::BadGrid(format!(
                "empty box [{}, {}] x [{}, {}]",
                t_min.as_f64(),
                t_max.as_f64(),
                x_min.as_f64(),
                x_max.as_f64()
            )));
        }
        if n_t < 3 || n_x < 3 {
            return Err(PdeError::BadGrid(format!("need n_t, n_x >= 3 (got {n_t}, {n_x})")));
        }
        Ok(Self {
            t_min,
            t_max,
            x_min,
            x_max,
            n_t,
            n_x,
        })
    }

    /// The pricing domain for a drift curve: `τ ∈ [0, T]` and the truncation
    /// `x ∈ [−max(4, 4ℓ), ℓ + max(2, 2ℓ)]` with `ℓ = b(0)`, which brackets
    /// the curve with room for the far-field asymptotes on both sides.
    pub fn for_drift(drift: &DriftCurve<T>, n_t: usize, n_x: usize) -> Result<Self, PdeError> {
        let ell = drift.ell();
        let four = T::of(4.0);
        let two = T::of(2.0);
        Self::new(
            T::zero(),
            drift.maturity(),
            -(four.max(four * ell)),
            ell + two.max(two * ell),
            n_t,
            n_x,
        )
    }

    pub fn dt(&self) -> T {
        (self.t_max - self.t_min) / T::of_usize(self.n_t - 1)
    }

    pub fn dx(&self) -> T {
        (self.x_max - self.x_min) / T::of_usize(self.n_x - 1)
    }

    pub fn t_at(&self, n: usize) -> T {
        if n == self.n_t - 1 {
            self.t_max
        } else {
            self.t_min + self.dt() * T::of_usize(n)
        }
    }

    pub fn x_at(&self, i: usize) -> T {
        if i == self.n_x - 1 {
            self.x_max
        } else {
            self.x_min + self.dx() * T::of_usize(i)
        }
    }

    /// Same box, mesh halved in both directions.
    pub fn refined(&self) -> Self {
        Self {
            n_t: 2 * (self.n_t - 1) + 1,
            n_x: 2 * (self.n_x - 1) + 1,
            ..*self
        }
    }

    fn idx(&self, n: usize, i: usize) -> usize {
        n * self.n_x + i
    }
}

/// Graph `t = φ(x)` below which solutions of the model problems vanish.
#[derive(Debug, Clone)]
pub enum Graph<T> {
    /// `φ(x) = t0 + slope · (x − x0)`.
    Linear { t0: T, x0: T, slope: T },
    /// Continuous piecewise-linear table.
    Table { xs: Vec<T>, ts: Vec<T> },
}

impl<T: Scalar> Graph<T> {
    pub fn table(points: &[(T, T)]) -> Result<Self, PdeError> {
        if points.len() < 2 {
            return Err(PdeError::BadGraph("need at least 2 points".into()));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(PdeError::BadGraph("abscissas must increase strictly".into()));
            }
        }
        if points.iter().any(|&(x, t)| !(x.is_finite() && t.is_finite())) {
            return Err(PdeError::BadGraph("non-finite entry".into()));
        }
        Ok(Graph::Table {
            xs: points.iter().map(|p| p.0).collect(),
            ts: points.iter().map(|p| p.1).collect(),
        })
    }

    pub fn eval(&self, x: T) -> T {
        match self {
            Graph::Linear { t0, x0, slope } => *t0 + *slope * (x - *x0),
            Graph::Table { xs, ts } => {
                let n = xs.len();
                let mut i = n - 2;
                // Ends extrapolate linearly.
                for k in 0..n - 1 {
                    if x < xs[k + 1] || k == n - 2 {
                        i = k;
                        break;
                    }
                }
                ts[i] + (ts[i + 1] - ts[i]) * (x - xs[i]) / (xs[i + 1] - xs[i])
            }
        }
    }

    /// Largest absolute slope — the graph's Lipschitz constant.
    pub fn max_abs_slope(&self) -> T {
        match self {
            Graph::Linear { slope, .. } => slope.abs(),
            Graph::Table { xs, ts } => {
                let mut m = T::zero();
                for k in 0..xs.len() - 1 {
                    m = m.max(((ts[k + 1] - ts[k]) / (xs[k + 1] - xs[k])).abs());
                }
                m
            }
        }
    }
}

/// Diffusion coefficient `a(t, x) ≥ 0` for the general solver.
#[derive(Debug, Clone)]
pub enum CoefficientField<T> {
    /// Spatially constant coefficient.
    Constant(T),
    /// `a(t, x) = Λ |φ(x) − t|^μ`, vanishing on the graph; carries the
    /// ellipticity window `[λ, Λ]` and the graph's Lipschitz bound `M₀`.
    GraphPower {
        graph: Graph<T>,
        mu: T,
        lambda_min: T,
        lambda_max: T,
        lipschitz: T,
    },
}

/// Metadata of a graph-distance coefficient: `(μ, λ, Λ, M₀)`.
#[derive(Debug, Clone, Copy)]
pub struct CoefficientMeta<T> {
    pub mu: T,
    pub lambda_min: T,
    pub lambda_max: T,
    pub lipschitz: T,
}

impl<T: Scalar> CoefficientField<T> {
    pub fn eval(&self, t: T, x: T) -> T {
        match self {
            CoefficientField::Constant(a) => *a,
            CoefficientField::GraphPower {
                graph,
                mu,
                lambda_max,
                ..
            } => *lambda_max * (graph.eval(x) - t).abs().powf(*mu),
        }
    }

    pub fn meta(&self) -> Option<CoefficientMeta<T>> {
        match self {
            CoefficientField::Constant(_) => None,
            CoefficientField::GraphPower {
                mu,
                lambda_min,
                lambda_max,
                lipschitz,
                ..
            } => Some(CoefficientMeta {
                mu: *mu,
                lambda_min: *lambda_min,
                lambda_max: *lambda_max,
                lipschitz: *lipschitz,
            }),
        }
    }
}

/// Which problem a [`GridSolution`] solves.
#[derive(Debug, Clone)]
pub enum Component<T> {
    /// Singular pricing component `v(τ, x) = u₂(T − τ, x)`.
    U2 { drift_id: u64, sigma: T },
    /// Model problem from the general solver.
    General {
        coefficient: CoefficientField<T>,
        graph: Graph<T>,
    },
}

/// Mesh plus solution values (row-major by time level), with the data range
/// recorded so the discrete maximum principle stays checkable after the fact.
#[derive(Debug, Clone)]
pub struct GridSolution<T> {
    pub grid: Grid<T>,
    values: Vec<T>,
    pub component: Component<T>,
    data_min: T,
    data_max: T,
}

impl<T: Scalar> GridSolution<T> {
    /// Assembles a solution from precomputed values (solvers, diagnostics,
    /// tests). `data_min/max` is the parabolic-data range backing the
    /// maximum-principle check.
    pub fn from_parts(
        grid: Grid<T>,
        values: Vec<T>,
        component: Component<T>,
        data_min: T,
        data_max: T,
    ) -> Result<Self, PdeError> {
        if values.len() != grid.n_t * grid.n_x {
            return Err(PdeError::ShapeMismatch {
                got: values.len(),
                expect: grid.n_t * grid.n_x,
            });
        }
        Ok(Self {
            grid,
            values,
            component,
            data_min,
            data_max,
        })
    }

    pub fn value(&self, n: usize, i: usize) -> T {
        self.values[self.grid.idx(n, i)]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Bilinear interpolation inside the grid box.
    pub fn value_at(&self, t: T, x: T) -> Result<T, PdeError> {
        let g = &self.grid;
        if !(t >= g.t_min && t <= g.t_max && x >= g.x_min && x <= g.x_max) {
            return Err(PdeError::OutOfDomain {
                t: t.as_f64(),
                x: x.as_f64(),
            });
        }
        let ft = (t - g.t_min) / g.dt();
        let fx = (x - g.x_min) / g.dx();
        let n = (ft.floor().to_usize().unwrap_or(0)).min(g.n_t - 2);
        let i = (fx.floor().to_usize().unwrap_or(0)).min(g.n_x - 2);
        let wt = (ft - T::of_usize(n)).max(T::zero()).min(T::one());
        let wx = (fx - T::of_usize(i)).max(T::zero()).min(T::one());
        let one = T::one();
        Ok(self.value(n, i) * (one - wt) * (one - wx)
            + self.value(n + 1, i) * wt * (one - wx)
            + self.value(n, i + 1) * (one - wt) * wx
            + self.value(n + 1, i + 1) * wt * wx)
    }

    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, &v| acc.max(v.abs()))
    }

    /// Sup of `|v|` over nodes whose `(t, x)` satisfies the predicate;
    /// zero if none do.
    pub fn max_abs_where(&self, mut keep: impl FnMut(T, T) -> bool) -> T {
        let g = &self.grid;
        let mut acc = T::zero();
        for n in 0..g.n_t {
            let t = g.t_at(n);
            for i in 0..g.n_x {
                if keep(t, g.x_at(i)) {
                    acc = acc.max(self.value(n, i).abs());
                }
            }
        }
        acc
    }

    /// Range of parabolic data the solve consumed.
    pub fn data_range(&self) -> (T, T) {
        (self.data_min, self.data_max)
    }

    /// How far any node escapes `[min(data), max(data)]`; exactly zero when
    /// the discrete maximum principle holds.
    pub fn max_principle_excess(&self) -> T {
        let mut excess = T::zero();
        for &v in &self.values {
            excess = excess.max(v - self.data_max).max(self.data_min - v);
        }
        excess.max(T::zero())
    }

    /// `(t, x, value)` rows, subsampled by the given strides (≥ 1).
    pub fn write_csv<W: Write>(
        &self,
        mut w: W,
        stride_t: usize,
        stride_x: usize,
    ) -> io::Result<()> {
        let st = stride_t.max(1);
        let sx = stride_x.max(1);
        writeln!(w, "t,x,value")?;
        let g = &self.grid;
        let mut n = 0;
        while n < g.n_t {
            let mut i = 0;
            while i < g.n_x {
                writeln!(w, "{},{},{}", g.t_at(n), g.x_at(i), self.value(n, i))?;
                i += sx;
            }
            n += st;
        }
        Ok(())
    }
}
