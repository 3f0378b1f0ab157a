//! Numerical laboratory for fixed-strike Asian options priced through a
//! degenerate parabolic equation.
//!
//! The average-price call under piecewise-constant market data reduces to a
//! single backward equation `u_t + ½σ²(b(t) − x)² u_xx = 0` whose diffusion
//! vanishes on the moving curve `x = b(t)` — no uniform parabolicity, no
//! standard theory, and most numerical schemes quietly lose accuracy right
//! where the payoff kink sits. This crate treats that equation as a lab
//! specimen:
//!
//! - [`strategy`] builds the drift curve `b` from market data and certifies
//!   its slope window `[m₁, m₂]`.
//! - [`pde`] marches the singular component and general graph-degenerate
//!   model problems with a scheme whose discrete maximum principle is exact.
//! - [`sde`] cross-checks prices against pathwise simulation of
//!   `dX = σ(b − X) dw` with a splittable counter-based RNG.
//! - [`heatbarrier`] evaluates the heat-equation barrier that drives every
//!   decay estimate, as an explicit error-function series.
//! - [`bounds`] turns the sup-norm vanishing rates near the curve — the
//!   `√r e^{−k₀/r}` window bound and its power-degeneracy generalization —
//!   into checkable certificates on computed solutions.
//!
//! Deterministic numerics are generic over the scalar type through
//! [`Scalar`] (`f32`, `f64`, …); the aliases below pin the default
//! double-precision lane that the command-line tools use. Monte Carlo code
//! stays `f64`-only since its accumulation order is part of the
//! reproducibility contract.

pub mod bounds;
pub mod config;
pub mod heatbarrier;
pub mod pde;
pub mod scalar;
pub mod sde;
pub mod strategy;

pub use scalar::Scalar;

/// Scalar type used by the concrete aliases and the CLI.
pub type Real = f64;

pub type MarketSpec = strategy::MarketSpec<Real>;
pub type PiecewiseConstant = strategy::PiecewiseConstant<Real>;
pub type DriftCurve = strategy::DriftCurve<Real>;
pub type BarrierSpec = heatbarrier::BarrierSpec<Real>;
pub type PathEnsemble = sde::PathEnsemble;
pub type Grid = pde::Grid<Real>;
pub type GridSolution = pde::GridSolution<Real>;
pub type Component = pde::Component<Real>;
pub type CoefficientField = pde::CoefficientField<Real>;
pub type Graph = pde::Graph<Real>;
pub type OrderEstimate = pde::probe::OrderEstimate<Real>;
pub type RescaleFrame = bounds::RescaleFrame<Real>;
pub type GeneralFrame = bounds::GeneralFrame<Real>;
pub type BoundReport = bounds::BoundReport<Real>;
pub type DecaySample = bounds::DecaySample<Real>;
pub type DecayFit = bounds::DecayFit<Real>;
