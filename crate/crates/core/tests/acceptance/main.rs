//! Acceptance gate: nine end-to-end checks covering the barrier function,
//! the pricing solver against its Monte Carlo oracle, the curve-window
//! decay bounds, and solver convergence. Each check pins its tolerances
//! and its wall-clock budget and prints one summary line when it passes
//! (visible with `--nocapture`).

mod oracle;

use std::cell::RefCell;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use asianpde::bounds::{
    check_derivative_decay, check_general_bound, check_key_lemma_with, fit_decay_rate,
    general_frame, key_frame, DecaySample,
};
use asianpde::heatbarrier::{barrier_bound, BarrierSpec};
use asianpde::pde::probe::convergence_order;
use asianpde::pde::solve::{solve_general, solve_u2};
use asianpde::sde::{estimate_u, positivity_fraction, simulate_endpoints, Payoff, Scheme};
use asianpde::strategy::build_drift;
use asianpde::{CoefficientField, DriftCurve, Graph, Grid, GridSolution, MarketSpec};

/// Every solve in this suite must stay inside its data range to this slack.
const MAX_PRINCIPLE_TOL: f64 = 1e-12;

/// Window radii probed along the degeneracy curve (checks 6 and 7).
const CURVE_RADII: [f64; 5] = [0.1, 0.15, 0.2, 0.3, 0.4];

fn assert_budget(label: &str, started: Instant, budget: Duration) -> Duration {
    let elapsed = started.elapsed();
    assert!(
        elapsed < budget,
        "{label}: took {elapsed:.2?}, budget {budget:?}"
    );
    elapsed
}

fn assert_max_principle(sol: &GridSolution) {
    let excess = sol.max_principle_excess();
    assert!(
        excess <= MAX_PRINCIPLE_TOL,
        "max-principle excess {excess:.3e} > {MAX_PRINCIPLE_TOL:.0e}"
    );
}

/// Reference market (`b(t) = 1 − t` exactly) solved on an n×n grid.
fn reference_solution(n: usize) -> (DriftCurve, GridSolution) {
    let drift = build_drift(&MarketSpec::reference(), 4097).expect("reference drift");
    let grid = Grid::for_drift(&drift, n, n).expect("reference grid");
    let sol = solve_u2(&drift, &grid, 1.0).expect("reference solve");
    assert_max_principle(&sol);
    (drift, sol)
}

/// Nine probes: t ∈ {0.25, 0.5, 0.75}, x at b(t) − 0.5, b(t), b(t) + 0.5.
fn reference_probes() -> Vec<(f64, f64)> {
    let mut probes = Vec::new();
    for t in [0.25, 0.5, 0.75] {
        for off in [-0.5, 0.0, 0.5] {
            probes.push((t, (1.0 - t) + off));
        }
    }
    probes
}

#[test]
fn acceptance_1_barrier_matches_quadrature_and_midstrip_bound() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for r in [4.0, 6.0, 8.0] {
        let spec = BarrierSpec::for_domain(r, 1, 2.0, r).unwrap();
        // 101-point sweep of the full strip against the quadrature oracle.
        for i in 0..=100 {
            let x = -r + 2.0 * r * i as f64 / 100.0;
            let v = spec.barrier_1d(2.0, x).unwrap();
            let q = oracle::barrier_by_quadrature(2.0, x, r);
            let dev = (v - q).abs();
            worst = worst.max(dev);
            assert!(dev <= 1e-9, "R = {r}, x = {x}: |v − quadrature| = {dev:.3e}");
        }
        // Closed-form ceiling on the midstrip |x| ≤ R/2 at t = 2.
        let bound = barrier_bound(r);
        let mut mid_max = 0.0f64;
        for i in 0..=100 {
            let x = -r / 2.0 + r * i as f64 / 100.0;
            mid_max = mid_max.max(spec.barrier_1d(2.0, x).unwrap());
        }
        assert!(
            mid_max <= bound,
            "R = {r}: midstrip max {mid_max} > bound {bound}"
        );
    }
    let elapsed = assert_budget("barrier quadrature", start, Duration::from_secs(5));
    println!("[1] barrier vs independent quadrature, midstrip bound: PASS (max dev {worst:.3e}; {elapsed:.2?})");
}

#[test]
fn acceptance_2_barrier_heat_residual_and_shape() {
    let start = Instant::now();
    let spec = BarrierSpec::for_domain(6.0, 1, 4.0, 6.0).unwrap();
    let v = |t: f64, x: f64| spec.barrier_1d(t, x).unwrap();

    // Heat residual via centered differences; δ = 1e−3 keeps truncation
    // ~δ² and rounding ~ε/δ² both far below the 1e−6 budget.
    let d = 1e-3;
    let mut worst_res = 0.0f64;
    for t in [0.5, 1.0, 2.0] {
        for x in [-4.5, -2.0, 0.0, 1.0, 3.5] {
            let vt = (v(t + d, x) - v(t - d, x)) / (2.0 * d);
            let vxx = (v(t, x + d) - 2.0 * v(t, x) + v(t, x - d)) / (d * d);
            worst_res = worst_res.max((vt - vxx).abs());
        }
    }
    assert!(worst_res <= 1e-6, "heat residual {worst_res:.3e}");

    let xs: Vec<f64> = (0..=60).map(|i| -6.0 + 0.2 * i as f64).collect();
    // Nondecreasing in t (from 0⁺, where the interior value vanishes).
    for &x in &xs {
        let mut prev = if x.abs() < 6.0 { 0.0 } else { 1.0 - 1e-10 };
        for k in 1..=16 {
            let val = v(0.25 * k as f64, x);
            assert!(val >= prev - 1e-12, "x = {x}, t = {}", 0.25 * k as f64);
            prev = val;
        }
    }
    for t in [0.5, 1.0, 2.0] {
        // Convexity in x: discrete second difference ≥ −1e−10.
        for w in xs.windows(3) {
            let dd = v(t, w[0]) - 2.0 * v(t, w[1]) + v(t, w[2]);
            assert!(dd >= -1e-10, "t = {t}, x = {}: second diff {dd:.3e}", w[1]);
        }
        // Unit wall values and evenness.
        assert!((v(t, 6.0) - 1.0).abs() <= 1e-10);
        assert!((v(t, -6.0) - 1.0).abs() <= 1e-10);
        for &x in &xs {
            assert!((v(t, x) - v(t, -x)).abs() <= 1e-12);
        }
    }
    let elapsed = assert_budget("barrier shape", start, Duration::from_secs(5));
    println!("[2] barrier heat residual + shape: PASS (max residual {worst_res:.3e}; {elapsed:.2?})");
}

#[test]
fn acceptance_3_pde_matches_monte_carlo() {
    let start = Instant::now();
    let (drift, sol) = reference_solution(1025);
    let maturity = drift.maturity();
    let mut worst = 0.0f64;
    for (k, &(t, x)) in reference_probes().iter().enumerate() {
        let pde = sol.value_at(maturity - t, x).unwrap();
        let ens = simulate_endpoints(
            &drift,
            t,
            x,
            100_000,
            1000,
            Scheme::ExactY,
            42 + k as u64,
            1.0,
        )
        .unwrap();
        let (mc, stderr) = estimate_u(&ens, &Payoff::NegPart).unwrap();
        let tol = 3.0 * stderr + 5e-3;
        let diff = (pde - mc).abs();
        worst = worst.max(diff / tol);
        assert!(
            diff <= tol,
            "probe ({t}, {x}): |pde − mc| = {diff:.3e} > {tol:.3e}"
        );
    }
    let elapsed = assert_budget("pde vs mc", start, Duration::from_secs(120));
    println!("[3] pde vs monte carlo at 9 probes: PASS (worst |diff|/tol = {worst:.3}; {elapsed:.2?})");
}

#[test]
fn acceptance_4_vanishing_region_and_path_positivity() {
    let start = Instant::now();
    let (drift, sol) = reference_solution(1025);
    // One grid step above the curve the solution is numerically zero.
    let h = sol.grid.dx();
    let sup = sol.max_abs_where(|tau, x| x >= drift.psi(tau).unwrap() + h);
    assert!(sup <= 1e-4, "sup above curve = {sup:.3e}");

    // Endpoints of paths started at x ≥ b(t) never go negative.
    let mut seed = 7u64;
    for t in [0.0, 0.3, 0.6] {
        for off in [0.0, 0.5, 1.0] {
            let x = drift.eval(t).unwrap() + off;
            let ens =
                simulate_endpoints(&drift, t, x, 10_000, 200, Scheme::ExactY, seed, 1.0).unwrap();
            let frac = positivity_fraction(&ens);
            assert_eq!(frac, 1.0, "start ({t}, {x}): positivity {frac}");
            seed += 1;
        }
    }
    let elapsed = assert_budget("vanishing region", start, Duration::from_secs(60));
    println!("[4] vanishing region + path positivity: PASS (sup above curve {sup:.3e}; {elapsed:.2?})");
}

#[test]
fn acceptance_5_martingale_and_convexity() {
    let start = Instant::now();
    let (_, sol) = reference_solution(1025);
    let drift = build_drift(&MarketSpec::reference(), 4097).unwrap();
    let mut worst = 0.0f64;
    for (k, &(t, x)) in reference_probes().iter().enumerate() {
        for (j, scheme) in [Scheme::ExactY, Scheme::EulerX].into_iter().enumerate() {
            let seed = 1000 + (2 * k + j) as u64;
            let ens = simulate_endpoints(&drift, t, x, 50_000, 500, scheme, seed, 1.0).unwrap();
            let (mean, stderr) = estimate_u(&ens, &Payoff::Linear).unwrap();
            let dev = (mean - x).abs();
            worst = worst.max(dev / (4.0 * stderr));
            assert!(
                dev <= 4.0 * stderr,
                "probe ({t}, {x}), {}: |mean − x| = {dev:.3e} > 4·{stderr:.3e}",
                scheme.name()
            );
        }
    }
    // Discrete convexity of every time level of the solved surface.
    let g = sol.grid;
    let mut min_dd = f64::INFINITY;
    for n in 0..g.n_t {
        for i in 1..g.n_x - 1 {
            let dd = sol.value(n, i - 1) - 2.0 * sol.value(n, i) + sol.value(n, i + 1);
            min_dd = min_dd.min(dd);
        }
    }
    assert!(min_dd >= -1e-10, "min second x-difference {min_dd:.3e}");
    let elapsed = assert_budget("martingale", start, Duration::from_secs(60));
    println!("[5] martingale + convexity: PASS (worst |mean−x|/4σ = {worst:.3}, min ΔΔx = {min_dd:.2e}; {elapsed:.2?})");
}

#[test]
fn acceptance_6_curve_window_bound_with_exact_constants() {
    let start = Instant::now();
    let (drift, sol) = reference_solution(1025);
    let fine = solve_u2(&drift, &sol.grid.refined(), 1.0).unwrap();
    assert_max_principle(&fine);

    let (m1, m2) = drift.slope_bounds();
    assert_eq!((m1, m2), (1.0, 1.0));
    let t0 = 0.5;
    let x0 = drift.psi(t0).unwrap();
    let mut worst = 0.0f64;
    for r in CURVE_RADII {
        let frame = key_frame(m1, m2, (t0, x0), r, drift.maturity(), drift.ell()).unwrap();
        // Unit slopes make the frame constants closed-form, bit for bit.
        assert_eq!(frame.c, 3.0 / 8.0f64.sqrt());
        assert_eq!(frame.n0, 24.0 / PI.sqrt());
        assert_eq!(frame.k0, 1.0 / 144.0);
        let report = check_key_lemma_with(&sol, &fine, &drift, &frame).unwrap();
        let allowed = 1.0 + 0.05f64.max(report.noise_floor / report.rhs);
        worst = worst.max(report.ratio / allowed);
        assert!(
            report.ratio <= allowed,
            "r = {r}: ratio {} > allowed {allowed}",
            report.ratio
        );
    }
    let elapsed = assert_budget("curve window bound", start, Duration::from_secs(120));
    println!("[6] curve-window bound, 5 radii, exact constants: PASS (worst ratio/allowed = {worst:.3e}; {elapsed:.2?})");
}

#[test]
fn acceptance_7_decay_rate_and_derivative_envelope() {
    let start = Instant::now();
    let (drift, sol) = reference_solution(1025);
    let fine = solve_u2(&drift, &sol.grid.refined(), 1.0).unwrap();
    assert_max_principle(&fine);

    let (m1, m2) = drift.slope_bounds();
    let t0 = 0.5;
    let x0 = drift.psi(t0).unwrap();
    let mut samples = Vec::new();
    let mut usable_frames = Vec::new();
    for r in CURVE_RADII {
        let frame = key_frame(m1, m2, (t0, x0), r, drift.maturity(), drift.ell()).unwrap();
        let report = check_key_lemma_with(&sol, &fine, &drift, &frame).unwrap();
        // The noise-resolvable window: sups that clear their own
        // refinement noise.
        if report.lhs > report.noise_floor {
            samples.push(DecaySample {
                r,
                q: report.lhs,
                envelope: frame.decay_factor(),
            });
            usable_frames.push(frame);
        }
    }
    let fit = fit_decay_rate(&samples, 2.0, 0.0).unwrap();
    assert!(
        fit.k_fit >= 1.0 / 144.0,
        "k_fit = {} < 1/144 (n = {})",
        fit.k_fit,
        fit.n_used
    );

    // The derivative quantity decays as the window shrinks: within the
    // same radii, q grows with r.
    let dsamples = check_derivative_decay(&sol, &usable_frames).unwrap();
    for w in dsamples.windows(2) {
        assert!(
            w[1].q > w[0].q,
            "q not increasing in r: q({}) = {:.3e}, q({}) = {:.3e}",
            w[0].r,
            w[0].q,
            w[1].r,
            w[1].q
        );
    }
    let elapsed = assert_budget("decay rate", start, Duration::from_secs(120));
    println!(
        "[7] decay rate k_fit = {:.4} ≥ 1/144 over {} radii, q(r) monotone: PASS ({elapsed:.2?})",
        fit.k_fit, fit.n_used
    );
}

#[test]
fn acceptance_8_power_coefficient_bound() {
    let start = Instant::now();
    let radii = [0.25, 0.3, 0.35, 0.4, 0.5];
    let r_max = 0.5;
    let mut worst = 0.0f64;
    for (mu, lambda) in [(1.5, 1.0), (2.0, 1.0), (3.0, 1.0)] {
        let frame = general_frame(1, mu, lambda, lambda, 1.0).unwrap();
        let graph = Graph::Linear {
            t0: 0.0,
            x0: 0.0,
            slope: 1.0,
        };
        let coef = CoefficientField::GraphPower {
            graph: graph.clone(),
            mu,
            lambda_min: lambda,
            lambda_max: lambda,
            lipschitz: 1.0,
        };
        // Box with 50% slack around the largest cylinder; data vanishes on
        // the graph and is normalized to sup 1.
        let t_half = 1.5 * r_max;
        let x_half = 0.75 * r_max;
        let grid = Grid::new(-t_half, t_half, -x_half, x_half, 385, 513).unwrap();
        let scale = 1.0 / (t_half + x_half);
        let data = move |t: f64, x: f64| (t - x).max(0.0) * scale;
        let sol = solve_general(&coef, &graph, data, &grid).unwrap();
        assert_max_principle(&sol);
        let fine = solve_general(&coef, &graph, data, &grid.refined()).unwrap();
        assert_max_principle(&fine);
        for r in radii {
            let report = check_general_bound(&sol, &frame, (0.0, 0.0), r, Some(&fine)).unwrap();
            let allowed = 1.0 + 0.05f64.max(report.noise_floor / report.rhs);
            worst = worst.max(report.ratio / allowed);
            assert!(
                report.ratio <= allowed,
                "mu = {mu}, r = {r}: ratio {} > allowed {allowed}",
                report.ratio
            );
        }
    }
    let elapsed = assert_budget("power-coefficient bound", start, Duration::from_secs(180));
    println!("[8] power-coefficient bound, 3 exponents × 5 radii: PASS (worst ratio/allowed = {worst:.3e}; {elapsed:.2?})");
}

#[test]
fn acceptance_9_manufactured_order_and_max_principle() {
    let start = Instant::now();
    let coef = CoefficientField::Constant(1.0);
    // Graph far below the box: no node is ever pinned.
    let graph = Graph::Linear {
        t0: -1.0e6,
        x0: 0.0,
        slope: 0.0,
    };
    let excesses = RefCell::new(Vec::new());
    // u = e^{−t} sin x solves u_t = u_xx; n_t ∝ n_x² keeps the first-order
    // time error below the O(h²) spatial error being measured.
    let est = convergence_order(
        |n_t, n_x| {
            let grid = Grid::new(0.0, 1.0, -2.0, 2.0, n_t, n_x)?;
            let sol = solve_general(&coef, &graph, |t: f64, x: f64| (-t).exp() * x.sin(), &grid)?;
            excesses.borrow_mut().push(sol.max_principle_excess());
            Ok(sol)
        },
        &[(65, 17), (257, 33), (1025, 65), (4097, 129)],
        &[(0.5, 0.0), (0.5, 1.0), (0.75, -0.5)],
    )
    .unwrap();
    let order = est.order().expect("fitted order");
    assert!(order >= 1.8, "order {order}");
    for &e in excesses.borrow().iter() {
        assert!(e <= MAX_PRINCIPLE_TOL, "excess {e:.3e}");
    }
    let elapsed = assert_budget("manufactured order", start, Duration::from_secs(120));
    println!("[9] manufactured-solution order = {order:.3} ≥ 1.8, max principle ≤ 1e−12: PASS ({elapsed:.2?})");
}
