//! Independent quadrature oracle for the barrier integral.
//!
//! The barrier under test is evaluated through closed-form error functions;
//! this oracle integrates the Gaussian kernel directly with adaptive
//! Simpson quadrature, sharing no arithmetic with the implementation. The
//! two agreeing pins down both the series bookkeeping and the erf path.

use std::f64::consts::PI;

/// Integrand `2·Φ(t, x − y)` with `Φ(t, x) = e^{−x²/4t}/√(4πt)`.
fn integrand(t: f64, x: f64, y: f64) -> f64 {
    let d = x - y;
    2.0 * (-d * d / (4.0 * t)).exp() / (4.0 * PI * t).sqrt()
}

fn simpson(h: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

fn adapt(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(m - a, fa, flm, fm);
    let right = simpson(b - m, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        // Richardson correction: one order beyond plain Simpson.
        left + right + delta / 15.0
    } else {
        adapt(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + adapt(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(b - a, fa, fm, fb);
    adapt(&f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Barrier value `2 ∫_E Φ(t, x − y) dy`, `E = ∪_j ((4j+1)R, (4j+3)R)`, by
/// quadrature. Intervals farther than `16√t` from `x` carry Gaussian mass
/// below `e^{−64} ≈ 1.6e−28` and are dropped.
pub fn barrier_by_quadrature(t: f64, x: f64, r: f64) -> f64 {
    assert!(t > 0.0 && r > 0.0);
    let cutoff = 16.0 * t.sqrt();
    let j_span = ((x.abs() + cutoff) / (4.0 * r)).ceil() as i64 + 1;
    let mut total = 0.0;
    for j in -j_span..=j_span {
        let a = (4 * j + 1) as f64 * r;
        let b = (4 * j + 3) as f64 * r;
        if a - x > cutoff || x - b > cutoff {
            continue;
        }
        total += integrate(|y| integrand(t, x, y), a, b, 1e-14);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_integrates_polynomials_exactly() {
        // Simpson with Richardson is exact through degree 5.
        let v = integrate(|y| y * y * y, 0.0, 2.0, 1e-14);
        assert!((v - 4.0).abs() < 1e-13);
        // ∫_{−1}^{3} (1 + y⁵) dy = 4 + (3⁶ − 1)/6 = 4 + 728/6.
        let v = integrate(|y| 1.0 + y.powi(5), -1.0, 3.0, 1e-14);
        assert!((v - (4.0 + 728.0 / 6.0)).abs() < 1e-10);
    }

    #[test]
    fn quadrature_recovers_gaussian_mass() {
        // ∫_ℝ 2Φ(t, y) dy = 2; the window ±16√t captures it to 1e−14.
        let t = 0.8f64;
        let w = 16.0 * t.sqrt();
        let v = integrate(|y| integrand(t, 0.0, y), -w, w, 1e-14);
        assert!((v - 2.0).abs() < 1e-12, "mass {v}");
    }

    #[test]
    fn barrier_value_is_frozen() {
        // Same 20-digit reference as the library's own frozen case.
        let v = barrier_by_quadrature(2.0, 0.0, 6.0);
        assert!((v - 0.0053995921265203776552).abs() < 1e-13, "{v}");
    }
}
