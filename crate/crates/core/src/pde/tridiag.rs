//! Thomas algorithm for tridiagonal systems.
//!
//! The implicit time stepper produces strictly diagonally dominant M-matrix
//! rows (`diag = 1 + 2λ`, off-diagonals `−λ`, `λ ≥ 0`), for which the
//! elimination is unconditionally stable and — with identity boundary rows —
//! reproduces boundary values exactly. Back-substitution combines
//! nonnegative quantities with nonnegative weights, so nonnegative data
//! cannot round to negative values.

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum TridiagError {
    #[error("band lengths inconsistent: diag {n}, lower {lower}, upper {upper}, rhs {rhs}")]
    ShapeMismatch {
        n: usize,
        lower: usize,
        upper: usize,
        rhs: usize,
    },
    #[error("zero pivot at row {0}")]
    ZeroPivot(usize),
}

/// Solves `A v = rhs` in place (`rhs` becomes the solution) for the
/// tridiagonal `A` with bands `lower` (length n−1, below the diagonal),
/// `diag` (length n), `upper` (length n−1). `scratch` is reused across
/// calls to avoid reallocation in time-stepping loops.
pub fn solve_tridiagonal<T: Scalar>(
    lower: &[T],
    diag: &[T],
    upper: &[T],
    rhs: &mut [T],
    scratch: &mut Vec<T>,
) -> Result<(), TridiagError> {
    let n = diag.len();
    if lower.len() + 1 != n || upper.len() + 1 != n || rhs.len() != n {
        return Err(TridiagError::ShapeMismatch {
            n,
            lower: lower.len(),
            upper: upper.len(),
            rhs: rhs.len(),
        });
    }
    scratch.clear();
    scratch.resize(n, T::zero());

    // Forward elimination: scratch holds the modified superdiagonal.
    if diag[0] == T::zero() {
        return Err(TridiagError::ZeroPivot(0));
    }
    scratch[0] = upper.first().map_or(T::zero(), |&u| u / diag[0]);
    rhs[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - lower[i - 1] * scratch[i - 1];
        if denom == T::zero() {
            return Err(TridiagError::ZeroPivot(i));
        }
        scratch[i] = if i + 1 < n { upper[i] / denom } else { T::zero() };
        rhs[i] = (rhs[i] - lower[i - 1] * rhs[i - 1]) / denom;
    }
    // Back substitution.
    for i in (0..n - 1).rev() {
        let next = rhs[i + 1];
        rhs[i] = rhs[i] - scratch[i] * next;
    }
    Ok(())
}
