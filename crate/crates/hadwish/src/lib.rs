//! Numerical laboratory for entrywise absolute powers of random Wishart
//! matrices.
//!
//! Starting from an `m x n` matrix `X` with i.i.d. entries, the library
//! builds `A = X X^T / n`, applies `x -> |x|^alpha` entrywise to obtain `B`,
//! and asks when `B` stays positive semi-definite. With `m = floor(n^s)` the
//! answer flips at the exponent `alpha = s`, and the crate provides both the
//! Monte Carlo machinery to observe that transition and the scalar analytics
//! (absolute Gaussian moments, bivariate covariance functionals, trace
//! moments) that explain it.
//!
//! Modules:
//! - [`ensembles`]: reproducible sampling of the random input matrices;
//! - [`matrixops`]: Wishart Gram matrices, Hadamard powers, centered splits;
//! - [`eigensolve`]: dense symmetric eigensolver and PSD certificates;
//! - [`spectral`]: scalar analytics and empirical spectral distributions;
//! - [`experiments`]: seeded Monte Carlo studies with JSON-stable output;
//! - [`cli`]: command-line front end.
//!
//! Everything is deterministic: outputs are pure functions of the
//! configuration (including the master seed), regardless of thread count.

// Transcribed coefficient tables (AS241, Lanczos) keep their published
// digits, and `!(x > 0)` guards are written that way to reject NaN.
#![allow(clippy::excessive_precision)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod ensembles;
pub mod eigensolve;
pub mod error;
pub mod experiments;
pub mod matrixops;
pub mod spectral;

pub use error::{Error, Result};

/// Formats a float with 17 significant digits, enough to round-trip `f64`
/// exactly. Used for every float that leaves the process (JSON, CSV, matrix
/// dumps).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_round_trips_f64() {
        for &x in &[
            0.0,
            -0.0,
            1.0,
            -1.0 / 3.0,
            std::f64::consts::PI,
            1.2345678901234567e-200,
            9.87654321e200,
            f64::MIN_POSITIVE,
        ] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }
}
