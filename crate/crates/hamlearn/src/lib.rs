//! Learning Pauli-term Hamiltonians from high-temperature Gibbs states,
//! short-time dynamics, and classical Markov random field samples.
//!
//! The pipeline builds exact truncated cluster-expansion series for each
//! local expectation value and inverts them with a projected Newton method.
//! A dense simulator provides the ground-truth oracle for small systems.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod clusters;
pub mod derivatives;
pub mod hamiltonian;
pub mod instances;
pub mod mrf;
pub mod oracles;
pub mod pauli;
pub mod qsim;
pub mod realtime;
pub mod series;
pub mod solver;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

/// Nearest double to an exact rational (to within one unit in the last place).
pub fn rational_to_f64(r: &BigRational) -> f64 {
    let (n, d) = (r.numer(), r.denom());
    if n.is_zero() {
        return 0.0;
    }
    let shift = 64 + d.bits() as i64 - n.bits() as i64;
    let a: BigInt = n.abs();
    let q = if shift >= 0 { (a << shift as u64) / d } else { a / (d << (-shift) as u64) };
    let mag = q.to_f64().unwrap_or(f64::INFINITY) * 2f64.powi(-(shift as i32));
    if n.is_negative() {
        -mag
    } else {
        mag
    }
}

/// `p/q` in lowest terms with an optional leading minus sign.
pub fn format_rational(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}
