//! Independent reference computations used to check the main pipeline.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::clusters::Cluster;
use crate::hamiltonian::DualGraph;
use crate::pauli::{normalized_trace_of_word, PauliString};
use crate::qsim;

/// Every connected multiset of weight `w` containing `root`, by exhaustive
/// enumeration of multiplicity vectors.
pub fn brute_force_clusters(g: &DualGraph, root: usize, w: u32) -> BTreeSet<Cluster> {
    let n = g.len();
    let mut out = BTreeSet::new();
    let mut mult = vec![0u32; n];
    fn rec(g: &DualGraph, root: usize, pos: usize, left: u32, mult: &mut Vec<u32>, out: &mut BTreeSet<Cluster>) {
        if pos == mult.len() {
            if left == 0 && mult[root] > 0 {
                let c = Cluster::new(mult.iter().enumerate().map(|(a, &m)| (a, m)));
                if c.is_connected(g) {
                    out.insert(c);
                }
            }
            return;
        }
        for k in 0..=left {
            mult[pos] = k;
            rec(g, root, pos + 1, left - k, mult, out);
        }
        mult[pos] = 0;
    }
    rec(g, root, 0, w, &mut mult, &mut out);
    out
}

type Poly = BTreeMap<Vec<u32>, BigRational>;

fn within(nu: &[u32], bound: &[u32]) -> bool {
    nu.iter().zip(bound).all(|(a, b)| a <= b)
}

fn poly_mul(a: &Poly, b: &Poly, bound: &[u32]) -> Poly {
    let mut out = Poly::new();
    for (ka, va) in a {
        for (kb, vb) in b {
            let k: Vec<u32> = ka.iter().zip(kb).map(|(x, y)| x + y).collect();
            if within(&k, bound) {
                *out.entry(k).or_insert_with(BigRational::zero) += va * vb;
            }
        }
    }
    out.retain(|_, v| !v.is_zero());
    out
}

/// All distinct words with letter counts `nu`.
fn words(nu: &[u32]) -> Vec<Vec<usize>> {
    let total: u32 = nu.iter().sum();
    let mut out = Vec::new();
    let mut left = nu.to_vec();
    let mut cur = Vec::with_capacity(total as usize);
    fn rec(left: &mut Vec<u32>, cur: &mut Vec<usize>, total: usize, out: &mut Vec<Vec<usize>>) {
        if cur.len() == total {
            out.push(cur.clone());
            return;
        }
        for j in 0..left.len() {
            if left[j] > 0 {
                left[j] -= 1;
                cur.push(j);
                rec(left, cur, total, out);
                cur.pop();
                left[j] += 1;
            }
        }
    }
    rec(&mut left, &mut cur, total as usize, &mut out);
    out
}

fn factorial(k: u32) -> BigInt {
    (1..=k).fold(BigInt::one(), |acc, i| acc * i)
}

/// Coefficient of `x^mult` in `log Tr exp(-Σ x_j E_j)`, from word traces of the
/// original operators and the series `log(1+u) = Σ (-1)^{k+1} u^k / k`.
pub fn derivative_by_word_log(ops: &[PauliString], mult: &[u32]) -> BigRational {
    let n = ops.len();
    let mut u = Poly::new();
    let mut nu = vec![0u32; n];
    loop {
        let s: u32 = nu.iter().sum();
        if s > 0 {
            let (mut acc, mut imag) = (BigInt::zero(), 0i64);
            for w in words(&nu) {
                let word: Vec<PauliString> = w.iter().map(|&j| ops[j].clone()).collect();
                let t = normalized_trace_of_word(&word).expect("same register");
                acc += BigInt::from(t.re);
                imag += t.im;
            }
            assert_eq!(imag, 0, "symmetrized trace is real");
            if !acc.is_zero() {
                let sign = if s.is_multiple_of(2) { BigInt::one() } else { -BigInt::one() };
                u.insert(nu.clone(), BigRational::new(sign * acc, factorial(s)));
            }
        }
        let mut pos = n;
        loop {
            if pos == 0 {
                let total: u32 = mult.iter().sum();
                let mut result = BigRational::zero();
                let mut power = u.clone();
                for k in 1..=total {
                    let c = power.get(mult).cloned().unwrap_or_else(BigRational::zero);
                    let frac = BigRational::new(BigInt::one(), BigInt::from(k));
                    if k % 2 == 1 {
                        result += c * frac;
                    } else {
                        result -= c * frac;
                    }
                    power = poly_mul(&power, &u, mult);
                }
                return result;
            }
            pos -= 1;
            if nu[pos] < mult[pos] {
                nu[pos] += 1;
                break;
            }
            nu[pos] = 0;
        }
    }
}

/// `log Tr exp(-Σ x_j E_j)` on the dense simulator.
pub fn dense_log_trace(ops: &[PauliString], x: &[f64]) -> f64 {
    let n = ops[0].n_qubits();
    qsim::log_trace_exp(&qsim::operator_sum(n, ops, x), 1.0)
}

/// `D^mult f(0) / mult!` by a product of central-difference stencils with
/// step `h`, refined by Richardson extrapolation over `h, h/2, h/4, h/8`.
pub fn finite_difference_derivative(ops: &[PauliString], mult: &[u32], h: f64) -> f64 {
    let stencil = |step: f64| -> f64 {
        let n = ops.len();
        let mut z = vec![0u32; n];
        let mut acc = 0.0;
        loop {
            let mut weight = 1.0;
            let x: Vec<f64> = (0..n)
                .map(|j| {
                    let (k, i) = (mult[j], z[j]);
                    weight *= binom(k, i) * if i % 2 == 1 { -1.0 } else { 1.0 };
                    (k as f64 / 2.0 - i as f64) * step
                })
                .collect();
            acc += weight * dense_log_trace(ops, &x);
            let mut pos = n;
            loop {
                if pos == 0 {
                    let total: i32 = mult.iter().map(|&m| m as i32).sum();
                    let fact: f64 = mult.iter().map(|&m| (1..=m).map(f64::from).product::<f64>()).product();
                    return acc / step.powi(total) / fact;
                }
                pos -= 1;
                if z[pos] < mult[pos] {
                    z[pos] += 1;
                    break;
                }
                z[pos] = 0;
            }
        }
    };
    let mut t: Vec<f64> = (0..4).map(|i| stencil(h / 2f64.powi(i))).collect();
    for level in 1..4 {
        let f = 4f64.powi(level);
        t = t.windows(2).map(|w| (f * w[1] - w[0]) / (f - 1.0)).collect();
    }
    t[0]
}

fn binom(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derivatives::cluster_derivative_ops;

    fn p(n: usize, s: &str) -> PauliString {
        PauliString::parse(n, s).unwrap()
    }

    #[test]
    fn word_log_matches_known_values() {
        let z = [p(1, "Z0")];
        assert_eq!(derivative_by_word_log(&z, &[2]), BigRational::new(1.into(), 2.into()));
        assert_eq!(derivative_by_word_log(&z, &[4]), BigRational::new((-1).into(), 12.into()));
        let xz = [p(1, "X0"), p(1, "Z0")];
        assert_eq!(derivative_by_word_log(&xz, &[2, 2]), cluster_derivative_ops(&xz, &[2, 2]));
    }

    #[test]
    fn finite_differences_are_accurate() {
        let xz = [p(1, "X0"), p(1, "Z0")];
        let fd = finite_difference_derivative(&xz, &[2, 2], 0.4);
        assert!((fd + 1.0 / 6.0).abs() < 1e-7, "{fd}");
        let z = [p(1, "Z0")];
        assert!((finite_difference_derivative(&z, &[4], 0.4) + 1.0 / 12.0).abs() < 1e-7);
    }
}
