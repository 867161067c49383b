//! Truncated cluster-expansion series of local expectation values.
//!
//! `F_a(x) = -Ê_a + Σ_{m=1}^{m̂} β^m p_m(x)` where `p_m` collects every connected
//! cluster of weight `m+1` containing `a`. Coefficients are exact rationals
//! stored without β; β enters only at evaluation time.

use std::collections::BTreeMap;
use std::f64::consts::E;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rayon::prelude::*;
use thiserror::Error;

use crate::clusters::enumerate_clusters;
use crate::derivatives::DerivativeEngine;
use crate::hamiltonian::{DualGraph, HamiltonianSpec};
use crate::{format_rational, rational_to_f64};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error("outside the convergent regime: beta*tau = {0} >= 1")]
    Regime(f64),
    #[error("invalid parameter: {0}")]
    Invalid(String),
}

/// Constants derived from the dual-graph degree, plus the chosen orders.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionParameters {
    pub degree_bound: usize,
    pub tau: f64,
    pub beta_c_sample: f64,
    pub beta_c_newton: f64,
    pub m_hat: usize,
    pub neumann_depth: usize,
    pub iterations: usize,
}

impl ExpansionParameters {
    /// Degree 0 (no overlapping terms) uses the degree-1 constants.
    pub fn new(degree: usize) -> Self {
        let d = degree.max(1) as f64;
        ExpansionParameters {
            degree_bound: degree,
            tau: (1.0 + E * (d - 1.0)) * (2.0 * E * (d + 1.0)),
            beta_c_sample: 1.0 / (100.0 * E.powi(6) * (d + 1.0).powi(8)),
            beta_c_newton: 1.0 / (25.0 * E.powi(6) * (d + 1.0).powi(10)),
            m_hat: 1,
            neumann_depth: 1,
            iterations: 1,
        }
    }

    fn d(&self) -> f64 {
        self.degree_bound.max(1) as f64
    }

    /// 2e²𝔡(𝔡+1) τ^m (m+1)
    pub fn c_m(&self, m: usize) -> f64 {
        let d = self.d();
        2.0 * E * E * d * (d + 1.0) * self.tau.powi(m as i32) * (m as f64 + 1.0)
    }

    /// 12e²(𝔡+1)² (βτ)^m̂ m̂
    pub fn tail_bound(&self, beta: f64, m_hat: usize) -> f64 {
        let d = self.d();
        12.0 * E * E * (d + 1.0).powi(2) * (beta * self.tau).powi(m_hat as i32) * m_hat as f64
    }
}

/// Smallest order whose tail is guaranteed below `2βε`.
pub fn truncation_order(beta: f64, epsilon: f64, params: &ExpansionParameters) -> Result<usize, SeriesError> {
    if !(beta > 0.0) || !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(SeriesError::Invalid(format!("beta = {beta}, epsilon = {epsilon}")));
    }
    let bt = beta * params.tau;
    if bt >= 1.0 {
        return Err(SeriesError::Regime(bt));
    }
    let d = params.d();
    let l = (1.0 / bt).ln();
    let v = (E / (E - 1.0)) / l * (12.0 * E * E * (d + 1.0).powi(2) / (beta * epsilon * l)).ln();
    Ok((v.ceil() as i64).max(1) as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub degree: usize,
    pub coeff: BigRational,
    pub value: f64,
    /// `(term index, exponent)` sorted by index.
    pub exps: Vec<(usize, u32)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermSeries {
    pub term: usize,
    pub term_id: String,
    pub shift: f64,
    pub monomials: Vec<Monomial>,
    pub truncation: usize,
}

impl TermSeries {
    /// Assembles monomials from `(exponents, coefficient)` pairs, merging duplicates.
    pub fn from_coefficients(
        term: usize,
        term_id: String,
        shift: f64,
        truncation: usize,
        coeffs: BTreeMap<Vec<(usize, u32)>, BigRational>,
    ) -> Self {
        let mut monomials: Vec<Monomial> = coeffs
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(exps, coeff)| Monomial {
                degree: exps.iter().map(|e| e.1 as usize).sum(),
                value: rational_to_f64(&coeff),
                coeff,
                exps,
            })
            .collect();
        monomials.sort_by(|a, b| a.degree.cmp(&b.degree).then_with(|| a.exps.cmp(&b.exps)));
        TermSeries { term, term_id, shift, monomials, truncation }
    }

    pub fn with_shift(&self, shift: f64) -> Self {
        TermSeries { shift, ..self.clone() }
    }

    pub fn count_at_degree(&self, m: usize) -> usize {
        self.monomials.iter().filter(|mono| mono.degree == m).count()
    }

    /// Lines `a<TAB>m<TAB>p/q<TAB>b^e ...` for every monomial.
    pub fn dump(&self, ids: &[String]) -> String {
        let mut s = String::new();
        for mono in &self.monomials {
            let vars: Vec<String> = mono.exps.iter().map(|&(b, e)| format!("{}^{}", ids[b], e)).collect();
            let _ =
                writeln!(s, "{}\t{}\t{}\t{}", self.term_id, mono.degree, format_rational(&mono.coeff), vars.join(" "));
        }
        s
    }
}

fn monomial_value(mono: &Monomial, x: &[f64]) -> f64 {
    mono.exps.iter().fold(mono.value, |acc, &(b, e)| acc * x[b].powi(e as i32))
}

/// All clusters of weight `m+1` through `a` for `m ≤ m̂`, each contributing
/// `-μ_V(a) · D_V / V!` to the monomial `x^{V - a}`.
pub fn build_term_series(
    h: &HamiltonianSpec,
    g: &DualGraph,
    a: usize,
    m_hat: usize,
    shift: f64,
    engine: &DerivativeEngine,
) -> TermSeries {
    assert!(m_hat >= 1, "truncation order must be positive");
    let mut coeffs: BTreeMap<Vec<(usize, u32)>, BigRational> = BTreeMap::new();
    for m in 1..=m_hat {
        let clusters = enumerate_clusters(g, a, (m + 1) as u32).expect("root is a node");
        let contributions: Vec<(Vec<(usize, u32)>, BigRational)> = clusters
            .par_iter()
            .filter_map(|v| {
                let cd = engine.cluster(v, h);
                if cd.is_zero() {
                    return None;
                }
                let mu = BigInt::from(v.multiplicity(a));
                Some((v.without_one(a).parts().to_vec(), -(cd * mu)))
            })
            .collect();
        for (key, c) in contributions {
            *coeffs.entry(key).or_insert_with(BigRational::zero) += c;
        }
    }
    TermSeries::from_coefficients(a, h.terms[a].id.clone(), shift, m_hat, coeffs)
}

/// Series for every term, built in parallel over terms with one shared derivative cache.
pub fn build_all_series(
    h: &HamiltonianSpec,
    g: &DualGraph,
    m_hat: usize,
    shifts: &[f64],
    engine: &DerivativeEngine,
) -> Vec<TermSeries> {
    assert_eq!(shifts.len(), h.len());
    (0..h.len()).into_par_iter().map(|a| build_term_series(h, g, a, m_hat, shifts[a], engine)).collect()
}

/// `-Ê_a + Σ β^m p_m(x)`.
pub fn evaluate_series(f: &TermSeries, x: &[f64], beta: f64) -> f64 {
    let mut acc = -f.shift;
    for mono in &f.monomials {
        acc += beta.powi(mono.degree as i32) * monomial_value(mono, x);
    }
    acc
}

pub fn evaluate_all(fs: &[TermSeries], x: &[f64], beta: f64) -> Vec<f64> {
    fs.iter().map(|f| evaluate_series(f, x, beta)).collect()
}

/// Column-compressed Jacobian `J_ab = ∂_b F_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseJacobian {
    pub dim: usize,
    /// Per column `b`: `(row a, value)` sorted by row.
    pub columns: Vec<Vec<(usize, f64)>>,
}

impl SparseJacobian {
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.columns[b].binary_search_by_key(&a, |e| e.0).map(|i| self.columns[b][i].1).unwrap_or(0.0)
    }

    /// `J v`, accumulated column by column in a fixed order.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (b, col) in self.columns.iter().enumerate() {
            if v[b] == 0.0 {
                continue;
            }
            for &(a, val) in col {
                out[a] += val * v[b];
            }
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.dim]; self.dim];
        for (b, col) in self.columns.iter().enumerate() {
            for &(a, val) in col {
                m[a][b] = val;
            }
        }
        m
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }
}

/// Exact differentiation of the stored monomials, evaluated at `x`.
pub fn evaluate_jacobian(fs: &[TermSeries], x: &[f64], beta: f64) -> SparseJacobian {
    let dim = fs.len();
    let mut cols: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); dim];
    for (row, f) in fs.iter().enumerate() {
        for mono in &f.monomials {
            let scale = beta.powi(mono.degree as i32) * mono.value;
            for (i, &(b, e)) in mono.exps.iter().enumerate() {
                let mut v = scale * e as f64 * x[b].powi(e as i32 - 1);
                for (j, &(c, ec)) in mono.exps.iter().enumerate() {
                    if j != i {
                        v *= x[c].powi(ec as i32);
                    }
                }
                *cols[b].entry(row).or_insert(0.0) += v;
            }
        }
    }
    SparseJacobian { dim, columns: cols.into_iter().map(|c| c.into_iter().collect()).collect() }
}
