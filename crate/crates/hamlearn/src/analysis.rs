//! Lower-bound instances, KL divergence, and numerical certificates.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::hamiltonian::{HamiltonianError, HamiltonianSpec, Term};
use crate::pauli::PauliString;
use crate::qsim::{self, QsimError};
use crate::series::SparseJacobian;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("epsilon = {0} outside (0, 1/2]")]
    Epsilon(f64),
    #[error("flip index {0} out of range")]
    FlipIndex(usize),
    #[error("distribution invalid: {0}")]
    Distribution(String),
    #[error("Hamiltonian is not diagonal")]
    NotDiagonal,
    #[error(transparent)]
    Hamiltonian(#[from] HamiltonianError),
    #[error(transparent)]
    Qsim(#[from] QsimError),
}

/// `2·n_pairs` qubits; pair `p` carries `-Z⊗I - ½ I⊗Z - ½ Z⊗Z`, and the flipped
/// pair carries `-Z⊗I + (ε-½) I⊗Z - (½+ε) Z⊗Z`.
pub fn hard_instance(
    n_pairs: usize,
    beta: f64,
    epsilon: f64,
    flip: Option<usize>,
) -> Result<HamiltonianSpec, AnalysisError> {
    if !(epsilon > 0.0 && epsilon <= 0.5) {
        return Err(AnalysisError::Epsilon(epsilon));
    }
    if let Some(f) = flip {
        if f >= n_pairs {
            return Err(AnalysisError::FlipIndex(f));
        }
    }
    let n = 2 * n_pairs;
    let mut terms = Vec::with_capacity(3 * n_pairs);
    for p in 0..n_pairs {
        let e = if flip == Some(p) { epsilon } else { 0.0 };
        let op = |s: String| PauliString::parse(n, &s).expect("valid token");
        terms.push(Term { id: format!("z{}", 2 * p), op: op(format!("Z{}", 2 * p)), coeff: -1.0 });
        terms.push(Term { id: format!("z{}", 2 * p + 1), op: op(format!("Z{}", 2 * p + 1)), coeff: -0.5 + e });
        terms.push(Term { id: format!("zz{p}"), op: op(format!("Z{} Z{}", 2 * p, 2 * p + 1)), coeff: -0.5 - e });
    }
    Ok(HamiltonianSpec::new(n, terms, beta)?)
}

/// Energies of a diagonal Hamiltonian on every basis state (qubit 0 leftmost).
pub fn diagonal_spectrum(h: &HamiltonianSpec) -> Result<Vec<f64>, AnalysisError> {
    if h.terms.iter().any(|t| t.op.support().iter().any(|&q| t.op.x_bit(q))) {
        return Err(AnalysisError::NotDiagonal);
    }
    let n = h.n_qubits;
    if n >= 26 {
        return Err(QsimError::CapExceeded { n, cap: 25 }.into());
    }
    Ok((0..1usize << n).map(|b| h.terms.iter().map(|t| t.coeff * qsim::outcome_sign(&t.op, b) as f64).sum()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalDistribution {
    pub probs: Vec<f64>,
}

impl DiagonalDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self, AnalysisError> {
        if probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(AnalysisError::Distribution("negative or NaN entry".into()));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(AnalysisError::Distribution(format!("sums to {s}")));
        }
        Ok(DiagonalDistribution { probs })
    }

    /// Gibbs weights `exp(-βE)/Z` of a diagonal Hamiltonian.
    pub fn gibbs(h: &HamiltonianSpec) -> Result<Self, AnalysisError> {
        let e = diagonal_spectrum(h)?;
        let top = e.iter().map(|v| -h.beta * v).fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = e.iter().map(|v| (-h.beta * v - top).exp()).collect();
        let z: f64 = w.iter().sum();
        DiagonalDistribution::new(w.into_iter().map(|x| x / z).collect())
    }

    /// Product distribution, `self` on the leading index bits.
    pub fn product(&self, other: &DiagonalDistribution) -> DiagonalDistribution {
        let probs = self.probs.iter().flat_map(|a| other.probs.iter().map(move |b| a * b)).collect();
        DiagonalDistribution { probs }
    }
}

/// `Σ p_j ln(p_j/q_j)`, infinite when `p` is not absolutely continuous w.r.t. `q`.
pub fn kl_divergence(p: &DiagonalDistribution, q: &DiagonalDistribution) -> f64 {
    assert_eq!(p.probs.len(), q.probs.len(), "distributions over different spaces");
    let mut acc = 0.0;
    for (&a, &b) in p.probs.iter().zip(&q.probs) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return f64::INFINITY;
        }
        acc += a * (a / b).ln();
    }
    acc
}

/// `8β²ε²e^{-2β}`
pub fn kl_bound(beta: f64, epsilon: f64) -> f64 {
    8.0 * beta * beta * epsilon * epsilon * (-2.0 * beta).exp()
}

/// `D(q_1 ∥ q_0)` for the single-pair instance.
pub fn pair_kl(beta: f64, epsilon: f64) -> Result<f64, AnalysisError> {
    let q0 = DiagonalDistribution::gibbs(&hard_instance(1, beta, epsilon, None)?)?;
    let q1 = DiagonalDistribution::gibbs(&hard_instance(1, beta, epsilon, Some(0))?)?;
    Ok(kl_divergence(&q1, &q0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KlRow {
    pub beta: f64,
    pub epsilon: f64,
    pub kl: f64,
    pub bound: f64,
}

impl KlRow {
    pub fn holds(&self) -> bool {
        self.kl <= self.bound
    }
}

pub const KL_BETAS: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 4.0];
pub const KL_EPSILONS: [f64; 3] = [0.05, 0.25, 0.5];

pub fn kl_grid(betas: &[f64], epsilons: &[f64]) -> Result<Vec<KlRow>, AnalysisError> {
    let mut rows = Vec::new();
    for &beta in betas {
        for &epsilon in epsilons {
            rows.push(KlRow { beta, epsilon, kl: pair_kl(beta, epsilon)?, bound: kl_bound(beta, epsilon) });
        }
    }
    Ok(rows)
}

/// `∥I + β⁻¹J∥_{∞→∞}` (maximum absolute row sum).
pub fn jacobian_norm_certificate(j: &SparseJacobian, beta: f64) -> f64 {
    let mut rows = vec![0.0f64; j.dim];
    let mut diag = vec![1.0f64; j.dim];
    for (b, col) in j.columns.iter().enumerate() {
        for &(a, v) in col {
            if a == b {
                diag[a] += v / beta;
            } else {
                rows[a] += (v / beta).abs();
            }
        }
    }
    rows.iter().zip(&diag).map(|(r, d)| r + d.abs()).fold(0.0, f64::max)
}

/// Hessian of `log Tr exp(-βH)` in the coefficients, by central differences of
/// the dense log-partition in the scaled coordinates `x = βλ`.
pub fn log_partition_hessian(h: &HamiltonianSpec, cap: usize) -> Result<DMatrix<f64>, AnalysisError> {
    if h.n_qubits > cap {
        return Err(QsimError::CapExceeded { n: h.n_qubits, cap }.into());
    }
    let ops = h.operators();
    let x0: Vec<f64> = h.coefficients().iter().map(|c| c * h.beta).collect();
    let step = 1e-3;
    let lf = |x: &[f64]| qsim::log_trace_exp(&qsim::operator_sum(h.n_qubits, &ops, x), 1.0);
    let shifted = |pairs: &[(usize, f64)]| {
        let mut x = x0.clone();
        for &(i, d) in pairs {
            x[i] += d;
        }
        lf(&x)
    };
    let m = h.len();
    let f0 = lf(&x0);
    let mut hess = DMatrix::zeros(m, m);
    for a in 0..m {
        hess[(a, a)] = (shifted(&[(a, step)]) - 2.0 * f0 + shifted(&[(a, -step)])) / (step * step);
        for b in 0..a {
            let v = (shifted(&[(a, step), (b, step)])
                - shifted(&[(a, step), (b, -step)])
                - shifted(&[(a, -step), (b, step)])
                + shifted(&[(a, -step), (b, -step)]))
                / (4.0 * step * step);
            hess[(a, b)] = v;
            hess[(b, a)] = v;
        }
    }
    Ok(hess * (h.beta * h.beta))
}

/// Extreme eigenvalues of the log-partition Hessian.
pub fn strong_convexity_certificate(h: &HamiltonianSpec, cap: usize) -> Result<(f64, f64), AnalysisError> {
    let eig = log_partition_hessian(h, cap)?.symmetric_eigenvalues();
    Ok((eig.min(), eig.max()))
}
