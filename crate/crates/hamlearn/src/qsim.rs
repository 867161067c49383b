//! Dense small-system simulator: Gibbs states, exact expectations, measurement
//! sampling and unitary evolution.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt::Write as _;
use thiserror::Error;

use crate::hamiltonian::{Coloring, HamiltonianSpec};
use crate::pauli::PauliString;

pub type CMatrix = DMatrix<Complex64>;

pub const DEFAULT_CAP: usize = 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QsimError {
    #[error("{n} qubits exceeds the dense cap of {cap}")]
    CapExceeded { n: usize, cap: usize },
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

fn check_cap(n: usize, cap: usize) -> Result<(), QsimError> {
    if n > cap || n >= usize::BITS as usize {
        Err(QsimError::CapExceeded { n, cap })
    } else {
        Ok(())
    }
}

/// Dense matrix of a Pauli string, qubit 0 leftmost.
pub fn pauli_matrix(p: &PauliString) -> CMatrix {
    operator_sum(p.n_qubits(), std::slice::from_ref(p), &[1.0])
}

/// `Σ c_a P_a` as a dense matrix.
pub fn operator_sum(n: usize, ops: &[PauliString], coeffs: &[f64]) -> CMatrix {
    let dim = 1usize << n;
    let mut m = CMatrix::zeros(dim, dim);
    for (p, &c) in ops.iter().zip(coeffs) {
        for b in 0..dim {
            let (ph, row) = p.basis_action(b);
            let z = ph.to_complex();
            m[(row, b)] += Complex64::new(z.re as f64, z.im as f64) * c;
        }
    }
    m
}

pub fn dense_hamiltonian(h: &HamiltonianSpec, cap: usize) -> Result<CMatrix, QsimError> {
    check_cap(h.n_qubits, cap)?;
    Ok(operator_sum(h.n_qubits, &h.operators(), &h.coefficients()))
}

/// Eigenvalues and eigenvectors (columns) of a Hermitian matrix.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let e = m.clone().symmetric_eigen();
    (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
}

/// `log Tr exp(-s M)` for Hermitian `M`.
pub fn log_trace_exp(m: &CMatrix, s: f64) -> f64 {
    let (vals, _) = hermitian_eigen(m);
    let top = vals.iter().map(|v| -s * v).fold(f64::NEG_INFINITY, f64::max);
    top + vals.iter().map(|v| (-s * v - top).exp()).sum::<f64>().ln()
}

/// `log Tr exp(-βH)`.
pub fn log_partition(h: &HamiltonianSpec, cap: usize) -> Result<f64, QsimError> {
    Ok(log_trace_exp(&dense_hamiltonian(h, cap)?, h.beta))
}

/// Density operator over `n_qubits`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseState {
    pub n_qubits: usize,
    pub rho: CMatrix,
}

impl DenseState {
    pub fn maximally_mixed(n: usize) -> Self {
        let dim = 1usize << n;
        DenseState { n_qubits: n, rho: CMatrix::identity(dim, dim) / Complex64::new(dim as f64, 0.0) }
    }

    pub fn from_pure(n: usize, psi: &DVector<Complex64>) -> Self {
        DenseState { n_qubits: n, rho: psi * psi.adjoint() }
    }

    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.rho - self.rho.adjoint()).iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigen(&self.rho).0.into_iter().fold(f64::INFINITY, f64::min)
    }

    /// `Tr(P ρ)`.
    pub fn expectation(&self, p: &PauliString) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for b in 0..self.rho.nrows() {
            let (ph, row) = p.basis_action(b);
            let z = ph.to_complex();
            acc += Complex64::new(z.re as f64, z.im as f64) * self.rho[(b, row)];
        }
        acc
    }

    pub fn distance(&self, other: &DenseState) -> f64 {
        (&self.rho - &other.rho).iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

/// `exp(-βH)/Tr exp(-βH)` via eigendecomposition.
pub fn gibbs_state(h: &HamiltonianSpec, cap: usize) -> Result<DenseState, QsimError> {
    let m = dense_hamiltonian(h, cap)?;
    let (vals, vecs) = hermitian_eigen(&m);
    let top = vals.iter().map(|v| -h.beta * v).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = vals.iter().map(|v| (-h.beta * v - top).exp()).collect();
    let z: f64 = w.iter().sum();
    let d = DVector::from_iterator(w.len(), w.iter().map(|x| Complex64::new(x / z, 0.0)));
    let rho = &vecs * CMatrix::from_diagonal(&d) * vecs.adjoint();
    Ok(DenseState { n_qubits: h.n_qubits, rho })
}

/// `Tr(E_a ρ)` for every term.
pub fn exact_expectations(h: &HamiltonianSpec, cap: usize) -> Result<Vec<f64>, QsimError> {
    let rho = gibbs_state(h, cap)?;
    Ok(h.terms.iter().map(|t| rho.expectation(&t.op).re).collect())
}

/// `e^{-itH}`.
pub fn unitary(h: &HamiltonianSpec, t: f64, cap: usize) -> Result<CMatrix, QsimError> {
    let m = dense_hamiltonian(h, cap)?;
    let (vals, vecs) = hermitian_eigen(&m);
    let d = DVector::from_iterator(vals.len(), vals.iter().map(|v| Complex64::new(0.0, -t * v).exp()));
    Ok(&vecs * CMatrix::from_diagonal(&d) * vecs.adjoint())
}

/// `U ρ U†` with `U = e^{-itH}`.
pub fn time_evolve(h: &HamiltonianSpec, t: f64, s: &DenseState, cap: usize) -> Result<DenseState, QsimError> {
    if s.n_qubits != h.n_qubits {
        return Err(QsimError::Invalid("state and Hamiltonian sizes differ".into()));
    }
    let u = unitary(h, t, cap)?;
    Ok(DenseState { n_qubits: s.n_qubits, rho: &u * &s.rho * u.adjoint() })
}

/// Applies a 2x2 gate on `qubit` to each column of `m` (left multiplication).
pub fn apply_gate_left(m: &mut CMatrix, n: usize, qubit: usize, g: &[[Complex64; 2]; 2]) {
    let bit = 1usize << (n - 1 - qubit);
    for col in 0..m.ncols() {
        for r in 0..m.nrows() {
            if r & bit == 0 {
                let (a, b) = (m[(r, col)], m[(r | bit, col)]);
                m[(r, col)] = g[0][0] * a + g[0][1] * b;
                m[(r | bit, col)] = g[1][0] * a + g[1][1] * b;
            }
        }
    }
}

/// Rotation taking the eigenbasis of `letter` to the computational basis,
/// with the +1 eigenvector sent to `|0>`.
pub fn basis_rotation(letter: char) -> [[Complex64; 2]; 2] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let c = |re: f64, im: f64| Complex64::new(re, im);
    match letter {
        'X' => [[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]],
        // H S†
        'Y' => [[c(h, 0.0), c(0.0, -h)], [c(h, 0.0), c(0.0, h)]],
        _ => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]],
    }
}

/// Outcome distribution of measuring every qubit in the given bases.
pub fn measurement_distribution(s: &DenseState, bases: &[char]) -> Vec<f64> {
    let mut m = s.rho.clone();
    let n = s.n_qubits;
    for (q, &l) in bases.iter().enumerate() {
        if l == 'Z' {
            continue;
        }
        let g = basis_rotation(l);
        apply_gate_left(&mut m, n, q, &g);
        m.adjoint_mut();
        apply_gate_left(&mut m, n, q, &g);
        m.adjoint_mut();
    }
    (0..m.nrows()).map(|b| m[(b, b)].re.max(0.0)).collect()
}

/// Counter-based generator for `(seed, stream, index)`; each index owns a
/// window of 2^16 words.
pub fn shot_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos((index as u128) << 16);
    rng
}

/// Inverse-CDF sampling of a basis index.
pub fn sample_index(cdf: &[f64], u: f64) -> usize {
    let target = u * cdf[cdf.len() - 1];
    cdf.partition_point(|&c| c <= target).min(cdf.len() - 1)
}

pub fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    p.iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect()
}

/// ±1 eigenvalue of a Pauli string on the measured outcome `b` (rotated basis).
pub fn outcome_sign(p: &PauliString, b: usize) -> i64 {
    let n = p.n_qubits();
    let parity = p.support().iter().filter(|&&q| b >> (n - 1 - q) & 1 == 1).count();
    if parity % 2 == 0 {
        1
    } else {
        -1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateVector {
    pub term_ids: Vec<String>,
    pub estimates: Vec<f64>,
    pub shots: Vec<u64>,
    pub seed: u64,
}

impl EstimateVector {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "seed\t{}", self.seed);
        s.push('\n');
        for ((id, v), n) in self.term_ids.iter().zip(&self.estimates).zip(&self.shots) {
            let _ = writeln!(s, "{id}\t{v:.17e}\t{n}");
        }
        s
    }
}

/// Per-qubit measurement letters for one color class.
pub fn color_bases(h: &HamiltonianSpec, class: &[usize]) -> Result<Vec<char>, QsimError> {
    let mut bases = vec!['\0'; h.n_qubits];
    for &a in class {
        let op = &h.terms[a].op;
        for q in op.support() {
            let l = op.letter(q);
            if bases[q] != '\0' && bases[q] != l {
                return Err(QsimError::Invariant(format!("qubit {q} needs both {} and {l}", bases[q])));
            }
            bases[q] = l;
        }
    }
    Ok(bases.into_iter().map(|l| if l == '\0' { 'Z' } else { l }).collect())
}

/// `S` shots per color class of the Gibbs state.
pub fn sample_pauli_estimates(
    h: &HamiltonianSpec,
    coloring: &Coloring,
    shots: u64,
    seed: u64,
    cap: usize,
) -> Result<EstimateVector, QsimError> {
    if shots == 0 {
        return Err(QsimError::Invalid("shots must be positive".into()));
    }
    let rho = gibbs_state(h, cap)?;
    sample_state_estimates(h, &rho, coloring, shots, seed)
}

/// Shot averages of every term measured on copies of `state`.
pub fn sample_state_estimates(
    h: &HamiltonianSpec,
    state: &DenseState,
    coloring: &Coloring,
    shots: u64,
    seed: u64,
) -> Result<EstimateVector, QsimError> {
    let mut sums = vec![0i64; h.len()];
    for (color, class) in coloring.classes().iter().enumerate() {
        if class.is_empty() {
            continue;
        }
        let bases = color_bases(h, class)?;
        let cdf = cumulative(&measurement_distribution(state, &bases));
        let part: Vec<i64> = (0..shots)
            .into_par_iter()
            .map(|shot| {
                let b = sample_index(&cdf, shot_rng(seed, color as u64, shot).random::<f64>());
                class.iter().map(|&a| outcome_sign(&h.terms[a].op, b)).collect::<Vec<i64>>()
            })
            .reduce(
                || vec![0; class.len()],
                |mut x, y| {
                    for (u, v) in x.iter_mut().zip(y) {
                        *u += v;
                    }
                    x
                },
            );
        for (&a, v) in class.iter().zip(part) {
            sums[a] = v;
        }
    }
    Ok(EstimateVector {
        term_ids: h.terms.iter().map(|t| t.id.clone()).collect(),
        estimates: sums.iter().map(|&s| s as f64 / shots as f64).collect(),
        shots: vec![shots; h.len()],
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{build_dual_graph, greedy_coloring, parse_hamiltonian};

    fn spec(t: &str) -> HamiltonianSpec {
        parse_hamiltonian(t).unwrap()
    }

    #[test]
    fn single_qubit_closed_form() {
        let h = spec("qubits 1\nbeta 0.7\nterm a 0.4 Z0\n");
        let rho = gibbs_state(&h, 12).unwrap();
        let x = 0.7 * 0.4;
        let z = 2.0 * f64::cosh(x);
        assert!((rho.rho[(0, 0)].re - (-x).exp() / z).abs() < 1e-14);
        assert!((rho.rho[(1, 1)].re - x.exp() / z).abs() < 1e-14);
        let e = exact_expectations(&h, 12).unwrap();
        assert!((e[0] + x.tanh()).abs() < 1e-14);
        assert!((log_partition(&h, 12).unwrap() - z.ln()).abs() < 1e-14);
    }

    #[test]
    fn zero_beta_is_maximally_mixed() {
        let h = spec("qubits 3\nbeta 0\nterm a 0.4 X0 Y1\nterm b 0.9 Z2\n");
        let rho = gibbs_state(&h, 12).unwrap();
        assert!(rho.distance(&DenseState::maximally_mixed(3)) < 1e-14);
        assert!(exact_expectations(&h, 12).unwrap().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn warmup_pair_diagonal() {
        let beta: f64 = 0.3;
        let h = spec(&format!("qubits 2\nbeta {beta}\nterm a -1 Z0\nterm b -0.5 Z1\nterm c -0.5 Z0 Z1\n"));
        let rho = gibbs_state(&h, 12).unwrap();
        let w = [(2.0 * beta).exp(), 1.0, (-beta).exp(), (-beta).exp()];
        let z: f64 = w.iter().sum();
        for (i, wi) in w.iter().enumerate() {
            assert!((rho.rho[(i, i)].re - wi / z).abs() < 1e-14);
        }
    }

    #[test]
    fn ising_chain_matches_enumeration() {
        let h = spec("qubits 4\nbeta 0.8\nterm a 0.3 Z0 Z1\nterm b -0.6 Z1 Z2\nterm c 0.9 Z2 Z3\n");
        let e = exact_expectations(&h, 12).unwrap();
        let couplings = [0.3, -0.6, 0.9];
        let mut num = [0.0; 3];
        let mut z = 0.0;
        for s in 0..16u32 {
            let spin = |q: u32| if s >> (3 - q) & 1 == 1 { -1.0 } else { 1.0 };
            let prods = [spin(0) * spin(1), spin(1) * spin(2), spin(2) * spin(3)];
            let en: f64 = couplings.iter().zip(&prods).map(|(c, p)| c * p).sum();
            let w = (-0.8 * en).exp();
            z += w;
            for i in 0..3 {
                num[i] += w * prods[i];
            }
        }
        for i in 0..3 {
            assert!((e[i] - num[i] / z).abs() < 1e-13);
        }
    }

    #[test]
    fn evolution_closed_form_and_reversal() {
        let h = spec("qubits 1\nbeta 1\nterm a 1 Z0\n");
        let plus = DVector::from_vec(vec![Complex64::new(0.5f64.sqrt(), 0.0); 2]);
        let s = DenseState::from_pure(1, &plus);
        let x = PauliString::parse(1, "X0").unwrap();
        let y = PauliString::parse(1, "Y0").unwrap();
        for t in [std::f64::consts::FRAC_PI_2, 0.3, 3.0 * std::f64::consts::FRAC_PI_4] {
            let out = time_evolve(&h, t, &s, 12).unwrap();
            assert!((out.expectation(&x).re - (2.0 * t).cos()).abs() < 1e-12);
            assert!((out.expectation(&y).re - (2.0 * t).sin()).abs() < 1e-12);
        }
        assert!(time_evolve(&h, 0.0, &s, 12).unwrap().distance(&s) < 1e-14);
        let h2 = spec("qubits 2\nbeta 1\nterm a 0.3 X0 Y1\nterm b 0.7 Z1\n");
        let s2 = DenseState::maximally_mixed(2);
        let mut psi = DVector::from_element(4, Complex64::new(0.0, 0.0));
        psi[1] = Complex64::new(1.0, 0.0);
        let s3 = DenseState::from_pure(2, &psi);
        for s in [s2, s3] {
            let back = time_evolve(&h2, -1.3, &time_evolve(&h2, 1.3, &s, 12).unwrap(), 12).unwrap();
            assert!(back.distance(&s) < 1e-10);
        }
    }

    #[test]
    fn cap_enforced() {
        let h = spec("qubits 3\nbeta 1\nterm a 1 Z0\n");
        assert_eq!(gibbs_state(&h, 2).unwrap_err(), QsimError::CapExceeded { n: 3, cap: 2 });
    }

    #[test]
    fn measurement_in_rotated_bases() {
        let h = spec("qubits 2\nbeta 1.5\nterm a 0.6 X0\nterm b -0.4 Y1\nterm c 0.2 Z0 Z1\n");
        let rho = gibbs_state(&h, 12).unwrap();
        let p = measurement_distribution(&rho, &['X', 'Y']);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let ex = p[0] + p[1] - p[2] - p[3];
        let ey = p[0] - p[1] + p[2] - p[3];
        let exact = exact_expectations(&h, 12).unwrap();
        assert!((ex - exact[0]).abs() < 1e-12);
        assert!((ey - exact[1]).abs() < 1e-12);
    }

    #[test]
    fn deterministic_state_sampling() {
        let h = spec("qubits 1\nbeta 10\nterm a -1 Z0\n");
        let g = build_dual_graph(&h);
        let est = sample_pauli_estimates(&h, &greedy_coloring(&g), 1000, 7, 12).unwrap();
        assert!(est.estimates[0] > 0.99);
    }

    #[test]
    fn sampling_reproducible() {
        let h = spec("qubits 3\nbeta 0.5\nterm a 0.6 X0\nterm b -0.4 Z0 Z1\nterm c 0.3 Y2\n");
        let c = greedy_coloring(&build_dual_graph(&h));
        let a = sample_pauli_estimates(&h, &c, 5000, 11, 12).unwrap();
        let b = sample_pauli_estimates(&h, &c, 5000, 11, 12).unwrap();
        assert_eq!(a, b);
        let d = sample_pauli_estimates(&h, &c, 5000, 12, 12).unwrap();
        assert_ne!(a, d);
    }
}
