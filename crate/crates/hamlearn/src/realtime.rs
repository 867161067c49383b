//! Learning from short-time real-time evolution.
//!
//! For each term a probe `P_a` anticommuting with `E_a` is evolved and traced
//! against `Q_a = 2iP_aE_a`, giving `F_a = 2^{-N} Tr(Q_a U P_a U†) = 4tλ_a + O(t²)`.

use std::collections::BTreeMap;

use nalgebra::DVector;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::hamiltonian::{Coloring, DualGraph, HamiltonianSpec};
use crate::pauli::{PauliString, Phase, PhasedPauli};
use crate::qsim::{self, CMatrix, DenseState, EstimateVector, QsimError};
use crate::series::{ExpansionParameters, TermSeries};
use crate::solver::{iteration_count, neumann_depth, newton_iterate, residual_inf, LearnReport, SolverError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("evolution time {t} exceeds the critical time {t_c}")]
    Regime { t: f64, t_c: f64 },
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error(transparent)]
    Qsim(#[from] QsimError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbePair {
    pub term: usize,
    pub qubit: usize,
    pub p: PauliString,
    /// `Q_a / 2 = i P_a E_a`, a Pauli string with a real sign.
    pub q_half: PhasedPauli,
}

impl ProbePair {
    pub fn q_sign(&self) -> i64 {
        if self.q_half.phase == Phase::ONE {
            1
        } else {
            -1
        }
    }
}

/// X on the lowest support qubit if `E_a` acts there as Z or Y, else Z.
pub fn choose_probe(h: &HamiltonianSpec, a: usize) -> ProbePair {
    let e = &h.terms[a].op;
    let qubit = e.support()[0];
    let letter = if matches!(e.letter(qubit), 'Z' | 'Y') { 'X' } else { 'Z' };
    let p = PauliString::single(h.n_qubits, qubit, letter).expect("qubit in range");
    let (ph, op) = p.product(e).expect("same register");
    let q_half = PhasedPauli::new(Phase::I * ph, op);
    debug_assert!(q_half.is_hermitian());
    ProbePair { term: a, qubit, p, q_half }
}

pub fn choose_probes(h: &HamiltonianSpec) -> Vec<ProbePair> {
    (0..h.len()).map(|a| choose_probe(h, a)).collect()
}

/// Evolution time, critical time and amplification factor.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsSpec {
    pub t: f64,
    pub t_c: f64,
    pub amplification: usize,
}

impl DynamicsSpec {
    pub fn effective_time(&self) -> f64 {
        self.t * self.amplification as f64
    }
}

/// `t_c = 1/(4τ)` and `n = ⌊t_c/t⌋`. Overriding a too-large `t` uses `n = 1`.
pub fn dynamics_spec(
    t: f64,
    params: &ExpansionParameters,
    allow_override: bool,
) -> Result<DynamicsSpec, DynamicsError> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(DynamicsError::Invalid(format!("t = {t}")));
    }
    let t_c = 1.0 / (4.0 * params.tau);
    let n = (t_c / t).floor() as usize;
    if n == 0 {
        if !allow_override {
            return Err(DynamicsError::Regime { t, t_c });
        }
        return Ok(DynamicsSpec { t, t_c, amplification: 1 });
    }
    Ok(DynamicsSpec { t, t_c, amplification: n })
}

type Gauss = (i128, i128);

fn gmul_phase(c: Gauss, ph: Phase) -> Gauss {
    match ph.exponent() {
        0 => c,
        1 => (-c.1, c.0),
        2 => (-c.0, -c.1),
        _ => (c.1, -c.0),
    }
}

fn add_exp(mono: &[(usize, u32)], b: usize) -> Vec<(usize, u32)> {
    let mut out = mono.to_vec();
    match out.binary_search_by_key(&b, |e| e.0) {
        Ok(i) => out[i].1 += 1,
        Err(i) => out.insert(i, (b, 1)),
    }
    out
}

/// Series of `F_a` in powers of `t`: `Σ_n (-i)^n/n! · 2^{-N}Tr(Q_a [H,P_a]_n)`
/// with the iterated commutators expanded exactly per monomial.
pub fn build_dynamics_series(
    h: &HamiltonianSpec,
    g: &DualGraph,
    probe: &ProbePair,
    m_hat: usize,
    shift: f64,
) -> TermSeries {
    assert!(m_hat >= 1, "truncation order must be positive");
    let ops = h.operators();
    let mut layer: BTreeMap<Vec<(usize, u32)>, BTreeMap<PauliString, Gauss>> = BTreeMap::new();
    layer.insert(Vec::new(), BTreeMap::from([(probe.p.clone(), (1, 0))]));
    let mut coeffs: BTreeMap<Vec<(usize, u32)>, BigRational> = BTreeMap::new();
    let mut fact = BigInt::from(1);
    // After n commutators only terms within distance n of the probe term act.
    let dist = g.distances_from(probe.term);
    for n in 1..=m_hat {
        fact *= n;
        let mut next: BTreeMap<Vec<(usize, u32)>, BTreeMap<PauliString, Gauss>> = BTreeMap::new();
        for (mono, rs) in &layer {
            for (b, e) in ops.iter().enumerate() {
                if dist[b] > n {
                    continue;
                }
                for (r, &c) in rs {
                    if e.commutes(r).expect("same register") {
                        continue;
                    }
                    let (ph, op) = e.product(r).expect("same register");
                    let v = gmul_phase((2 * c.0, 2 * c.1), ph);
                    let slot = next.entry(add_exp(mono, b)).or_default().entry(op).or_insert((0, 0));
                    slot.0 = slot.0.checked_add(v.0).expect("commutator coefficient overflow");
                    slot.1 = slot.1.checked_add(v.1).expect("commutator coefficient overflow");
                }
            }
        }
        for rs in next.values_mut() {
            rs.retain(|_, c| *c != (0, 0));
        }
        next.retain(|_, rs| !rs.is_empty());
        for (mono, rs) in &next {
            if let Some(&c) = rs.get(&probe.q_half.op) {
                // (-i)^n c · 2 · sign(Q/2)
                let v = gmul_phase(c, Phase::new(-(n as i64)));
                assert_eq!(v.1, 0, "dynamics coefficient must be real");
                let num = BigInt::from(v.0) * BigInt::from(2 * probe.q_sign());
                coeffs.insert(mono.clone(), BigRational::new(num, fact.clone()));
            }
        }
        layer = next;
    }
    TermSeries::from_coefficients(probe.term, h.terms[probe.term].id.clone(), shift, m_hat, coeffs)
}

pub fn build_all_dynamics_series(
    h: &HamiltonianSpec,
    g: &DualGraph,
    probes: &[ProbePair],
    m_hat: usize,
    shifts: &[f64],
) -> Vec<TermSeries> {
    probes.par_iter().zip(shifts.par_iter()).map(|(p, &s)| build_dynamics_series(h, g, p, m_hat, s)).collect()
}

/// `U^n` for `U = e^{-itH}`.
pub fn amplified_unitary(h: &HamiltonianSpec, spec: &DynamicsSpec, cap: usize) -> Result<CMatrix, QsimError> {
    let u = qsim::unitary(h, spec.t, cap)?;
    let mut v = u.clone();
    for _ in 1..spec.amplification {
        v = &v * &u;
    }
    Ok(v)
}

/// Exact `2^{-N} Tr(Q_a V P_a V†)` for a given evolution `V`.
pub fn exact_dynamics_values(u: &CMatrix, n: usize, probes: &[ProbePair]) -> Vec<f64> {
    let dim = 1usize << n;
    probes
        .iter()
        .map(|pr| {
            let pm = qsim::pauli_matrix(&pr.p);
            let evolved = DenseState { n_qubits: n, rho: u * pm * u.adjoint() };
            2.0 * pr.q_sign() as f64 * evolved.expectation(&pr.q_half.op).re / dim as f64
        })
        .collect()
}

/// Amplitudes of the six single-qubit states `0, 1, +, -, +i, -i`.
fn single_state(k: usize) -> [Complex64; 2] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let c = |re: f64, im: f64| Complex64::new(re, im);
    match k {
        0 => [c(1.0, 0.0), c(0.0, 0.0)],
        1 => [c(0.0, 0.0), c(1.0, 0.0)],
        2 => [c(h, 0.0), c(h, 0.0)],
        3 => [c(h, 0.0), c(-h, 0.0)],
        4 => [c(h, 0.0), c(0.0, h)],
        _ => [c(h, 0.0), c(0.0, -h)],
    }
}

/// Index of the +1 eigenstate of a probe letter.
fn plus_state(letter: char) -> usize {
    match letter {
        'X' => 2,
        'Y' => 4,
        _ => 0,
    }
}

pub fn product_state(choices: &[usize]) -> DVector<Complex64> {
    let mut v = DVector::from_element(1, Complex64::new(1.0, 0.0));
    for &k in choices {
        let s = single_state(k);
        v = DVector::from_iterator(v.len() * 2, v.iter().flat_map(|a| [a * s[0], a * s[1]]));
    }
    v
}

fn pure_expectation(psi: &DVector<Complex64>, p: &PauliString) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for b in 0..psi.len() {
        let (ph, row) = p.basis_action(b);
        let z = ph.to_complex();
        acc += psi[row].conj() * Complex64::new(z.re as f64, z.im as f64) * psi[b];
    }
    acc.re
}

fn probe_hit(pr: &ProbePair, choices: &[usize]) -> bool {
    choices[pr.qubit] == plus_state(pr.p.letter(pr.qubit))
}

/// Averages `12 · 1[s_P = +] · ⟨Q_a/2⟩` over all `6^N` product states exactly.
pub fn exhaustive_dynamics_estimates(u: &CMatrix, n: usize, probes: &[ProbePair]) -> Vec<f64> {
    let total = 6usize.pow(n as u32);
    let sums = (0..total)
        .into_par_iter()
        .map(|idx| {
            let mut choices = vec![0usize; n];
            let mut r = idx;
            for q in (0..n).rev() {
                choices[q] = r % 6;
                r /= 6;
            }
            let phi = u * product_state(&choices);
            probes
                .iter()
                .map(|pr| {
                    if probe_hit(pr, &choices) {
                        pr.q_sign() as f64 * pure_expectation(&phi, &pr.q_half.op)
                    } else {
                        0.0
                    }
                })
                .collect::<Vec<f64>>()
        })
        .collect::<Vec<_>>();
    let mut acc = vec![0.0; probes.len()];
    for s in sums {
        for (a, v) in acc.iter_mut().zip(s) {
            *a += v;
        }
    }
    acc.iter().map(|v| 12.0 * v / total as f64).collect()
}

/// Randomized product-state estimator: per color round and shot, a uniform
/// product state is evolved by `V` and every `Q_a/2` of the round is measured.
pub fn sample_dynamics_estimates(
    h: &HamiltonianSpec,
    probes: &[ProbePair],
    coloring: &Coloring,
    v: &CMatrix,
    shots: u64,
    seed: u64,
) -> Result<EstimateVector, QsimError> {
    if shots == 0 {
        return Err(QsimError::Invalid("shots must be positive".into()));
    }
    let n = h.n_qubits;
    let q_spec = HamiltonianSpec {
        n_qubits: n,
        terms: probes
            .iter()
            .map(|pr| crate::hamiltonian::Term {
                id: h.terms[pr.term].id.clone(),
                op: pr.q_half.op.clone(),
                coeff: 0.0,
            })
            .collect(),
        beta: 0.0,
    };
    let mut sums = vec![0i64; probes.len()];
    for (color, class) in coloring.classes().iter().enumerate() {
        if class.is_empty() {
            continue;
        }
        let bases = qsim::color_bases(&q_spec, class)?;
        let part: Vec<i64> = (0..shots)
            .into_par_iter()
            .map(|shot| {
                let mut rng = qsim::shot_rng(seed, color as u64, shot);
                let choices: Vec<usize> = (0..n).map(|_| rng.random_range(0..6usize)).collect();
                let phi = v * product_state(&choices);
                let mut m = CMatrix::from_column_slice(phi.len(), 1, phi.as_slice());
                for (q, &l) in bases.iter().enumerate() {
                    if l != 'Z' {
                        qsim::apply_gate_left(&mut m, n, q, &qsim::basis_rotation(l));
                    }
                }
                let probs: Vec<f64> = m.iter().map(|z| z.norm_sqr()).collect();
                let b = qsim::sample_index(&qsim::cumulative(&probs), rng.random::<f64>());
                class
                    .iter()
                    .map(|&a| {
                        let pr = &probes[a];
                        if probe_hit(pr, &choices) {
                            pr.q_sign() * qsim::outcome_sign(&pr.q_half.op, b)
                        } else {
                            0
                        }
                    })
                    .collect::<Vec<i64>>()
            })
            .reduce(
                || vec![0; class.len()],
                |mut x, y| {
                    for (u, w) in x.iter_mut().zip(y) {
                        *u += w;
                    }
                    x
                },
            );
        for (&a, s) in class.iter().zip(part) {
            sums[a] = s;
        }
    }
    Ok(EstimateVector {
        term_ids: probes.iter().map(|pr| h.terms[pr.term].id.clone()).collect(),
        estimates: sums.iter().map(|&s| 12.0 * s as f64 / shots as f64).collect(),
        shots: vec![shots; probes.len()],
        seed,
    })
}

/// Newton inversion of the dynamics series at effective time `t`, with leading
/// Jacobian `+4t I`.
pub fn learn_from_dynamics(
    fs: &[TermSeries],
    t: f64,
    epsilon: f64,
    params: &ExpansionParameters,
    guaranteed: bool,
) -> Result<LearnReport, DynamicsError> {
    if !(t > 0.0) || !(epsilon > 0.0) {
        return Err(DynamicsError::Invalid(format!("t = {t}, epsilon = {epsilon}")));
    }
    let scale = -4.0 * t;
    let k = neumann_depth(scale, epsilon);
    let iters = iteration_count(scale, epsilon, params.degree_bound, k);
    let (x, run) = newton_iterate(fs, t, scale, k, iters)?;
    let mut params = params.clone();
    params.neumann_depth = k;
    params.iterations = iters;
    params.m_hat = fs.iter().map(|f| f.truncation).max().unwrap_or(params.m_hat);
    Ok(LearnReport {
        term_ids: fs.iter().map(|f| f.term_id.clone()).collect(),
        residual_inf: residual_inf(fs, &x, t),
        estimates: x,
        iterations_run: run,
        params,
        shots: None,
        seed: None,
        guaranteed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{build_dual_graph, greedy_coloring, parse_hamiltonian};
    use crate::series::evaluate_series;

    fn spec(t: &str) -> HamiltonianSpec {
        parse_hamiltonian(t).unwrap()
    }

    #[test]
    fn probe_choice() {
        let h = spec("qubits 5\nbeta 1\nterm a 0.5 Z3\nterm b 0.5 X1 X2\nterm c 0.5 Y0 Z4\n");
        let p = choose_probe(&h, 0);
        assert_eq!(p.p, PauliString::parse(5, "X3").unwrap());
        // i X Z = Y
        assert_eq!(p.q_half, PhasedPauli::new(Phase::ONE, PauliString::parse(5, "Y3").unwrap()));
        let p = choose_probe(&h, 1);
        assert_eq!(p.p, PauliString::parse(5, "Z1").unwrap());
        assert!(p.q_half.is_hermitian());
        let p = choose_probe(&h, 2);
        assert_eq!(p.p, PauliString::parse(5, "X0").unwrap());
        assert!(!p.p.commutes(&h.terms[2].op).unwrap());
    }

    #[test]
    fn single_term_sine() {
        let h = spec("qubits 1\nbeta 1\nterm a 0.8 Z0\n");
        let g = build_dual_graph(&h);
        let pr = choose_probe(&h, 0);
        let f = build_dynamics_series(&h, &g, &pr, 7, 0.0);
        // 2 sin(2y) = 4y - (8/3)y³ + (8/15)y⁵ - (16/315)y⁷
        let got: Vec<(usize, BigRational)> = f.monomials.iter().map(|m| (m.degree, m.coeff.clone())).collect();
        let q = |a: i64, b: i64| BigRational::new(a.into(), b.into());
        assert_eq!(got, vec![(1, q(4, 1)), (3, q(-8, 3)), (5, q(8, 15)), (7, q(-16, 315))]);
        let t = 0.3;
        let u = qsim::unitary(&h, t, 12).unwrap();
        let exact = exact_dynamics_values(&u, 1, &[pr]);
        assert!((exact[0] - 2.0 * (2.0 * t * 0.8f64).sin()).abs() < 1e-12);
        let s = evaluate_series(&f, &[0.8], t);
        assert!((s - exact[0]).abs() < 1e-6);
    }

    #[test]
    fn zero_time_vanishes() {
        let h = spec("qubits 2\nbeta 1\nterm a 0.8 Z0\nterm b -0.3 X0 X1\n");
        let u = qsim::unitary(&h, 0.0, 12).unwrap();
        let v = exact_dynamics_values(&u, 2, &choose_probes(&h));
        assert!(v.iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn exhaustive_estimator_is_unbiased() {
        let h = spec("qubits 2\nbeta 1\nterm a 0.8 Z0\nterm b -0.3 X0 X1\nterm c 0.5 Y1\n");
        let probes = choose_probes(&h);
        let u = qsim::unitary(&h, 0.7, 12).unwrap();
        let exact = exact_dynamics_values(&u, 2, &probes);
        let ex = exhaustive_dynamics_estimates(&u, 2, &probes);
        for (a, b) in exact.iter().zip(&ex) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn series_matches_dense_on_small_chain() {
        let h = spec("qubits 3\nbeta 1\nterm a 0.8 Z0 Z1\nterm b -0.3 Z1 Z2\nterm c 0.5 X1\nterm d 0.2 X0\n");
        let g = build_dual_graph(&h);
        let probes = choose_probes(&h);
        let t = 0.02;
        let u = qsim::unitary(&h, t, 12).unwrap();
        let exact = exact_dynamics_values(&u, 3, &probes);
        for (pr, e) in probes.iter().zip(&exact) {
            let f = build_dynamics_series(&h, &g, pr, 6, 0.0);
            assert!((evaluate_series(&f, &h.coefficients(), t) - e).abs() < 1e-11);
        }
    }

    #[test]
    fn linear_inversion() {
        let h = spec("qubits 2\nbeta 1\nterm a 0.8 Z0\nterm b -0.3 X0 X1\n");
        let g = build_dual_graph(&h);
        let probes = choose_probes(&h);
        let t = 0.01;
        let fs = build_all_dynamics_series(&h, &g, &probes, 1, &[0.02, -0.004]);
        let r = learn_from_dynamics(&fs, t, 1e-3, &ExpansionParameters::new(1), false).unwrap();
        assert!((r.estimates[0] - 0.5).abs() < 1e-12);
        assert!((r.estimates[1] + 0.1).abs() < 1e-12);
    }

    #[test]
    fn critical_time() {
        let p = ExpansionParameters::new(2);
        let s = dynamics_spec(1e-4, &p, false).unwrap();
        assert_eq!(s.amplification, (1.0 / (4.0 * p.tau * 1e-4)).floor() as usize);
        assert!(s.effective_time() <= s.t_c);
        assert!(matches!(dynamics_spec(0.01, &p, false), Err(DynamicsError::Regime { .. })));
        assert_eq!(dynamics_spec(0.01, &p, true).unwrap().amplification, 1);
    }

    #[test]
    fn sampling_concentrates_and_reproduces() {
        let h = spec("qubits 2\nbeta 1\nterm a 0.8 Z0\nterm b -0.3 X0 X1\n");
        let probes = choose_probes(&h);
        let c = greedy_coloring(&build_dual_graph(&h));
        let u = qsim::unitary(&h, 0.0, 12).unwrap();
        let e = sample_dynamics_estimates(&h, &probes, &c, &u, 20000, 3).unwrap();
        assert!(e.estimates.iter().all(|v| v.abs() < 0.15));
        let u = qsim::unitary(&h, 0.4, 12).unwrap();
        let a = sample_dynamics_estimates(&h, &probes, &c, &u, 40000, 5).unwrap();
        let b = sample_dynamics_estimates(&h, &probes, &c, &u, 40000, 5).unwrap();
        assert_eq!(a, b);
        let exact = exact_dynamics_values(&u, 2, &probes);
        for (x, y) in a.estimates.iter().zip(&exact) {
            // 12/sqrt(S) standard error at most
            assert!((x - y).abs() < 5.0 * 12.0 / (40000f64).sqrt(), "{x} vs {y}");
        }
    }
}
