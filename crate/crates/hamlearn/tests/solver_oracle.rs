use hamlearn::derivatives::DerivativeEngine;
use hamlearn::hamiltonian::build_dual_graph;
use hamlearn::instances::{random_chain, reference_chain};
use hamlearn::qsim::{exact_expectations, DEFAULT_CAP};
use hamlearn::series::{build_all_series, ExpansionParameters};
use hamlearn::solver::{newton_learn, sample_size, DEFAULT_SAMPLE_CONSTANT};

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn recovers_reference_chain_from_exact_expectations() {
    let h = reference_chain(0.05);
    let g = build_dual_graph(&h);
    let params = ExpansionParameters::new(g.max_degree);
    let exact = exact_expectations(&h, DEFAULT_CAP).unwrap();
    let engine = DerivativeEngine::new();
    let mut last = f64::INFINITY;
    for m_hat in [2, 4, 6] {
        let fs = build_all_series(&h, &g, m_hat, &exact, &engine);
        let rep = newton_learn(&fs, h.beta, 1e-4, &params, true).unwrap();
        assert!(!rep.guaranteed);
        let err = linf(&rep.estimates, &h.coefficients());
        assert!(err < last, "order {m_hat}: {err}");
        last = err;
    }
    assert!(last < 1e-6, "{last}");
}

#[test]
fn regime_is_enforced_without_override() {
    let h = random_chain(4, 0.05, 1);
    let g = build_dual_graph(&h);
    let params = ExpansionParameters::new(g.max_degree);
    let fs = build_all_series(&h, &g, 2, &vec![0.0; h.len()], &DerivativeEngine::new());
    assert!(newton_learn(&fs, h.beta, 0.1, &params, false).is_err());
}

#[test]
fn guaranteed_regime_recovers_coefficients() {
    let params = ExpansionParameters::new(2);
    let beta = params.beta_c_newton;
    let h = random_chain(5, beta, 3);
    let g = build_dual_graph(&h);
    // At this β the shifts are linear to machine precision: ⟨E_a⟩ ≈ -βλ_a.
    let shifts: Vec<f64> = exact_expectations(&h, DEFAULT_CAP).unwrap();
    let fs = build_all_series(&h, &g, 2, &shifts, &DerivativeEngine::new());
    let rep = newton_learn(&fs, beta, 0.01, &params, false).unwrap();
    assert!(rep.guaranteed);
    assert!(linf(&rep.estimates, &h.coefficients()) < 0.01);
}

#[test]
fn sample_size_formula() {
    // C(𝔡+1)/(β²ε²)·ln(2M/δ) with C=8, 𝔡=2, β=0.1, ε=0.1, M=10, δ=0.1
    assert_eq!(sample_size(0.1, 0.1, 0.1, 2, 10, DEFAULT_SAMPLE_CONSTANT), 1271597);
}
