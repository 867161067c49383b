use hamlearn::hamiltonian::{build_dual_graph, greedy_coloring};
use hamlearn::instances::{random_bounded_degree, transverse_field_chain};
use hamlearn::qsim;
use hamlearn::realtime::{
    amplified_unitary, build_all_dynamics_series, choose_probes, dynamics_spec, exact_dynamics_values,
    exhaustive_dynamics_estimates, learn_from_dynamics, sample_dynamics_estimates, DynamicsError,
};
use hamlearn::series::{evaluate_all, ExpansionParameters};

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn exhaustive_estimates_recover_chain() {
    let h = transverse_field_chain(&[0.5, -0.4, 0.3], &[0.25, -0.3, 0.4, 0.15], 1.0);
    let g = build_dual_graph(&h);
    let params = ExpansionParameters::new(g.max_degree);
    let spec = dynamics_spec(0.01, &params, true).unwrap();
    assert_eq!(spec.amplification, 1);
    let probes = choose_probes(&h);
    let u = amplified_unitary(&h, &spec, qsim::DEFAULT_CAP).unwrap();
    let est = exhaustive_dynamics_estimates(&u, h.n_qubits, &probes);
    assert!(linf(&est, &exact_dynamics_values(&u, h.n_qubits, &probes)) < 1e-10);
    let fs = build_all_dynamics_series(&h, &g, &probes, 6, &est);
    let rep = learn_from_dynamics(&fs, spec.effective_time(), 1e-6, &params, false).unwrap();
    assert!(linf(&rep.estimates, &h.coefficients()) < 1e-6);
}

#[test]
fn series_tracks_dense_values() {
    let h = random_bounded_degree(4, 5, 3, 1.0, 8);
    let g = build_dual_graph(&h);
    let probes = choose_probes(&h);
    for t in [0.005, 0.02, 0.05] {
        let u = qsim::unitary(&h, t, qsim::DEFAULT_CAP).unwrap();
        let exact = exact_dynamics_values(&u, h.n_qubits, &probes);
        let fs = build_all_dynamics_series(&h, &g, &probes, 7, &exact);
        let resid = evaluate_all(&fs, &h.coefficients(), t);
        assert!(resid.iter().all(|r| r.abs() < 1e-9), "t = {t}: {resid:?}");
    }
}

#[test]
fn regime_error_without_override() {
    let params = ExpansionParameters::new(2);
    let t = 2.0 / (4.0 * params.tau);
    assert!(matches!(dynamics_spec(t, &params, false), Err(DynamicsError::Regime { .. })));
    let s = dynamics_spec(t / 10.0, &params, false).unwrap();
    assert_eq!(s.amplification, 5);
}

#[test]
fn sampled_estimates_concentrate() {
    let h = transverse_field_chain(&[0.5, -0.4], &[0.25, -0.3, 0.4], 1.0);
    let g = build_dual_graph(&h);
    let probes = choose_probes(&h);
    let u = qsim::unitary(&h, 0.3, qsim::DEFAULT_CAP).unwrap();
    let exact = exact_dynamics_values(&u, h.n_qubits, &probes);
    let shots = 200_000;
    let est = sample_dynamics_estimates(&h, &probes, &greedy_coloring(&g), &u, shots, 4).unwrap();
    // each shot is bounded by 12
    let tol = 5.0 * 12.0 / (shots as f64).sqrt();
    assert!(linf(&est.estimates, &exact) < tol, "{:?} vs {:?}", est.estimates, exact);
}
