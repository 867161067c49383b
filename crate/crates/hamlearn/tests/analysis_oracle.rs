use hamlearn::analysis::{
    jacobian_norm_certificate, kl_bound, kl_grid, pair_kl, strong_convexity_certificate, KL_BETAS, KL_EPSILONS,
};
use hamlearn::derivatives::DerivativeEngine;
use hamlearn::hamiltonian::build_dual_graph;
use hamlearn::instances::random_bounded_degree;
use hamlearn::qsim::DEFAULT_CAP;
use hamlearn::series::{build_all_series, evaluate_jacobian, truncation_order, ExpansionParameters};

#[test]
fn kl_bound_holds_and_is_tight_at_small_beta_epsilon() {
    for row in kl_grid(&KL_BETAS, &KL_EPSILONS).unwrap() {
        assert!(row.holds(), "{row:?}");
        if row.beta * row.epsilon <= 0.1 {
            assert!(row.kl / row.bound >= 0.05, "{row:?}");
        }
    }
    let small = pair_kl(0.1, 1e-3).unwrap();
    assert!(small <= kl_bound(0.1, 1e-3) && small > 0.0);
}

#[test]
fn certificates_in_guaranteed_regime() {
    for seed in 0..5u64 {
        let h0 = random_bounded_degree(5, 5, 2, 1.0, seed);
        let g = build_dual_graph(&h0);
        let params = ExpansionParameters::new(g.max_degree);
        let h = h0.with_beta(params.beta_c_sample).unwrap();
        let m_hat = truncation_order(h.beta, 0.01, &params).unwrap();
        let fs = build_all_series(&h, &g, m_hat, &vec![0.0; h.len()], &DerivativeEngine::new());
        let j = evaluate_jacobian(&fs, &h.coefficients(), h.beta);
        assert!(jacobian_norm_certificate(&j, h.beta) <= 0.5);
        let (lo, hi) = strong_convexity_certificate(&h, DEFAULT_CAP).unwrap();
        let b2 = h.beta * h.beta;
        assert!(lo >= b2 / 2.0 && hi <= 1.5 * b2, "{} {}", lo / b2, hi / b2);
    }
}
