//! Oracle-equivalence suites behind `hamlearn verify`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Zero};

use hamlearn::analysis::{kl_grid, strong_convexity_certificate, KL_BETAS, KL_EPSILONS};
use hamlearn::clusters::{enumerate_clusters, tree_cluster_count};
use hamlearn::derivatives::{cluster_derivative, cluster_derivative_ops, DerivativeEngine};
use hamlearn::hamiltonian::{build_dual_graph, parse_hamiltonian};
use hamlearn::instances::{random_chain, random_graph, random_small, regular_tree};
use hamlearn::oracles::{brute_force_clusters, derivative_by_word_log};
use hamlearn::pauli::PauliString;
use hamlearn::qsim::{exact_expectations, DEFAULT_CAP};
use hamlearn::series::{build_all_series, evaluate_series, truncation_order, ExpansionParameters};

use crate::cli::CliError;

pub const SUITES: [&str; 4] = ["clusters", "derivatives", "series", "analysis"];

struct Check {
    name: &'static str,
    ok: bool,
    detail: String,
}

fn check(name: &'static str, ok: bool, detail: String) -> Check {
    Check { name, ok, detail }
}

fn ratio(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

fn clusters_suite() -> Vec<Check> {
    let mut mismatches = 0;
    for d in 2..=4 {
        let tree = regular_tree(d, 6);
        for w in 1..=6u32 {
            let got = enumerate_clusters(&tree, 0, w).expect("root exists").len();
            if tree_cluster_count(d as u64, w as u64) != got.into() {
                mismatches += 1;
            }
        }
    }
    let trees = check("clusters.tree_counts", mismatches == 0, format!("{mismatches} mismatches over d=2..4, w<=6"));
    let mut bad = 0;
    let mut total = 0;
    for seed in 0..6u64 {
        let g = random_graph(4 + seed as usize, 0.4, seed);
        for root in 0..g.len() {
            for w in 1..=4u32 {
                let fast: std::collections::BTreeSet<_> =
                    enumerate_clusters(&g, root, w).expect("root").into_iter().collect();
                total += 1;
                if fast != brute_force_clusters(&g, root, w) {
                    bad += 1;
                }
            }
        }
    }
    vec![trees, check("clusters.brute_force", bad == 0, format!("{bad}/{total} enumerations differ"))]
}

fn derivatives_suite(perturb: Option<f64>) -> Vec<Check> {
    let shift = perturb.and_then(BigRational::from_f64).unwrap_or_else(BigRational::zero);
    let z = PauliString::parse(1, "Z0").expect("valid");
    let one = cluster_derivative_ops(std::slice::from_ref(&z), &[1]) + &shift;
    let two = cluster_derivative_ops(std::slice::from_ref(&z), &[2]) + &shift;
    let analytic =
        check("derivatives.analytic", one.is_zero() && two == ratio(1, 2), format!("weight-1 {one}, Z^2 {two}"));
    let engine = DerivativeEngine::new();
    let (mut bad, mut total) = (0, 0);
    for seed in 0..4u64 {
        let h = random_small(2, 3, 0.1, seed);
        let g = build_dual_graph(&h);
        for root in 0..h.len() {
            for w in 1..=4u32 {
                for c in enumerate_clusters(&g, root, w).expect("root") {
                    let ops: Vec<PauliString> = c.parts().iter().map(|&(a, _)| h.terms[a].op.clone()).collect();
                    let mult: Vec<u32> = c.parts().iter().map(|&(_, m)| m).collect();
                    let want = derivative_by_word_log(&ops, &mult);
                    let got = cluster_derivative(&c, &h) + &shift;
                    let cached = engine.cluster(&c, &h) + &shift;
                    total += 1;
                    if got != want || cached != want {
                        bad += 1;
                    }
                }
            }
        }
    }
    vec![analytic, check("derivatives.word_oracle", bad == 0, format!("{bad}/{total} clusters differ"))]
}

fn series_suite() -> Vec<Check> {
    let h = parse_hamiltonian("qubits 1\nbeta 0.1\nterm a 0.5 Z0\n").expect("valid");
    let g = build_dual_graph(&h);
    let fs = build_all_series(&h, &g, 7, &[0.0], &DerivativeEngine::new());
    let want = [(1, ratio(-1, 1)), (3, ratio(1, 3)), (5, ratio(-2, 15)), (7, ratio(17, 315))];
    let got: Vec<(usize, BigRational)> = fs[0].monomials.iter().map(|m| (m.degree, m.coeff.clone())).collect();
    let tanh = check("series.tanh", got == want, format!("{} monomials", got.len()));
    let mut worst = 0.0f64;
    let mut ok = true;
    for seed in 0..2u64 {
        let h = random_chain(5, 1e-3, seed);
        let g = build_dual_graph(&h);
        let params = ExpansionParameters::new(g.max_degree);
        let m_hat = truncation_order(h.beta, 1e-2, &params).expect("convergent");
        let exact = exact_expectations(&h, DEFAULT_CAP).expect("small");
        let fs = build_all_series(&h, &g, m_hat, &exact, &DerivativeEngine::new());
        let bound = params.tail_bound(h.beta, m_hat);
        for f in &fs {
            let err = evaluate_series(f, &h.coefficients(), h.beta).abs();
            worst = worst.max(err / bound);
            ok &= err <= bound;
        }
    }
    vec![tanh, check("series.dense", ok, format!("worst error/tail bound {worst:.3e}"))]
}

fn analysis_suite() -> Result<Vec<Check>, CliError> {
    let rows = kl_grid(&KL_BETAS, &KL_EPSILONS)?;
    let failing = rows.iter().filter(|r| !r.holds()).count();
    let kl = check("analysis.kl_grid", failing == 0, format!("{failing}/{} grid points exceed the bound", rows.len()));
    let h = random_chain(4, 1e-4, 3);
    let (lo, hi) = strong_convexity_certificate(&h, DEFAULT_CAP)?;
    let b2 = h.beta * h.beta;
    let hess = check(
        "analysis.hessian",
        lo >= b2 / 2.0 && hi <= 1.5 * b2,
        format!("eigenvalues in [{:.4}, {:.4}] beta^2", lo / b2, hi / b2),
    );
    Ok(vec![kl, hess])
}

/// Prints one `suite<TAB>PASS|FAIL<TAB>detail` line per check; true when all pass.
pub fn run(suite: Option<&str>, perturb: Option<f64>) -> Result<bool, CliError> {
    if let Some(s) = suite {
        if !SUITES.contains(&s) {
            return Err(CliError::Input(format!("unknown suite `{s}`; expected one of {}", SUITES.join(", "))));
        }
    }
    let wanted = |name: &str| suite.is_none_or(|s| s == name);
    let mut checks = Vec::new();
    if wanted("clusters") {
        checks.extend(clusters_suite());
    }
    if wanted("derivatives") {
        checks.extend(derivatives_suite(perturb));
    }
    if wanted("series") {
        checks.extend(series_suite());
    }
    if wanted("analysis") {
        checks.extend(analysis_suite()?);
    }
    for c in &checks {
        println!("{}\t{}\t{}", c.name, if c.ok { "PASS" } else { "FAIL" }, c.detail);
    }
    Ok(checks.iter().all(|c| c.ok))
}
