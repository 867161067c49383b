//! Seeded instance generators shared by tests, benchmarks and `verify`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::hamiltonian::{build_dual_graph, DualGraph, HamiltonianSpec, Term};
use crate::mrf::{MrfEdge, MrfSpec};
use crate::pauli::PauliString;

fn random_letter(rng: &mut impl Rng) -> char {
    ['X', 'Y', 'Z'][rng.random_range(0..3)]
}

fn coeff(rng: &mut impl Rng) -> f64 {
    let v: f64 = rng.random_range(-1.0..1.0);
    // Round to a short decimal so the spec text round-trips exactly.
    (v * 1000.0).round() / 1000.0
}

fn op_from(n: usize, support: &[usize], rng: &mut impl Rng) -> PauliString {
    let text: Vec<String> = support.iter().map(|q| format!("{}{q}", random_letter(rng))).collect();
    PauliString::parse(n, &text.join(" ")).expect("valid operator")
}

/// Nearest-neighbour two-local terms with random letters on a path of `n` qubits.
pub fn random_chain(n: usize, beta: f64, seed: u64) -> HamiltonianSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms = (0..n - 1)
        .map(|i| Term { id: format!("t{i}"), op: op_from(n, &[i, i + 1], &mut rng), coeff: coeff(&mut rng) })
        .collect();
    HamiltonianSpec::new(n, terms, beta).expect("valid chain")
}

/// Random terms of support 1 to 3 whose dual graph is connected with maximum
/// degree exactly `degree`, found by rejection.
pub fn random_bounded_degree(n_qubits: usize, n_terms: usize, degree: usize, beta: f64, seed: u64) -> HamiltonianSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut terms: Vec<Term> = Vec::with_capacity(n_terms);
        let mut supports = std::collections::HashSet::new();
        while terms.len() < n_terms {
            let size = rng.random_range(1..=3usize.min(n_qubits));
            let mut support: Vec<usize> = rand::seq::index::sample(&mut rng, n_qubits, size).into_vec();
            support.sort_unstable();
            let op = op_from(n_qubits, &support, &mut rng);
            if supports.insert(op.clone()) {
                terms.push(Term { id: format!("t{}", terms.len()), op, coeff: coeff(&mut rng) });
            }
        }
        let h = HamiltonianSpec::new(n_qubits, terms, beta).expect("distinct terms");
        let g = build_dual_graph(&h);
        let all: Vec<usize> = (0..g.len()).collect();
        if g.max_degree == degree && g.is_connected_subset(&all) {
            return h;
        }
    }
}

/// `Σ J_i Z_i Z_{i+1} + Σ h_i X_i` on an open chain.
pub fn transverse_field_chain(couplings: &[f64], fields: &[f64], beta: f64) -> HamiltonianSpec {
    let n = fields.len();
    assert_eq!(couplings.len() + 1, n);
    let mut terms = Vec::new();
    for (i, &j) in couplings.iter().enumerate() {
        terms.push(Term {
            id: format!("zz{i}"),
            op: PauliString::parse(n, &format!("Z{i} Z{}", i + 1)).expect("valid"),
            coeff: j,
        });
    }
    for (i, &h) in fields.iter().enumerate() {
        terms.push(Term { id: format!("x{i}"), op: PauliString::parse(n, &format!("X{i}")).expect("valid"), coeff: h });
    }
    HamiltonianSpec::new(n, terms, beta).expect("valid chain")
}

/// The fixed 8-qubit transverse-field chain used by the end-to-end checks.
pub fn reference_chain(beta: f64) -> HamiltonianSpec {
    transverse_field_chain(
        &[0.5, -0.4, 0.3, 0.6, -0.2, 0.45, -0.35],
        &[0.25, -0.3, 0.4, 0.15, -0.5, 0.35, 0.2, -0.1],
        beta,
    )
}

/// Up to `max_terms` distinct random Paulis on up to `max_qubits` qubits.
pub fn random_small(max_qubits: usize, max_terms: usize, beta: f64, seed: u64) -> HamiltonianSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=max_qubits);
    let want = rng.random_range(1..=max_terms.min(4usize.pow(n as u32) - 1));
    let mut terms: Vec<Term> = Vec::new();
    while terms.len() < want {
        let size = rng.random_range(1..=n);
        let mut support: Vec<usize> = rand::seq::index::sample(&mut rng, n, size).into_vec();
        support.sort_unstable();
        let op = op_from(n, &support, &mut rng);
        if terms.iter().all(|t| t.op != op) {
            terms.push(Term { id: format!("t{}", terms.len()), op, coeff: coeff(&mut rng) });
        }
    }
    HamiltonianSpec::new(n, terms, beta).expect("distinct terms")
}

/// `d`-regular tree truncated at `depth`: the root has `d` children and every
/// other internal node `d - 1`. Node 0 is the root.
pub fn regular_tree(d: usize, depth: usize) -> DualGraph {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new()];
    let mut frontier = vec![0usize];
    for _ in 0..depth {
        let mut next = Vec::new();
        for &u in &frontier {
            let kids = if u == 0 { d } else { d - 1 };
            for _ in 0..kids {
                let v = adj.len();
                adj.push(vec![u]);
                adj[u].push(v);
                next.push(v);
            }
        }
        frontier = next;
    }
    DualGraph::from_adjacency(adj)
}

/// Erdős–Rényi graph on `m` nodes with edge probability `p`.
pub fn random_graph(m: usize, p: f64, seed: u64) -> DualGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adj = vec![Vec::new(); m];
    for a in 0..m {
        for b in a + 1..m {
            if rng.random_bool(p) {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
    }
    DualGraph::from_adjacency(adj)
}

/// Random hypergraph MRF with `n_edges` distinct edges of order 1 to `max_order`.
pub fn random_mrf(n: usize, n_edges: usize, max_order: usize, beta: f64, seed: u64) -> MrfSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<MrfEdge> = Vec::new();
    while edges.len() < n_edges {
        let size = rng.random_range(1..=max_order.min(n));
        let mut vertices: Vec<usize> = rand::seq::index::sample(&mut rng, n, size).into_vec();
        vertices.sort_unstable();
        if edges.iter().all(|e| e.vertices != vertices) {
            edges.push(MrfEdge { id: format!("e{}", edges.len()), vertices, coeff: coeff(&mut rng) });
        }
    }
    MrfSpec::new(n, edges, beta).expect("distinct edges")
}
