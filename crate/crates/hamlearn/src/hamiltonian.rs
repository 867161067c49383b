//! Hamiltonian model, the dual interaction graph and greedy coloring.

use std::collections::{HashSet, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

use crate::pauli::{PauliError, PauliString};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HamiltonianError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: {source}")]
    Pauli { line: usize, source: PauliError },
    #[error("duplicate term: `{0}` repeats an earlier operator")]
    DuplicateTerm(String),
    #[error("duplicate term id `{0}`")]
    DuplicateId(String),
    #[error("coefficient {value} of term `{id}` outside [-1, 1]")]
    CoefficientOutOfRange { id: String, value: f64 },
    #[error("term `{0}` is the identity")]
    IdentityTerm(String),
    #[error("term `{id}` acts on {got} qubits, expected {expected}")]
    WrongSize { id: String, got: usize, expected: usize },
    #[error("inverse temperature must be finite and non-negative, got {0}")]
    BadBeta(f64),
    #[error("missing `{0}` line")]
    Missing(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub id: String,
    pub op: PauliString,
    pub coeff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    pub n_qubits: usize,
    pub terms: Vec<Term>,
    pub beta: f64,
}

impl HamiltonianSpec {
    pub fn new(n_qubits: usize, terms: Vec<Term>, beta: f64) -> Result<Self, HamiltonianError> {
        if !beta.is_finite() || beta < 0.0 {
            return Err(HamiltonianError::BadBeta(beta));
        }
        let mut ids = HashSet::new();
        let mut ops = HashSet::new();
        for t in &terms {
            if t.op.n_qubits() != n_qubits {
                return Err(HamiltonianError::WrongSize { id: t.id.clone(), got: t.op.n_qubits(), expected: n_qubits });
            }
            if t.op.is_identity() {
                return Err(HamiltonianError::IdentityTerm(t.id.clone()));
            }
            if !(t.coeff.abs() <= 1.0) {
                return Err(HamiltonianError::CoefficientOutOfRange { id: t.id.clone(), value: t.coeff });
            }
            if !ids.insert(t.id.clone()) {
                return Err(HamiltonianError::DuplicateId(t.id.clone()));
            }
            if !ops.insert(t.op.clone()) {
                return Err(HamiltonianError::DuplicateTerm(t.id.clone()));
            }
        }
        Ok(HamiltonianSpec { n_qubits, terms, beta })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.coeff).collect()
    }

    pub fn operators(&self) -> Vec<PauliString> {
        self.terms.iter().map(|t| t.op.clone()).collect()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.terms.iter().position(|t| t.id == id)
    }

    /// Same operators and β with new coefficients.
    pub fn with_coefficients(&self, coeffs: &[f64]) -> Result<Self, HamiltonianError> {
        assert_eq!(coeffs.len(), self.terms.len());
        let terms = self
            .terms
            .iter()
            .zip(coeffs)
            .map(|(t, &c)| Term { id: t.id.clone(), op: t.op.clone(), coeff: c })
            .collect();
        HamiltonianSpec::new(self.n_qubits, terms, self.beta)
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self, HamiltonianError> {
        HamiltonianSpec::new(self.n_qubits, self.terms.clone(), beta)
    }

    /// Serializes into the line format read by [`parse_hamiltonian`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "qubits {}", self.n_qubits);
        let _ = writeln!(s, "beta {}", self.beta);
        for t in &self.terms {
            let _ = writeln!(s, "term {} {} {}", t.id, t.coeff, t.op);
        }
        s
    }
}

/// Parses `qubits N`, `beta B` and `term <id> <coeff> <tokens>` lines; `#` starts a comment.
pub fn parse_hamiltonian(text: &str) -> Result<HamiltonianSpec, HamiltonianError> {
    let mut n_qubits: Option<usize> = None;
    let mut beta: Option<f64> = None;
    let mut raw: Vec<(usize, String, f64, String)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let syntax = |msg: &str| HamiltonianError::Syntax { line: lineno, msg: msg.to_string() };
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("qubits") => {
                let v = parts.next().ok_or_else(|| syntax("`qubits` needs a count"))?;
                let n = v.parse().map_err(|_| syntax("qubit count is not an integer"))?;
                if parts.next().is_some() {
                    return Err(syntax("trailing tokens after qubit count"));
                }
                if n_qubits.replace(n).is_some() {
                    return Err(syntax("`qubits` given twice"));
                }
            }
            Some("beta") => {
                let v = parts.next().ok_or_else(|| syntax("`beta` needs a value"))?;
                let b: f64 = v.parse().map_err(|_| syntax("beta is not a number"))?;
                if parts.next().is_some() {
                    return Err(syntax("trailing tokens after beta"));
                }
                if beta.replace(b).is_some() {
                    return Err(syntax("`beta` given twice"));
                }
            }
            Some("term") => {
                let id = parts.next().ok_or_else(|| syntax("`term` needs an id"))?;
                let c = parts.next().ok_or_else(|| syntax("`term` needs a coefficient"))?;
                let coeff: f64 = c.parse().map_err(|_| syntax("coefficient is not a number"))?;
                let rest: Vec<&str> = parts.collect();
                if rest.is_empty() {
                    return Err(syntax("`term` needs Pauli tokens"));
                }
                raw.push((lineno, id.to_string(), coeff, rest.join(" ")));
            }
            Some(other) => return Err(syntax(&format!("unknown directive `{other}`"))),
            None => unreachable!(),
        }
    }
    let n = n_qubits.ok_or(HamiltonianError::Missing("qubits"))?;
    let beta = beta.ok_or(HamiltonianError::Missing("beta"))?;
    let mut terms = Vec::with_capacity(raw.len());
    for (line, id, coeff, tokens) in raw {
        let op = PauliString::parse(n, &tokens).map_err(|source| HamiltonianError::Pauli { line, source })?;
        terms.push(Term { id, op, coeff });
    }
    HamiltonianSpec::new(n, terms, beta)
}

/// Terms as nodes, with an edge when two supports overlap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualGraph {
    pub adjacency: Vec<Vec<usize>>,
    pub max_degree: usize,
    pub max_support: usize,
}

impl DualGraph {
    /// Builds a graph from explicit neighbor lists (symmetrized, sorted).
    pub fn from_adjacency(mut adjacency: Vec<Vec<usize>>) -> Self {
        let n = adjacency.len();
        for a in 0..n {
            let nbrs = adjacency[a].clone();
            for b in nbrs {
                if !adjacency[b].contains(&a) {
                    adjacency[b].push(a);
                }
            }
        }
        for (a, list) in adjacency.iter_mut().enumerate() {
            list.retain(|&b| b != a);
            list.sort_unstable();
            list.dedup();
        }
        let max_degree = adjacency.iter().map(Vec::len).max().unwrap_or(0);
        DualGraph { adjacency, max_degree, max_support: 0 }
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn neighbors(&self, a: usize) -> &[usize] {
        &self.adjacency[a]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    /// Breadth-first distances from `a`; unreachable nodes get `usize::MAX`.
    pub fn distances_from(&self, a: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.len()];
        let mut queue = VecDeque::from([a]);
        dist[a] = 0;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// True if `nodes` induce a connected subgraph.
    pub fn is_connected_subset(&self, nodes: &[usize]) -> bool {
        let Some(&start) = nodes.first() else {
            return false;
        };
        let inside: HashSet<usize> = nodes.iter().copied().collect();
        let mut seen = HashSet::from([start]);
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for &v in &self.adjacency[u] {
                if inside.contains(&v) && seen.insert(v) {
                    stack.push(v);
                }
            }
        }
        seen.len() == inside.len()
    }
}

/// Per-qubit term lists merged per term, then sorted and deduplicated.
pub fn build_dual_graph(h: &HamiltonianSpec) -> DualGraph {
    let supports: Vec<Vec<usize>> = h.terms.iter().map(|t| t.op.support()).collect();
    build_dual_graph_from_supports(h.n_qubits, &supports)
}

pub fn build_dual_graph_from_supports(n_qubits: usize, supports: &[Vec<usize>]) -> DualGraph {
    let mut by_qubit: Vec<Vec<usize>> = vec![Vec::new(); n_qubits];
    for (a, s) in supports.iter().enumerate() {
        for &q in s {
            by_qubit[q].push(a);
        }
    }
    let adjacency: Vec<Vec<usize>> = supports
        .iter()
        .enumerate()
        .map(|(a, s)| {
            let mut list: Vec<usize> = s.iter().flat_map(|&q| by_qubit[q].iter().copied()).collect();
            list.sort_unstable();
            list.dedup();
            list.retain(|&b| b != a);
            list
        })
        .collect();
    let max_degree = adjacency.iter().map(Vec::len).max().unwrap_or(0);
    let max_support = supports.iter().map(Vec::len).max().unwrap_or(0);
    DualGraph { adjacency, max_degree, max_support }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coloring {
    pub colors: Vec<usize>,
    pub color_count: usize,
}

impl Coloring {
    /// Node indices grouped by color.
    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.color_count];
        for (a, &c) in self.colors.iter().enumerate() {
            out[c].push(a);
        }
        out
    }
}

/// First-fit coloring in node order.
pub fn greedy_coloring(g: &DualGraph) -> Coloring {
    let mut colors = vec![usize::MAX; g.len()];
    let mut color_count = 0;
    for a in 0..g.len() {
        let mut used = vec![false; g.neighbors(a).len() + 1];
        for &b in g.neighbors(a) {
            if colors[b] < used.len() {
                used[colors[b]] = true;
            }
        }
        let c = used.iter().position(|&u| !u).unwrap();
        colors[a] = c;
        color_count = color_count.max(c + 1);
    }
    Coloring { colors, color_count }
}
