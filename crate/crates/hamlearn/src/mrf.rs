//! Parameter learning for binary Markov random fields `p(z) ∝ exp(-β Σ λ_S z^S)`
//! from empirical conditionals.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::qsim::{cumulative, sample_index, shot_rng};

pub const ENUMERATION_CAP: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MrfError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("{0} vertices exceeds the enumeration cap")]
    CapExceeded(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MrfEdge {
    pub id: String,
    pub vertices: Vec<usize>,
    pub coeff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MrfSpec {
    pub n_vertices: usize,
    pub edges: Vec<MrfEdge>,
    pub beta: f64,
}

impl MrfSpec {
    pub fn new(n_vertices: usize, mut edges: Vec<MrfEdge>, beta: f64) -> Result<Self, MrfError> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(MrfError::Invalid(format!("beta = {beta}")));
        }
        let mut ids = HashSet::new();
        let mut sets = HashSet::new();
        for e in edges.iter_mut() {
            e.vertices.sort_unstable();
            if e.vertices.is_empty() || e.vertices.windows(2).any(|w| w[0] == w[1]) {
                return Err(MrfError::Invalid(format!("edge {} needs distinct vertices", e.id)));
            }
            if e.vertices.iter().any(|&v| v >= n_vertices) {
                return Err(MrfError::Invalid(format!("edge {} has a vertex out of range", e.id)));
            }
            if !(-1.0..=1.0).contains(&e.coeff) {
                return Err(MrfError::Invalid(format!("edge {} coefficient {} outside [-1, 1]", e.id, e.coeff)));
            }
            if !ids.insert(e.id.clone()) || !sets.insert(e.vertices.clone()) {
                return Err(MrfError::Invalid(format!("duplicate edge {}", e.id)));
            }
        }
        Ok(MrfSpec { n_vertices, edges, beta })
    }

    /// Edges containing `v`.
    pub fn incident(&self, v: usize) -> Vec<usize> {
        (0..self.edges.len()).filter(|&i| self.edges[i].vertices.contains(&v)).collect()
    }

    /// `d = max_v |E_v|`.
    pub fn degree(&self) -> usize {
        (0..self.n_vertices).map(|v| self.incident(v).len()).max().unwrap_or(0)
    }

    /// `L = max |S|`.
    pub fn order(&self) -> usize {
        self.edges.iter().map(|e| e.vertices.len()).max().unwrap_or(0)
    }

    /// Vertices sharing an edge with `v`, sorted.
    pub fn neighborhood(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> =
            self.incident(v).into_iter().flat_map(|i| self.edges[i].vertices.clone()).filter(|&u| u != v).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn energy(&self, z: &[i8]) -> f64 {
        self.edges.iter().map(|e| e.coeff * e.vertices.iter().map(|&v| z[v] as f64).product::<f64>()).sum()
    }

    pub fn with_coefficients(&self, coeffs: &[f64]) -> Result<Self, MrfError> {
        let edges = self.edges.iter().zip(coeffs).map(|(e, &c)| MrfEdge { coeff: c, ..e.clone() }).collect();
        MrfSpec::new(self.n_vertices, edges, self.beta)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("vertices {}\nbeta {}\n", self.n_vertices, self.beta);
        for e in &self.edges {
            let vs: Vec<String> = e.vertices.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "edge {} {} {}", e.id, e.coeff, vs.join(" "));
        }
        s
    }
}

pub fn parse_mrf(text: &str) -> Result<MrfSpec, MrfError> {
    let mut n = None;
    let mut beta = None;
    let mut edges = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let err = |msg: &str| MrfError::Syntax { line, msg: msg.into() };
        let toks: Vec<&str> = body.split_whitespace().collect();
        match toks[0] {
            "vertices" if toks.len() == 2 => n = Some(toks[1].parse::<usize>().map_err(|_| err("bad vertex count"))?),
            "beta" if toks.len() == 2 => beta = Some(toks[1].parse::<f64>().map_err(|_| err("bad beta"))?),
            "edge" if toks.len() >= 4 => {
                let coeff = toks[2].parse::<f64>().map_err(|_| err("bad coefficient"))?;
                let vertices = toks[3..]
                    .iter()
                    .map(|t| t.parse::<usize>().map_err(|_| err("bad vertex")))
                    .collect::<Result<Vec<_>, _>>()?;
                edges.push(MrfEdge { id: toks[1].to_string(), vertices, coeff });
            }
            _ => return Err(err("expected `vertices`, `beta` or `edge`")),
        }
    }
    let n = n.ok_or(MrfError::Syntax { line: 0, msg: "missing `vertices`".into() })?;
    let beta = beta.ok_or(MrfError::Syntax { line: 0, msg: "missing `beta`".into() })?;
    MrfSpec::new(n, edges, beta)
}

/// Rows of ±1 spins.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub n_vertices: usize,
    pub samples: Vec<Vec<i8>>,
    pub seed: Option<u64>,
}

impl SampleBatch {
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.samples.len() * self.n_vertices * 3);
        for row in &self.samples {
            let cells: Vec<&str> = row.iter().map(|&x| if x > 0 { "1" } else { "-1" }).collect();
            s.push_str(&cells.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

pub fn parse_samples(text: &str, n_vertices: usize) -> Result<SampleBatch, MrfError> {
    let mut samples = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let err = |msg: &str| MrfError::Syntax { line: i + 1, msg: msg.into() };
        let row = body
            .split_whitespace()
            .map(|t| match t {
                "1" | "+1" => Ok(1i8),
                "-1" => Ok(-1i8),
                _ => Err(err("entries must be +1 or -1")),
            })
            .collect::<Result<Vec<i8>, _>>()?;
        if row.len() != n_vertices {
            return Err(err("wrong number of entries"));
        }
        samples.push(row);
    }
    Ok(SampleBatch { n_vertices, samples, seed: None })
}

/// Spin configuration for basis index `idx`: vertex `v` is bit `n-1-v`, bit 1 is −1.
pub fn spins_of(idx: usize, n: usize) -> Vec<i8> {
    (0..n).map(|v| if idx >> (n - 1 - v) & 1 == 1 { -1 } else { 1 }).collect()
}

/// Exact probabilities of all `2^N` configurations.
pub fn enumerate_distribution(spec: &MrfSpec) -> Result<Vec<f64>, MrfError> {
    let n = spec.n_vertices;
    if n > ENUMERATION_CAP {
        return Err(MrfError::CapExceeded(n));
    }
    let logw: Vec<f64> = (0..1usize << n).map(|i| -spec.beta * spec.energy(&spins_of(i, n))).collect();
    let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / z).collect())
}

/// Exact i.i.d. samples by inverse-CDF over the enumerated distribution.
pub fn sample_mrf(spec: &MrfSpec, count: usize, seed: u64) -> Result<SampleBatch, MrfError> {
    let cdf = cumulative(&enumerate_distribution(spec)?);
    let n = spec.n_vertices;
    let samples = (0..count as u64)
        .into_par_iter()
        .map(|i| spins_of(sample_index(&cdf, shot_rng(seed, 0, i).random::<f64>()), n))
        .collect();
    Ok(SampleBatch { n_vertices: n, samples, seed: Some(seed) })
}

/// For every other edge `T ∋ v`: the lowest vertex of `T∖S` joins `N_out`, or
/// if `T ⊂ S`, the lowest vertex of `S∖T` joins `N_in`.
pub fn build_in_out_sets(spec: &MrfSpec, s: usize, v: usize) -> (Vec<usize>, Vec<usize>) {
    let sv = &spec.edges[s].vertices;
    assert!(sv.contains(&v), "vertex must belong to the edge");
    let mut n_in = Vec::new();
    let mut n_out = Vec::new();
    for t in spec.incident(v) {
        if t == s {
            continue;
        }
        let tv = &spec.edges[t].vertices;
        match tv.iter().find(|u| !sv.contains(u)) {
            Some(&u) => n_out.push(u),
            None => n_in.push(*sv.iter().find(|u| !tv.contains(u)).expect("distinct edges")),
        }
    }
    n_in.sort_unstable();
    n_in.dedup();
    n_out.sort_unstable();
    n_out.dedup();
    (n_in, n_out)
}

/// `log(p/(1-p))`
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// The conditioning events for one edge: the slice coordinates, the pinned
/// neighbors and the chosen vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    pub edge: usize,
    pub vertex: usize,
    pub n_in: Vec<usize>,
    pub coords: Vec<usize>,
    pub pinned: Vec<usize>,
}

impl Slice {
    pub fn new(spec: &MrfSpec, edge: usize) -> Self {
        let vertex = spec.edges[edge].vertices[0];
        let (n_in, n_out) = build_in_out_sets(spec, edge, vertex);
        let mut coords: Vec<usize> = n_in.iter().chain(&n_out).copied().collect();
        coords.sort_unstable();
        let pinned = spec.neighborhood(vertex).into_iter().filter(|u| !coords.contains(u)).collect();
        Slice { edge, vertex, n_in, coords, pinned }
    }

    /// Spin of slice coordinate `j` in configuration `c` (bit j set means −1).
    fn spin(c: usize, j: usize) -> i8 {
        if c >> j & 1 == 1 {
            -1
        } else {
            1
        }
    }

    /// Index of the slice configuration matched by `z`, if the pinned coordinates are +1.
    pub fn classify(&self, z: &[i8]) -> Option<usize> {
        if self.pinned.iter().any(|&u| z[u] != 1) {
            return None;
        }
        Some(self.coords.iter().enumerate().fold(0, |c, (j, &u)| if z[u] < 0 { c | 1 << j } else { c }))
    }

    pub fn configurations(&self) -> usize {
        1 << self.coords.len()
    }

    /// `z^{N_in}` for configuration `c`.
    pub fn in_sign(&self, c: usize) -> f64 {
        self.coords
            .iter()
            .enumerate()
            .filter(|(_, u)| self.n_in.contains(u))
            .map(|(j, _)| Self::spin(c, j) as f64)
            .product()
    }

    /// Full assignment of the conditioning event for configuration `c`.
    pub fn assignment(&self, c: usize) -> Vec<(usize, i8)> {
        let mut out: Vec<(usize, i8)> = self.coords.iter().enumerate().map(|(j, &u)| (u, Self::spin(c, j))).collect();
        out.extend(self.pinned.iter().map(|&u| (u, 1)));
        out
    }

    /// `-(1/(2β)) · mean_c z^{N_in} q_c` for logits `q`.
    pub fn combine(&self, logits: &[f64], beta: f64) -> f64 {
        let n = self.configurations() as f64;
        let avg: f64 = logits.iter().enumerate().map(|(c, q)| self.in_sign(c) * q).sum::<f64>() / n;
        LOGIT_SIGN * avg / (2.0 * beta)
    }
}

/// The conditional of `X_v = +1` is `σ(-2β Σ_{T∋v} λ_T z^{T∖v})`.
pub const LOGIT_SIGN: f64 = -1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MrfEstimate {
    pub id: String,
    /// `None` when some conditioning event has no samples.
    pub value: Option<f64>,
    pub clipped: bool,
}

/// Estimates from exact conditionals computed by enumeration.
pub fn learn_mrf_exact(spec: &MrfSpec) -> Result<Vec<MrfEstimate>, MrfError> {
    let p = enumerate_distribution(spec)?;
    let n = spec.n_vertices;
    let states: Vec<Vec<i8>> = (0..1usize << n).map(|i| spins_of(i, n)).collect();
    Ok((0..spec.edges.len())
        .map(|e| {
            let sl = Slice::new(spec, e);
            let mut joint = vec![0.0; sl.configurations()];
            let mut marg = vec![0.0; sl.configurations()];
            for (z, &w) in states.iter().zip(&p) {
                if let Some(c) = sl.classify(z) {
                    marg[c] += w;
                    if z[sl.vertex] == 1 {
                        joint[c] += w;
                    }
                }
            }
            let q: Vec<f64> = joint.iter().zip(&marg).map(|(j, m)| logit(j / m)).collect();
            MrfEstimate { id: spec.edges[e].id.clone(), value: Some(sl.combine(&q, spec.beta)), clipped: false }
        })
        .collect())
}

/// Estimates from empirical conditionals of `samples`. Only the structure of
/// `spec` and `beta` are used.
pub fn learn_mrf(spec: &MrfSpec, samples: &SampleBatch, beta: f64) -> Result<Vec<MrfEstimate>, MrfError> {
    if samples.is_empty() {
        return Err(MrfError::Invalid("no samples".into()));
    }
    if !(beta > 0.0) {
        return Err(MrfError::Invalid(format!("beta = {beta}")));
    }
    let total = samples.len() as f64;
    let lo = 1.0 / (2.0 * total);
    Ok((0..spec.edges.len())
        .into_par_iter()
        .map(|e| {
            let sl = Slice::new(spec, e);
            let mut hits = vec![0u64; sl.configurations()];
            let mut counts = vec![0u64; sl.configurations()];
            for z in &samples.samples {
                if let Some(c) = sl.classify(z) {
                    counts[c] += 1;
                    if z[sl.vertex] == 1 {
                        hits[c] += 1;
                    }
                }
            }
            let id = spec.edges[e].id.clone();
            if counts.contains(&0) {
                return MrfEstimate { id, value: None, clipped: false };
            }
            let mut clipped = false;
            let q: Vec<f64> = hits
                .iter()
                .zip(&counts)
                .map(|(&h, &n)| {
                    let p = h as f64 / n as f64;
                    let pc = p.clamp(lo, 1.0 - lo);
                    clipped |= pc != p;
                    logit(pc)
                })
                .collect();
            MrfEstimate { id, value: Some(sl.combine(&q, beta)), clipped }
        })
        .collect())
}

/// `⌈C exp(8βLd² + 2Ld)/(β²ε²) · ln(N/δ)⌉`
pub fn mrf_sample_size(beta: f64, epsilon: f64, delta: f64, d: usize, l: usize, n: usize, c: f64) -> f64 {
    let (d, l) = (d as f64, l as f64);
    (c * (8.0 * beta * l * d * d + 2.0 * l * d).exp() / (beta * beta * epsilon * epsilon) * (n as f64 / delta).ln())
        .ceil()
}

pub fn estimates_to_text(est: &[MrfEstimate]) -> String {
    let mut s = String::new();
    for e in est {
        match e.value {
            Some(v) => {
                let _ = writeln!(s, "{}\t{:.17e}{}", e.id, v, if e.clipped { "\tclipped" } else { "" });
            }
            None => {
                let _ = writeln!(s, "{}\tundefined\tinsufficient-data", e.id);
            }
        }
    }
    s
}

/// 8-vertex style open Ising chain with the given couplings.
pub fn ising_chain(couplings: &[f64], beta: f64) -> MrfSpec {
    let edges = couplings
        .iter()
        .enumerate()
        .map(|(i, &c)| MrfEdge { id: format!("e{i}"), vertices: vec![i, i + 1], coeff: c })
        .collect();
    MrfSpec::new(couplings.len() + 1, edges, beta).expect("valid chain")
}
