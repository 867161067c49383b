//! Connected clusters (multisets of terms) rooted at a node of the dual graph.

use num_bigint::BigUint;
use num_integer::binomial;
use num_traits::One;
use thiserror::Error;

use crate::hamiltonian::DualGraph;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClusterError {
    #[error("unknown root node {0}")]
    UnknownRoot(usize),
    #[error("cluster weight must be at least 1")]
    ZeroWeight,
}

/// Multiset of term indices, stored as `(index, multiplicity)` sorted by index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cluster {
    parts: Vec<(usize, u32)>,
}

impl Cluster {
    /// Merges repeated indices and drops zero multiplicities.
    pub fn new(parts: impl IntoIterator<Item = (usize, u32)>) -> Self {
        let mut v: Vec<(usize, u32)> = parts.into_iter().filter(|p| p.1 > 0).collect();
        v.sort_unstable();
        let mut merged: Vec<(usize, u32)> = Vec::with_capacity(v.len());
        for (a, m) in v {
            match merged.last_mut() {
                Some(last) if last.0 == a => last.1 += m,
                _ => merged.push((a, m)),
            }
        }
        Cluster { parts: merged }
    }

    pub fn parts(&self) -> &[(usize, u32)] {
        &self.parts
    }

    pub fn weight(&self) -> u32 {
        self.parts.iter().map(|p| p.1).sum()
    }

    pub fn support(&self) -> Vec<usize> {
        self.parts.iter().map(|p| p.0).collect()
    }

    pub fn multiplicity(&self, a: usize) -> u32 {
        self.parts.binary_search_by_key(&a, |p| p.0).map(|i| self.parts[i].1).unwrap_or(0)
    }

    /// Π μ(a)!
    pub fn factorial(&self) -> BigUint {
        self.parts
            .iter()
            .map(|&(_, m)| (1..=m).fold(BigUint::one(), |acc, k| acc * k))
            .fold(BigUint::one(), |acc, f| acc * f)
    }

    /// The cluster with one copy of `a` removed.
    pub fn without_one(&self, a: usize) -> Cluster {
        Cluster::new(self.parts.iter().map(|&(b, m)| (b, if b == a { m - 1 } else { m })))
    }

    pub fn is_connected(&self, g: &DualGraph) -> bool {
        g.is_connected_subset(&self.support())
    }

    /// Renders as `id^m` tokens, e.g. `a^2 b`.
    pub fn format_with(&self, ids: &[String]) -> String {
        self.parts
            .iter()
            .map(|&(a, m)| if m == 1 { ids[a].clone() } else { format!("{}^{}", ids[a], m) })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// All connected clusters of total weight `m` whose support contains `root`.
///
/// Clusters are generated layer by layer from a breadth-first decomposition:
/// layer 0 is a positive multiple of the root, and each later layer is a
/// nonempty multiset drawn from the unseen neighbors of the previous layer.
/// Every connected cluster has exactly one such decomposition.
pub fn enumerate_clusters(g: &DualGraph, root: usize, m: u32) -> Result<Vec<Cluster>, ClusterError> {
    if root >= g.len() {
        return Err(ClusterError::UnknownRoot(root));
    }
    if m == 0 {
        return Err(ClusterError::ZeroWeight);
    }
    let mut seen = vec![false; g.len()];
    seen[root] = true;
    let mut out = Vec::new();
    let mut acc = Vec::new();
    tails(g, &[root], m, &mut seen, &mut acc, &mut out);
    Ok(out)
}

fn tails(
    g: &DualGraph,
    cands: &[usize],
    remaining: u32,
    seen: &mut [bool],
    acc: &mut Vec<(usize, u32)>,
    out: &mut Vec<Cluster>,
) {
    let mut mult = vec![0u32; cands.len()];
    layer(g, cands, 0, remaining, 0, &mut mult, seen, acc, out);
}

#[allow(clippy::too_many_arguments)]
fn layer(
    g: &DualGraph,
    cands: &[usize],
    pos: usize,
    remaining: u32,
    used: u32,
    mult: &mut Vec<u32>,
    seen: &mut [bool],
    acc: &mut Vec<(usize, u32)>,
    out: &mut Vec<Cluster>,
) {
    if pos == cands.len() {
        if used == 0 {
            return;
        }
        let base = acc.len();
        for (i, &a) in cands.iter().enumerate() {
            if mult[i] > 0 {
                acc.push((a, mult[i]));
            }
        }
        if used == remaining {
            out.push(Cluster::new(acc.iter().copied()));
        } else {
            let mut next: Vec<usize> = Vec::new();
            for (i, &a) in cands.iter().enumerate() {
                if mult[i] > 0 {
                    next.extend(g.neighbors(a).iter().copied().filter(|&b| !seen[b]));
                }
            }
            next.sort_unstable();
            next.dedup();
            if !next.is_empty() {
                for &b in &next {
                    seen[b] = true;
                }
                tails(g, &next, remaining - used, seen, acc, out);
                for &b in &next {
                    seen[b] = false;
                }
            }
        }
        acc.truncate(base);
        return;
    }
    for k in 0..=(remaining - used) {
        mult[pos] = k;
        layer(g, cands, pos + 1, remaining, used + k, mult, seen, acc, out);
    }
    mult[pos] = 0;
}

/// Connected subtrees with `n` nodes containing the root of the infinite
/// `d`-regular tree: binom(n(d-1)+1, n-1) d / (n(d-1)+1).
pub fn rooted_subtree_count(d: u64, n: u64) -> BigUint {
    assert!(d >= 1 && n >= 1);
    let top = n * (d - 1) + 1;
    let num = binomial(BigUint::from(top), BigUint::from(n - 1)) * BigUint::from(d);
    let den = BigUint::from(top);
    debug_assert!((&num % &den) == BigUint::from(0u32));
    num / den
}

/// Weight-`w` connected clusters rooted in the infinite `d`-regular tree:
/// Σ_k D_k binom(w-1, k-1).
pub fn tree_cluster_count(d: u64, w: u64) -> BigUint {
    assert!(d >= 1 && w >= 1);
    (1..=w).map(|k| rooted_subtree_count(d, k) * binomial(BigUint::from(w - 1), BigUint::from(k - 1))).sum()
}

/// The bound e d (1 + e(d-1))^(w-1) on the cluster count.
pub fn cluster_count_bound(d: u64, w: u64) -> f64 {
    let e = std::f64::consts::E;
    e * d as f64 * (1.0 + e * (d as f64 - 1.0)).powi(w as i32 - 1)
}
