//! Exact cluster derivatives of the log-partition function.
//!
//! For a cluster `W` of weight `m+1` the derivative `D_W log Tr exp(-Σ x_a E_a) / W!`
//! at `x = 0` is obtained from the single-variable functions
//! `g(α; z) = Tr exp(-α Σ z_j E_j) / 2^r` over the box `0 ≤ z ≤ μ`, a finite
//! difference in `z`, and the recursion `h_0 = g'`, `h_t = h_{t-1}' g - t h_{t-1} g'`.
//! Everything is carried in exact integers and reduced once at the end.

use std::collections::HashMap;
use std::sync::RwLock;

use num_bigint::BigInt;
use num_integer::{binomial, Integer};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::clusters::Cluster;
use crate::hamiltonian::HamiltonianSpec;
use crate::pauli::{faithful_representation, FaithfulRep, PauliString};

/// `i^phase` times the phase-free string with masks `(x, z)`, on at most 64 qubits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct Compact {
    phase: u8,
    x: u64,
    z: u64,
}

impl Compact {
    fn mul(self, o: Compact) -> Compact {
        let x = self.x ^ o.x;
        let z = self.z ^ o.z;
        let e = (self.x & self.z).count_ones() as i64
            + (o.x & o.z).count_ones() as i64
            + 2 * (self.z & o.x).count_ones() as i64
            - (x & z).count_ones() as i64;
        let phase = ((self.phase as i64 + o.phase as i64 + e).rem_euclid(4)) as u8;
        Compact { phase, x, z }
    }
}

fn compact_images(rep: &FaithfulRep) -> Vec<Compact> {
    assert!(rep.n_qubits <= 64, "faithful register larger than 64 qubits");
    rep.images
        .iter()
        .map(|p| {
            let (x, z) = p.op.masks();
            Compact { phase: p.phase.exponent(), x, z }
        })
        .collect()
}

/// Gaussian integer times `i^phase`.
fn rotate(c: (i128, i128), phase: u8) -> (i128, i128) {
    match phase % 4 {
        0 => c,
        1 => (-c.1, c.0),
        2 => (-c.0, -c.1),
        _ => (c.1, -c.0),
    }
}

const NU_BITS: u32 = 5;

fn nu_key_add(key: u128, j: usize) -> u128 {
    key + (1u128 << (NU_BITS as usize * j))
}

fn nu_decode(key: u128, n: usize) -> Vec<u8> {
    let mask = (1u128 << NU_BITS) - 1;
    (0..n).map(|j| ((key >> (NU_BITS as usize * j)) & mask) as u8).collect()
}

/// Sums of normalized traces over all words with a given letter count.
///
/// Level `k` lists every count vector `ν` with `|ν| = k` whose words multiply
/// to a multiple of the identity, together with `w_ν = Σ_words Tr(word)/2^r`.
/// Then `Tr((Σ z_j E_j)^k)/2^r = Σ_ν w_ν z^ν`.
#[derive(Debug, Clone)]
pub struct WordTraceTable {
    n: usize,
    levels: Vec<Vec<(Vec<u8>, i128)>>,
}

impl WordTraceTable {
    pub fn new(rep: &FaithfulRep, order: usize) -> Self {
        Self::build(rep, order, None)
    }

    /// Only count vectors with `ν ≤ bound` componentwise. Products of such
    /// monomials still cover every way of reaching `z^bound`.
    pub fn bounded(rep: &FaithfulRep, bound: &[u32]) -> Self {
        let order = bound.iter().map(|&b| b as usize).sum();
        Self::build(rep, order, Some(bound))
    }

    fn build(rep: &FaithfulRep, order: usize, bound: Option<&[u32]>) -> Self {
        let imgs = compact_images(rep);
        let n = imgs.len();
        assert!(
            n * NU_BITS as usize <= 128 && order < (1 << NU_BITS),
            "word-trace table supports at most 25 operators and order 31"
        );
        let mask = (1u128 << NU_BITS) - 1;
        let mut levels = Vec::with_capacity(order + 1);
        levels.push(vec![(vec![0u8; n], 1i128)]);
        // Every word with count ν multiplies to c_ν times one fixed phase-free string.
        let mut cur: HashMap<u128, ((i128, i128), u64, u64)> = HashMap::from([(0u128, ((1, 0), 0, 0))]);
        for _ in 0..order {
            let mut next: HashMap<u128, ((i128, i128), u64, u64)> = HashMap::with_capacity(cur.len() * n);
            for (&key, &(c, x, z)) in &cur {
                for (j, img) in imgs.iter().enumerate() {
                    if let Some(b) = bound {
                        if (key >> (NU_BITS as usize * j)) & mask >= b[j] as u128 {
                            continue;
                        }
                    }
                    let prod = Compact { phase: 0, x, z }.mul(*img);
                    let add = rotate(c, prod.phase);
                    let slot = next.entry(nu_key_add(key, j)).or_insert(((0, 0), prod.x, prod.z));
                    debug_assert_eq!((slot.1, slot.2), (prod.x, prod.z));
                    slot.0 .0 = slot.0 .0.checked_add(add.0).expect("word-trace overflow");
                    slot.0 .1 = slot.0 .1.checked_add(add.1).expect("word-trace overflow");
                }
            }
            let mut level: Vec<(Vec<u8>, i128)> = next
                .iter()
                .filter(|(_, &(c, x, z))| x == 0 && z == 0 && c != (0, 0))
                .map(|(&key, &(c, _, _))| {
                    // Sums over all orderings of Hermitian letters are Hermitian.
                    assert_eq!(c.1, 0, "imaginary word-trace sum");
                    (nu_decode(key, n), c.0)
                })
                .collect();
            level.sort();
            levels.push(level);
            cur = next;
        }
        WordTraceTable { n, levels }
    }

    pub fn order(&self) -> usize {
        self.levels.len() - 1
    }

    /// `Tr(P^k)/2^r` for `k = 0..=order` with `P = Σ z_j E_j`.
    pub fn traces(&self, z: &[u32]) -> Vec<i128> {
        assert_eq!(z.len(), self.n);
        let order = self.order();
        let pows: Vec<Vec<i128>> = z
            .iter()
            .map(|&zj| {
                let mut v = Vec::with_capacity(order + 1);
                let mut p: i128 = 1;
                for _ in 0..=order {
                    v.push(p);
                    p = p.saturating_mul(zj as i128);
                }
                v
            })
            .collect();
        self.levels
            .iter()
            .map(|level| {
                let mut t: i128 = 0;
                for (nu, w) in level {
                    let mut term = *w;
                    for (j, &e) in nu.iter().enumerate() {
                        if e > 0 {
                            term = term.checked_mul(pows[j][e as usize]).expect("trace overflow");
                            if term == 0 {
                                break;
                            }
                        }
                    }
                    t = t.checked_add(term).expect("trace overflow");
                }
                t
            })
            .collect()
    }
}

fn factorial(k: usize) -> BigInt {
    (1..=k).fold(BigInt::one(), |acc, i| acc * i)
}

/// `[α^k] g(α; z) = (-1)^k / k! · Tr(P^k)/2^r` for `k ≤ order`.
pub fn g_coefficients(rep: &FaithfulRep, z: &[u32], order: usize) -> Vec<BigRational> {
    let table = WordTraceTable::new(rep, order);
    table
        .traces(z)
        .into_iter()
        .enumerate()
        .map(|(k, t)| {
            let sign = if k % 2 == 0 { BigInt::one() } else { -BigInt::one() };
            BigRational::new(sign * BigInt::from(t), factorial(k))
        })
        .collect()
}

/// `[α^0] h_m` from integer coefficients `gs = D·g` (so `gs[0] = D`); the result is scaled by `D^{m+1}`.
pub fn h_constant_term_scaled(gs: &[BigInt], m: usize) -> BigInt {
    assert!(gs.len() >= m + 2, "need g through order m+1");
    let mut h: Vec<BigInt> = (0..=m).map(|k| &gs[k + 1] * BigInt::from(k + 1)).collect();
    for t in 1..=m {
        let tb = BigInt::from(t);
        let next: Vec<BigInt> = (0..=m - t)
            .map(|k| {
                let mut acc = BigInt::zero();
                for j in 0..=k {
                    if !h[j + 1].is_zero() && !gs[k - j].is_zero() {
                        acc += &h[j + 1] * &gs[k - j] * BigInt::from(j + 1);
                    }
                    if !h[j].is_zero() && !gs[k - j + 1].is_zero() {
                        acc -= &h[j] * &gs[k - j + 1] * (&tb * BigInt::from(k - j + 1));
                    }
                }
                acc
            })
            .collect();
        h = next;
    }
    h.swap_remove(0)
}

/// `[α^0] h_m` for `h_0 = ∂g`, `h_t = (∂h_{t-1}) g - t h_{t-1} ∂g`.
pub fn h_constant_term(g: &[BigRational], m: usize) -> BigRational {
    assert!(g.len() >= m + 2, "need g through order m+1");
    assert!(g[0].is_one(), "g must have constant term 1");
    let d = g[..m + 2].iter().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
    let gs: Vec<BigInt> = g[..m + 2].iter().map(|c| c.numer() * (&d / c.denom())).collect();
    let h = h_constant_term_scaled(&gs, m);
    BigRational::new(h, num_traits::pow(d, m + 1))
}

/// `D_W log Tr exp(-Σ x_j E_j) / W!` at `x = 0`, where operator `j` has multiplicity `mult[j]`.
///
/// No connectivity check: disconnected inputs come out as zero.
pub fn cluster_derivative_ops(ops: &[PauliString], mult: &[u32]) -> BigRational {
    assert_eq!(ops.len(), mult.len());
    assert!(mult.iter().all(|&m| m > 0), "multiplicities must be positive");
    let rep = faithful_representation(ops).expect("operators share a register");
    derivative_from_rep(&rep, mult)
}

fn derivative_from_rep(rep: &FaithfulRep, mult: &[u32]) -> BigRational {
    let weight: usize = mult.iter().map(|&m| m as usize).sum();
    assert!(weight >= 1);
    let m = weight - 1;
    let table = WordTraceTable::bounded(rep, mult);
    let d = factorial(weight);
    // gs_k = D (-1)^k T_k / k!
    let scale: Vec<BigInt> = (0..=weight).map(|k| &d / factorial(k)).collect();
    let binoms: Vec<Vec<BigInt>> =
        mult.iter().map(|&mu| (0..=mu).map(|z| binomial(BigInt::from(mu), BigInt::from(z))).collect()).collect();

    let mut memo: HashMap<Vec<i128>, BigInt> = HashMap::new();
    let mut out = BigInt::zero();
    let mut z = vec![0u32; mult.len()];
    loop {
        let traces = table.traces(&z);
        let h = memo
            .entry(traces.clone())
            .or_insert_with(|| {
                let gs: Vec<BigInt> = traces
                    .iter()
                    .enumerate()
                    .map(|(k, &t)| {
                        let v = BigInt::from(t) * &scale[k];
                        if k % 2 == 1 {
                            -v
                        } else {
                            v
                        }
                    })
                    .collect();
                h_constant_term_scaled(&gs, m)
            })
            .clone();
        if !h.is_zero() {
            let zsum: usize = z.iter().map(|&v| v as usize).sum();
            let mut term = h;
            for (j, &zj) in z.iter().enumerate() {
                term *= &binoms[j][zj as usize];
            }
            if (zsum + m + 1) % 2 == 1 {
                out -= term;
            } else {
                out += term;
            }
        }
        // Row-major increment over the box Π{0..μ_j}, last index fastest.
        let mut pos = z.len();
        loop {
            if pos == 0 {
                let wfact: BigInt = mult.iter().map(|&mu| factorial(mu as usize)).product();
                let den = num_traits::pow(d.clone(), weight) * wfact * &d;
                return BigRational::new(out, den);
            }
            pos -= 1;
            if z[pos] < mult[pos] {
                z[pos] += 1;
                break;
            }
            z[pos] = 0;
        }
    }
}

/// Normalized derivative of `log Tr exp(-βH)` for a cluster of term indices of `h`.
pub fn cluster_derivative(w: &Cluster, h: &HamiltonianSpec) -> BigRational {
    let ops: Vec<PauliString> = w.parts().iter().map(|&(a, _)| h.terms[a].op.clone()).collect();
    let mult: Vec<u32> = w.parts().iter().map(|&(_, m)| m).collect();
    cluster_derivative_ops(&ops, &mult)
}

/// `(2e(d+1))^w`, the magnitude bound for a weight-`w` cluster derivative.
pub fn derivative_bound(degree: usize, weight: u32) -> f64 {
    (2.0 * std::f64::consts::E * (degree as f64 + 1.0)).powi(weight as i32)
}

/// Every `D_ν/ν!` for `ν ≤ mult`, as the coefficients of
/// `log Σ_ν (-1)^{|ν|} w_ν x^ν / |ν|!` on the box, indexed row-major.
///
/// Uses `θ log r = θr / r` with the Euler operator `θ = Σ x_j ∂_j`:
/// `|ν| L_ν = |ν| c_ν - Σ_{0<ρ<ν} |ν-ρ| L_{ν-ρ} c_ρ`.
pub fn log_box(rep: &FaithfulRep, mult: &[u32]) -> Vec<BigRational> {
    let table = WordTraceTable::bounded(rep, mult);
    let n = mult.len();
    let mut strides = vec![1usize; n];
    for j in (0..n.saturating_sub(1)).rev() {
        strides[j] = strides[j + 1] * (mult[j + 1] as usize + 1);
    }
    let size = if n == 0 { 1 } else { strides[0] * (mult[0] as usize + 1) };
    let index = |nu: &[u8]| nu.iter().zip(&strides).map(|(&v, &s)| v as usize * s).sum::<usize>();
    let decode = |mut i: usize| {
        let mut nu = vec![0u32; n];
        for j in 0..n {
            nu[j] = (i / strides[j]) as u32;
            i %= strides[j];
        }
        nu
    };
    // nonzero c_ρ for ρ ≠ 0
    let mut coeffs: Vec<(usize, Vec<u32>, BigRational)> = Vec::new();
    for (k, level) in table.levels.iter().enumerate().skip(1) {
        let sign = if k % 2 == 0 { BigInt::one() } else { -BigInt::one() };
        for (nu, w) in level {
            let c = BigRational::new(&sign * BigInt::from(*w), factorial(k));
            coeffs.push((index(nu), nu.iter().map(|&v| v as u32).collect(), c));
        }
    }
    coeffs.sort_by_key(|e| e.0);
    let mut dense_c = vec![BigRational::zero(); size];
    for (i, _, c) in &coeffs {
        dense_c[*i] = c.clone();
    }
    let mut l = vec![BigRational::zero(); size];
    for i in 1..size {
        let nu = decode(i);
        let s: u32 = nu.iter().sum();
        let mut acc = &dense_c[i] * BigInt::from(s);
        for (ri, rho, c) in &coeffs {
            if *ri >= i {
                break;
            }
            if rho.iter().zip(&nu).any(|(r, v)| r > v) {
                continue;
            }
            let k = i - ri;
            if l[k].is_zero() {
                continue;
            }
            let weight: u32 = s - rho.iter().sum::<u32>();
            acc -= &l[k] * c * BigInt::from(weight);
        }
        l[i] = acc / BigInt::from(s);
    }
    l
}

type CacheKey = (FaithfulRep, Vec<u32>);

/// Memoizes derivatives by faithful image list and multiplicities.
///
/// Two clusters with equal keys have identical word traces, so the cached
/// value is exactly what a fresh evaluation would return. A miss evaluates
/// the whole box with [`log_box`] and stores every fully supported entry.
#[derive(Debug, Default)]
pub struct DerivativeEngine {
    cache: RwLock<HashMap<CacheKey, BigRational>>,
}

impl DerivativeEngine {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn derivative(&self, ops: &[PauliString], mult: &[u32]) -> BigRational {
        let rep = faithful_representation(ops).expect("operators share a register");
        let key = (rep, mult.to_vec());
        if let Some(v) = self.cache.read().unwrap().get(&key) {
            return v.clone();
        }
        let all = log_box(&key.0, mult);
        let n = mult.len();
        let mut cache = self.cache.write().unwrap();
        let mut idx = vec![0u32; n];
        for v in all {
            if idx.iter().all(|&x| x > 0) {
                cache.entry((key.0.clone(), idx.clone())).or_insert(v);
            }
            for j in (0..n).rev() {
                if idx[j] < mult[j] {
                    idx[j] += 1;
                    break;
                }
                idx[j] = 0;
            }
        }
        cache[&key].clone()
    }

    pub fn cluster(&self, w: &Cluster, h: &HamiltonianSpec) -> BigRational {
        let ops: Vec<PauliString> = w.parts().iter().map(|&(a, _)| h.terms[a].op.clone()).collect();
        let mult: Vec<u32> = w.parts().iter().map(|&(_, m)| m).collect();
        self.derivative(&ops, &mult)
    }

    pub fn len(&self) -> usize {
        self.cache.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Largest `|value|` as a float, for bound checks.
pub fn rational_abs_f64(r: &BigRational) -> f64 {
    crate::rational_to_f64(&r.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn p(n: usize, s: &str) -> PauliString {
        PauliString::parse(n, s).unwrap()
    }

    #[test]
    fn g_examples() {
        let rep = faithful_representation(&[p(1, "Z0")]).unwrap();
        assert_eq!(g_coefficients(&rep, &[0], 3), vec![q(1, 1), q(0, 1), q(0, 1), q(0, 1)]);
        assert_eq!(g_coefficients(&rep, &[1], 2), vec![q(1, 1), q(0, 1), q(1, 2)]);
        let rep = faithful_representation(&[p(1, "X0"), p(1, "Z0")]).unwrap();
        assert_eq!(g_coefficients(&rep, &[1, 1], 2), vec![q(1, 1), q(0, 1), q(1, 1)]);
    }

    #[test]
    fn h_examples() {
        let g = vec![q(1, 1), q(0, 1), q(1, 2)];
        assert_eq!(h_constant_term(&g, 0), q(0, 1));
        assert_eq!(h_constant_term(&g, 1), q(1, 1));
        let g = vec![q(1, 1), q(3, 7)];
        assert_eq!(h_constant_term(&g, 0), q(3, 7));
        let one = vec![q(1, 1), q(0, 1), q(0, 1), q(0, 1), q(0, 1)];
        assert_eq!(h_constant_term(&one, 3), q(0, 1));
    }

    #[test]
    fn analytic_clusters() {
        let z = [p(1, "Z0")];
        assert_eq!(cluster_derivative_ops(&z, &[1]), q(0, 1));
        assert_eq!(cluster_derivative_ops(&z, &[2]), q(1, 2));
        // log 2cosh x = log 2 + x²/2 - x⁴/12 + x⁶/45 - ...
        assert_eq!(cluster_derivative_ops(&z, &[4]), q(-1, 12));
        assert_eq!(cluster_derivative_ops(&z, &[6]), q(1, 45));
        assert_eq!(cluster_derivative_ops(&z, &[3]), q(0, 1));
        // log 2cosh sqrt(a²+b²): coefficient of a²b² in -(a²+b²)²/12.
        let xz = [p(1, "X0"), p(1, "Z0")];
        assert_eq!(cluster_derivative_ops(&xz, &[2, 2]), q(-1, 6));
    }

    #[test]
    fn disjoint_terms_vanish() {
        let ops = [p(2, "Z0"), p(2, "X1")];
        assert_eq!(cluster_derivative_ops(&ops, &[2, 2]), q(0, 1));
        assert_eq!(cluster_derivative_ops(&ops, &[1, 1]), q(0, 1));
    }

    #[test]
    fn engine_matches_direct() {
        let ops = [p(2, "Z0 Z1"), p(2, "X0"), p(2, "X1")];
        let engine = DerivativeEngine::new();
        for mult in [[2, 1, 1], [1, 1, 2], [2, 2, 2], [3, 1, 2], [1, 3, 3]] {
            assert_eq!(engine.derivative(&ops, &mult), cluster_derivative_ops(&ops, &mult));
        }
        let fresh = DerivativeEngine::new();
        let ys = [p(3, "Y0 X1"), p(3, "Z1 Y2"), p(3, "X0 X2"), p(3, "Z0")];
        fresh.derivative(&ys, &[3, 2, 2, 2]);
        for m in 1..=18u32 {
            let mult = [1 + m % 3, 1 + (m / 3) % 2, 1 + (m / 6) % 2, 1 + (m / 12) % 2];
            assert_eq!(fresh.derivative(&ys, &mult), cluster_derivative_ops(&ys, &mult), "{mult:?}");
        }
        // The two single-site fields are equivalent up to relabeling.
        let a = engine.derivative(&[p(2, "Z0 Z1"), p(2, "X0")], &[2, 2]);
        let before = engine.len();
        let b = engine.derivative(&[p(2, "Z0 Z1"), p(2, "X1")], &[2, 2]);
        assert_eq!(a, b);
        assert_eq!(engine.len(), before);
    }
}
