//! Pauli strings in symplectic form, with exact phase bookkeeping.
//!
//! A string on `n` qubits is stored as two bit vectors `x` and `z`. Qubit `i`
//! carries `X` when only `x[i]` is set, `Z` when only `z[i]` is set and `Y`
//! when both are. Products carry a phase `i^k` tracked as an exponent mod 4.

use std::fmt;
use std::ops::Mul;

use num_complex::Complex;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PauliError {
    #[error("dimension mismatch: {left} vs {right} qubits")]
    DimensionMismatch { left: usize, right: usize },
    #[error("bad Pauli token `{0}`")]
    BadToken(String),
    #[error("qubit {qubit} out of range for {n_qubits} qubits")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },
    #[error("qubit {0} appears twice")]
    DuplicateQubit(usize),
    #[error("empty Pauli string where a term was expected")]
    Empty,
    #[error("empty operator list")]
    NoOperators,
}

/// A power of `i`, stored as an exponent in `0..4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn new(exponent: i64) -> Phase {
        Phase(exponent.rem_euclid(4) as u8)
    }

    pub fn exponent(self) -> u8 {
        self.0
    }

    pub fn conj(self) -> Phase {
        Phase::new(-(self.0 as i64))
    }

    pub fn is_real(self) -> bool {
        self.0.is_multiple_of(2)
    }

    pub fn to_complex(self) -> Complex<i64> {
        match self.0 {
            0 => Complex::new(1, 0),
            1 => Complex::new(0, 1),
            2 => Complex::new(-1, 0),
            _ => Complex::new(0, -1),
        }
    }
}

impl Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) % 4)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.0 {
            0 => "+1",
            1 => "+i",
            2 => "-1",
            _ => "-i",
        })
    }
}

/// Phase-free tensor product of single-qubit Paulis.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
}

fn words(n: usize) -> usize {
    n.div_ceil(64)
}

fn popcount_and(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(p, q)| (p & q).count_ones()).sum()
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Self {
        PauliString { n: n_qubits, x: vec![0; words(n_qubits)], z: vec![0; words(n_qubits)] }
    }

    /// Single-qubit Pauli `letter` (one of `X`, `Y`, `Z`, `I`) on `qubit`.
    pub fn single(n_qubits: usize, qubit: usize, letter: char) -> Result<Self, PauliError> {
        let mut p = PauliString::identity(n_qubits);
        p.set(qubit, letter)?;
        Ok(p)
    }

    /// Builds a string from explicit bit vectors.
    pub fn from_bits(x: &[bool], z: &[bool]) -> Result<Self, PauliError> {
        if x.len() != z.len() {
            return Err(PauliError::DimensionMismatch { left: x.len(), right: z.len() });
        }
        let mut p = PauliString::identity(x.len());
        for i in 0..x.len() {
            if x[i] {
                p.x[i / 64] |= 1 << (i % 64);
            }
            if z[i] {
                p.z[i / 64] |= 1 << (i % 64);
            }
        }
        Ok(p)
    }

    /// Builds a string on at most 64 qubits from packed masks.
    pub fn from_masks(n_qubits: usize, x: u64, z: u64) -> Self {
        assert!(n_qubits <= 64, "packed masks hold at most 64 qubits");
        let keep = if n_qubits == 64 { u64::MAX } else { (1u64 << n_qubits) - 1 };
        let mut p = PauliString::identity(n_qubits);
        if n_qubits > 0 {
            p.x[0] = x & keep;
            p.z[0] = z & keep;
        }
        p
    }

    /// Parses whitespace-separated tokens such as `X0 Z3 Y4`.
    pub fn parse(n_qubits: usize, text: &str) -> Result<Self, PauliError> {
        let mut p = PauliString::identity(n_qubits);
        let mut seen = false;
        for token in text.split_whitespace() {
            let mut chars = token.chars();
            let letter = chars.next().ok_or_else(|| PauliError::BadToken(token.into()))?;
            if !matches!(letter, 'X' | 'Y' | 'Z') {
                return Err(PauliError::BadToken(token.into()));
            }
            let idx: usize = chars.as_str().parse().map_err(|_| PauliError::BadToken(token.into()))?;
            if idx >= n_qubits {
                return Err(PauliError::QubitOutOfRange { qubit: idx, n_qubits });
            }
            if p.letter(idx) != 'I' {
                return Err(PauliError::DuplicateQubit(idx));
            }
            p.set(idx, letter)?;
            seen = true;
        }
        if !seen {
            return Err(PauliError::Empty);
        }
        Ok(p)
    }

    fn set(&mut self, qubit: usize, letter: char) -> Result<(), PauliError> {
        if qubit >= self.n {
            return Err(PauliError::QubitOutOfRange { qubit, n_qubits: self.n });
        }
        let (w, b) = (qubit / 64, 1u64 << (qubit % 64));
        let (xb, zb) = match letter {
            'I' => (false, false),
            'X' => (true, false),
            'Y' => (true, true),
            'Z' => (false, true),
            _ => return Err(PauliError::BadToken(letter.to_string())),
        };
        self.x[w] = if xb { self.x[w] | b } else { self.x[w] & !b };
        self.z[w] = if zb { self.z[w] | b } else { self.z[w] & !b };
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn x_bit(&self, qubit: usize) -> bool {
        self.x[qubit / 64] >> (qubit % 64) & 1 == 1
    }

    pub fn z_bit(&self, qubit: usize) -> bool {
        self.z[qubit / 64] >> (qubit % 64) & 1 == 1
    }

    pub fn x_words(&self) -> &[u64] {
        &self.x
    }

    pub fn z_words(&self) -> &[u64] {
        &self.z
    }

    /// Packed `(x, z)` masks; only valid for at most 64 qubits.
    pub fn masks(&self) -> (u64, u64) {
        assert!(self.n <= 64, "packed masks hold at most 64 qubits");
        (self.x.first().copied().unwrap_or(0), self.z.first().copied().unwrap_or(0))
    }

    pub fn letter(&self, qubit: usize) -> char {
        match (self.x_bit(qubit), self.z_bit(qubit)) {
            (false, false) => 'I',
            (true, false) => 'X',
            (true, true) => 'Y',
            (false, true) => 'Z',
        }
    }

    pub fn is_identity(&self) -> bool {
        self.x.iter().chain(&self.z).all(|&w| w == 0)
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.n).filter(|&q| self.x_bit(q) || self.z_bit(q)).collect()
    }

    pub fn weight(&self) -> usize {
        self.x.iter().zip(&self.z).map(|(a, b)| (a | b).count_ones() as usize).sum()
    }

    fn check(&self, other: &PauliString) -> Result<(), PauliError> {
        if self.n != other.n {
            return Err(PauliError::DimensionMismatch { left: self.n, right: other.n });
        }
        Ok(())
    }

    /// True when the symplectic form vanishes mod 2.
    pub fn commutes(&self, other: &PauliString) -> Result<bool, PauliError> {
        self.check(other)?;
        let s = popcount_and(&self.x, &other.z) + popcount_and(&self.z, &other.x);
        Ok(s.is_multiple_of(2))
    }

    /// `self * other = phase * result`.
    pub fn product(&self, other: &PauliString) -> Result<(Phase, PauliString), PauliError> {
        self.check(other)?;
        let x: Vec<u64> = self.x.iter().zip(&other.x).map(|(a, b)| a ^ b).collect();
        let z: Vec<u64> = self.z.iter().zip(&other.z).map(|(a, b)| a ^ b).collect();
        // P = i^{|x&z|} X^x Z^z, and Z^z1 X^x2 = (-1)^{z1.x2} X^x2 Z^z1.
        let e = popcount_and(&self.x, &self.z) as i64
            + popcount_and(&other.x, &other.z) as i64
            + 2 * popcount_and(&self.z, &other.x) as i64
            - popcount_and(&x, &z) as i64;
        Ok((Phase::new(e), PauliString { n: self.n, x, z }))
    }

    /// Action on a computational basis state: `P|b> = phase |b ^ flip>`.
    ///
    /// Qubit `q` maps to bit `n-1-q` of the basis index, so qubit 0 is the
    /// leftmost tensor factor. Only valid for at most 64 qubits.
    pub fn basis_action(&self, basis: usize) -> (Phase, usize) {
        let (xm, zm) = self.index_masks();
        let e = (xm & zm).count_ones() as i64 + 2 * (zm & basis as u64).count_ones() as i64;
        (Phase::new(e), basis ^ xm as usize)
    }

    /// Masks over basis-index bits (see [`PauliString::basis_action`]).
    pub fn index_masks(&self) -> (u64, u64) {
        let (x, z) = self.masks();
        let n = self.n as u32;
        if n == 0 {
            return (0, 0);
        }
        let rev = |m: u64| m.reverse_bits() >> (64 - n);
        (rev(x), rev(z))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return f.write_str("I");
        }
        let mut first = true;
        for q in self.support() {
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{}{}", self.letter(q), q)?;
            first = false;
        }
        Ok(())
    }
}

/// A Pauli string with a phase prefactor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PhasedPauli {
    pub phase: Phase,
    pub op: PauliString,
}

impl PhasedPauli {
    pub fn new(phase: Phase, op: PauliString) -> Self {
        PhasedPauli { phase, op }
    }

    pub fn identity(n_qubits: usize) -> Self {
        PhasedPauli::new(Phase::ONE, PauliString::identity(n_qubits))
    }

    pub fn mul(&self, other: &PhasedPauli) -> Result<PhasedPauli, PauliError> {
        let (ph, op) = self.op.product(&other.op)?;
        Ok(PhasedPauli::new(self.phase * other.phase * ph, op))
    }

    /// Hermitian iff the phase is real.
    pub fn is_hermitian(&self) -> bool {
        self.phase.is_real()
    }
}

impl From<PauliString> for PhasedPauli {
    fn from(op: PauliString) -> Self {
        PhasedPauli::new(Phase::ONE, op)
    }
}

impl fmt::Display for PhasedPauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.phase, self.op)
    }
}

/// Tr(w_1 ... w_k) / 2^n: the accumulated phase when the product is the
/// identity and 0 otherwise. The empty word gives 1.
pub fn normalized_trace_of_word(word: &[PauliString]) -> Result<Complex<i64>, PauliError> {
    let phased: Vec<PhasedPauli> = word.iter().cloned().map(PhasedPauli::from).collect();
    normalized_trace_of_phased_word(&phased)
}

pub fn normalized_trace_of_phased_word(word: &[PhasedPauli]) -> Result<Complex<i64>, PauliError> {
    let Some(first) = word.first() else {
        return Ok(Complex::new(1, 0));
    };
    let mut acc = first.clone();
    for p in &word[1..] {
        acc = acc.mul(p)?;
    }
    Ok(if acc.op.is_identity() { acc.phase.to_complex() } else { Complex::new(0, 0) })
}

/// Images of a list of operators on a small register, preserving every word trace.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FaithfulRep {
    pub n_qubits: usize,
    pub images: Vec<PhasedPauli>,
}

/// Symplectic bit position order used for pivots: X block by qubit, then Z block.
fn first_pivot(x: &[u64], z: &[u64]) -> Option<(bool, usize)> {
    for (w, &v) in x.iter().enumerate() {
        if v != 0 {
            return Some((false, w * 64 + v.trailing_zeros() as usize));
        }
    }
    for (w, &v) in z.iter().enumerate() {
        if v != 0 {
            return Some((true, w * 64 + v.trailing_zeros() as usize));
        }
    }
    None
}

struct Row {
    x: Vec<u64>,
    z: Vec<u64>,
    combo: Vec<bool>,
    pivot: (bool, usize),
}

/// Maps `ops` onto at most `ops.len()` qubits so that every word trace is preserved.
///
/// Independent generators are extracted by GF(2) elimination. Generator `k` is
/// sent to `Z_k` times `X_l` for each earlier generator `l` it anticommutes
/// with, which reproduces the commutation table. Dependent operators are
/// rebuilt as the same phase-tagged product of generator images.
pub fn faithful_representation(ops: &[PauliString]) -> Result<FaithfulRep, PauliError> {
    let first = ops.first().ok_or(PauliError::NoOperators)?;
    for op in ops {
        first.check(op)?;
    }

    let mut gens: Vec<usize> = Vec::new();
    let mut rows: Vec<Row> = Vec::new();
    // For each op: Ok(generator slot) or Err(generator combination).
    let mut role: Vec<Result<usize, Vec<bool>>> = Vec::with_capacity(ops.len());

    for (j, op) in ops.iter().enumerate() {
        let mut x = op.x.clone();
        let mut z = op.z.clone();
        let mut combo = vec![false; gens.len()];
        for row in &rows {
            let (is_z, q) = row.pivot;
            let bit = if is_z { z[q / 64] >> (q % 64) & 1 } else { x[q / 64] >> (q % 64) & 1 };
            if bit == 1 {
                x.iter_mut().zip(&row.x).for_each(|(a, b)| *a ^= b);
                z.iter_mut().zip(&row.z).for_each(|(a, b)| *a ^= b);
                combo.iter_mut().zip(&row.combo).for_each(|(a, b)| *a ^= b);
            }
        }
        match first_pivot(&x, &z) {
            None => role.push(Err(combo)),
            Some(pivot) => {
                let slot = gens.len();
                gens.push(j);
                combo.push(true);
                for row in rows.iter_mut() {
                    row.combo.push(false);
                }
                rows.push(Row { x, z, combo, pivot });
                role.push(Ok(slot));
            }
        }
    }

    let r = gens.len();
    let mut gen_images = Vec::with_capacity(r);
    for k in 0..r {
        let mut xb = vec![false; r];
        let mut zb = vec![false; r];
        zb[k] = true;
        for l in 0..k {
            if !ops[gens[k]].commutes(&ops[gens[l]])? {
                xb[l] = true;
            }
        }
        gen_images.push(PhasedPauli::from(PauliString::from_bits(&xb, &zb)?));
    }

    let mut images = Vec::with_capacity(ops.len());
    for (j, op) in ops.iter().enumerate() {
        match &role[j] {
            Ok(slot) => images.push(gen_images[*slot].clone()),
            Err(combo) => {
                let mut orig = PhasedPauli::identity(op.n);
                let mut img = PhasedPauli::identity(r);
                for (k, &used) in combo.iter().enumerate() {
                    if used {
                        orig = orig.mul(&PhasedPauli::from(ops[gens[k]].clone()))?;
                        img = img.mul(&gen_images[k])?;
                    }
                }
                debug_assert_eq!(&orig.op, op);
                // op = conj(orig.phase) * prod(gens), so reuse that phase on the images.
                images.push(PhasedPauli::new(orig.phase.conj() * img.phase, img.op));
            }
        }
    }
    Ok(FaithfulRep { n_qubits: r, images })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: usize, s: &str) -> PauliString {
        PauliString::parse(n, s).unwrap()
    }

    #[test]
    fn single_qubit_products() {
        let (ph, r) = p(1, "X0").product(&p(1, "Y0")).unwrap();
        assert_eq!((ph, r), (Phase::I, p(1, "Z0")));
        let (ph, r) = p(1, "Z0").product(&p(1, "X0")).unwrap();
        assert_eq!((ph, r), (Phase::I, p(1, "Y0")));
        let (ph, r) = p(1, "Y0").product(&p(1, "X0")).unwrap();
        assert_eq!((ph, r), (Phase::MINUS_I, p(1, "Z0")));
    }

    #[test]
    fn disjoint_and_involution() {
        let (ph, r) = p(2, "X0").product(&p(2, "X1")).unwrap();
        assert_eq!((ph, r), (Phase::ONE, p(2, "X0 X1")));
        let q = p(3, "X0 Y1 Z2");
        let (ph, r) = q.product(&q).unwrap();
        assert_eq!(ph, Phase::ONE);
        assert!(r.is_identity());
    }

    #[test]
    fn commutation_examples() {
        assert!(!p(1, "X0").commutes(&p(1, "Z0")).unwrap());
        assert!(p(2, "X0 X1").commutes(&p(2, "Z0 Z1")).unwrap());
        assert!(p(2, "X0").commutes(&PauliString::identity(2)).unwrap());
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(p(1, "X0").product(&p(2, "X0")), Err(PauliError::DimensionMismatch { .. })));
    }

    #[test]
    fn word_traces() {
        assert_eq!(normalized_trace_of_word(&[]).unwrap(), Complex::new(1, 0));
        assert_eq!(normalized_trace_of_word(&[p(1, "Z0")]).unwrap(), Complex::new(0, 0));
        assert_eq!(normalized_trace_of_word(&[p(1, "X0"), p(1, "X0")]).unwrap(), Complex::new(1, 0));
        // X Z = -iY, and -iY * Y = -i.
        let xzy = [p(1, "X0"), p(1, "Z0"), p(1, "Y0")];
        assert_eq!(normalized_trace_of_word(&xzy).unwrap(), Complex::new(0, -1));
    }

    #[test]
    fn parse_errors() {
        assert_eq!(PauliString::parse(2, "X0 Z0"), Err(PauliError::DuplicateQubit(0)));
        assert_eq!(PauliString::parse(2, ""), Err(PauliError::Empty));
        assert!(matches!(PauliString::parse(2, "Z2"), Err(PauliError::QubitOutOfRange { .. })));
        assert!(matches!(PauliString::parse(2, "W1"), Err(PauliError::BadToken(_))));
        assert_eq!(p(4, "Z3 X0").to_string(), "X0 Z3");
    }

    #[test]
    fn faithful_relabels_single_operator() {
        let rep = faithful_representation(&[p(10, "Z5")]).unwrap();
        assert_eq!(rep.n_qubits, 1);
        assert_eq!(rep.images, vec![PhasedPauli::from(p(1, "Z0"))]);
    }

    #[test]
    fn faithful_dependent_operator_keeps_sign() {
        // Y = i X Z, so the third image must be the product of the first two up to that phase.
        let ops = [p(1, "X0"), p(1, "Z0"), p(1, "Y0")];
        let rep = faithful_representation(&ops).unwrap();
        assert_eq!(rep.n_qubits, 2);
        for img in &rep.images {
            assert!(img.is_hermitian());
        }
        let orig: Vec<PhasedPauli> = ops.iter().cloned().map(Into::into).collect();
        for w in [[0, 1, 2], [2, 1, 0], [1, 0, 2]] {
            let a: Vec<_> = w.iter().map(|&k| orig[k].clone()).collect();
            let b: Vec<_> = w.iter().map(|&k| rep.images[k].clone()).collect();
            assert_eq!(normalized_trace_of_phased_word(&a).unwrap(), normalized_trace_of_phased_word(&b).unwrap());
        }
    }

    #[test]
    fn basis_action_matches_letters() {
        // Z on qubit 0 of two qubits: basis index bit 1 is qubit 0.
        let z0 = p(2, "Z0");
        assert_eq!(z0.basis_action(0b10), (Phase::MINUS_ONE, 0b10));
        assert_eq!(z0.basis_action(0b01), (Phase::ONE, 0b01));
        let y1 = p(2, "Y1");
        // Y|0> = i|1>
        assert_eq!(y1.basis_action(0b00), (Phase::I, 0b01));
        assert_eq!(y1.basis_action(0b01), (Phase::MINUS_I, 0b00));
    }
}
