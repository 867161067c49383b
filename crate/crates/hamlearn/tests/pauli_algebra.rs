use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use hamlearn::pauli::{normalized_trace_of_word, PauliString, Phase};
use hamlearn::qsim::pauli_matrix;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Kronecker product of textbook 2x2 matrices, qubit 0 leftmost.
fn kron_matrix(letters: &[char]) -> DMatrix<Complex64> {
    let single = |l: char| -> DMatrix<Complex64> {
        let o = c(0.0, 0.0);
        let one = c(1.0, 0.0);
        match l {
            'I' => DMatrix::from_row_slice(2, 2, &[one, o, o, one]),
            'X' => DMatrix::from_row_slice(2, 2, &[o, one, one, o]),
            'Y' => DMatrix::from_row_slice(2, 2, &[o, c(0.0, -1.0), c(0.0, 1.0), o]),
            _ => DMatrix::from_row_slice(2, 2, &[one, o, o, -one]),
        }
    };
    letters.iter().fold(DMatrix::from_element(1, 1, c(1.0, 0.0)), |acc, &l| acc.kronecker(&single(l)))
}

fn pauli_of(letters: &[char]) -> PauliString {
    let text: Vec<String> =
        letters.iter().enumerate().filter(|(_, &l)| l != 'I').map(|(q, l)| format!("{l}{q}")).collect();
    if text.is_empty() {
        PauliString::identity(letters.len())
    } else {
        PauliString::parse(letters.len(), &text.join(" ")).unwrap()
    }
}

fn phase_value(p: Phase) -> Complex64 {
    let z = p.to_complex();
    c(z.re as f64, z.im as f64)
}

fn close(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> bool {
    (a - b).iter().all(|z| z.norm() < 1e-12)
}

fn letters(n: usize) -> impl Strategy<Value = Vec<char>> {
    prop::collection::vec(prop::sample::select(vec!['I', 'X', 'Y', 'Z']), n)
}

fn pair() -> impl Strategy<Value = (Vec<char>, Vec<char>)> {
    (1usize..=4).prop_flat_map(|n| (letters(n), letters(n)))
}

proptest! {
    #[test]
    fn matrix_matches_kronecker(l in (1usize..=4).prop_flat_map(letters)) {
        prop_assert!(close(&pauli_matrix(&pauli_of(&l)), &kron_matrix(&l)));
    }

    #[test]
    fn product_matches_matrices((a, b) in pair()) {
        let (ph, p) = pauli_of(&a).product(&pauli_of(&b)).unwrap();
        let want = kron_matrix(&a) * kron_matrix(&b);
        prop_assert!(close(&(pauli_matrix(&p) * phase_value(ph)), &want));
    }

    #[test]
    fn commutation_matches_matrices((a, b) in pair()) {
        let (ma, mb) = (kron_matrix(&a), kron_matrix(&b));
        let comm = &ma * &mb - &mb * &ma;
        let commute = comm.iter().all(|z| z.norm() < 1e-12);
        prop_assert_eq!(pauli_of(&a).commutes(&pauli_of(&b)).unwrap(), commute);
        prop_assert_eq!(pauli_of(&b).commutes(&pauli_of(&a)).unwrap(), commute);
    }

    #[test]
    fn squares_to_identity(l in (1usize..=5).prop_flat_map(letters)) {
        let p = pauli_of(&l);
        let (ph, q) = p.product(&p).unwrap();
        prop_assert_eq!(ph, Phase::ONE);
        prop_assert!(q.is_identity());
    }

    #[test]
    fn product_is_associative((a, b) in pair(), seed in 0u64..1000) {
        let cl: Vec<char> = a.iter().enumerate().map(|(i, _)| ['I', 'X', 'Y', 'Z'][((seed >> (2 * i)) & 3) as usize]).collect();
        let (pa, pb, pc) = (pauli_of(&a), pauli_of(&b), pauli_of(&cl));
        let (p1, ab) = pa.product(&pb).unwrap();
        let (p2, left) = ab.product(&pc).unwrap();
        let (q1, bc) = pb.product(&pc).unwrap();
        let (q2, right) = pa.product(&bc).unwrap();
        prop_assert_eq!(left, right);
        prop_assert_eq!((p1.exponent() + p2.exponent()) % 4, (q1.exponent() + q2.exponent()) % 4);
    }

    #[test]
    fn word_trace_matches_dense(words in (1usize..=3).prop_flat_map(|n| prop::collection::vec(letters(n), 1..=5))) {
        let ops: Vec<PauliString> = words.iter().map(|w| pauli_of(w)).collect();
        let dim = 1usize << words[0].len();
        let prod = words.iter().fold(DMatrix::<Complex64>::identity(dim, dim), |acc, w| acc * kron_matrix(w));
        let tr = prod.trace() / dim as f64;
        let got = normalized_trace_of_word(&ops).unwrap();
        prop_assert!((tr - c(got.re as f64, got.im as f64)).norm() < 1e-12);
    }

    #[test]
    fn display_round_trips(l in (1usize..=6).prop_flat_map(letters)) {
        let p = pauli_of(&l);
        prop_assume!(!p.is_identity());
        prop_assert_eq!(PauliString::parse(l.len(), &p.to_string()).unwrap(), p);
    }
}

#[test]
fn textbook_products() {
    let x = PauliString::parse(1, "X0").unwrap();
    let y = PauliString::parse(1, "Y0").unwrap();
    let z = PauliString::parse(1, "Z0").unwrap();
    assert_eq!(x.product(&y).unwrap(), (Phase::I, z.clone()));
    assert_eq!(y.product(&x).unwrap(), (Phase::MINUS_I, z));
}
