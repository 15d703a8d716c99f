//! Pauli algebra against dense-matrix and brute-force oracles.

use hamlearn::dense::{pauli_matrix, C64};
use hamlearn::pauli::{enumerate_kbeta, reshape_average, BasisAxes, Pauli, PauliString, Reshaped};
use hamlearn::seed::rng_at;
use proptest::prelude::*;
use rand::Rng;

fn random_pauli(n: usize, rng: &mut impl Rng) -> PauliString {
    let mask = (1u64 << n) - 1;
    PauliString::new(n, rng.random::<u64>() & mask, rng.random::<u64>() & mask).unwrap()
}

fn all_paulis(n: usize) -> Vec<PauliString> {
    let dim = 1u64 << n;
    (0..dim)
        .flat_map(|x| (0..dim).map(move |z| PauliString::new(n, x, z).unwrap()))
        .collect()
}

fn max_abs(m: &nalgebra::DMatrix<C64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.norm()))
}

#[test]
fn commutation_matches_dense_commutator() {
    let mut rng = rng_at(11, &[0]);
    for _ in 0..200 {
        let (p, q) = (random_pauli(4, &mut rng), random_pauli(4, &mut rng));
        let (a, b) = (pauli_matrix(&p), pauli_matrix(&q));
        let comm = &a * &b - &b * &a;
        assert_eq!(p.commutes(&q).unwrap(), max_abs(&comm) < 1e-12, "{p} {q}");
    }
}

#[test]
fn weight_matches_per_qubit_decode() {
    let mut rng = rng_at(12, &[0]);
    for _ in 0..500 {
        let p = random_pauli(10, &mut rng);
        let decoded = p.to_string().chars().filter(|&c| c != 'I').count();
        assert_eq!(p.weight(), decoded);
        assert_eq!(p.sites().iter().filter(|s| **s != Pauli::I).count(), decoded);
    }
}

/// `2^{-n} sum_Q Q P Q` computed with dense matrices.
fn brute_average(p: &PauliString, beta: &BasisAxes) -> nalgebra::DMatrix<C64> {
    let group = enumerate_kbeta(beta).unwrap();
    let pm = pauli_matrix(p);
    let mut acc = nalgebra::DMatrix::<C64>::zeros(pm.nrows(), pm.ncols());
    for q in &group {
        let qm = pauli_matrix(q);
        acc += &qm * &pm * &qm;
    }
    acc / C64::new(group.len() as f64, 0.0)
}

fn check_against_brute(p: &PauliString, beta: &BasisAxes) {
    let avg = brute_average(p, beta);
    match reshape_average(p, beta).unwrap() {
        Reshaped::Kept => assert!(max_abs(&(avg - pauli_matrix(p))) < 1e-12, "{p} under {beta}"),
        Reshaped::Annihilated => assert!(max_abs(&avg) < 1e-12, "{p} under {beta}"),
    }
}

#[test]
fn two_qubit_reshaping_brute_force() {
    let beta: BasisAxes = "zz".parse().unwrap();
    for p in all_paulis(2) {
        check_against_brute(&p, &beta);
    }
}

#[test]
fn all_paulis_n4_random_bases_brute_force() {
    let mut rng = rng_at(13, &[0]);
    for _ in 0..5 {
        let beta = BasisAxes::random(4, &mut rng);
        let mut kept = 0;
        for p in all_paulis(4) {
            check_against_brute(&p, &beta);
            kept += (reshape_average(&p, &beta).unwrap() == Reshaped::Kept) as usize;
        }
        assert_eq!(kept, 16);
    }
}

#[test]
fn kbeta_size_and_membership() {
    let beta: BasisAxes = "xyz".parse().unwrap();
    let group = enumerate_kbeta(&beta).unwrap();
    assert_eq!(group.len(), 8);
    assert!(group.iter().all(|p| p.in_kbeta(&beta).unwrap()));
}

proptest! {
    #[test]
    fn text_round_trip(n in 1usize..=64, x in any::<u64>(), z in any::<u64>()) {
        let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        let p = PauliString::new(n, x & mask, z & mask).unwrap();
        let back: PauliString = p.to_string().parse().unwrap();
        prop_assert_eq!(p, back);
    }

    #[test]
    fn commutation_is_symmetric(x1 in 0u64..256, z1 in 0u64..256, x2 in 0u64..256, z2 in 0u64..256) {
        let p = PauliString::new(8, x1, z1).unwrap();
        let q = PauliString::new(8, x2, z2).unwrap();
        prop_assert_eq!(p.commutes(&q).unwrap(), q.commutes(&p).unwrap());
        prop_assert!(p.commutes(&p).unwrap());
    }
}
