//! Shot simulators against dense oracles and each other.

use hamlearn::dense::{self, HermitianEigen};
use hamlearn::model::{random_k_body, CoeffLaw};
use hamlearn::pauli::{BasisAxes, BitString, PauliString};
use hamlearn::seed::rng_at;
use hamlearn::sim::{
    ideal_mean, prepare_initial, reshaping_bound, AnalyticOracle, ExperimentSpec, Observable, ShotOracle, SpamModel,
    StatevectorOracle,
};
use hamlearn::SparseHamiltonian;

fn ps(s: &str) -> PauliString {
    s.parse().unwrap()
}

#[test]
fn initial_state_overlaps_ground_label_eigenspace_by_half() {
    let beta: BasisAxes = "zxy".parse().unwrap();
    let h = SparseHamiltonian::from_terms(3, 2, [(ps("ZXI"), 0.4), (ps("IXY"), -0.25), (ps("IIY"), 0.3)]).unwrap();
    let heff = h.effective(&beta).unwrap();
    let hm = heff.as_hamiltonian().unwrap().dense_matrix().unwrap();
    let eig = HermitianEigen::new(&hm);
    let zero = BitString::zero(3);
    let lambda0 = heff.eigenvalue(&zero).unwrap();
    for bits in 1..8u64 {
        let b = BitString::new(3, bits).unwrap();
        if (heff.eigenvalue(&b).unwrap() - lambda0).abs() < 1e-9 {
            continue;
        }
        let psi = prepare_initial(&beta, &b).unwrap();
        let mut overlap = 0.0;
        for (j, &e) in eig.values.iter().enumerate() {
            if (e - lambda0).abs() < 1e-9 {
                let v: Vec<_> = eig.vectors.column(j).iter().copied().collect();
                overlap += dense::inner(&v, &psi).norm_sqr();
            }
        }
        assert!((overlap - 0.5).abs() < 1e-10, "b = {b}: {overlap}");
    }
}

#[test]
fn statevector_and_analytic_agree_on_mixed_hamiltonian() {
    // n = 4, r = 256, 10^4 shots; the allowance adds the deterministic reshaping
    // bias bound to the 3 sigma sampling band
    let mut rng = rng_at(21, &[0]);
    let h = random_k_body(4, 2, 3, CoeffLaw::default(), &mut rng).unwrap();
    let spam = SpamModel::new(0.02, 0.0).unwrap();
    let an = AnalyticOracle::new(h.clone(), spam);
    let sv = StatevectorOracle::new(h.clone(), spam).unwrap();
    let shots = 10_000u32;
    for cell in 0..3 {
        let beta = BasisAxes::random(4, &mut rng);
        let mut b = BitString::random(4, &mut rng);
        while b.is_zero() {
            b = BitString::random(4, &mut rng);
        }
        let obs = if cell % 2 == 0 { Observable::X } else { Observable::Y };
        let spec = ExperimentSpec::with_steps(beta, b, 0.4, 256, obs).unwrap();
        let a = an.run_batch(&spec, shots, &mut rng_at(22, &[cell])).unwrap().mean();
        let s = sv.run_batch(&spec, shots, &mut rng_at(23, &[cell])).unwrap().mean();
        let sigma = ((1.0 - a * a) / shots as f64 + (1.0 - s * s) / shots as f64).sqrt();
        let allow = 3.0 * sigma + reshaping_bound(h.len(), spec.t, spec.r);
        assert!((a - s).abs() <= allow, "cell {cell}: analytic {a}, statevector {s}, allow {allow}");
    }
}

#[test]
fn commuting_hamiltonian_has_no_reshaping_bias() {
    // H inside K_beta: every trajectory evolves exactly, so only shot noise remains
    let beta: BasisAxes = "xzy".parse().unwrap();
    let h = SparseHamiltonian::from_terms(3, 2, [(ps("XZI"), 0.5), (ps("IIY"), -0.7)]).unwrap();
    let sv = StatevectorOracle::new(h.clone(), SpamModel::noiseless()).unwrap();
    let b = BitString::new(3, 0b101).unwrap();
    let spec = ExperimentSpec::with_steps(beta.clone(), b, 1.3, 3, Observable::X).unwrap();
    let delta = h.effective(&beta).unwrap().eigenvalue_gap(&b).unwrap();
    let shots = 20_000u32;
    let m = sv.run_batch(&spec, shots, &mut rng_at(24, &[0])).unwrap().mean();
    let ideal = ideal_mean(Observable::X, delta, 1.3);
    assert!((m - ideal).abs() <= 3.0 * ((1.0 - ideal * ideal) / shots as f64).sqrt() + 1e-9);
}

#[test]
fn spectral_norm_below_coefficient_l1() {
    let mut rng = rng_at(25, &[0]);
    for _ in 0..10 {
        let h = random_k_body(5, 3, 8, CoeffLaw::Uniform, &mut rng).unwrap();
        let s = HermitianEigen::new(&h.dense_matrix().unwrap()).spectral_norm();
        assert!(s <= h.l1_norm() + 1e-12);
    }
}

#[test]
fn batches_are_reproducible_from_the_seed() {
    let h = SparseHamiltonian::from_terms(2, 1, [(ps("ZI"), 0.3)]).unwrap();
    let an = AnalyticOracle::new(h, SpamModel::noiseless());
    let spec = ExperimentSpec::with_steps("zz".parse().unwrap(), BitString::new(2, 1).unwrap(), 2.0, 4, Observable::Y)
        .unwrap();
    let a = an.run_batches(&spec, 54, 10, &mut rng_at(26, &[0])).unwrap();
    let b = an.run_batches(&spec, 54, 10, &mut rng_at(26, &[0])).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().all(|x| x.shots == 54 && x.sum.abs() <= 54 && (x.sum + 54) % 2 == 0));
}
