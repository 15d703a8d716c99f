//! Learner behavior that spans modules: basis coverage, order independence of
//! execution, and agreement between the two simulators.

use std::collections::BTreeMap;

use hamlearn::learner::{
    self, assemble_basis, build_report, derive_params, execute_group, plan, plan_for_bases, LearnConfig,
};
use hamlearn::model::{random_k_body, CoeffLaw};
use hamlearn::pauli::{kbeta_from_bits, BasisAxes, BitString, PauliString};
use hamlearn::seed::rng_at;
use hamlearn::sim::{AnalyticOracle, Mode, ShotOracle, SpamModel, StatevectorOracle};
use hamlearn::SparseHamiltonian;
use rand::seq::SliceRandom;

#[test]
fn weight_two_pauli_covered_with_probability_one_ninth() {
    let p: PauliString = "IXIIZ".parse().unwrap();
    let mut rng = rng_at(41, &[0]);
    let draws = 100_000;
    let hits = (0..draws)
        .filter(|_| p.in_kbeta(&BasisAxes::random(5, &mut rng)).unwrap())
        .count();
    let freq = hits as f64 / draws as f64;
    assert!((freq - 1.0 / 9.0).abs() < 0.01, "{freq}");
}

#[test]
fn sampled_bases_cover_every_term() {
    let (n, k, m, delta) = (8, 2, 10, 0.1);
    let mut full = 0;
    for rep in 0..100u64 {
        let mut rng = rng_at(rep, &[42]);
        let h = random_k_body(n, k, m, CoeffLaw::default(), &mut rng).unwrap();
        let bases = learner::sample_bases(n, k, m, delta / 3.0, &mut rng).unwrap();
        let covered = h
            .terms()
            .keys()
            .all(|p| bases.iter().any(|b| p.in_kbeta(b).unwrap()));
        full += covered as usize;
    }
    assert!(full >= 99, "{full}/100");
}

fn small_config(k: usize, m: usize, eps: f64, seed: u64) -> LearnConfig {
    let mut cfg = LearnConfig::new(k, m, eps);
    cfg.seed = seed;
    cfg.median_batch = Some(7);
    cfg
}

#[test]
fn shuffled_execution_reproduces_the_report() {
    let mut rng = rng_at(43, &[0]);
    let h = random_k_body(5, 2, 3, CoeffLaw::default(), &mut rng).unwrap();
    let mut cfg = small_config(2, 3, 0.3, 9);
    cfg.spam = SpamModel::new(0.05, 0.0).unwrap();
    let oracle = AnalyticOracle::new(h.clone(), cfg.spam);
    let reference = learner::learn(&oracle, &cfg, Some(&h)).unwrap();

    let pl = plan(5, &cfg).unwrap();
    let mut jobs: Vec<(usize, usize, learner::ProbeGroup)> = (0..pl.bases.len())
        .flat_map(|b| pl.groups(b).into_iter().enumerate().map(move |(i, g)| (b, i, g)))
        .collect();
    jobs.shuffle(&mut rng_at(44, &[0]));
    let mut done: BTreeMap<(usize, usize), learner::GroupResult> = BTreeMap::new();
    for (b, i, g) in &jobs {
        done.insert((*b, *i), execute_group(&oracle, g).unwrap());
    }
    let per_basis = (0..pl.bases.len())
        .map(|b| {
            let res: Vec<_> = done.range((b, 0)..(b + 1, 0)).map(|(_, r)| *r).collect();
            assemble_basis(&pl, b, &res).unwrap()
        })
        .collect();
    let shuffled = build_report(Mode::Analytic, &pl, &cfg, per_basis, Some(&h));
    assert_eq!(reference.to_json(), shuffled.to_json());
}

#[test]
fn repeated_runs_are_identical() {
    let h = SparseHamiltonian::from_terms(4, 1, [("ZIII".parse().unwrap(), 0.5), ("IIXI".parse().unwrap(), -0.3)])
        .unwrap();
    let cfg = small_config(1, 2, 0.2, 3);
    let oracle = AnalyticOracle::new(h.clone(), cfg.spam);
    let a = learner::learn(&oracle, &cfg, Some(&h)).unwrap();
    let b = learner::learn(&oracle, &cfg, Some(&h)).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.totals.n_exp, learner::plan(4, &cfg).unwrap().predicted_shots());
}

#[test]
fn statevector_and_analytic_estimates_agree() {
    // H sits inside K_beta, so reshaping is exact and a tiny step count suffices
    let n = 6;
    let beta: BasisAxes = "zxyzxz".parse().unwrap();
    let terms = [(0b000001u64, 0.6), (0b010100, -0.4)]
        .map(|(c, v)| (kbeta_from_bits(&beta, &BitString::new(n, c).unwrap()).unwrap(), v));
    let h = SparseHamiltonian::from_terms(n, 2, terms).unwrap();
    let mut cfg = small_config(2, 2, 1.0, 17);
    cfg.reshaping_factor = 1e-6;
    cfg.spam = SpamModel::new(0.02, 0.0).unwrap();
    let derived = derive_params(n, &cfg).unwrap();
    let eta = derived.eta;
    let pl = plan_for_bases(&cfg, derived, vec![beta]).unwrap();

    let an = AnalyticOracle::new(h.clone(), cfg.spam);
    let sv = StatevectorOracle::new(h.clone(), cfg.spam).unwrap();
    assert_eq!(sv.mode(), Mode::Statevector);
    let ea = learner::learn_basis(&an, &pl, 0).unwrap();
    let es = learner::learn_basis(&sv, &pl, 0).unwrap();
    for ((p, a), (q, s)) in ea.values.iter().zip(&es.values) {
        assert_eq!(p, q);
        let truth = h.coeff(p);
        assert!((a - truth).abs() <= 10.0 * eta, "{p}: analytic {a} vs {truth}");
        assert!((s - truth).abs() <= 10.0 * eta, "{p}: statevector {s} vs {truth}");
    }
}

#[test]
fn lower_bound_needs_measurement_noise() {
    let h = SparseHamiltonian::from_terms(3, 1, [("ZII".parse().unwrap(), 0.5)]).unwrap();
    let cfg = small_config(1, 1, 0.3, 0);
    let r = learner::learn(&AnalyticOracle::new(h.clone(), cfg.spam), &cfg, Some(&h)).unwrap();
    assert!(r.lower_bound_time.is_none());
    let mut noisy = cfg.clone();
    noisy.spam = SpamModel::new(0.1, 0.0).unwrap();
    let r = learner::learn(&AnalyticOracle::new(h.clone(), noisy.spam), &noisy, Some(&h)).unwrap();
    let lb = r.lower_bound_time.unwrap();
    assert!(r.totals.total_time >= lb);
}
