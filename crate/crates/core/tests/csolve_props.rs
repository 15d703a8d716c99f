//! Invariants of the measurement operator, the l1-ball projection, and the
//! constrained least-squares value function.

use hamlearn::csolve::{
    self, project_l1_ball, sample_rows, solve_constrained_ls, CsInstance, WeightKOperator,
};
use hamlearn::pauli::BitString;
use hamlearn::seed::rng_at;
use proptest::prelude::*;
use rand::Rng;

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn projection_lands_in_ball_and_is_nearest(
        v in prop::collection::vec(-5.0f64..5.0, 1..20),
        xi in 0.0f64..6.0,
        seed in any::<u64>(),
    ) {
        let p = project_l1_ball(&v, xi);
        prop_assert!(l1(&p) <= xi * (1.0 + 1e-12) + 1e-12);
        if l1(&v) <= xi {
            prop_assert_eq!(&p, &v);
        }
        // no random point of the ball is closer
        let mut rng = rng_at(seed, &[0]);
        for _ in 0..20 {
            let w: Vec<f64> = v.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
            let w = project_l1_ball(&w, xi * rng.random_range(0.0..1.0));
            prop_assert!(dist2(&p, &v) <= dist2(&w, &v) + 1e-9);
        }
    }

    #[test]
    fn adjoint_identity(n in 2usize..9, k in 1usize..3, gamma in 1usize..40, seed in any::<u64>()) {
        let k = k.min(n);
        let mut rng = rng_at(seed, &[1]);
        let rows = sample_rows(n, gamma, &mut rng);
        let op = WeightKOperator::new(n, k, &rows).unwrap();
        let x: Vec<f64> = (0..op.d()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..op.gamma()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ax = op.apply(&x).unwrap();
        let aty = op.apply_adjoint(&y).unwrap();
        let lhs: f64 = ax.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&aty).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn entries_are_walsh_signs(n in 1usize..10, seed in any::<u64>()) {
        let mut rng = rng_at(seed, &[2]);
        let rows = sample_rows(n, 5, &mut rng);
        let op = WeightKOperator::new(n, n.min(3), &rows).unwrap();
        for (i, r) in op.row_words().iter().enumerate() {
            for (j, c) in op.column_words().iter().enumerate() {
                let s = if (r & c).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                prop_assert_eq!(op.entry(i, j), s);
            }
        }
    }
}

#[test]
fn value_function_structure() {
    // monotone nonincreasing, sqrt(Gamma)-Lipschitz, and the radius is active
    // while the constraint binds
    let mut rng = rng_at(31, &[0]);
    for trial in 0..5 {
        let (n, k, gamma, m) = (6, 2, 18, 3);
        let rows = sample_rows(n, gamma, &mut rng);
        let op = WeightKOperator::new(n, k, &rows).unwrap();
        let x = csolve::planted_sparse(op.d(), m, &mut rng);
        let mut y = op.apply(&x).unwrap();
        y.iter_mut().for_each(|v| *v += rng.random_range(-0.05..0.05));
        let tol = 1e-7;
        let grid: Vec<f64> = (0..25).map(|i| 0.2 * i as f64).collect();
        let sols: Vec<_> = grid
            .iter()
            .map(|&xi| solve_constrained_ls(&op, &y, xi, tol, 50_000).unwrap())
            .collect();
        let sg = (gamma as f64).sqrt();
        for w in 0..grid.len() - 1 {
            let (a, b) = (&sols[w], &sols[w + 1]);
            assert!(b.f_val <= a.f_val + 2.0 * tol, "trial {trial}: not monotone at {}", grid[w]);
            assert!((a.f_val - b.f_val) <= sg * (grid[w + 1] - grid[w]) + 2.0 * tol);
        }
        let plateau = sols.last().unwrap().f_val;
        for (xi, s) in grid.iter().zip(&sols) {
            assert!(l1(&s.z) <= xi + 1e-9);
            if s.f_val > plateau + 1e-4 {
                assert!((l1(&s.z) - xi).abs() <= 1e-6 * (1.0 + xi), "radius {xi} not active");
            }
        }
    }
}

#[test]
fn first_bit_of_sampled_rows_is_fair() {
    let mut rng = rng_at(32, &[0]);
    let rows = sample_rows(7, 100_000, &mut rng);
    let ones = rows.iter().filter(|r| r.get(0)).count() as f64 / 1e5;
    assert!((ones - 0.5).abs() < 0.01, "{ones}");
}

#[test]
fn rows_allow_duplicates() {
    let mut rng = rng_at(33, &[0]);
    let rows = sample_rows(2, 50, &mut rng);
    let distinct: std::collections::BTreeSet<u64> = rows.iter().map(BitString::bits).collect();
    assert!(distinct.len() <= 4 && rows.len() == 50);
}

#[test]
fn noisy_recovery_keeps_planted_support() {
    let (n, k, m) = (10, 2, 5);
    let d = csolve::column_count(n, k) as usize;
    let gamma = csolve::recommended_gamma(m, d, 0.5, csolve::CALIBRATED_GAMMA_C, n).unwrap();
    let mut hits = 0;
    for seed in 0..10u64 {
        let mut rng = rng_at(seed, &[34]);
        let rows = sample_rows(n, gamma, &mut rng);
        let op = WeightKOperator::new(n, k, &rows).unwrap();
        let x = csolve::planted_sparse(d, m, &mut rng);
        let eta = 1e-3;
        let mut y = op.apply(&x).unwrap();
        y.iter_mut().for_each(|v| *v += rng.random_range(-eta..eta));
        let inst = CsInstance {
            op,
            y,
            eta,
            eta_tilde: None,
            xi_upper: 2.0 * m as f64,
        };
        let (xs, diag) = csolve::solve_l1min(&inst, 0.1 * eta, csolve::default_tol_inner(0.1 * eta, gamma)).unwrap();
        // the midpoint of a 2 nu bracket can sit up to nu below the optimal radius
        let slack = (gamma as f64).sqrt() * 0.1 * eta + csolve::default_tol_inner(0.1 * eta, gamma);
        assert!(diag.residual <= diag.threshold + slack + 1e-12);
        let planted: Vec<usize> = (0..d).filter(|&i| x[i] != 0.0).collect();
        hits += (csolve::top_support(&xs, m) == planted) as usize;
    }
    assert!(hits >= 9, "{hits}/10");
}
