mod common;

use common::{benchmark_arm, dirichlet_matrix, generic_arm, uniform_rewards};
use rblab_core::envgen::{default_spread, reset_matrix, EnvKind};
use rblab_core::rng::seeded;
use rblab_core::whittle::{
    default_bracket, default_grid, indexability_check, solve_charged, whittle_bisection_oracle, whittle_indices,
    whittle_indices_traced,
};
use rblab_core::Arm;

fn assert_matches_oracle(arm: &Arm, tol: f64) {
    let w = whittle_indices(arm).unwrap();
    let (lo, hi) = default_bracket(arm);
    for (s, &ws) in w.iter().enumerate() {
        let o = whittle_bisection_oracle(arm, s, lo, hi).unwrap();
        assert!((ws - o).abs() <= tol, "state {s}: adaptive greedy {ws}, bisection {o}");
    }
}

#[test]
fn adaptive_greedy_matches_bisection_on_benchmark_arms() {
    let mut rng = seeded(100);
    for k in 0..60 {
        let kind = if k % 2 == 0 { EnvKind::A } else { EnvKind::B };
        let arm = benchmark_arm(kind, 5, default_spread(5), &mut rng);
        assert_matches_oracle(&arm, 1e-6);
    }
}

#[test]
fn adaptive_greedy_matches_bisection_with_dirichlet_passive_dynamics() {
    let mut rng = seeded(101);
    for k in 0..40 {
        let kind = if k % 2 == 0 { EnvKind::A } else { EnvKind::B };
        let (r0, r1) = kind.rewards(6);
        let arm = Arm::new(dirichlet_matrix(6, &mut rng), reset_matrix(6), r0, r1).unwrap();
        assert_matches_oracle(&arm, 1e-6);
    }
}

#[test]
fn generic_indexable_arms_match_bisection() {
    let mut rng = seeded(102);
    let mut checked = 0;
    while checked < 30 {
        let arm = generic_arm(4, &mut rng);
        if !indexability_check(&arm, &default_grid(&arm, 400)).unwrap().indexable {
            continue;
        }
        assert_matches_oracle(&arm, 1e-6);
        assert!(whittle_indices_traced(&arm, 0).unwrap().thresholds_nondecreasing());
        checked += 1;
    }
}

#[test]
fn bisection_matches_dense_grid_scan() {
    let mut rng = seeded(103);
    let arm = benchmark_arm(EnvKind::A, 5, 0.1, &mut rng);
    let (lo, hi) = default_bracket(&arm);
    let points = 10_000;
    let step = (hi - lo) / (points - 1) as f64;
    let mut first_passive = [None; 5];
    let mut bias = Vec::new();
    for j in 0..points {
        let lambda = lo + step * j as f64;
        let passive = solve_charged(&arm, lambda, &mut bias).unwrap().passive_set();
        for (first, &p) in first_passive.iter_mut().zip(&passive) {
            if p && first.is_none() {
                *first = Some(lambda);
            }
        }
    }
    for (s, first) in first_passive.iter().enumerate() {
        let boundary = first.unwrap();
        let o = whittle_bisection_oracle(&arm, s, lo, hi).unwrap();
        assert!(o <= boundary + 1e-9 && o > boundary - step - 1e-9, "state {s}: {o} not in ({}, {boundary}]", boundary - step);
    }
}

#[test]
fn identical_dynamics_give_reward_gaps() {
    let mut rng = seeded(104);
    for k in 0..50 {
        let s = 2 + k % 6;
        let p = dirichlet_matrix(s, &mut rng);
        let r0 = uniform_rewards(s, &mut rng);
        let r1 = uniform_rewards(s, &mut rng);
        let arm = Arm::new(p.clone(), p, r0.clone(), r1.clone()).unwrap();
        let w = whittle_indices(&arm).unwrap();
        for x in 0..s {
            assert!((w[x] - (r1[x] - r0[x])).abs() <= 1e-8);
        }
        assert!(indexability_check(&arm, &default_grid(&arm, 50)).unwrap().indexable);
    }
}

#[test]
fn indices_shift_and_scale_with_rewards() {
    let mut rng = seeded(105);
    for _ in 0..20 {
        let arm = benchmark_arm(EnvKind::A, 6, default_spread(6), &mut rng);
        let w = whittle_indices(&arm).unwrap();
        let map = |arm: &Arm, f: &dyn Fn(f64) -> f64| Arm {
            r_passive: arm.r_passive.iter().map(|&x| f(x)).collect(),
            r_active: arm.r_active.iter().map(|&x| f(x)).collect(),
            ..arm.clone()
        };
        let shifted = whittle_indices(&map(&arm, &|x| x + 7.5)).unwrap();
        let scaled = whittle_indices(&map(&arm, &|x| 0.3 * x)).unwrap();
        for s in 0..6 {
            assert!((shifted[s] - w[s]).abs() <= 1e-9, "shift at {s}");
            assert!((scaled[s] - 0.3 * w[s]).abs() <= 1e-9 * w[s].abs().max(1.0), "scale at {s}");
        }
    }
}

#[test]
fn indices_do_not_depend_on_the_reference_state() {
    let mut rng = seeded(106);
    for _ in 0..20 {
        let arm = generic_arm(5, &mut rng);
        let base = whittle_indices_traced(&arm, 0).unwrap().indices;
        for reference in 1..5 {
            let other = whittle_indices_traced(&arm, reference).unwrap().indices;
            for (a, b) in base.iter().zip(&other) {
                assert!((a - b).abs() <= 1e-10, "reference {reference}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn indices_do_not_depend_on_the_reference_state_at_benchmark_scale() {
    let mut rng = seeded(107);
    for _ in 0..20 {
        let arm = benchmark_arm(EnvKind::A, 10, default_spread(10), &mut rng);
        let base = whittle_indices_traced(&arm, 0).unwrap().indices;
        for reference in [3, 9] {
            let other = whittle_indices_traced(&arm, reference).unwrap().indices;
            for (a, b) in base.iter().zip(&other) {
                assert!((a - b).abs() <= 1e-10, "reference {reference}: {a} vs {b}");
            }
        }
    }
}
