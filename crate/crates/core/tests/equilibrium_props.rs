//! Property suites for the CE geometry: vertex feasibility, scale
//! invariance, mixture closure, and the grid-oracle check of the
//! max-entropy solver.

mod common;

use common::{
    grid_best_ce_entropy, random_anti_coordination_game, random_coordination_game,
    random_mixture, random_payoff_game, rng,
};
use gamefit_core::equilibrium::{
    alpha_beta, ce_vertices, is_ce, max_entropy_ce, mixture_distribution, JointDistribution,
};
use gamefit_core::game::{GameClass, Player, DEGENERACY_TOL};
use gamefit_core::scenarios::game_from_payoffs;

use proptest::prelude::*;

#[test]
fn vertices_feasible_on_random_coordination_games() {
    let mut rng = rng(11);
    for _ in 0..1000 {
        let g = random_coordination_game(&mut rng);
        let vs = ce_vertices(&g).expect("coordination game has vertices");
        for v in vs.as_array() {
            let worst = g
                .ce_constraint_values(v)
                .iter()
                .fold(f64::INFINITY, |a, &b| a.min(b));
            assert!(worst >= -1e-10, "constraint {worst} at {:?}", v.probs());
        }
    }
}

#[test]
fn vertices_feasible_on_random_anti_coordination_games() {
    let mut rng = rng(13);
    for _ in 0..1000 {
        let g = random_anti_coordination_game(&mut rng);
        assert_eq!(g.classify(DEGENERACY_TOL), GameClass::AntiCoordination);
        let vs = ce_vertices(&g).expect("anti-coordination game has vertices");
        for v in vs.as_array() {
            let worst = g
                .ce_constraint_values(v)
                .iter()
                .fold(f64::INFINITY, |a, &b| a.min(b));
            assert!(worst >= -1e-10, "constraint {worst} at {:?}", v.probs());
        }
    }
}

#[test]
fn vertices_invariant_under_positive_rescaling() {
    let mut rng = rng(17);
    for _ in 0..200 {
        let g = random_coordination_game(&mut rng);
        let scale1 = rng.random_range(0.1..10.0);
        let scale2 = rng.random_range(0.1..10.0);
        let u1 = g.payoff_row(Player::One).map(|x| x * scale1);
        let u2 = g.payoff_row(Player::Two).map(|x| x * scale2);
        let scaled = game_from_payoffs(u1, u2).unwrap();
        let a = ce_vertices(&g).unwrap();
        let b = ce_vertices(&scaled).unwrap();
        for (va, vb) in a.as_array().iter().zip(b.as_array()) {
            for (x, y) in va.probs().iter().zip(vb.probs()) {
                assert!((x - y).abs() <= 1e-12, "{x} vs {y}");
            }
        }
    }
}

#[test]
fn mixtures_stay_inside_the_ce_set() {
    let mut rng = rng(19);
    for i in 0..1000 {
        let g = if i % 2 == 0 {
            random_coordination_game(&mut rng)
        } else {
            random_anti_coordination_game(&mut rng)
        };
        let vs = ce_vertices(&g).unwrap();
        let y = random_mixture(&mut rng);
        let p = mixture_distribution(&vs, &y);
        assert!(is_ce(&g, &p, 1e-10), "mixture {:?} infeasible", p.probs());
    }
}

#[test]
fn max_entropy_ce_beats_the_grid_oracle() {
    // Stratified games so all classes are exercised; the solver result must
    // be feasible and at least as good as any feasible grid point.
    let mut rng = rng(23);
    for i in 0..30 {
        let g = match i % 3 {
            0 => random_coordination_game(&mut rng),
            1 => random_anti_coordination_game(&mut rng),
            _ => random_payoff_game(&mut rng),
        };
        if g.classify(DEGENERACY_TOL) == GameClass::Degenerate {
            continue;
        }
        let solved = max_entropy_ce(&g, 1e-9).expect("solver converges");
        assert!(is_ce(&g, &solved, 1e-6));
        if let Some(grid) = grid_best_ce_entropy(&g, 1e-9) {
            assert!(
                grid <= solved.entropy() + 1e-3,
                "grid {grid} vs solver {}",
                solved.entropy()
            );
        }
    }
}

#[test]
fn max_entropy_ce_binds_alpha_ratio_on_the_chicken_game() {
    // The chicken-dare max-entropy CE sits on the boundary where player 1's
    // second incentive constraint binds: p4/p3 equals alpha exactly.
    let w1 = gamefit_core::game::WeightVector::new(vec![0.3, 0.7]).unwrap();
    let w2 = gamefit_core::game::WeightVector::new(vec![0.4, 0.6]).unwrap();
    let g = gamefit_core::scenarios::chicken_dare_game(&w1, &w2).unwrap();
    let ce = max_entropy_ce(&g, 1e-9).unwrap();
    let ab = alpha_beta(&g).unwrap();
    let p = ce.probs();
    assert!(
        (p[3] / p[2] - ab.alpha).abs() < 1e-4,
        "p4/p3 = {}, alpha = {}",
        p[3] / p[2],
        ab.alpha
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cached_payoffs_equal_fresh_dot_products(seed in 0u64..1000) {
        let mut r = rng(seed);
        let g = random_payoff_game(&mut r);
        let (w1, w2) = g.weights();
        for player in Player::BOTH {
            let w = if player == Player::One { w1 } else { w2 };
            for a in gamefit_core::game::JointAction::ALL {
                let fresh: f64 = g
                    .features()
                    .features(player, a)
                    .iter()
                    .zip(w.as_slice())
                    .map(|(x, y)| x * y)
                    .sum();
                prop_assert!((g.payoff(player, a) - fresh).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn ce_constraints_are_linear_in_sigma(
        raw_p in proptest::array::uniform4(1e-6_f64..1.0),
        raw_q in proptest::array::uniform4(1e-6_f64..1.0),
        lambda in 0.0_f64..1.0,
        seed in 0u64..1000,
    ) {
        let mut r = rng(seed);
        let g = random_payoff_game(&mut r);
        let norm = |raw: [f64; 4]| {
            let s: f64 = raw.iter().sum();
            JointDistribution::new(raw.map(|x| x / s)).unwrap()
        };
        let p = norm(raw_p);
        let q = norm(raw_q);
        let mix_probs: [f64; 4] = std::array::from_fn(|i| {
            lambda * p.probs()[i] + (1.0 - lambda) * q.probs()[i]
        });
        let mix = JointDistribution::new(mix_probs).unwrap();
        let cp = g.ce_constraint_values(&p);
        let cq = g.ce_constraint_values(&q);
        let cm = g.ce_constraint_values(&mix);
        for j in 0..4 {
            let expected = lambda * cp[j] + (1.0 - lambda) * cq[j];
            prop_assert!((cm[j] - expected).abs() <= 1e-12);
        }
    }

    #[test]
    fn point_mass_constraints_reduce_to_payoff_differences(seed in 0u64..1000) {
        let mut r = rng(seed);
        let g = random_payoff_game(&mut r);
        let u1 = g.payoff_row(Player::One);
        let u2 = g.payoff_row(Player::Two);
        // Point mass on a(1): only the first terms of constraints 1 and 3
        // survive.
        let a1 = gamefit_core::game::JointAction::from_index(1).unwrap();
        let c = g.ce_constraint_values(&JointDistribution::point_mass(a1));
        prop_assert!((c[0] - (u1[0] - u1[2])).abs() <= 1e-12);
        prop_assert!((c[2] - (u2[0] - u2[1])).abs() <= 1e-12);
        prop_assert!(c[1] == 0.0 && c[3] == 0.0);
    }
}
