//! Property suites for the logit dynamics: the closed form against the
//! power-iteration oracle, stochastic-matrix structure, and chain behavior.

mod common;

use common::{random_payoff_game, rng};
use gamefit_core::game::Player;
use gamefit_core::lbr::{
    simulate_chain, stationary_closed_form, stationary_power_iteration, transition_matrix,
    Rationality,
};
use gamefit_core::scenarios::game_from_payoffs;
use rand::Rng;

#[test]
fn closed_form_matches_power_iteration_on_random_games() {
    let mut rng = rng(29);
    let tol = 1e-14;
    for _ in 0..1000 {
        let g = random_payoff_game(&mut rng);
        let lambda = Rationality::new(
            rng.random_range(0.0..5.0),
            rng.random_range(0.0..5.0),
        )
        .unwrap();
        let closed = stationary_closed_form(&g, lambda);
        let power = stationary_power_iteration(&g, lambda, tol, 1_000_000).unwrap();
        let tv = closed.tv_distance(&power);
        assert!(tv <= 1e-10, "tv {tv}");
        // The returned iterate is a near-fixed point of the chain.
        let next = transition_matrix(&g, lambda).propagate(&power.probs());
        let l1: f64 = power
            .probs()
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(l1 <= 2.0 * tol, "fixed-point residual {l1}");
    }
}

#[test]
fn stationary_distribution_is_a_product_and_a_fixed_point() {
    let mut rng = rng(31);
    for _ in 0..500 {
        let g = random_payoff_game(&mut rng);
        let lambda = Rationality::new(
            rng.random_range(0.0..5.0),
            rng.random_range(0.0..5.0),
        )
        .unwrap();
        let sigma = stationary_closed_form(&g, lambda);
        let p = sigma.probs();
        assert!((p[0] * p[3] - p[1] * p[2]).abs() <= 1e-12);
        let next = transition_matrix(&g, lambda).propagate(&p);
        let residual: f64 = p.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        assert!(residual <= 1e-12, "residual {residual}");
    }
}

#[test]
fn transition_matrix_stays_stochastic_under_extreme_scales() {
    let mut rng = rng(37);
    for _ in 0..300 {
        let scale = rng.random_range(1.0..100.0);
        let mut table = || {
            [
                rng.random_range(0.0..1.0) * scale,
                rng.random_range(0.0..1.0) * scale,
                rng.random_range(0.0..1.0) * scale,
                rng.random_range(0.0..1.0) * scale,
            ]
        };
        let g = game_from_payoffs(table(), table()).unwrap();
        let lambda = Rationality::new(
            rng.random_range(0.0..50.0),
            rng.random_range(0.0..50.0),
        )
        .unwrap();
        let p = transition_matrix(&g, lambda);
        for row in p.rows() {
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12, "row sum {sum}");
            assert!(row.iter().all(|&x| x > 0.0), "zero entry in {row:?}");
        }
    }
}

#[test]
fn diagonal_mass_is_monotone_in_rationality_on_coordination_games() {
    // Both the balanced example game and a tilted one.
    for (u1, u2) in [
        ([4.0, 1.0, 2.0, 3.0], [3.0, 1.0, 2.0, 4.0]),
        ([5.0, 1.0, 2.0, 3.0], [3.0, 1.0, 2.0, 4.0]),
    ] {
        let g = game_from_payoffs(u1, u2).unwrap();
        let mut prev = 0.0;
        for l in [0.0, 0.5, 1.0, 2.0, 4.0] {
            let p = stationary_closed_form(&g, Rationality::new(l, l).unwrap()).probs();
            let diag = p[0] + p[3];
            assert!(diag + 1e-12 >= prev, "lambda {l}: {diag} < {prev}");
            prev = diag;
        }
    }
}

#[test]
fn chain_frequencies_track_the_stationary_distribution() {
    let g = game_from_payoffs([5.0, 1.0, 2.0, 3.0], [3.0, 1.0, 2.0, 4.0]).unwrap();
    let lambda = Rationality::new(2.0, 2.0).unwrap();
    let stationary = stationary_closed_form(&g, lambda);
    let data = simulate_chain(&g, lambda, 100_000, 41, 1_000);
    let counts = data.action_counts();
    let total: f64 = counts.iter().sum::<u64>() as f64;
    let tv: f64 = counts
        .iter()
        .zip(stationary.probs())
        .map(|(&c, p)| (c as f64 / total - p).abs())
        .sum::<f64>()
        * 0.5;
    assert!(tv <= 0.02, "tv {tv}");
}

#[test]
fn scaling_payoffs_and_inverting_rationality_cancels() {
    // stationary(c * u, lambda / c) == stationary(u, lambda); the simplex
    // constraint on weights is what pins this scale in estimation.
    let mut rng = rng(43);
    for _ in 0..200 {
        let base = random_payoff_game(&mut rng);
        let c = rng.random_range(0.1..10.0);
        let scaled = game_from_payoffs(
            base.payoff_row(Player::One).map(|x| x * c),
            base.payoff_row(Player::Two).map(|x| x * c),
        )
        .unwrap();
        let l1 = rng.random_range(0.0..5.0);
        let l2 = rng.random_range(0.0..5.0);
        let sigma = stationary_closed_form(&base, Rationality::new(l1, l2).unwrap());
        let sigma_scaled =
            stationary_closed_form(&scaled, Rationality::new(l1 / c, l2 / c).unwrap());
        assert!(sigma.tv_distance(&sigma_scaled) <= 1e-12);
    }
}
