//! Shared generators for the integration suites.
#![allow(dead_code)] // each test binary uses a different subset

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gamefit_core::equilibrium::{JointDistribution, MixtureWeights};
use gamefit_core::game::Game2x2;
use gamefit_core::scenarios::game_from_payoffs;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A game with i.i.d. uniform(0,1) payoff tables; any class can occur.
pub fn random_payoff_game(rng: &mut ChaCha8Rng) -> Game2x2 {
    let mut table = || {
        [
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
        ]
    };
    let u1 = table();
    let u2 = table();
    game_from_payoffs(u1, u2).expect("positive payoff tables")
}

/// A strict coordination game: all four margins drawn positive.
pub fn random_coordination_game(rng: &mut ChaCha8Rng) -> Game2x2 {
    let (u13, u12) = (rng.random_range(0.1..1.0), rng.random_range(0.1..1.0));
    let (m1, m2) = (rng.random_range(0.05..1.0), rng.random_range(0.05..1.0));
    let u1 = [u13 + m1, u12, u13, u12 + m2];
    let (u22, u23) = (rng.random_range(0.1..1.0), rng.random_range(0.1..1.0));
    let (m3, m4) = (rng.random_range(0.05..1.0), rng.random_range(0.05..1.0));
    let u2 = [u22 + m3, u22, u23, u23 + m4];
    game_from_payoffs(u1, u2).expect("positive payoff tables")
}

/// A strict anti-coordination game: all four margins drawn negative.
pub fn random_anti_coordination_game(rng: &mut ChaCha8Rng) -> Game2x2 {
    let (u11, u14) = (rng.random_range(0.1..1.0), rng.random_range(0.1..1.0));
    let (m1, m2) = (rng.random_range(0.05..1.0), rng.random_range(0.05..1.0));
    let u1 = [u11, u14 + m2, u11 + m1, u14];
    let (u21, u24) = (rng.random_range(0.1..1.0), rng.random_range(0.1..1.0));
    let (m3, m4) = (rng.random_range(0.05..1.0), rng.random_range(0.05..1.0));
    let u2 = [u21, u21 + m3, u24 + m4, u24];
    game_from_payoffs(u1, u2).expect("positive payoff tables")
}

pub fn random_distribution(rng: &mut ChaCha8Rng) -> JointDistribution {
    let raw: [f64; 4] = std::array::from_fn(|_| -rng.random_range(1e-12_f64..1.0).ln());
    let sum: f64 = raw.iter().sum();
    JointDistribution::new(raw.map(|x| x / sum)).expect("normalized")
}

pub fn random_mixture(rng: &mut ChaCha8Rng) -> MixtureWeights {
    let raw: [f64; 5] = std::array::from_fn(|_| -rng.random_range(1e-12_f64..1.0).ln());
    let sum: f64 = raw.iter().sum();
    MixtureWeights::new(raw.map(|x| x / sum)).expect("normalized")
}

/// Exhaustive 0.01-step simplex grid: the best entropy among grid points
/// that satisfy the CE constraints within `tol`, if any point does.
pub fn grid_best_ce_entropy(game: &Game2x2, tol: f64) -> Option<f64> {
    const STEPS: u32 = 100;
    let mut best: Option<f64> = None;
    for i in 0..=STEPS {
        for j in 0..=(STEPS - i) {
            for k in 0..=(STEPS - i - j) {
                let l = STEPS - i - j - k;
                let p = [
                    i as f64 / STEPS as f64,
                    j as f64 / STEPS as f64,
                    k as f64 / STEPS as f64,
                    l as f64 / STEPS as f64,
                ];
                let d = JointDistribution::new(p).expect("grid point");
                if game
                    .ce_constraint_values(&d)
                    .iter()
                    .all(|&c| c >= -tol)
                {
                    let h = d.entropy();
                    if best.is_none_or(|b| h > b) {
                        best = Some(h);
                    }
                }
            }
        }
    }
    best
}
