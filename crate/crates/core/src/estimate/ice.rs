//! Baseline that enforces CE consistency of the empirical distribution in
//! expectation: it searches simplex weights minimizing the hinge violation
//! of the four CE constraints evaluated at the empirical frequencies, and
//! predicts with the max-entropy CE of the fitted game.

use serde::{Deserialize, Serialize};

use super::ce_ml::payoff_rows;
use super::optimizer::{optimize, Block};
use super::{
    CountVector, EstimateResult, Estimator, FitConfig, FitDiagnostics, FitError, ModelParams,
};
use crate::dataset::Dataset;
use crate::equilibrium::max_entropy_ce;
use crate::game::{ce_constraints_from_payoffs, FeatureMap, Game2x2, Player, WeightVector};

/// Fitted ICE estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IceEstimate {
    pub weights: (WeightVector, WeightVector),
    /// Total hinge violation of the CE constraints at the optimum.
    pub violation: f64,
    pub fitted: crate::equilibrium::JointDistribution,
    pub diagnostics: FitDiagnostics,
}

fn violation(features: &FeatureMap, empirical: &[f64; 4], w1: &[f64], w2: &[f64]) -> f64 {
    let (u1, u2) = payoff_rows(features, w1, w2);
    ce_constraints_from_payoffs(&u1, &u2, empirical)
        .iter()
        .map(|&c| (-c).max(0.0))
        .sum()
}

/// Fits the ICE baseline.
pub fn fit_ice(
    data: &Dataset,
    features: &FeatureMap,
    cfg: &FitConfig,
) -> Result<IceEstimate, FitError> {
    let counts = CountVector::from_dataset(data)?;
    let empirical = counts.empirical().probs();
    let blocks = [
        Block::Simplex {
            dim: features.dim(Player::One),
        },
        Block::Simplex {
            dim: features.dim(Player::Two),
        },
    ];
    let outcome = optimize(
        |p| violation(features, &empirical, &p[0], &p[1]),
        &blocks,
        cfg,
    )?;
    let w1 = WeightVector::new(outcome.params[0].clone())?;
    let w2 = WeightVector::new(outcome.params[1].clone())?;
    let game = Game2x2::new(features.clone(), w1.clone(), w2.clone())?;
    let residual = violation(
        features,
        &empirical,
        w1.as_slice(),
        w2.as_slice(),
    );
    let fitted = max_entropy_ce(&game, 1e-9)?;
    Ok(IceEstimate {
        weights: (w1, w2),
        violation: residual,
        fitted,
        diagnostics: FitDiagnostics {
            restarts: outcome.restart_trace.len(),
            best_restart: outcome.best_restart,
            converged: outcome.converged,
            restart_trace: outcome.restart_trace,
        },
    })
}

/// Registry entry for the ICE baseline.
pub struct IceEstimator;

impl Estimator for IceEstimator {
    fn name(&self) -> &'static str {
        "ice"
    }

    fn fit(
        &self,
        data: &Dataset,
        features: &FeatureMap,
        cfg: &FitConfig,
    ) -> Result<EstimateResult, FitError> {
        let est = fit_ice(data, features, cfg)?;
        let nll = super::nll_with_floor(&est.fitted, &CountVector::from_dataset(data)?, cfg.prob_floor);
        Ok(EstimateResult {
            method: self.name().to_string(),
            weights: est.weights,
            params: ModelParams::CeViolation {
                violation: est.violation,
            },
            nll,
            fitted: est.fitted,
            diagnostics: est.diagnostics,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::JointDistribution;
    use crate::game::JointAction;
    use crate::scenarios::{chicken_dare_game, chicken_features, sample_iid};

    fn quick_cfg() -> FitConfig {
        FitConfig {
            restarts: 8,
            max_iter: 400,
            ..FitConfig::default()
        }
    }

    #[test]
    fn zero_violation_when_empirical_is_already_consistent() {
        // Data sampled from a CE of the true chicken game: the true weights
        // give (near) zero hinge loss, so the optimum must too.
        let w1 = WeightVector::new(vec![0.3, 0.7]).unwrap();
        let w2 = WeightVector::new(vec![0.4, 0.6]).unwrap();
        let g = chicken_dare_game(&w1, &w2).unwrap();
        let ce = max_entropy_ce(&g, 1e-9).unwrap();
        let data = sample_iid(&ce, 50_000, 37);
        let est = fit_ice(&data, &chicken_features(), &quick_cfg()).unwrap();
        assert!(est.violation < 1e-3, "violation {}", est.violation);
    }

    #[test]
    fn violation_at_true_weights_is_zero_for_exact_ce_empirical() {
        let w1 = WeightVector::new(vec![0.3, 0.7]).unwrap();
        let w2 = WeightVector::new(vec![0.4, 0.6]).unwrap();
        let g = chicken_dare_game(&w1, &w2).unwrap();
        let ce = max_entropy_ce(&g, 1e-9).unwrap();
        let v = violation(
            &chicken_features(),
            &ce.probs(),
            w1.as_slice(),
            w2.as_slice(),
        );
        assert!(v < 1e-7, "violation {v}");
    }

    #[test]
    fn point_mass_off_the_diagonal_violates_every_coordination_game() {
        // With one-hot features the weights are the (normalized) payoff
        // table itself. A point mass on a(2) breaks player 1's incentive
        // constraint in every coordination-ordered table.
        let identity: [Vec<f64>; 4] = [
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ];
        let features = FeatureMap::new(identity.clone(), identity).unwrap();
        let sigma = [0.0, 1.0, 0.0, 0.0];
        for (u1, u2) in [
            ([0.4, 0.1, 0.2, 0.3], [0.3, 0.1, 0.2, 0.4]),
            ([0.5, 0.05, 0.15, 0.3], [0.35, 0.05, 0.25, 0.35]),
        ] {
            let v = violation(&features, &sigma, &u1, &u2);
            assert!(v > 0.0, "coordination table must be violated, got {v}");
        }
    }

    #[test]
    fn violation_trace_is_nonnegative_everywhere() {
        let a1 = JointAction::from_index(1).unwrap();
        let data = sample_iid(&JointDistribution::point_mass(a1), 100, 41);
        let est = fit_ice(&data, &chicken_features(), &quick_cfg()).unwrap();
        assert!(est.violation >= 0.0);
        assert!(est.diagnostics.restart_trace.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn determinism_bitwise() {
        let data = sample_iid(&JointDistribution::new([0.4, 0.3, 0.2, 0.1]).unwrap(), 256, 43);
        let est1 = fit_ice(&data, &chicken_features(), &quick_cfg()).unwrap();
        let est2 = fit_ice(&data, &chicken_features(), &quick_cfg()).unwrap();
        assert_eq!(est1, est2);
    }
}
