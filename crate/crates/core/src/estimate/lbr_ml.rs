//! Maximum-likelihood fitting through the stationary distribution of logit
//! best-response dynamics.
//!
//! A coarse rationality grid crossed with weight restarts locates the basin;
//! a joint Nelder-Mead refinement over weights and box-bounded rationality
//! parameters polishes it. A fixed-rationality variant fits weights only.

use serde::{Deserialize, Serialize};

use super::ce_ml::payoff_rows;
use super::optimizer::{optimize, optimize_with_starts, Block};
use super::{
    nll_from_probs, nll_with_floor, CountVector, EstimateResult, Estimator, FitConfig,
    FitDiagnostics, FitError, ModelParams,
};
use crate::dataset::Dataset;
use crate::game::{FeatureMap, Game2x2, Player, WeightVector};
use crate::lbr::{responses_from_payoffs, stationary_closed_form, stationary_from_responses, Rationality};

/// Fitted LBR-ML estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LbrMlEstimate {
    pub weights: (WeightVector, WeightVector),
    pub lambda: Rationality,
    pub nll: f64,
    pub fitted: crate::equilibrium::JointDistribution,
    pub diagnostics: FitDiagnostics,
}

fn objective(
    features: &FeatureMap,
    counts: &[u64; 4],
    floor: f64,
    w1: &[f64],
    w2: &[f64],
    lambda: Rationality,
) -> f64 {
    let (u1, u2) = payoff_rows(features, w1, w2);
    let responses = responses_from_payoffs(&u1, &u2, lambda);
    let stationary = stationary_from_responses(&responses);
    nll_from_probs(&stationary, counts, floor)
}

fn weight_blocks(features: &FeatureMap) -> [Block; 2] {
    [
        Block::Simplex {
            dim: features.dim(Player::One),
        },
        Block::Simplex {
            dim: features.dim(Player::Two),
        },
    ]
}

fn finish(
    features: &FeatureMap,
    counts: &CountVector,
    cfg: &FitConfig,
    w1: Vec<f64>,
    w2: Vec<f64>,
    lambda: Rationality,
    diagnostics: FitDiagnostics,
) -> Result<LbrMlEstimate, FitError> {
    let w1 = WeightVector::new(w1)?;
    let w2 = WeightVector::new(w2)?;
    let game = Game2x2::new(features.clone(), w1.clone(), w2.clone())?;
    let fitted = stationary_closed_form(&game, lambda);
    let nll = nll_with_floor(&fitted, counts, cfg.prob_floor);
    Ok(LbrMlEstimate {
        weights: (w1, w2),
        lambda,
        nll,
        fitted,
        diagnostics,
    })
}

/// Fits weights and both rationality parameters.
pub fn fit_lbr_ml(
    data: &Dataset,
    features: &FeatureMap,
    cfg: &FitConfig,
) -> Result<LbrMlEstimate, FitError> {
    let counts = CountVector::from_dataset(data)?;
    let n = counts.counts();
    let blocks = weight_blocks(features);

    // Stage 1: coarse grid over rationality pairs, few weight restarts each.
    let cell_cfg = FitConfig {
        restarts: (cfg.restarts / 8).max(2),
        ..cfg.clone()
    };
    let mut grid_best: Option<(f64, Vec<Vec<f64>>, Rationality)> = None;
    for &l1 in &cfg.lambda_grid {
        for &l2 in &cfg.lambda_grid {
            let lambda = Rationality::new(l1, l2)?;
            let outcome = optimize(
                |p| objective(features, &n, cfg.prob_floor, &p[0], &p[1], lambda),
                &blocks,
                &cell_cfg,
            )?;
            if grid_best
                .as_ref()
                .is_none_or(|(best, _, _)| outcome.objective < *best)
            {
                grid_best = Some((outcome.objective, outcome.params, lambda));
            }
        }
    }
    let (_, grid_params, grid_lambda) = grid_best.expect("rationality grid is non-empty");

    // Stage 2: joint refinement over weights and box-bounded rationality,
    // warm-started from the grid winner.
    let lambda_block = Block::Box {
        lo: 0.0,
        hi: cfg.lambda_max,
    };
    let joint_blocks = [blocks[0], blocks[1], lambda_block, lambda_block];
    let warm = vec![vec![
        grid_params[0].clone(),
        grid_params[1].clone(),
        vec![grid_lambda.lambda1()],
        vec![grid_lambda.lambda2()],
    ]];
    let outcome = optimize_with_starts(
        |p| {
            let lambda = Rationality::new(p[2][0], p[3][0]).expect("box keeps lambda in range");
            objective(features, &n, cfg.prob_floor, &p[0], &p[1], lambda)
        },
        &joint_blocks,
        &warm,
        cfg,
    )?;
    let lambda = Rationality::new(outcome.params[2][0], outcome.params[3][0])?;
    finish(
        features,
        &counts,
        cfg,
        outcome.params[0].clone(),
        outcome.params[1].clone(),
        lambda,
        FitDiagnostics {
            restarts: outcome.restart_trace.len(),
            best_restart: outcome.best_restart,
            converged: outcome.converged,
            restart_trace: outcome.restart_trace,
        },
    )
}

/// Fits weights with the rationality pair held fixed.
pub fn fit_lbr_ml_fixed(
    data: &Dataset,
    features: &FeatureMap,
    lambda: Rationality,
    cfg: &FitConfig,
) -> Result<LbrMlEstimate, FitError> {
    let counts = CountVector::from_dataset(data)?;
    let n = counts.counts();
    let blocks = weight_blocks(features);
    let outcome = optimize(
        |p| objective(features, &n, cfg.prob_floor, &p[0], &p[1], lambda),
        &blocks,
        cfg,
    )?;
    finish(
        features,
        &counts,
        cfg,
        outcome.params[0].clone(),
        outcome.params[1].clone(),
        lambda,
        FitDiagnostics {
            restarts: outcome.restart_trace.len(),
            best_restart: outcome.best_restart,
            converged: outcome.converged,
            restart_trace: outcome.restart_trace,
        },
    )
}

/// Registry entry for LBR-ML with estimated rationality.
pub struct LbrMlEstimator;

impl Estimator for LbrMlEstimator {
    fn name(&self) -> &'static str {
        "lbr-ml"
    }

    fn fit(
        &self,
        data: &Dataset,
        features: &FeatureMap,
        cfg: &FitConfig,
    ) -> Result<EstimateResult, FitError> {
        let est = fit_lbr_ml(data, features, cfg)?;
        Ok(to_result(self.name(), est))
    }
}

/// Registry entry for LBR-ML with pinned rationality.
pub struct LbrFixedEstimator {
    pub lambda: Rationality,
}

impl Default for LbrFixedEstimator {
    fn default() -> Self {
        LbrFixedEstimator {
            lambda: Rationality::new(1.0, 1.0).unwrap(),
        }
    }
}

impl Estimator for LbrFixedEstimator {
    fn name(&self) -> &'static str {
        "lbr-ml-fixed"
    }

    fn fit(
        &self,
        data: &Dataset,
        features: &FeatureMap,
        cfg: &FitConfig,
    ) -> Result<EstimateResult, FitError> {
        let est = fit_lbr_ml_fixed(data, features, self.lambda, cfg)?;
        Ok(to_result(self.name(), est))
    }
}

fn to_result(name: &str, est: LbrMlEstimate) -> EstimateResult {
    EstimateResult {
        method: name.to_string(),
        weights: est.weights,
        params: ModelParams::Rationality { lambda: est.lambda },
        nll: est.nll,
        fitted: est.fitted,
        diagnostics: est.diagnostics,
    }
}
