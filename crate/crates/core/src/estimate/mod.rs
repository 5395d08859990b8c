//! Inverse estimators: fitting latent utility weights to observed joint
//! actions.
//!
//! Three interchangeable methods share one interface:
//!
//! - `ce-ml`: maximum likelihood over mixtures of the CE-polytope vertices;
//! - `lbr-ml`: maximum likelihood through the stationary distribution of
//!   logit best-response dynamics (plus a `lbr-ml-fixed` variant that pins
//!   the rationality parameters);
//! - `ice`: a baseline that minimizes the hinge violation of the CE
//!   constraints under the empirical distribution.
//!
//! Each method implements [`Estimator`] and is registered by name in
//! [`EstimatorRegistry`]; experiment configs and the CLI select methods by
//! those names.

mod ce_ml;
mod ice;
mod lbr_ml;
pub mod optimizer;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ce_ml::{fit_ce_ml, CeMlEstimate};
pub use ice::{fit_ice, IceEstimate};
pub use lbr_ml::{fit_lbr_ml, fit_lbr_ml_fixed, LbrMlEstimate};

use crate::dataset::Dataset;
use crate::equilibrium::{EqError, JointDistribution, MixtureWeights};
use crate::game::{FeatureMap, GameError, WeightVector};
use crate::lbr::Rationality;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("no feasible (non-degenerate) weight candidate found across {restarts} restarts; best objective {best}")]
    NoFeasibleCandidate { restarts: usize, best: f64 },
    #[error("all optimizer starts diverged")]
    AllStartsDiverged,
    #[error("unknown estimation method '{0}'")]
    UnknownMethod(String),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Equilibrium(#[from] EqError),
    #[error(transparent)]
    Lbr(#[from] crate::lbr::LbrError),
}

/// Shared optimizer settings for every estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Number of Nelder-Mead starts per search.
    pub restarts: usize,
    /// Iteration cap per start.
    pub max_iter: usize,
    /// Seed for the restart draws.
    pub seed: u64,
    /// Coarse rationality grid searched by `lbr-ml` before refinement.
    pub lambda_grid: Vec<f64>,
    /// Upper bound for the rationality parameters during refinement.
    pub lambda_max: f64,
    /// Probability floor inside the log-likelihood.
    pub prob_floor: f64,
    /// Relative function-spread tolerance for Nelder-Mead convergence.
    pub tol: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            restarts: 32,
            max_iter: 2000,
            seed: 42,
            lambda_grid: vec![0.5, 1.0, 2.0, 3.0],
            lambda_max: 10.0,
            prob_floor: 1e-12,
            tol: 1e-12,
        }
    }
}

/// Observation counts per joint action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountVector {
    counts: [u64; 4],
}

impl CountVector {
    pub fn new(counts: [u64; 4]) -> Result<Self, FitError> {
        if counts.iter().sum::<u64>() == 0 {
            return Err(FitError::EmptyDataset);
        }
        Ok(CountVector { counts })
    }

    /// Tallies a dataset; the negative log-likelihood depends on the data
    /// only through these counts.
    pub fn from_dataset(data: &Dataset) -> Result<Self, FitError> {
        if data.is_empty() {
            return Err(FitError::EmptyDataset);
        }
        CountVector::new(data.action_counts())
    }

    pub fn counts(&self) -> [u64; 4] {
        self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// The empirical distribution `n / T`.
    pub fn empirical(&self) -> JointDistribution {
        let t = self.total() as f64;
        let p = self.counts.map(|c| c as f64 / t);
        JointDistribution::new(p).expect("counts normalize to a distribution")
    }
}

/// Negative log-likelihood of the counts under `p`, with the default
/// probability floor.
pub fn nll(p: &JointDistribution, n: &CountVector) -> f64 {
    nll_with_floor(p, n, 1e-12)
}

/// Negative log-likelihood with an explicit floor: `-sum n_l ln(max(p_l,
/// floor))`. The floor keeps the objective finite when a vertex assigns an
/// exact zero to an observed action.
pub fn nll_with_floor(p: &JointDistribution, n: &CountVector, floor: f64) -> f64 {
    nll_from_probs(&p.probs(), &n.counts, floor)
}

pub(crate) fn nll_from_probs(p: &[f64; 4], counts: &[u64; 4], floor: f64) -> f64 {
    -counts
        .iter()
        .zip(p)
        .filter(|(&c, _)| c > 0)
        .map(|(&c, &pl)| c as f64 * pl.max(floor).ln())
        .sum::<f64>()
}

/// Optimizer bookkeeping attached to every estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Starts actually run (including warm starts).
    pub restarts: usize,
    pub best_restart: usize,
    pub converged: bool,
    /// Final objective per start.
    pub restart_trace: Vec<f64>,
}

/// Method-specific fitted parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelParams {
    /// CE-vertex mixture weights.
    Mixture { y: MixtureWeights },
    /// Rationality pair of the logit dynamics.
    Rationality { lambda: Rationality },
    /// Residual CE-constraint violation of the baseline.
    CeViolation { violation: f64 },
}

/// Unified estimate emitted by every method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub method: String,
    pub weights: (WeightVector, WeightVector),
    pub params: ModelParams,
    pub nll: f64,
    pub fitted: JointDistribution,
    pub diagnostics: FitDiagnostics,
}

/// A fitting strategy over observed joint actions.
pub trait Estimator: Send + Sync {
    /// Registry name of the method.
    fn name(&self) -> &'static str;

    fn fit(
        &self,
        data: &Dataset,
        features: &FeatureMap,
        cfg: &FitConfig,
    ) -> Result<EstimateResult, FitError>;
}

/// Name-keyed registry of estimators.
pub struct EstimatorRegistry {
    methods: BTreeMap<&'static str, Arc<dyn Estimator>>,
}

impl EstimatorRegistry {
    /// Empty registry.
    pub fn new() -> Self {
        EstimatorRegistry {
            methods: BTreeMap::new(),
        }
    }

    /// Registry holding the built-in methods: `ce-ml`, `ice`, `lbr-ml`,
    /// `lbr-ml-fixed`.
    pub fn with_builtins() -> Self {
        let mut r = EstimatorRegistry::new();
        r.register(Arc::new(ce_ml::CeMlEstimator));
        r.register(Arc::new(lbr_ml::LbrMlEstimator));
        r.register(Arc::new(lbr_ml::LbrFixedEstimator::default()));
        r.register(Arc::new(ice::IceEstimator));
        r
    }

    pub fn register(&mut self, estimator: Arc<dyn Estimator>) {
        self.methods.insert(estimator.name(), estimator);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Estimator>, FitError> {
        self.methods
            .get(name)
            .cloned()
            .ok_or_else(|| FitError::UnknownMethod(name.to_string()))
    }

    /// Registered names in sorted order.
    pub fn names(&self) -> Vec<&'static str> {
        self.methods.keys().copied().collect()
    }
}

impl Default for EstimatorRegistry {
    fn default() -> Self {
        EstimatorRegistry::with_builtins()
    }
}
