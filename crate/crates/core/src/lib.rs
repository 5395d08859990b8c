//! Inverse game-theoretic learning for 2x2 normal-form games.
//!
//! Given observed joint actions, the crate recovers latent linear utility
//! weights under two behavioral models: maximum likelihood over the
//! correlated-equilibrium polytope (`ce-ml`) and maximum likelihood through
//! the stationary state of logit best-response dynamics (`lbr-ml`), plus an
//! empirical-consistency baseline (`ice`). It also ships the synthetic
//! chicken-dare and kinematic traffic-intersection generators and a
//! multi-seed experiment harness with CSV/JSON reports.

pub mod dataset;
pub mod equilibrium;
pub mod estimate;
pub mod experiments;
pub mod game;
pub mod lbr;
pub mod scenarios;

pub use dataset::{Dataset, Kinematics, KinematicState};
pub use equilibrium::{AlphaBeta, CeVertexSet, JointDistribution, MixtureWeights};
pub use estimate::{EstimateResult, Estimator, EstimatorRegistry, FitConfig};
pub use game::{FeatureMap, Game2x2, GameClass, GameSpec, JointAction, Player, WeightVector};
pub use lbr::Rationality;
