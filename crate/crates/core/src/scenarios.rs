//! Data-generating protocols: game constructors for the two experimental
//! domains and the samplers that produce observation datasets.
//!
//! Action semantics for both domains: action 1 = wait, action 2 = go. The
//! joint action `a(4) = (go, go)` is the conflict outcome and carries the
//! collision-risk term in the traffic features.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{BadKinematics, Dataset, Kinematics, KinematicState};
use crate::equilibrium::JointDistribution;
use crate::game::{
    FeatureMap, Game2x2, GameClass, GameError, JointAction, WeightVector, DEGENERACY_TOL,
};

/// Guard added to `|delta|` in the collision-risk feature.
pub const TRAFFIC_EPSILON: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("payoff tables must be nonnegative with a positive sum, got sum {0}")]
    BadPayoffTable(f64),
    #[error("chicken-dare weights must be 2-dimensional, got {0}")]
    BadChickenDim(usize),
    #[error("weights induce a degenerate game (boundary weight): {0:?}")]
    DegenerateWeights(Vec<f64>),
    #[error("traffic weights must be 8-dimensional, got {0}")]
    BadTrafficDim(usize),
    #[error("sweep grid is empty or malformed: {0}")]
    BadGrid(String),
    #[error("behavioral noise must be positive and finite, got {0}")]
    BadNoise(f64),
    #[error(transparent)]
    Kinematics(#[from] BadKinematics),
    #[error(transparent)]
    Game(#[from] GameError),
}

/// Builds a game with the given payoff tables, using scaled one-hot features
/// so that the simplex-normalized weights reproduce the payoffs exactly.
///
/// Each player's features are `sum(u_i) * e_l` at joint action `a(l)` and
/// the weights are `u_i / sum(u_i)`; payoffs must be nonnegative with a
/// positive sum.
pub fn game_from_payoffs(u1: [f64; 4], u2: [f64; 4]) -> Result<Game2x2, ScenarioError> {
    let mut sides = Vec::with_capacity(2);
    for u in [u1, u2] {
        let sum: f64 = u.iter().sum();
        if !sum.is_finite() || sum <= 0.0 || u.iter().any(|&x| x < 0.0) {
            return Err(ScenarioError::BadPayoffTable(sum));
        }
        let mut rows: [Vec<f64>; 4] = Default::default();
        for (l, row) in rows.iter_mut().enumerate() {
            let mut r = vec![0.0; 4];
            r[l] = sum;
            *row = r;
        }
        let weights = WeightVector::normalized(u.to_vec())?;
        sides.push((rows, weights));
    }
    let (rows2, w2) = sides.pop().unwrap();
    let (rows1, w1) = sides.pop().unwrap();
    Ok(Game2x2::new(FeatureMap::new(rows1, rows2)?, w1, w2)?)
}

/// The fixed two-feature map of the chicken-dare game.
///
/// Feature 1 is the normalized advance payoff (1 exactly when the player
/// goes alone) and feature 2 the normalized safety payoff (1 unless both
/// go). Every interior simplex weight pair yields an anti-coordination
/// game; boundary weights degenerate.
pub fn chicken_features() -> FeatureMap {
    // Rows in a(1)..a(4) order = (wait,wait), (wait,go), (go,wait), (go,go).
    let p1 = [
        vec![0.0, 1.0],
        vec![0.0, 1.0],
        vec![1.0, 1.0],
        vec![0.0, 0.0],
    ];
    let p2 = [
        vec![0.0, 1.0],
        vec![1.0, 1.0],
        vec![0.0, 1.0],
        vec![0.0, 0.0],
    ];
    FeatureMap::new(p1, p2).expect("fixed feature map is well-formed")
}

/// Builds the chicken-dare game for 2-dimensional simplex weights.
pub fn chicken_dare_game(
    w1: &WeightVector,
    w2: &WeightVector,
) -> Result<Game2x2, ScenarioError> {
    for w in [w1, w2] {
        if w.dim() != 2 {
            return Err(ScenarioError::BadChickenDim(w.dim()));
        }
    }
    let g = Game2x2::new(chicken_features(), w1.clone(), w2.clone())?;
    if g.classify(DEGENERACY_TOL) == GameClass::Degenerate {
        return Err(ScenarioError::DegenerateWeights(
            w1.as_slice().iter().chain(w2.as_slice()).copied().collect(),
        ));
    }
    Ok(g)
}

/// Ground-truth weight pair for the traffic game, 8 entries per player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficWeights {
    pub w1: WeightVector,
    pub w2: WeightVector,
}

impl TrafficWeights {
    pub fn new(w1: WeightVector, w2: WeightVector) -> Result<Self, ScenarioError> {
        for w in [&w1, &w2] {
            if w.dim() != 8 {
                return Err(ScenarioError::BadTrafficDim(w.dim()));
            }
        }
        Ok(TrafficWeights { w1, w2 })
    }

    /// The bundled ground truth used by the traffic experiments.
    pub fn default_ground_truth() -> Self {
        let w1 = WeightVector::new(vec![0.05, 0.00, 0.02, 0.00, 0.90, 0.00, 0.03, 0.00]).unwrap();
        let w2 = WeightVector::new(vec![0.01, 0.00, 0.04, 0.00, 0.94, 0.00, 0.01, 0.00]).unwrap();
        TrafficWeights { w1, w2 }
    }
}

/// Kinematic 8-dimensional feature map of the traffic interaction.
///
/// With `tau_i` the time to intersection and `delta = tau2 - tau1`, the
/// per-player features select, per joint action: the waiting baseline
/// `(-|delta|, 1)`, the yield cost `(-tau_self, 1)`, the sole-go urgency
/// `(1/tau_self, 1)`, and the collision risk `(-1/(|delta|+eps), 1)`, each
/// pair occupying its own two slots so that 8 weights cover the four cells.
pub fn traffic_features(k: &KinematicState) -> FeatureMap {
    traffic_features_for(k.tau1(), k.tau2())
        .expect("kinematic state guarantees positive times to intersection")
}

/// As [`traffic_features`] but directly from the two times-to-intersection.
pub fn traffic_features_for(tau1: f64, tau2: f64) -> Result<FeatureMap, ScenarioError> {
    if !(tau1.is_finite() && tau2.is_finite() && tau1 > 0.0 && tau2 > 0.0) {
        return Err(ScenarioError::BadGrid(format!(
            "times to intersection must be positive, got ({tau1}, {tau2})"
        )));
    }
    let delta = tau2 - tau1;
    let abs_delta = delta.abs();
    let collision = -1.0 / (abs_delta + TRAFFIC_EPSILON);
    let wait_both = vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -abs_delta, 1.0];
    let both_go = vec![0.0, 0.0, 0.0, 0.0, collision, 1.0, 0.0, 0.0];
    let yields = |tau: f64| vec![0.0, 0.0, -tau, 1.0, 0.0, 0.0, 0.0, 0.0];
    let goes = |tau: f64| vec![1.0 / tau, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    // Row order a(1)..a(4) = (wait,wait), (wait,go), (go,wait), (go,go):
    // player 1 goes alone at a(3), player 2 at a(2).
    let p1 = [wait_both.clone(), yields(tau1), goes(tau1), both_go.clone()];
    let p2 = [wait_both, goes(tau2), yields(tau2), both_go];
    Ok(FeatureMap::new(p1, p2)?)
}

/// A linearly spaced axis of a sweep lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeSteps {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl RangeSteps {
    pub fn values(&self) -> Vec<f64> {
        if self.steps <= 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.steps as f64 - 1.0);
        (0..self.steps)
            .map(|i| self.min + step * i as f64)
            .collect()
    }

    fn validate(&self, name: &str) -> Result<(), ScenarioError> {
        if self.steps == 0 || !self.min.is_finite() || !self.max.is_finite() {
            return Err(ScenarioError::BadGrid(format!("{name}: zero steps or non-finite bounds")));
        }
        if self.min <= 0.0 || self.max < self.min {
            return Err(ScenarioError::BadGrid(format!(
                "{name}: need 0 < min <= max, got [{}, {}]",
                self.min, self.max
            )));
        }
        Ok(())
    }
}

/// Lattice specification over the four kinematic axes, with optional
/// additive jitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub v1: RangeSteps,
    pub d1: RangeSteps,
    pub v2: RangeSteps,
    pub d2: RangeSteps,
    #[serde(default)]
    pub jitter: f64,
}

impl SweepGrid {
    /// The same speed and distance axis for both agents.
    pub fn symmetric(v: RangeSteps, d: RangeSteps, jitter: f64) -> Self {
        SweepGrid {
            v1: v,
            d1: d,
            v2: v,
            d2: d,
            jitter,
        }
    }
}

/// Deterministic lattice of kinematic states with seeded jitter.
///
/// Iterates `v1`, `d1`, `v2`, `d2` (innermost last); jittered components are
/// clamped away from zero.
pub fn sweep_traffic_scenarios(
    grid: &SweepGrid,
    seed: u64,
) -> Result<Vec<KinematicState>, ScenarioError> {
    grid.v1.validate("v1")?;
    grid.d1.validate("d1")?;
    grid.v2.validate("v2")?;
    grid.d2.validate("d2")?;
    if !(grid.jitter.is_finite() && grid.jitter >= 0.0) {
        return Err(ScenarioError::BadGrid(format!("jitter {}", grid.jitter)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jit = |x: f64| -> f64 {
        if grid.jitter > 0.0 {
            (x + rng.random_range(-grid.jitter..=grid.jitter)).max(1e-6)
        } else {
            x
        }
    };
    let mut states = Vec::new();
    for &v1 in &grid.v1.values() {
        for &d1 in &grid.d1.values() {
            for &v2 in &grid.v2.values() {
                for &d2 in &grid.d2.values() {
                    states.push(KinematicState::new(jit(v1), jit(v2), jit(d1), jit(d2))?);
                }
            }
        }
    }
    Ok(states)
}

fn draw_categorical(rng: &mut ChaCha8Rng, probs: &[f64; 4]) -> JointAction {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return JointAction::from_index(i as u8 + 1).unwrap();
        }
    }
    JointAction::from_index(4).unwrap()
}

/// Draws `t` independent joint actions from `p`.
pub fn sample_iid(p: &JointDistribution, t: u64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probs = p.probs();
    let actions = (0..t).map(|_| draw_categorical(&mut rng, &probs)).collect();
    Dataset::from_actions(actions)
}

/// Output of the signaled protocol: the device's per-step recommendations
/// and the played dataset (identical under obedient followers).
#[derive(Debug, Clone, PartialEq)]
pub struct SignaledSample {
    recommendations: Vec<JointAction>,
    dataset: Dataset,
}

impl SignaledSample {
    pub fn recommendations(&self) -> &[JointAction] {
        &self.recommendations
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn into_dataset(self) -> Dataset {
        self.dataset
    }
}

/// Draws joint recommendations from the correlation device and records them
/// as played. Distributionally identical to [`sample_iid`], but keeps the
/// recommendation stream for audit.
pub fn signaled_sample(device: &JointDistribution, t: u64, seed: u64) -> SignaledSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probs = device.probs();
    let recommendations: Vec<JointAction> =
        (0..t).map(|_| draw_categorical(&mut rng, &probs)).collect();
    let dataset = Dataset::from_actions(recommendations.clone());
    SignaledSample {
        recommendations,
        dataset,
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Uncoordinated noisy-driver protocol: at each state, each driver
/// independently goes with probability `logistic((tau_other - tau_self) /
/// noise)` (arriving earlier makes going likelier); no correlation device.
/// One record per state, annotated with the state's kinematics. The weights
/// identify the nominal game of the scenario and are validated but do not
/// enter the noise mechanism.
pub fn uncoordinated_sample(
    states: &[KinematicState],
    weights: &TrafficWeights,
    noise: f64,
    seed: u64,
) -> Result<Dataset, ScenarioError> {
    if !(noise.is_finite() && noise > 0.0) {
        return Err(ScenarioError::BadNoise(noise));
    }
    let _ = weights;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Dataset::new();
    for k in states {
        let delta = k.delta();
        let p1_go = logistic(delta / noise);
        let p2_go = logistic(-delta / noise);
        let a1 = if rng.random::<f64>() < p1_go { 2 } else { 1 };
        let a2 = if rng.random::<f64>() < p2_go { 2 } else { 1 };
        data.push(
            JointAction::from_pair(a1, a2).unwrap(),
            Some(Kinematics {
                tau1: k.tau1(),
                tau2: k.tau2(),
                delta,
            }),
        );
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Player;

    #[test]
    fn payoff_game_reproduces_table() {
        let g = game_from_payoffs([4.0, 1.0, 2.0, 3.0], [3.0, 1.0, 2.0, 4.0]).unwrap();
        let u1 = g.payoff_row(Player::One);
        for (got, want) in u1.iter().zip([4.0, 1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        let a4 = JointAction::from_index(4).unwrap();
        assert!((g.payoff(Player::Two, a4) - 4.0).abs() < 1e-12);
        assert!(game_from_payoffs([0.0; 4], [1.0; 4]).is_err());
        assert!(game_from_payoffs([-1.0, 2.0, 1.0, 1.0], [1.0; 4]).is_err());
    }

    #[test]
    fn chicken_game_is_anti_coordination_on_the_interior() {
        let w1 = WeightVector::new(vec![0.3, 0.7]).unwrap();
        let w2 = WeightVector::new(vec![0.4, 0.6]).unwrap();
        let g = chicken_dare_game(&w1, &w2).unwrap();
        assert_eq!(g.classify(DEGENERACY_TOL), GameClass::AntiCoordination);

        let even = WeightVector::new(vec![0.5, 0.5]).unwrap();
        let g = chicken_dare_game(&even, &even).unwrap();
        assert_eq!(g.classify(DEGENERACY_TOL), GameClass::AntiCoordination);
    }

    #[test]
    fn chicken_boundary_weights_degenerate() {
        let w1 = WeightVector::new(vec![1.0, 0.0]).unwrap();
        let w2 = WeightVector::new(vec![0.4, 0.6]).unwrap();
        assert!(matches!(
            chicken_dare_game(&w1, &w2),
            Err(ScenarioError::DegenerateWeights(_))
        ));
        let w1 = WeightVector::new(vec![0.0, 1.0]).unwrap();
        assert!(chicken_dare_game(&w1, &w2).is_err());
    }

    #[test]
    fn chicken_alpha_maps_back_to_weight() {
        let w1 = WeightVector::new(vec![0.3, 0.7]).unwrap();
        let w2 = WeightVector::new(vec![0.4, 0.6]).unwrap();
        let g = chicken_dare_game(&w1, &w2).unwrap();
        let ab = crate::equilibrium::alpha_beta(&g).unwrap();
        assert!((ab.alpha - 0.3 / 0.7).abs() < 1e-12);
        assert!((ab.beta - 0.4 / 0.6).abs() < 1e-12);
    }

    #[test]
    fn traffic_payoffs_match_direct_evaluation() {
        // tau1 = 2, tau2 = 3, delta = 1, bundled ground-truth weights.
        let k = KinematicState::new(10.0, 10.0, 20.0, 30.0).unwrap();
        let tw = TrafficWeights::default_ground_truth();
        let g = Game2x2::new(traffic_features(&k), tw.w1.clone(), tw.w2.clone()).unwrap();
        let a = |i: u8| JointAction::from_index(i).unwrap();
        // u2((wait,go)) = w21 / tau2 = 0.01 / 3.
        assert!((g.payoff(Player::Two, a(2)) - 0.01 / 3.0).abs() < 1e-12);
        // u1((go,go)) = -0.90 / (1 + 1e-6).
        assert!((g.payoff(Player::One, a(4)) - (-0.90 / (1.0 + 1e-6))).abs() < 1e-12);
        assert!((g.payoff(Player::One, a(4)) + 0.899999).abs() < 1e-5);
        // u1((wait,wait)) = -w17 * |delta| = -0.03.
        assert!((g.payoff(Player::One, a(1)) - (-0.03)).abs() < 1e-12);
        // The reference traffic game is an anti-coordination game.
        assert_eq!(g.classify(DEGENERACY_TOL), GameClass::AntiCoordination);
    }

    #[test]
    fn traffic_epsilon_guard_at_zero_offset() {
        let features = traffic_features_for(2.0, 2.0).unwrap();
        let a4 = JointAction::from_index(4).unwrap();
        let row = features.features(Player::One, a4);
        assert!((row[4] - (-1e6)).abs() < 1e-6);
    }

    #[test]
    fn even_index_weights_zero_kill_intercepts() {
        // The bundled ground truth has zeros on all even-index entries, so
        // each payoff reduces to its single kinematic term.
        let tw = TrafficWeights::default_ground_truth();
        for w in [&tw.w1, &tw.w2] {
            for i in [1usize, 3, 5, 7] {
                assert_eq!(w.as_slice()[i], 0.0);
            }
        }
    }

    #[test]
    fn sweep_lattice_cardinality_and_determinism() {
        let grid = SweepGrid::symmetric(
            RangeSteps {
                min: 10.0,
                max: 10.0,
                steps: 1,
            },
            RangeSteps {
                min: 20.0,
                max: 30.0,
                steps: 2,
            },
            0.0,
        );
        let states = sweep_traffic_scenarios(&grid, 0).unwrap();
        assert_eq!(states.len(), 4);
        let mut taus: Vec<f64> = states.iter().map(|k| k.tau1()).collect();
        taus.sort_by(|a, b| a.partial_cmp(b).unwrap());
        taus.dedup();
        assert_eq!(taus, vec![2.0, 3.0]);
        let again = sweep_traffic_scenarios(&grid, 0).unwrap();
        assert_eq!(states, again);
    }

    #[test]
    fn sweep_rejects_bad_grid() {
        let grid = SweepGrid::symmetric(
            RangeSteps {
                min: 0.0,
                max: 10.0,
                steps: 2,
            },
            RangeSteps {
                min: 20.0,
                max: 30.0,
                steps: 2,
            },
            0.0,
        );
        assert!(sweep_traffic_scenarios(&grid, 0).is_err());
    }

    #[test]
    fn iid_sampler_point_mass_and_determinism() {
        let a3 = JointAction::from_index(3).unwrap();
        let d = sample_iid(&JointDistribution::point_mass(a3), 50, 1);
        assert!(d.iter().all(|r| r.action == a3));
        let d2 = sample_iid(&JointDistribution::point_mass(a3), 50, 1);
        assert_eq!(d, d2);
    }

    #[test]
    fn iid_sampler_uniform_counts_within_binomial_band() {
        let d = sample_iid(&JointDistribution::uniform(), 2000, 42);
        for c in d.action_counts() {
            assert!((400..=600).contains(&(c as i64)), "count {c}");
        }
    }

    #[test]
    fn signaled_sample_is_obedient_and_matches_iid() {
        let device = JointDistribution::new([0.5, 0.25, 0.25, 0.0]).unwrap();
        let s = signaled_sample(&device, 300, 9);
        for (rec, r) in s.recommendations().iter().zip(s.dataset().iter()) {
            assert_eq!(*rec, r.action);
        }
        // Zero-probability action never recommended.
        assert_eq!(s.dataset().action_counts()[3], 0);
        // Same sampler as sample_iid: identical draws under the same seed.
        let iid = sample_iid(&device, 300, 9);
        assert_eq!(iid, *s.dataset());
    }

    #[test]
    fn uncoordinated_limits() {
        // tau1 much smaller: agent 1 goes, agent 2 waits, with vanishing noise.
        let k = KinematicState::new(10.0, 10.0, 10.0, 50.0).unwrap();
        let d = uncoordinated_sample(
            &[k; 64],
            &TrafficWeights::default_ground_truth(),
            0.05,
            3,
        )
        .unwrap();
        let counts = d.action_counts();
        assert_eq!(counts[2], 64, "expected all (go, wait), got {counts:?}");

        // Equal arrival: every joint action near 1/4.
        let k = KinematicState::new(10.0, 10.0, 30.0, 30.0).unwrap();
        let d = uncoordinated_sample(
            &[k; 4000],
            &TrafficWeights::default_ground_truth(),
            1.0,
            5,
        )
        .unwrap();
        for c in d.action_counts() {
            let f = c as f64 / 4000.0;
            assert!((f - 0.25).abs() < 0.05, "frequency {f}");
        }
        assert!(uncoordinated_sample(&[k], &TrafficWeights::default_ground_truth(), 0.0, 1).is_err());
    }

    #[test]
    fn uncoordinated_records_carry_kinematics() {
        let k = KinematicState::new(10.0, 8.0, 20.0, 28.0).unwrap();
        let d = uncoordinated_sample(&[k], &TrafficWeights::default_ground_truth(), 1.0, 1)
            .unwrap();
        let kin = d.records()[0].kinematics.unwrap();
        assert_eq!(kin.tau1, 2.0);
        assert_eq!(kin.tau2, 3.5);
        assert_eq!(kin.delta, 1.5);
    }
}
