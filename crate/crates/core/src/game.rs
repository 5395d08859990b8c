//! Two-player, two-action games with utilities linear in a feature map.
//!
//! The four joint actions are enumerated in a fixed order: with each player's
//! actions numbered 1 and 2,
//!
//! ```text
//! a(1) = (1, 1)   a(2) = (1, 2)   a(3) = (2, 1)   a(4) = (2, 2)
//! ```
//!
//! Every distribution, payoff table and count vector in this crate is indexed
//! in that order. Player utilities are `u_i(a) = phi_i(a) . w_i` where
//! `phi_i` is a per-player feature map over the four joint actions and `w_i`
//! is a weight vector constrained to the probability simplex.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equilibrium::JointDistribution;

/// Number of joint actions in a 2x2 game.
pub const NUM_JOINT_ACTIONS: usize = 4;

/// Tolerance below which a payoff difference counts as a tie (degenerate).
pub const DEGENERACY_TOL: f64 = 1e-9;

/// Tolerance for simplex-membership checks on weights and distributions.
pub const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("joint action index must be in 1..=4, got {0}")]
    BadActionIndex(u8),
    #[error("player action must be 1 or 2, got ({0}, {1})")]
    BadActionPair(u8, u8),
    #[error("feature map row for action a({action}) has length {got}, expected {expected}")]
    RaggedFeatures {
        action: usize,
        got: usize,
        expected: usize,
    },
    #[error("feature map entries must be finite")]
    NonFiniteFeatures,
    #[error("weight vector must be non-empty")]
    EmptyWeights,
    #[error("weight entries must be nonnegative and finite, got {0}")]
    NegativeWeight(f64),
    #[error("weight entries must sum to 1 (within {tol}), got {sum}")]
    WeightSum { sum: f64, tol: f64 },
    #[error("player {player} feature dimension {feature_dim} does not match weight dimension {weight_dim}")]
    DimensionMismatch {
        player: u8,
        feature_dim: usize,
        weight_dim: usize,
    },
}

/// One of the two players.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub const BOTH: [Player; 2] = [Player::One, Player::Two];

    /// Zero-based index (player 1 -> 0).
    pub fn index(self) -> usize {
        match self {
            Player::One => 0,
            Player::Two => 1,
        }
    }

    pub fn other(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }
}

impl std::fmt::Display for Player {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.index() + 1)
    }
}

/// A joint action `a(l)`, stored as its 1-based index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct JointAction(u8);

impl JointAction {
    pub const ALL: [JointAction; 4] = [
        JointAction(1),
        JointAction(2),
        JointAction(3),
        JointAction(4),
    ];

    pub fn from_index(index: u8) -> Result<Self, GameError> {
        if (1..=4).contains(&index) {
            Ok(JointAction(index))
        } else {
            Err(GameError::BadActionIndex(index))
        }
    }

    /// Builds from the per-player action pair, each in {1, 2}.
    pub fn from_pair(a1: u8, a2: u8) -> Result<Self, GameError> {
        if !(1..=2).contains(&a1) || !(1..=2).contains(&a2) {
            return Err(GameError::BadActionPair(a1, a2));
        }
        Ok(JointAction(2 * (a1 - 1) + (a2 - 1) + 1))
    }

    /// 1-based index `l` of `a(l)`.
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// 0-based array slot.
    pub fn slot(self) -> usize {
        self.0 as usize - 1
    }

    /// Player 1's component, in {1, 2}.
    pub fn action_of_player1(self) -> u8 {
        (self.0 - 1) / 2 + 1
    }

    /// Player 2's component, in {1, 2}.
    pub fn action_of_player2(self) -> u8 {
        (self.0 - 1) % 2 + 1
    }

    pub fn action_of(self, player: Player) -> u8 {
        match player {
            Player::One => self.action_of_player1(),
            Player::Two => self.action_of_player2(),
        }
    }
}

impl TryFrom<u8> for JointAction {
    type Error = GameError;
    fn try_from(v: u8) -> Result<Self, Self::Error> {
        JointAction::from_index(v)
    }
}

impl From<JointAction> for u8 {
    fn from(a: JointAction) -> u8 {
        a.0
    }
}

impl std::fmt::Display for JointAction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "a({})", self.0)
    }
}

/// Per-player feature vectors over the four joint actions.
///
/// Stored as two 4 x d matrices (row `l-1` holds `phi_i(a(l))`); the two
/// players may use different dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FeatureMapWire", into = "FeatureMapWire")]
pub struct FeatureMap {
    p1: [Vec<f64>; 4],
    p2: [Vec<f64>; 4],
}

#[derive(Serialize, Deserialize)]
struct FeatureMapWire {
    player1: Vec<Vec<f64>>,
    player2: Vec<Vec<f64>>,
}

impl TryFrom<FeatureMapWire> for FeatureMap {
    type Error = GameError;
    fn try_from(w: FeatureMapWire) -> Result<Self, Self::Error> {
        let to_rows = |rows: Vec<Vec<f64>>| -> Result<[Vec<f64>; 4], GameError> {
            if rows.len() != 4 {
                return Err(GameError::RaggedFeatures {
                    action: rows.len(),
                    got: rows.len(),
                    expected: 4,
                });
            }
            let mut it = rows.into_iter();
            Ok([
                it.next().unwrap(),
                it.next().unwrap(),
                it.next().unwrap(),
                it.next().unwrap(),
            ])
        };
        FeatureMap::new(to_rows(w.player1)?, to_rows(w.player2)?)
    }
}

impl From<FeatureMap> for FeatureMapWire {
    fn from(f: FeatureMap) -> Self {
        FeatureMapWire {
            player1: f.p1.to_vec(),
            player2: f.p2.to_vec(),
        }
    }
}

impl FeatureMap {
    /// Builds a feature map from per-player rows, one row per joint action in
    /// `a(1)..a(4)` order. All four rows of a player must share one dimension
    /// and contain only finite values.
    pub fn new(p1: [Vec<f64>; 4], p2: [Vec<f64>; 4]) -> Result<Self, GameError> {
        for rows in [&p1, &p2] {
            let d = rows[0].len();
            if d == 0 {
                return Err(GameError::RaggedFeatures {
                    action: 1,
                    got: 0,
                    expected: 1,
                });
            }
            for (l, row) in rows.iter().enumerate() {
                if row.len() != d {
                    return Err(GameError::RaggedFeatures {
                        action: l + 1,
                        got: row.len(),
                        expected: d,
                    });
                }
                if row.iter().any(|x| !x.is_finite()) {
                    return Err(GameError::NonFiniteFeatures);
                }
            }
        }
        Ok(FeatureMap { p1, p2 })
    }

    pub fn dim(&self, player: Player) -> usize {
        self.rows(player)[0].len()
    }

    pub fn features(&self, player: Player, a: JointAction) -> &[f64] {
        &self.rows(player)[a.slot()]
    }

    fn rows(&self, player: Player) -> &[Vec<f64>; 4] {
        match player {
            Player::One => &self.p1,
            Player::Two => &self.p2,
        }
    }
}

/// A weight vector on the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self, GameError> {
        if w.is_empty() {
            return Err(GameError::EmptyWeights);
        }
        for &x in &w {
            if !x.is_finite() || x < 0.0 {
                return Err(GameError::NegativeWeight(x));
            }
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(GameError::WeightSum {
                sum,
                tol: SIMPLEX_TOL,
            });
        }
        Ok(WeightVector(w))
    }

    /// Normalizes a nonnegative vector onto the simplex.
    pub fn normalized(mut w: Vec<f64>) -> Result<Self, GameError> {
        let sum: f64 = w.iter().sum();
        if !sum.is_finite() || sum <= 0.0 {
            return Err(GameError::WeightSum {
                sum,
                tol: SIMPLEX_TOL,
            });
        }
        for x in &mut w {
            *x /= sum;
        }
        WeightVector::new(w)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = GameError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        WeightVector::new(v)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Vec<f64> {
        w.0
    }
}

/// Strategic class of a 2x2 game, decided by the signs of the four payoff
/// differences `u1(a(1))-u1(a(3))`, `u1(a(4))-u1(a(2))`, `u2(a(1))-u2(a(2))`,
/// `u2(a(4))-u2(a(3))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GameClass {
    /// All four differences strictly positive.
    Coordination,
    /// All four differences strictly negative.
    AntiCoordination,
    /// Mixed signs: some action is strictly dominated.
    Dominance,
    /// Some difference is a tie (within tolerance).
    Degenerate,
}

impl std::fmt::Display for GameClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            GameClass::Coordination => "coordination",
            GameClass::AntiCoordination => "anti-coordination",
            GameClass::Dominance => "dominance",
            GameClass::Degenerate => "degenerate",
        };
        write!(f, "{s}")
    }
}

/// A 2x2 game with cached payoff tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Game2x2 {
    features: FeatureMap,
    weights: (WeightVector, WeightVector),
    payoffs: [[f64; 4]; 2],
}

impl Game2x2 {
    /// Builds the game and caches `u_i(a(l)) = phi_i(a(l)) . w_i`.
    pub fn new(
        features: FeatureMap,
        w1: WeightVector,
        w2: WeightVector,
    ) -> Result<Self, GameError> {
        for (player, w) in [(Player::One, &w1), (Player::Two, &w2)] {
            let d = features.dim(player);
            if w.dim() != d {
                return Err(GameError::DimensionMismatch {
                    player: player.index() as u8 + 1,
                    feature_dim: d,
                    weight_dim: w.dim(),
                });
            }
        }
        let mut payoffs = [[0.0; 4]; 2];
        for player in Player::BOTH {
            let w = if player == Player::One { &w1 } else { &w2 };
            for a in JointAction::ALL {
                payoffs[player.index()][a.slot()] = dot(features.features(player, a), w.as_slice());
            }
        }
        Ok(Game2x2 {
            features,
            weights: (w1, w2),
            payoffs,
        })
    }

    pub fn payoff(&self, player: Player, a: JointAction) -> f64 {
        self.payoffs[player.index()][a.slot()]
    }

    /// The full payoff row of one player in `a(1)..a(4)` order.
    pub fn payoff_row(&self, player: Player) -> [f64; 4] {
        self.payoffs[player.index()]
    }

    pub fn features(&self) -> &FeatureMap {
        &self.features
    }

    pub fn weights(&self) -> (&WeightVector, &WeightVector) {
        (&self.weights.0, &self.weights.1)
    }

    /// The four payoff differences that decide the game class, as
    /// `[u1(1)-u1(3), u1(4)-u1(2), u2(1)-u2(2), u2(4)-u2(3)]`.
    pub fn margins(&self) -> [f64; 4] {
        margins_from_payoffs(&self.payoffs[0], &self.payoffs[1])
    }

    /// Classifies the game, treating margins with `|m| <= tol` as ties.
    pub fn classify(&self, tol: f64) -> GameClass {
        classify_margins(&self.margins(), tol)
    }

    /// Left-hand sides of the four correlated-equilibrium constraints under
    /// `sigma`, ordered as: player 1 recommended action 1 (deviating to 2),
    /// player 1 recommended action 2, player 2 recommended action 1, player 2
    /// recommended action 2. `sigma` is a correlated equilibrium iff all four
    /// are nonnegative.
    pub fn ce_constraint_values(&self, sigma: &JointDistribution) -> [f64; 4] {
        ce_constraints_from_payoffs(&self.payoffs[0], &self.payoffs[1], &sigma.probs())
    }

    /// Renders both payoff tables in the usual row-player/column-player
    /// layout.
    pub fn payoff_table_text(&self) -> String {
        let u1 = &self.payoffs[0];
        let u2 = &self.payoffs[1];
        let cell = |l: usize| format!("({:.6}, {:.6})", u1[l], u2[l]);
        let c = [cell(0), cell(1), cell(2), cell(3)];
        let width = c.iter().map(|s| s.len()).max().unwrap_or(0);
        let mut out = String::new();
        out.push_str(&format!(
            "{:6} {:>width$} {:>width$}\n",
            "",
            "a2=1",
            "a2=2",
            width = width
        ));
        out.push_str(&format!(
            "{:6} {:>width$} {:>width$}\n",
            "a1=1",
            c[0],
            c[1],
            width = width
        ));
        out.push_str(&format!(
            "{:6} {:>width$} {:>width$}\n",
            "a1=2",
            c[2],
            c[3],
            width = width
        ));
        out
    }
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// The four payoff differences of [`Game2x2::margins`] from raw payoff rows.
pub(crate) fn margins_from_payoffs(u1: &[f64; 4], u2: &[f64; 4]) -> [f64; 4] {
    [u1[0] - u1[2], u1[3] - u1[1], u2[0] - u2[1], u2[3] - u2[2]]
}

/// Game class from margin signs, with ties (within `tol`) degenerate.
pub(crate) fn classify_margins(margins: &[f64; 4], tol: f64) -> GameClass {
    if margins.iter().any(|m| m.abs() <= tol) {
        GameClass::Degenerate
    } else if margins.iter().all(|&m| m > 0.0) {
        GameClass::Coordination
    } else if margins.iter().all(|&m| m < 0.0) {
        GameClass::AntiCoordination
    } else {
        GameClass::Dominance
    }
}

/// CE constraint values from raw payoff rows and a probability row.
pub(crate) fn ce_constraints_from_payoffs(u1: &[f64; 4], u2: &[f64; 4], p: &[f64; 4]) -> [f64; 4] {
    [
        p[0] * (u1[0] - u1[2]) + p[1] * (u1[1] - u1[3]),
        p[2] * (u1[2] - u1[0]) + p[3] * (u1[3] - u1[1]),
        p[0] * (u2[0] - u2[1]) + p[2] * (u2[2] - u2[3]),
        p[1] * (u2[1] - u2[0]) + p[3] * (u2[3] - u2[2]),
    ]
}

/// Game specification as stored on disk: a feature map plus the two weight
/// vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    pub features: FeatureMap,
    pub weights: (WeightVector, WeightVector),
}

impl GameSpec {
    pub fn build(self) -> Result<Game2x2, GameError> {
        Game2x2::new(self.features, self.weights.0, self.weights.1)
    }

    pub fn from_game(g: &Game2x2) -> Self {
        GameSpec {
            features: g.features().clone(),
            weights: (g.weights().0.clone(), g.weights().1.clone()),
        }
    }
}
