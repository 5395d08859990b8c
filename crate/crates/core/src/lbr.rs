//! Simultaneous logit best-response dynamics on a 2x2 game.
//!
//! Both players respond stochastically to the opponent's last action with
//! choice probabilities proportional to `exp(lambda_i * utility)`. The
//! induced process over the four joint actions is a Markov chain whose
//! transition matrix is strictly positive for finite rationality, so it has a
//! unique stationary distribution; for 2x2 games that distribution is a
//! product of the two players' stationary marginals and is available in
//! closed form.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::equilibrium::JointDistribution;
use crate::game::{Game2x2, JointAction, Player};

#[derive(Debug, Error)]
pub enum LbrError {
    #[error("rationality must be finite and nonnegative, got {0}")]
    BadRationality(f64),
    #[error("power iteration did not reach tol={tol} after {max_iter} iterations; last residual {residual}, iterate {last:?}")]
    PowerIterationStalled {
        tol: f64,
        max_iter: usize,
        residual: f64,
        last: [f64; 4],
    },
}

/// Per-player rationality (inverse temperature) of the logit rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(f64, f64)", into = "(f64, f64)")]
pub struct Rationality {
    lambda1: f64,
    lambda2: f64,
}

impl Rationality {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self, LbrError> {
        for l in [lambda1, lambda2] {
            if !l.is_finite() || l < 0.0 {
                return Err(LbrError::BadRationality(l));
            }
        }
        Ok(Rationality { lambda1, lambda2 })
    }

    pub fn of(self, player: Player) -> f64 {
        match player {
            Player::One => self.lambda1,
            Player::Two => self.lambda2,
        }
    }

    pub fn lambda1(self) -> f64 {
        self.lambda1
    }

    pub fn lambda2(self) -> f64 {
        self.lambda2
    }
}

impl TryFrom<(f64, f64)> for Rationality {
    type Error = LbrError;
    fn try_from(v: (f64, f64)) -> Result<Self, Self::Error> {
        Rationality::new(v.0, v.1)
    }
}

impl From<Rationality> for (f64, f64) {
    fn from(r: Rationality) -> (f64, f64) {
        (r.lambda1, r.lambda2)
    }
}

/// One-step logit response probabilities.
///
/// `s1 = P(a1=1 | opponent played a2=1)`, `s2 = P(a1=1 | a2=2)`,
/// `t1 = P(a2=1 | a1=1)`, `t2 = P(a2=1 | a1=2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogitResponses {
    pub s1: f64,
    pub s2: f64,
    pub t1: f64,
    pub t2: f64,
}

// Keeps response probabilities strictly inside (0,1) so the transition
// matrix stays primitive even when lambda*utility saturates the exponentials.
const RESPONSE_CLAMP: f64 = 1e-15;

/// Stable two-way softmax: `exp(x) / (exp(x) + exp(y))` with max
/// subtraction, clamped strictly inside (0, 1).
fn logit_prob(x: f64, y: f64) -> f64 {
    let m = x.max(y);
    ((x - m).exp() / ((x - m).exp() + (y - m).exp())).clamp(RESPONSE_CLAMP, 1.0 - RESPONSE_CLAMP)
}

/// Computes the four one-step logit response probabilities.
pub fn logit_responses(g: &Game2x2, lambda: Rationality) -> LogitResponses {
    responses_from_payoffs(
        &g.payoff_row(Player::One),
        &g.payoff_row(Player::Two),
        lambda,
    )
}

pub(crate) fn responses_from_payoffs(
    u1: &[f64; 4],
    u2: &[f64; 4],
    lambda: Rationality,
) -> LogitResponses {
    let l1 = lambda.lambda1();
    let l2 = lambda.lambda2();
    LogitResponses {
        // Player 1 choosing action 1 against opponent action 1: u1(a(1)) vs u1(a(3)).
        s1: logit_prob(l1 * u1[0], l1 * u1[2]),
        // Against opponent action 2: u1(a(2)) vs u1(a(4)).
        s2: logit_prob(l1 * u1[1], l1 * u1[3]),
        // Player 2 choosing action 1 against opponent action 1: u2(a(1)) vs u2(a(2)).
        t1: logit_prob(l2 * u2[0], l2 * u2[1]),
        // Against opponent action 2: u2(a(3)) vs u2(a(4)).
        t2: logit_prob(l2 * u2[2], l2 * u2[3]),
    }
}

/// Row-stochastic 4x4 transition matrix of the simultaneous dynamics; row k
/// holds the distribution of the next joint action given current `a(k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    rows: [[f64; 4]; 4],
}

impl TransitionMatrix {
    pub fn rows(&self) -> &[[f64; 4]; 4] {
        &self.rows
    }

    pub fn entry(&self, from: JointAction, to: JointAction) -> f64 {
        self.rows[from.slot()][to.slot()]
    }

    /// One step of the distribution dynamics, `sigma * P`.
    pub fn propagate(&self, sigma: &[f64; 4]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (k, row) in self.rows.iter().enumerate() {
            for (l, p) in row.iter().enumerate() {
                out[l] += sigma[k] * p;
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, row) in self.rows.iter().enumerate() {
            out.push_str(&format!(
                "a({}) | {:.6} {:.6} {:.6} {:.6}\n",
                k + 1,
                row[0],
                row[1],
                row[2],
                row[3]
            ));
        }
        out
    }
}

/// Builds the transition matrix from the one-step responses.
///
/// The row for current state `a(k)` factorizes: player 1 responds to the
/// opponent component of `a(k)` (so rows 1,3 use `s1` and rows 2,4 use `s2`)
/// and player 2 responds to player 1's component (rows 1,2 use `t1`, rows
/// 3,4 use `t2`).
pub fn transition_matrix(g: &Game2x2, lambda: Rationality) -> TransitionMatrix {
    let r = logit_responses(g, lambda);
    let row = |s: f64, t: f64| [s * t, s * (1.0 - t), (1.0 - s) * t, (1.0 - s) * (1.0 - t)];
    TransitionMatrix {
        rows: [
            row(r.s1, r.t1),
            row(r.s2, r.t1),
            row(r.s1, r.t2),
            row(r.s2, r.t2),
        ],
    }
}

/// Closed-form stationary distribution of the dynamics.
///
/// The stationary marginals solve an affine fixed point:
/// `x = (s2 + (s1-s2) t2) / (1 - (s1-s2)(t1-t2))` for player 1's first
/// action and symmetrically `q` for player 2; the joint distribution is
/// their product.
pub fn stationary_closed_form(g: &Game2x2, lambda: Rationality) -> JointDistribution {
    let r = logit_responses(g, lambda);
    JointDistribution::new(stationary_from_responses(&r))
        .expect("product of marginals is a distribution")
}

pub(crate) fn stationary_from_responses(r: &LogitResponses) -> [f64; 4] {
    let denom = 1.0 - (r.s1 - r.s2) * (r.t1 - r.t2);
    // Cannot vanish for finite lambda: both factors have magnitude < 1.
    assert!(
        denom.abs() > 1e-15,
        "stationary denominator {denom} too close to zero"
    );
    let x = (r.s2 + (r.s1 - r.s2) * r.t2) / denom;
    let q = (r.t2 + (r.t1 - r.t2) * r.s2) / denom;
    [x * q, x * (1.0 - q), (1.0 - x) * q, (1.0 - x) * (1.0 - q)]
}

/// Stationary distribution by iterating `sigma <- sigma P` from uniform
/// until the per-step total-variation change is at most `tol`. Serves as an
/// independent oracle for the closed form.
pub fn stationary_power_iteration(
    g: &Game2x2,
    lambda: Rationality,
    tol: f64,
    max_iter: usize,
) -> Result<JointDistribution, LbrError> {
    let p = transition_matrix(g, lambda);
    let mut sigma = [0.25; 4];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let next = p.propagate(&sigma);
        residual = 0.5
            * sigma
                .iter()
                .zip(&next)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>();
        sigma = next;
        if residual <= tol {
            return Ok(JointDistribution::new(sigma).expect("propagation preserves the simplex"));
        }
    }
    Err(LbrError::PowerIterationStalled {
        tol,
        max_iter,
        residual,
        last: sigma,
    })
}

/// Simulates the joint-action chain.
///
/// The initial state is uniform over the four joint actions; `burn_in`
/// steps are discarded before `t` joint actions are recorded. Deterministic
/// for a fixed seed.
pub fn simulate_chain(
    g: &Game2x2,
    lambda: Rationality,
    t: u64,
    seed: u64,
    burn_in: u64,
) -> Dataset {
    let r = logit_responses(g, lambda);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = JointAction::from_index(rng.random_range(1..=4)).unwrap();
    let step = |state: JointAction, rng: &mut ChaCha8Rng| {
        let s = if state.action_of_player2() == 1 { r.s1 } else { r.s2 };
        let tq = if state.action_of_player1() == 1 { r.t1 } else { r.t2 };
        let a1 = if rng.random::<f64>() < s { 1 } else { 2 };
        let a2 = if rng.random::<f64>() < tq { 1 } else { 2 };
        JointAction::from_pair(a1, a2).unwrap()
    };
    for _ in 0..burn_in {
        state = step(state, &mut rng);
    }
    let mut actions = Vec::with_capacity(t as usize);
    for _ in 0..t {
        state = step(state, &mut rng);
        actions.push(state);
    }
    Dataset::from_actions(actions)
}
