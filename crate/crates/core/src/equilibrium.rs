//! Correlated-equilibrium geometry for 2x2 games.
//!
//! For a strict coordination game the CE set is a polytope with five known
//! vertices parameterized by the payoff-difference ratios `alpha` and `beta`;
//! an anti-coordination game maps onto the same formulas after relabeling
//! player 1's actions, which replaces `beta` by `1/beta` and swaps the
//! diagonal probabilities with the off-diagonal ones.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{Game2x2, GameClass, JointAction, DEGENERACY_TOL, SIMPLEX_TOL};

#[derive(Debug, Error)]
pub enum EqError {
    #[error("probability entries must be finite and nonnegative, got {0}")]
    BadProbability(f64),
    #[error("probabilities must sum to 1 within {tol}, got {sum}")]
    ProbabilitySum { sum: f64, tol: f64 },
    #[error("alpha/beta are undefined: dominated/degenerate payoffs")]
    DegenerateGame,
    #[error("CE polytope characterization requires (anti-)coordination structure, got {class} game")]
    UnsupportedClass { class: GameClass },
    #[error(
        "max-entropy solver did not converge: best iterate {best:?}, constraint values {constraints:?}"
    )]
    NonConvergence {
        best: [f64; 4],
        constraints: [f64; 4],
    },
}

/// A probability distribution over the four joint actions, in `a(1)..a(4)`
/// order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct JointDistribution([f64; 4]);

impl JointDistribution {
    pub fn new(p: [f64; 4]) -> Result<Self, EqError> {
        for &x in &p {
            if !x.is_finite() || x < 0.0 {
                return Err(EqError::BadProbability(x));
            }
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(EqError::ProbabilitySum {
                sum,
                tol: SIMPLEX_TOL,
            });
        }
        Ok(JointDistribution(p))
    }

    pub fn uniform() -> Self {
        JointDistribution([0.25; 4])
    }

    pub fn point_mass(a: JointAction) -> Self {
        let mut p = [0.0; 4];
        p[a.slot()] = 1.0;
        JointDistribution(p)
    }

    pub fn probs(&self) -> [f64; 4] {
        self.0
    }

    pub fn prob(&self, a: JointAction) -> f64 {
        self.0[a.slot()]
    }

    /// Shannon entropy in nats, with `0 ln 0 = 0`.
    pub fn entropy(&self) -> f64 {
        -self
            .0
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum::<f64>()
    }

    /// Total-variation distance, `0.5 * sum |p - q|`.
    pub fn tv_distance(&self, other: &JointDistribution) -> f64 {
        0.5 * self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    /// Joint action with the highest probability; ties break toward the
    /// lowest index.
    pub fn argmax(&self) -> JointAction {
        let mut best = 0;
        for i in 1..4 {
            if self.0[i] > self.0[best] {
                best = i;
            }
        }
        JointAction::from_index(best as u8 + 1).unwrap()
    }
}

impl TryFrom<[f64; 4]> for JointDistribution {
    type Error = EqError;
    fn try_from(p: [f64; 4]) -> Result<Self, Self::Error> {
        JointDistribution::new(p)
    }
}

impl From<JointDistribution> for [f64; 4] {
    fn from(d: JointDistribution) -> [f64; 4] {
        d.0
    }
}

/// Payoff-difference ratios of the two players.
///
/// `alpha = |u1(a(1))-u1(a(3))| / |u1(a(4))-u1(a(2))|` and
/// `beta  = |u2(a(1))-u2(a(2))| / |u2(a(4))-u2(a(3))|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaBeta {
    pub alpha: f64,
    pub beta: f64,
}

/// Computes the ratio pair; requires every payoff difference to be nonzero.
pub fn alpha_beta(g: &Game2x2) -> Result<AlphaBeta, EqError> {
    if g.classify(DEGENERACY_TOL) == GameClass::Degenerate {
        return Err(EqError::DegenerateGame);
    }
    let [a, b, c, d] = g.margins();
    Ok(AlphaBeta {
        alpha: a.abs() / b.abs(),
        beta: c.abs() / d.abs(),
    })
}

/// The five vertices of the CE polytope, in the fixed vertex order 1..5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeVertexSet {
    vertices: [JointDistribution; 5],
}

impl CeVertexSet {
    /// Vertex `v` with `v` in `1..=5`.
    pub fn vertex(&self, v: usize) -> &JointDistribution {
        &self.vertices[v - 1]
    }

    pub fn as_array(&self) -> &[JointDistribution; 5] {
        &self.vertices
    }
}

/// Reorders a probability row from the vertex-table column order
/// `a(1), a(4), a(3), a(2)` into the internal `a(1)..a(4)` order.
fn from_table_order(row: [f64; 4]) -> [f64; 4] {
    let [p1, p4, p3, p2] = row;
    [p1, p2, p3, p4]
}

/// Vertex rows in table column order for a strict coordination game with
/// ratios `alpha`, `beta`.
fn coordination_vertex_rows(alpha: f64, beta: f64) -> [[f64; 4]; 5] {
    let z3 = (1.0 + alpha) * (1.0 + beta);
    let z4 = 1.0 + beta + alpha * beta;
    let z5 = 1.0 + alpha + alpha * beta;
    [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [1.0 / z3, alpha * beta / z3, beta / z3, alpha / z3],
        [1.0 / z4, alpha * beta / z4, beta / z4, 0.0],
        [1.0 / z5, alpha * beta / z5, 0.0, alpha / z5],
    ]
}

/// Vertex probability rows in internal `a(1)..a(4)` order for a game of the
/// given class and ratio pair.
pub(crate) fn vertex_rows(class: GameClass, ab: AlphaBeta) -> Result<[[f64; 4]; 5], EqError> {
    let mut rows = match class {
        GameClass::Coordination => coordination_vertex_rows(ab.alpha, ab.beta),
        GameClass::AntiCoordination => {
            // Relabel player 1's actions: beta -> 1/beta, then swap the
            // diagonal cells with the off-diagonal ones (a(1)<->a(3),
            // a(4)<->a(2)).
            let mut rows = coordination_vertex_rows(ab.alpha, 1.0 / ab.beta);
            for row in &mut rows {
                let [p1, p4, p3, p2] = *row;
                *row = [p3, p2, p1, p4];
            }
            rows
        }
        class => return Err(EqError::UnsupportedClass { class }),
    };
    for row in &mut rows {
        *row = from_table_order(*row);
    }
    Ok(rows)
}

/// Computes the five CE-polytope vertices of a coordination or
/// anti-coordination game.
pub fn ce_vertices(g: &Game2x2) -> Result<CeVertexSet, EqError> {
    let class = g.classify(DEGENERACY_TOL);
    let ab = alpha_beta(g)?;
    let rows = vertex_rows(class, ab)?;
    let mut vertices = Vec::with_capacity(5);
    for row in rows {
        vertices.push(JointDistribution::new(row)?);
    }
    Ok(CeVertexSet {
        vertices: vertices.try_into().unwrap(),
    })
}

/// Mixture weights over the five CE vertices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 5]", into = "[f64; 5]")]
pub struct MixtureWeights([f64; 5]);

impl MixtureWeights {
    pub fn new(y: [f64; 5]) -> Result<Self, EqError> {
        for &x in &y {
            if !x.is_finite() || x < 0.0 {
                return Err(EqError::BadProbability(x));
            }
        }
        let sum: f64 = y.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(EqError::ProbabilitySum {
                sum,
                tol: SIMPLEX_TOL,
            });
        }
        Ok(MixtureWeights(y))
    }

    pub fn weights(&self) -> [f64; 5] {
        self.0
    }
}

impl TryFrom<[f64; 5]> for MixtureWeights {
    type Error = EqError;
    fn try_from(y: [f64; 5]) -> Result<Self, Self::Error> {
        MixtureWeights::new(y)
    }
}

impl From<MixtureWeights> for [f64; 5] {
    fn from(y: MixtureWeights) -> [f64; 5] {
        y.0
    }
}

/// Convex combination of the five vertices; stays inside the CE set.
pub fn mixture_distribution(v: &CeVertexSet, y: &MixtureWeights) -> JointDistribution {
    let mut p = [0.0; 4];
    for (weight, vertex) in y.0.iter().zip(v.as_array()) {
        for (acc, x) in p.iter_mut().zip(vertex.probs()) {
            *acc += weight * x;
        }
    }
    JointDistribution(p)
}

/// True iff every CE constraint value is at least `-tol`.
pub fn is_ce(g: &Game2x2, sigma: &JointDistribution, tol: f64) -> bool {
    g.ce_constraint_values(sigma)
        .iter()
        .all(|&v| v >= -tol)
}

/// Unit-normalized rows of the CE constraint matrix, `c_j(p) = M_j . p`.
fn normalized_constraint_rows(g: &Game2x2) -> [[f64; 4]; 4] {
    let u1 = g.payoff_row(crate::game::Player::One);
    let u2 = g.payoff_row(crate::game::Player::Two);
    let mut rows = [
        [u1[0] - u1[2], u1[1] - u1[3], 0.0, 0.0],
        [0.0, 0.0, u1[2] - u1[0], u1[3] - u1[1]],
        [u2[0] - u2[1], 0.0, u2[2] - u2[3], 0.0],
        [0.0, u2[1] - u2[0], 0.0, u2[3] - u2[2]],
    ];
    for row in &mut rows {
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in row.iter_mut() {
                *x /= norm;
            }
        }
    }
    rows
}

fn constraint_values(rows: &[[f64; 4]; 4], p: &[f64; 4]) -> [f64; 4] {
    let mut c = [0.0; 4];
    for (j, row) in rows.iter().enumerate() {
        c[j] = row.iter().zip(p).map(|(a, b)| a * b).sum();
    }
    c
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(x: [f64; 4]) -> [f64; 4] {
    let mut sorted = x;
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    let mut rho = 0;
    for (i, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (i as f64 + 1.0);
        if u - t > 0.0 {
            theta = t;
            rho = i + 1;
        }
    }
    debug_assert!(rho > 0);
    let mut p = [0.0; 4];
    for (pi, xi) in p.iter_mut().zip(x) {
        *pi = (xi - theta).max(0.0);
    }
    p
}

/// Penalized negentropy objective and its gradient.
fn penalized_objective(p: &[f64; 4], rows: &[[f64; 4]; 4], mu: f64) -> f64 {
    let negentropy: f64 = p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum();
    let c = constraint_values(rows, p);
    let penalty: f64 = c.iter().map(|&v| v.min(0.0).powi(2)).sum();
    negentropy + mu * penalty
}

fn penalized_gradient(p: &[f64; 4], rows: &[[f64; 4]; 4], mu: f64) -> [f64; 4] {
    let c = constraint_values(rows, p);
    let mut grad = [0.0; 4];
    for i in 0..4 {
        grad[i] = p[i].max(1e-18).ln() + 1.0;
    }
    for (j, row) in rows.iter().enumerate() {
        if c[j] < 0.0 {
            for i in 0..4 {
                grad[i] += mu * 2.0 * c[j] * row[i];
            }
        }
    }
    grad
}

/// Projected gradient descent on the penalized objective for one penalty
/// weight, with backtracking line search.
fn pgd_round(mut p: [f64; 4], rows: &[[f64; 4]; 4], mu: f64, max_iter: usize) -> [f64; 4] {
    let mut f = penalized_objective(&p, rows, mu);
    for _ in 0..max_iter {
        let grad = penalized_gradient(&p, rows, mu);
        let mut eta = 1.0;
        let mut improved = false;
        while eta > 1e-14 {
            let mut cand = p;
            for i in 0..4 {
                cand[i] -= eta * grad[i];
            }
            let cand = project_simplex(cand);
            let fc = penalized_objective(&cand, rows, mu);
            if fc < f - 1e-18 {
                p = cand;
                f = fc;
                improved = true;
                break;
            }
            eta *= 0.5;
        }
        if !improved {
            break;
        }
    }
    p
}

/// Maximum-entropy correlated equilibrium.
///
/// Projected gradient ascent on entropy over the simplex, with the CE
/// inequalities enforced through a quadratic penalty of increasing weight.
/// Starts from the uniform distribution, the four point masses, and (when
/// the game is a coordination or anti-coordination game) the five polytope
/// vertices; the best feasible final iterate wins. `tol` is the target
/// entropy accuracy.
pub fn max_entropy_ce(g: &Game2x2, tol: f64) -> Result<JointDistribution, EqError> {
    let rows = normalized_constraint_rows(g);
    let mut starts: Vec<[f64; 4]> = vec![[0.25; 4]];
    for a in JointAction::ALL {
        starts.push(JointDistribution::point_mass(a).probs());
    }
    if let Ok(vs) = ce_vertices(g) {
        for v in vs.as_array() {
            starts.push(v.probs());
        }
    }

    const FEAS_TOL: f64 = 1e-8;
    let entropy_of = |p: &[f64; 4]| -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>();

    let mut best: Option<([f64; 4], f64)> = None; // feasible iterates only
    let mut fallback: Option<([f64; 4], f64)> = None; // least-infeasible iterate

    for start in starts {
        let mut p = start;
        let mut prev_entropy = f64::NEG_INFINITY;
        let mut mu = 1e2;
        while mu <= 1e14 {
            p = pgd_round(p, &rows, mu, 300);
            let h = entropy_of(&p);
            if mu >= 1e8 && (h - prev_entropy).abs() <= tol.max(1e-15) / 10.0 {
                break;
            }
            prev_entropy = h;
            mu *= 10.0;
        }
        let c = constraint_values(&rows, &p);
        let worst = c.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let h = entropy_of(&p);
        if worst >= -FEAS_TOL {
            if best.is_none_or(|(_, bh)| h > bh) {
                best = Some((p, h));
            }
        } else if fallback.is_none_or(|(_, fw)| worst > fw) {
            fallback = Some((p, worst));
        }
    }

    match best {
        Some((p, _)) => {
            // Clean tiny negative round-off from the projection.
            let mut q = p;
            for x in &mut q {
                *x = x.max(0.0);
            }
            JointDistribution::new(q)
        }
        None => {
            let (p, _) = fallback.expect("at least one start ran");
            Err(EqError::NonConvergence {
                best: p,
                constraints: constraint_values(&rows, &p),
            })
        }
    }
}
