//! Maximum-likelihood fitting of a CE-vertex mixture.
//!
//! The likelihood of a candidate weight pair depends on the game only
//! through its class and the ratio pair `(alpha, beta)`, and the optimal
//! mixture at fixed ratios is a convex subproblem solved by EM. The search
//! therefore runs over `(class, ln alpha, ln beta)` directly: the corners
//! of the empirical feasibility rectangle (where the CE constraints bind
//! under the observed frequencies) enter as closed-form candidates, and a
//! multi-start Nelder-Mead over the log-ratio box covers everything else.
//!
//! Ties in likelihood are broken toward the most tightly constrained
//! candidate (binding-edge corners first). Weights are then recovered from
//! the selected ratios by enumerating one- and two-feature supports - the
//! basic solutions of the linear margin constraint on the simplex - and
//! keeping the representation with the largest margin scale.

use serde::{Deserialize, Serialize};

use super::optimizer::{optimize_with_starts, Block};
use super::{
    nll_from_probs, nll_with_floor, CountVector, EstimateResult, Estimator, FitConfig,
    FitDiagnostics, FitError, ModelParams,
};
use crate::dataset::Dataset;
use crate::equilibrium::{
    ce_vertices, mixture_distribution, vertex_rows, AlphaBeta, MixtureWeights,
};
use crate::game::{
    dot, FeatureMap, Game2x2, GameClass, JointAction, Player, WeightVector, DEGENERACY_TOL,
};

/// Ratio bounds of the log-space search box.
const RATIO_MIN: f64 = 1e-6;
const RATIO_MAX: f64 = 1e6;

/// Fitted CE-ML estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeMlEstimate {
    pub weights: (WeightVector, WeightVector),
    pub mixture: MixtureWeights,
    pub nll: f64,
    pub fitted: crate::equilibrium::JointDistribution,
    pub diagnostics: FitDiagnostics,
}

pub(crate) fn payoff_rows(features: &FeatureMap, w1: &[f64], w2: &[f64]) -> ([f64; 4], [f64; 4]) {
    let mut u1 = [0.0; 4];
    let mut u2 = [0.0; 4];
    for a in JointAction::ALL {
        u1[a.slot()] = dot(features.features(Player::One, a), w1);
        u2[a.slot()] = dot(features.features(Player::Two, a), w2);
    }
    (u1, u2)
}

/// EM for the mixture weights over fixed vertex rows from one start point.
fn em_from(
    rows: &[[f64; 4]; 5],
    counts: &[u64; 4],
    floor: f64,
    start: [f64; 5],
    max_iter: usize,
) -> ([f64; 5], f64) {
    let total: f64 = counts.iter().sum::<u64>() as f64;
    let nhat = counts.map(|c| c as f64 / total);
    let mut y = start;
    let mut last = f64::INFINITY;
    for _ in 0..max_iter {
        let mut p = [0.0; 4];
        for (yv, row) in y.iter().zip(rows) {
            for (pl, x) in p.iter_mut().zip(row) {
                *pl += yv * x;
            }
        }
        let current = nll_from_probs(&p, counts, floor);
        if (last - current).abs() <= 1e-15 * (1.0 + current.abs()) {
            break;
        }
        last = current;
        let mut next = [0.0; 5];
        for (v, row) in rows.iter().enumerate() {
            let mut resp = 0.0;
            for (l, &x) in row.iter().enumerate() {
                if nhat[l] > 0.0 {
                    resp += nhat[l] * x / p[l].max(1e-300);
                }
            }
            next[v] = y[v] * resp;
        }
        let sum: f64 = next.iter().sum();
        for x in &mut next {
            *x /= sum;
        }
        y = next;
    }
    let mut p = [0.0; 4];
    for (yv, row) in y.iter().zip(rows) {
        for (pl, x) in p.iter_mut().zip(row) {
            *pl += yv * x;
        }
    }
    (y, nll_from_probs(&p, counts, floor))
}

/// Quick single-start EM used inside the ratio search.
fn em_mixture(rows: &[[f64; 4]; 5], counts: &[u64; 4], floor: f64) -> ([f64; 5], f64) {
    em_from(rows, counts, floor, [0.2; 5], 600)
}

/// Thorough EM: multi-start from each near-pure vertex and the uniform
/// mixture, keeping the best final point (earliest start on exact ties, so
/// sparse representations win). EM stalls near component-collapsed
/// boundaries, which the pure starts cut through.
fn em_mixture_best(rows: &[[f64; 4]; 5], counts: &[u64; 4], floor: f64) -> ([f64; 5], f64) {
    let mut best: Option<([f64; 5], f64)> = None;
    for v in 0..5 {
        let mut start = [1e-4; 5];
        start[v] = 1.0 - 4e-4;
        let candidate = em_from(rows, counts, floor, start, 5000);
        if best.as_ref().is_none_or(|(_, b)| candidate.1 < *b) {
            best = Some(candidate);
        }
    }
    let uniform = em_from(rows, counts, floor, [0.2; 5], 5000);
    match best {
        Some(b) if b.1 <= uniform.1 => b,
        _ => uniform,
    }
}

fn ratio_nll(
    class: GameClass,
    alpha: f64,
    beta: f64,
    counts: &[u64; 4],
    floor: f64,
    thorough: bool,
) -> ([f64; 5], f64) {
    let rows = vertex_rows(class, AlphaBeta { alpha, beta }).expect("orientation class");
    if thorough {
        em_mixture_best(&rows, counts, floor)
    } else {
        em_mixture(&rows, counts, floor)
    }
}

/// Solves the k x k system `m x = rhs` in place by Gaussian elimination
/// with partial pivoting; `None` when singular.
fn solve_dense(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let k = rhs.len();
    for col in 0..k {
        let pivot = (col..k).max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())?;
        if m[pivot][col].abs() < 1e-14 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        let pivot_row = m[col].clone();
        for row in (col + 1)..k {
            let factor = m[row][col] / pivot_row[col];
            for (x, p) in m[row].iter_mut().zip(&pivot_row).skip(col) {
                *x -= factor * p;
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; k];
    for row in (0..k).rev() {
        let mut acc = rhs[row];
        for c in (row + 1)..k {
            acc -= m[row][c] * x[c];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

/// Sharpens an EM solution by solving for the exact mixture on its leading
/// support: when the empirical distribution is reachable, the support's
/// least-squares system reproduces it to machine precision, which EM's
/// sublinear boundary convergence cannot.
fn polish_mixture(
    rows: &[[f64; 4]; 5],
    counts: &[u64; 4],
    floor: f64,
    em: ([f64; 5], f64),
) -> ([f64; 5], f64) {
    let total: f64 = counts.iter().sum::<u64>() as f64;
    let target = counts.map(|c| c as f64 / total);
    let mut order: Vec<usize> = (0..5).collect();
    order.sort_by(|&a, &b| em.0[b].partial_cmp(&em.0[a]).unwrap());
    let (mut best_y, mut best_nll) = em;
    for k in 1..=5 {
        let support = &order[..k];
        // Normal equations of min ||V_S y - target||.
        let mut m = vec![vec![0.0; k]; k];
        let mut rhs = vec![0.0; k];
        for (i, &vi) in support.iter().enumerate() {
            for (j, &vj) in support.iter().enumerate() {
                m[i][j] = rows[vi].iter().zip(&rows[vj]).map(|(a, b)| a * b).sum();
            }
            rhs[i] = rows[vi].iter().zip(&target).map(|(a, b)| a * b).sum();
        }
        let Some(solution) = solve_dense(m, rhs) else {
            continue;
        };
        if solution.iter().any(|&x| x < -1e-9) {
            continue;
        }
        let mut y = [0.0; 5];
        for (&v, &x) in support.iter().zip(&solution) {
            y[v] = x.max(0.0);
        }
        let sum: f64 = y.iter().sum();
        if !(0.999..=1.001).contains(&sum) {
            continue;
        }
        for x in &mut y {
            *x /= sum;
        }
        let mut p = [0.0; 4];
        for (yv, row) in y.iter().zip(rows) {
            for (pl, x) in p.iter_mut().zip(row) {
                *pl += yv * x;
            }
        }
        let nll = nll_from_probs(&p, counts, floor);
        if nll < best_nll {
            best_nll = nll;
            best_y = y;
        }
    }
    (best_y, best_nll)
}

/// One point of the ratio search, ordered by `(likelihood tie group, rank)`.
struct Candidate {
    class: GameClass,
    alpha: f64,
    beta: f64,
    rank: usize,
    nll: f64,
    converged: bool,
}

/// True iff the empirical distribution is an exact CE of a game with the
/// given class and ratios: the mixture family then attains the empirical
/// likelihood bound at this candidate. Zero-count edges are unconstraining.
fn represents_exactly(class: GameClass, alpha: f64, beta: f64, counts: &[u64; 4]) -> bool {
    let n = counts.map(|c| c as f64);
    // Bounds as (numerator, denominator) pairs: the lower bound num/den
    // with a zero denominator is satisfiable only when the numerator is
    // zero too; an upper bound with zero denominator is infinite.
    let within = |value: f64, lo: (f64, f64), hi: (f64, f64)| -> bool {
        let lo_ok = if lo.1 == 0.0 {
            lo.0 == 0.0
        } else {
            value * lo.1 >= lo.0 * (1.0 - 1e-12)
        };
        let hi_ok = hi.1 == 0.0 || value * hi.1 <= hi.0 * (1.0 + 1e-12);
        lo_ok && hi_ok
    };
    match class {
        GameClass::AntiCoordination => {
            within(alpha, (n[3], n[2]), (n[1], n[0]))
                && within(beta, (n[3], n[1]), (n[2], n[0]))
        }
        GameClass::Coordination => {
            within(alpha, (n[1], n[0]), (n[3], n[2]))
                && within(beta, (n[2], n[0]), (n[3], n[1]))
        }
        _ => false,
    }
}

/// Closed-form candidates: the corners of the empirical feasibility
/// rectangle for one orientation. An edge ratio is valid only when both of
/// its defining counts are positive.
///
/// For an anti-coordination game the empirical distribution is an exact CE
/// iff `n4/n3 <= alpha <= n2/n1` and `n4/n2 <= beta <= n3/n1`; for a
/// coordination game the interval endpoints swap roles. Corners are ranked
/// smallest-first per axis: the most binding consistent game wins ties.
fn corner_candidates(class: GameClass, counts: &[u64; 4]) -> Vec<(usize, f64, f64)> {
    let n = counts.map(|c| c as f64);
    let ratio = |num: f64, den: f64| -> Option<f64> {
        if num > 0.0 && den > 0.0 {
            Some((num / den).clamp(RATIO_MIN, RATIO_MAX))
        } else {
            None
        }
    };
    let (alpha_edges, beta_edges) = match class {
        GameClass::AntiCoordination => (
            [ratio(n[3], n[2]), ratio(n[1], n[0])],
            [ratio(n[3], n[1]), ratio(n[2], n[0])],
        ),
        GameClass::Coordination => (
            [ratio(n[1], n[0]), ratio(n[3], n[2])],
            [ratio(n[2], n[0]), ratio(n[3], n[1])],
        ),
        _ => return Vec::new(),
    };
    let mut out = Vec::new();
    let mut rank = 0;
    for alpha in alpha_edges.into_iter().flatten() {
        for beta in beta_edges.into_iter().flatten() {
            out.push((rank, alpha, beta));
            rank += 1;
        }
    }
    // Geometric center of the rectangle when both edges exist.
    if let ([Some(a0), Some(a1)], [Some(b0), Some(b1)]) = (alpha_edges, beta_edges) {
        out.push((4, (a0 * a1).sqrt(), (b0 * b1).sqrt()));
    }
    out
}

/// Per-feature contributions of the two class margins of one player:
/// `(A_k, B_k)` with `A(w) = sum w_k A_k`, `B(w) = sum w_k B_k`.
fn margin_contributions(features: &FeatureMap, player: Player) -> Vec<(f64, f64)> {
    let a = |l: u8| JointAction::from_index(l).unwrap();
    let rows: Vec<&[f64]> = (1..=4).map(|l| features.features(player, a(l))).collect();
    (0..features.dim(player))
        .map(|k| match player {
            Player::One => (rows[0][k] - rows[2][k], rows[3][k] - rows[1][k]),
            Player::Two => (rows[0][k] - rows[1][k], rows[3][k] - rows[2][k]),
        })
        .collect()
}

/// Finds simplex weights whose margins satisfy `A = rho * B` with the sign
/// orientation of `class`, by enumerating single- and two-feature supports
/// (the basic solutions of the constraint polytope).
///
/// Among solutions the largest margin scale `|B|` wins; scale ties (within
/// a relative 1e-3, which intercept-style features produce) break toward
/// cost-shaped utilities - the representation with the lowest maximum
/// payoff level - and then toward the first support in index order.
fn invert_ratio(
    features: &FeatureMap,
    player: Player,
    class: GameClass,
    rho: f64,
) -> Option<Vec<f64>> {
    let sign = match class {
        GameClass::Coordination => 1.0,
        GameClass::AntiCoordination => -1.0,
        _ => return None,
    };
    let contrib = margin_contributions(features, player);
    let dim = contrib.len();
    let f: Vec<f64> = contrib.iter().map(|(a, b)| a - rho * b).collect();

    let payoff_peak = |w: &[f64]| -> f64 {
        JointAction::ALL
            .iter()
            .map(|&a| dot(features.features(player, a), w))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let mut solutions: Vec<(f64, f64, Vec<f64>)> = Vec::new();
    let mut consider = |w: Vec<f64>| {
        let a: f64 = w.iter().zip(&contrib).map(|(wk, (ak, _))| wk * ak).sum();
        let b: f64 = w.iter().zip(&contrib).map(|(wk, (_, bk))| wk * bk).sum();
        if sign * a <= DEGENERACY_TOL || sign * b <= DEGENERACY_TOL {
            return;
        }
        solutions.push((b.abs(), payoff_peak(&w), w));
    };
    for i in 0..dim {
        if f[i].abs() <= 1e-14 {
            let mut w = vec![0.0; dim];
            w[i] = 1.0;
            consider(w);
        }
        for j in (i + 1)..dim {
            if (f[i] > 0.0) == (f[j] > 0.0) {
                continue;
            }
            let theta = f[j] / (f[j] - f[i]);
            if !(0.0..=1.0).contains(&theta) {
                continue;
            }
            let mut w = vec![0.0; dim];
            w[i] = theta;
            w[j] = 1.0 - theta;
            consider(w);
        }
    }
    let best_scale = solutions
        .iter()
        .map(|(s, _, _)| *s)
        .fold(f64::NEG_INFINITY, f64::max);
    solutions
        .into_iter()
        .filter(|(s, _, _)| *s >= best_scale * (1.0 - 1e-3))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .map(|(_, _, w)| w)
}

/// Fits the CE-ML estimator.
pub fn fit_ce_ml(
    data: &Dataset,
    features: &FeatureMap,
    cfg: &FitConfig,
) -> Result<CeMlEstimate, FitError> {
    let counts = CountVector::from_dataset(data)?;
    let n = counts.counts();
    let bound = nll_with_floor(&counts.empirical(), &counts, cfg.prob_floor);
    // Exact representers attain the empirical likelihood bound; assigning it
    // directly keeps them tied regardless of EM convergence depth.
    let candidate_nll = |class: GameClass, alpha: f64, beta: f64| -> f64 {
        if represents_exactly(class, alpha, beta, &n) {
            bound
        } else {
            ratio_nll(class, alpha, beta, &n, cfg.prob_floor, true).1
        }
    };

    let mut candidates: Vec<Candidate> = Vec::new();
    let mut starts_run = 0;
    for class in [GameClass::Coordination, GameClass::AntiCoordination] {
        // Skip orientations the feature map cannot realize.
        if invert_ratio(features, Player::One, class, 1.0).is_none()
            && invert_ratio(features, Player::One, class, 0.5).is_none()
        {
            continue;
        }
        let corners = corner_candidates(class, &n);
        for &(rank, alpha, beta) in &corners {
            candidates.push(Candidate {
                class,
                alpha,
                beta,
                rank,
                nll: candidate_nll(class, alpha, beta),
                converged: true,
            });
        }

        // Multi-start Nelder-Mead over the log-ratio box refines and covers
        // data that no binding-edge game can reproduce exactly.
        let blocks = [
            Block::Box {
                lo: RATIO_MIN.ln(),
                hi: RATIO_MAX.ln(),
            },
            Block::Box {
                lo: RATIO_MIN.ln(),
                hi: RATIO_MAX.ln(),
            },
        ];
        let warm: Vec<Vec<Vec<f64>>> = corners
            .iter()
            .map(|&(_, alpha, beta)| vec![vec![alpha.ln()], vec![beta.ln()]])
            .collect();
        let search_cfg = FitConfig {
            restarts: cfg.restarts.clamp(4, 16),
            ..cfg.clone()
        };
        let outcome = optimize_with_starts(
            |p| {
                let alpha = p[0][0].exp();
                let beta = p[1][0].exp();
                ratio_nll(class, alpha, beta, &n, cfg.prob_floor, false).1
            },
            &blocks,
            &warm,
            &search_cfg,
        )?;
        starts_run += outcome.restart_trace.len();
        for (i, params) in outcome.restart_params.iter().enumerate() {
            let alpha = params[0][0].exp();
            let beta = params[1][0].exp();
            candidates.push(Candidate {
                class,
                alpha,
                beta,
                rank: 8 + i,
                nll: candidate_nll(class, alpha, beta),
                converged: outcome.restart_converged[i],
            });
        }
    }

    // Keep only candidates whose ratios are realizable as weights.
    let invertible = |c: &Candidate| {
        invert_ratio(features, Player::One, c.class, c.alpha).is_some()
            && invert_ratio(features, Player::Two, c.class, c.beta).is_some()
    };
    candidates.retain(invertible);
    if candidates.is_empty() {
        return Err(FitError::NoFeasibleCandidate {
            restarts: starts_run,
            best: f64::INFINITY,
        });
    }

    let best_nll = candidates
        .iter()
        .map(|c| c.nll)
        .fold(f64::INFINITY, f64::min);
    let tie_cut = best_nll + 1e-9 * (1.0 + best_nll.abs());
    let selected = candidates
        .iter()
        .filter(|c| c.nll <= tie_cut)
        .min_by(|a, b| {
            a.rank
                .cmp(&b.rank)
                .then(a.nll.partial_cmp(&b.nll).unwrap())
        })
        .expect("tie group is non-empty");

    let w1 = WeightVector::new(
        invert_ratio(features, Player::One, selected.class, selected.alpha)
            .expect("candidate was checked invertible"),
    )?;
    let w2 = WeightVector::new(
        invert_ratio(features, Player::Two, selected.class, selected.beta)
            .expect("candidate was checked invertible"),
    )?;
    let game = Game2x2::new(features.clone(), w1.clone(), w2.clone())?;
    let vertices = ce_vertices(&game)?;
    let rows: [[f64; 4]; 5] = {
        let mut rows = [[0.0; 4]; 5];
        for (row, v) in rows.iter_mut().zip(vertices.as_array()) {
            *row = v.probs();
        }
        rows
    };
    let em = em_mixture_best(&rows, &n, cfg.prob_floor);
    let (y, _) = polish_mixture(&rows, &n, cfg.prob_floor, em);
    let mixture = MixtureWeights::new(y)?;
    let fitted = mixture_distribution(&vertices, &mixture);
    let nll = nll_with_floor(&fitted, &counts, cfg.prob_floor);

    let mut trace: Vec<f64> = candidates.iter().map(|c| c.nll).collect();
    trace.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(CeMlEstimate {
        weights: (w1, w2),
        mixture,
        nll,
        fitted,
        diagnostics: FitDiagnostics {
            restarts: candidates.len(),
            best_restart: selected.rank,
            converged: selected.converged,
            restart_trace: trace,
        },
    })
}

/// Registry entry for CE-ML.
pub struct CeMlEstimator;

impl Estimator for CeMlEstimator {
    fn name(&self) -> &'static str {
        "ce-ml"
    }

    fn fit(
        &self,
        data: &Dataset,
        features: &FeatureMap,
        cfg: &FitConfig,
    ) -> Result<EstimateResult, FitError> {
        let est = fit_ce_ml(data, features, cfg)?;
        Ok(EstimateResult {
            method: self.name().to_string(),
            weights: est.weights,
            params: ModelParams::Mixture { y: est.mixture },
            nll: est.nll,
            fitted: est.fitted,
            diagnostics: est.diagnostics,
        })
    }
}
