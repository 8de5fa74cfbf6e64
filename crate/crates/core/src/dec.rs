//! Decision-estimation coefficients for finite model classes.
//!
//! For a fixed multiplier `λ` the offset coefficient
//! `dec^o_λ = min_μ max_g μ(Δ − λ I_f) e_g` is the value of a zero-sum matrix
//! game and is solved exactly by [`crate::lp`]. The average-constrained
//! coefficient is then
//!
//! ```text
//! dec^ac_ε = min_{λ ≥ 0} { dec^o_λ + λ ε² },
//! ```
//!
//! a one-dimensional problem in `λ` that is not convex in general, so it is
//! searched by branch and bound over a grid; see [`LambdaSearch`].

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{E2dError, Result};
use crate::lp::solve_zero_sum;
use crate::model::{GapMatrix, InfoMatrix};
use crate::simplex::{simplex_grid, SimplexVector};

/// Solution of a coefficient program.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecSolution {
    pub value: f64,
    pub mu: SimplexVector,
    pub lambda_star: f64,
    /// Adversary `ν*` from the LP dual at `λ*`, when available.
    pub adversary: Option<SimplexVector>,
}

/// Outer search over the multiplier `λ`.
///
/// `g(λ) = dec^o_λ + λε²` is piecewise linear but not convex, and for small
/// `ε` its minimum often sits in a narrow valley near zero. The search starts
/// from a uniform grid on `[0, λ_max]` joined with points `λ_max·2^{-k}`, then
/// runs branch and bound: the LP adversary `ν` at each evaluated `λ` gives the
/// concave lower bound `min_π (Δ − λI)ν + λε²` on `g`, and the interval with
/// the lowest bound is split until the bound meets the incumbent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaSearch {
    /// Points of the uniform grid on `[0, λ_max]`.
    pub grid_size: usize,
    /// Extra points `λ_max·2^{-k}` for `k = 1..=geometric_points`.
    #[serde(default)]
    pub geometric_points: usize,
    /// Budget of extra LP solves for branch and bound; 0 keeps the grid minimum.
    pub refine_rounds: usize,
}

impl Default for LambdaSearch {
    fn default() -> Self {
        Self { grid_size: 50, geometric_points: 20, refine_rounds: 200 }
    }
}

impl LambdaSearch {
    /// Plain uniform grid without extra points or refinement.
    pub fn grid_only(grid_size: usize) -> Self {
        Self { grid_size, geometric_points: 0, refine_rounds: 0 }
    }
}

/// Solution of the offset game at a fixed `λ`.
#[derive(Debug, Clone)]
pub struct OffsetSolution {
    pub value: f64,
    pub mu: SimplexVector,
    pub adversary: SimplexVector,
}

fn check_shapes(gaps: &DMatrix<f64>, info: &InfoMatrix) -> Result<()> {
    if gaps.shape() != info.matrix().shape() {
        return Err(E2dError::InvalidParameter(format!(
            "gap matrix {:?} and information matrix {:?} differ in shape",
            gaps.shape(),
            info.matrix().shape()
        )));
    }
    Ok(())
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(E2dError::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(())
}

fn offset_game(objective: &DMatrix<f64>, info: &InfoMatrix, lambda: f64) -> Result<OffsetSolution> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(E2dError::InvalidParameter(format!("lambda must be nonnegative, got {lambda}")));
    }
    let payoff = objective - info.matrix() * lambda;
    let s = solve_zero_sum(&payoff)?;
    Ok(OffsetSolution { value: s.value, mu: s.row, adversary: s.column })
}

/// `dec^o_λ = min_μ max_g μ(Δ − λ I_f) e_g`, solved as a linear program.
pub fn dec_offset(gaps: &GapMatrix, info: &InfoMatrix, lambda: f64) -> Result<OffsetSolution> {
    check_shapes(gaps.matrix(), info)?;
    offset_game(gaps.matrix(), info, lambda)
}

/// An evaluated `λ` with the lines `a_π + λ s_π` whose minimum lower-bounds `g`.
struct Node {
    lambda: f64,
    value: f64,
    lines: Vec<(f64, f64)>,
    sol: OffsetSolution,
}

fn lower_envelope(lines: &[(f64, f64)], lambda: f64) -> f64 {
    lines.iter().map(|(a, s)| a + lambda * s).fold(f64::INFINITY, f64::min)
}

/// Minimum over `[l.λ, r.λ]` of the larger of the two concave lower bounds,
/// with its location. The minimum sits at an endpoint or where a line of one
/// bound crosses a line of the other.
fn interval_bound(l: &Node, r: &Node) -> (f64, f64) {
    let bound = |x: f64| lower_envelope(&l.lines, x).max(lower_envelope(&r.lines, x));
    let mut best = (bound(l.lambda), l.lambda);
    let right = (bound(r.lambda), r.lambda);
    if right.0 < best.0 {
        best = right;
    }
    for &(a1, s1) in &l.lines {
        for &(a2, s2) in &r.lines {
            if s1 == s2 {
                continue;
            }
            let x = (a2 - a1) / (s1 - s2);
            if x > l.lambda && x < r.lambda {
                let v = bound(x);
                if v < best.0 {
                    best = (v, x);
                }
            }
        }
    }
    best
}

/// Minimizes `dec^o_λ(objective) + λε²` over `λ ∈ [0, λ_max]`.
fn minimize_over_lambda(
    objective: &DMatrix<f64>,
    info: &InfoMatrix,
    epsilon: f64,
    lambda_max: f64,
    search: &LambdaSearch,
) -> Result<DecSolution> {
    if search.grid_size < 2 {
        return Err(E2dError::InvalidParameter("lambda grid needs at least 2 points".into()));
    }
    let eps_sq = epsilon * epsilon;
    let (n_dec, n_mod) = objective.shape();
    let eval = |lambda: f64| -> Result<Node> {
        let sol = offset_game(objective, info, lambda)?;
        let nu = sol.adversary.weights();
        let lines = (0..n_dec)
            .map(|p| {
                let a: f64 = (0..n_mod).map(|g| nu[g] * objective[(p, g)]).sum();
                let b: f64 = (0..n_mod).map(|g| nu[g] * info.get(p, g)).sum();
                (a, eps_sq - b)
            })
            .collect();
        Ok(Node { lambda, value: sol.value + lambda * eps_sq, lines, sol })
    };

    let step = lambda_max / (search.grid_size - 1) as f64;
    let mut lambdas: Vec<f64> = (0..search.grid_size).map(|k| step * k as f64).collect();
    lambdas.extend((1..=search.geometric_points).map(|k| lambda_max * 0.5f64.powi(k as i32)));
    lambdas.sort_by(f64::total_cmp);
    lambdas.dedup();
    let mut nodes: Vec<Node> = lambdas.into_iter().map(eval).collect::<Result<_>>()?;
    let mut bounds: Vec<(f64, f64)> = nodes.windows(2).map(|w| interval_bound(&w[0], &w[1])).collect();

    for _ in 0..search.refine_rounds {
        let incumbent = nodes.iter().map(|n| n.value).fold(f64::INFINITY, f64::min);
        let (k, &(lower, at)) = bounds
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
            .expect("at least one interval");
        if lower >= incumbent - LAMBDA_TOLERANCE * incumbent.abs().max(1.0) {
            break;
        }
        let (l, r) = (nodes[k].lambda, nodes[k + 1].lambda);
        let width = r - l;
        if !(width > 1e-12 * lambda_max.max(1.0)) {
            break;
        }
        // Keep splits away from the endpoints so intervals always shrink.
        let x = at.clamp(l + 1e-3 * width, r - 1e-3 * width);
        nodes.insert(k + 1, eval(x)?);
        bounds[k] = interval_bound(&nodes[k], &nodes[k + 1]);
        bounds.insert(k + 1, interval_bound(&nodes[k + 1], &nodes[k + 2]));
    }

    let best = nodes
        .into_iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("the grid is nonempty");
    Ok(DecSolution {
        value: best.value,
        mu: best.sol.mu,
        lambda_star: best.lambda,
        adversary: Some(best.sol.adversary),
    })
}

/// Absolute gap, relative to `max(1, |value|)`, at which the `λ` search stops.
const LAMBDA_TOLERANCE: f64 = 1e-9;

/// Upper end of the `λ` grid: `max(Δ⁺)/ε²`, or `1/ε²` when no entry is positive.
pub fn lambda_upper_limit(max_positive: Option<f64>, epsilon: f64) -> f64 {
    max_positive.unwrap_or(1.0) / (epsilon * epsilon)
}

/// Average-constrained coefficient `dec^ac_ε` with the plain gap matrix.
pub fn dec_ac(gaps: &GapMatrix, info: &InfoMatrix, epsilon: f64, search: &LambdaSearch) -> Result<DecSolution> {
    check_shapes(gaps.matrix(), info)?;
    check_epsilon(epsilon)?;
    let lambda_max = lambda_upper_limit(gaps.max_positive(), epsilon);
    minimize_over_lambda(gaps.matrix(), info, epsilon, lambda_max, search)
}

/// `dec^{ac,f}_ε` with the reference-shifted gaps `Δ_f`; identical program,
/// only the objective matrix differs.
pub fn dec_ac_shifted(
    shifted_gaps: &GapMatrix,
    info: &InfoMatrix,
    epsilon: f64,
    search: &LambdaSearch,
) -> Result<DecSolution> {
    dec_ac(shifted_gaps, info, epsilon, search)
}

/// PAC coefficient: the objective is `δ_f(g)`, constant in `μ`, so only the
/// information term couples the players.
pub fn pac_dec(delta_f: &[f64], info: &InfoMatrix, epsilon: f64, search: &LambdaSearch) -> Result<DecSolution> {
    check_epsilon(epsilon)?;
    let (n_dec, n_mod) = info.matrix().shape();
    if delta_f.len() != n_mod {
        return Err(E2dError::DimensionMismatch { expected: n_mod, got: delta_f.len() });
    }
    let objective = DMatrix::from_fn(n_dec, n_mod, |_, g| delta_f[g]);
    let max_positive = delta_f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lambda_max = lambda_upper_limit((max_positive > 0.0).then_some(max_positive), epsilon);
    minimize_over_lambda(&objective, info, epsilon, lambda_max, search)
}

/// Brute-force `dec^c_ε`: the adversary plays single models inside the
/// divergence ball, the learner searches a simplex grid with spacing
/// `mu_grid_step`. Diagnostic only; refuses more than four decisions.
pub fn dec_constrained_oracle(gaps: &GapMatrix, info: &InfoMatrix, epsilon: f64, mu_grid_step: f64) -> Result<f64> {
    check_shapes(gaps.matrix(), info)?;
    check_epsilon(epsilon)?;
    let n_dec = gaps.n_decisions();
    if n_dec > 4 {
        return Err(E2dError::InvalidParameter(format!(
            "constrained oracle grid too coarse for {n_dec} decisions (max 4)"
        )));
    }
    let divisions = grid_divisions(mu_grid_step)?;
    let eps_sq = epsilon * epsilon;
    let mut best = f64::INFINITY;
    for mu in simplex_grid(n_dec, divisions) {
        let mut worst = f64::NEG_INFINITY;
        for g in 0..gaps.n_models() {
            let inf: f64 = (0..n_dec).map(|pi| mu[pi] * info.get(pi, g)).sum();
            if inf <= eps_sq {
                let gap: f64 = (0..n_dec).map(|pi| mu[pi] * gaps.get(pi, g)).sum();
                worst = worst.max(gap);
            }
        }
        best = best.min(worst);
    }
    Ok(best)
}

pub(crate) fn grid_divisions(step: f64) -> Result<usize> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(E2dError::InvalidParameter(format!("grid step must lie in (0, 1], got {step}")));
    }
    Ok((1.0 / step).round().max(1.0) as usize)
}

/// Minimum of `(μa)₊^α / (μb)` over the simplex.
#[derive(Debug, Clone)]
pub struct RatioMinimum {
    pub value: f64,
    pub mu: SimplexVector,
    /// `b = I_f ν` vanishes identically.
    pub degenerate: bool,
}

/// `(x₊)^α / y` with the conventions `0/0 = 0` and `x/0 = +∞` for `x > 0`.
fn ratio(x: f64, y: f64, alpha: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if y <= 0.0 {
        f64::INFINITY
    } else {
        x.powf(alpha) / y
    }
}

/// Minimizes `(μa)₊^α / (μb)` over the probability simplex (`b ≥ 0`).
///
/// For a fixed denominator the numerator is minimized by a linear program
/// with two equality constraints, so some minimizer is supported on at most
/// two decisions; each pair is solved in closed form along its edge.
pub fn minimize_ratio(a: &[f64], b: &[f64], alpha: f64) -> Result<RatioMinimum> {
    if a.len() != b.len() || a.is_empty() {
        return Err(E2dError::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    if !(alpha > 1.0) {
        return Err(E2dError::InvalidParameter(format!("alpha must exceed 1, got {alpha}")));
    }
    let n = a.len();
    let degenerate = b.iter().all(|&x| x <= 0.0);
    let mut best_value = f64::INFINITY;
    let mut best_mu = (0usize, 0usize, 1.0f64);
    let mut consider = |i: usize, j: usize, p: f64| {
        let p = p.clamp(0.0, 1.0);
        let x = p * a[i] + (1.0 - p) * a[j];
        let y = p * b[i] + (1.0 - p) * b[j];
        let v = ratio(x, y, alpha);
        if v < best_value {
            best_value = v;
            best_mu = (i, j, p);
        }
    };
    for i in 0..n {
        consider(i, i, 1.0);
        for j in (i + 1)..n {
            // Along the edge p ↦ p e_i + (1−p) e_j.
            let (da, db) = (a[i] - a[j], b[i] - b[j]);
            if da != 0.0 {
                // Zero crossing of the numerator.
                consider(i, j, -a[j] / da);
            }
            if da != 0.0 && db != 0.0 {
                // Stationary point of x^α / y.
                let p = (db * a[j] - alpha * da * b[j]) / ((alpha - 1.0) * da * db);
                if p.is_finite() {
                    consider(i, j, p);
                }
            }
        }
    }
    let (i, j, p) = best_mu;
    let mut weights = vec![0.0; n];
    weights[i] += p;
    weights[j] += 1.0 - p;
    Ok(RatioMinimum { value: best_value, mu: SimplexVector::from_unnormalized(weights)?, degenerate })
}

/// Information ratio `min_μ (μΔ_fν)₊² / (μ I_f ν)` for a fixed `ν`.
pub fn info_ratio(shifted_gaps: &GapMatrix, info: &InfoMatrix, nu: &SimplexVector) -> Result<RatioMinimum> {
    generalized_info_ratio(shifted_gaps, info, nu, 2.0)
}

/// Generalized ratio `min_μ (μΔ_fν)₊^α / (μ I_f ν)`.
pub fn generalized_info_ratio(
    shifted_gaps: &GapMatrix,
    info: &InfoMatrix,
    nu: &SimplexVector,
    alpha: f64,
) -> Result<RatioMinimum> {
    check_shapes(shifted_gaps.matrix(), info)?;
    if nu.len() != shifted_gaps.n_models() {
        return Err(E2dError::DimensionMismatch { expected: shifted_gaps.n_models(), got: nu.len() });
    }
    let nu_vec = nalgebra::DVector::from_column_slice(nu.weights());
    let a = shifted_gaps.matrix() * &nu_vec;
    let b = info.matrix() * &nu_vec;
    minimize_ratio(a.as_slice(), b.as_slice(), alpha)
}

/// `max_ν min_μ Ψ_{α,f}(μ, ν)`, estimated over the vertices of `𝒫(H)` and over
/// a regular grid with `divisions` steps per unit mass.
#[derive(Debug, Clone, Serialize)]
pub struct PsiEstimate {
    pub over_vertices: f64,
    pub over_grid: f64,
    pub argmax_grid: Vec<f64>,
}

pub fn max_info_ratio(
    shifted_gaps: &GapMatrix,
    info: &InfoMatrix,
    alpha: f64,
    divisions: usize,
) -> Result<PsiEstimate> {
    let n_mod = shifted_gaps.n_models();
    let mut over_vertices = 0.0f64;
    for g in 0..n_mod {
        let r = generalized_info_ratio(shifted_gaps, info, &SimplexVector::vertex(n_mod, g), alpha)?;
        over_vertices = over_vertices.max(r.value);
    }
    let mut over_grid = 0.0f64;
    let mut argmax_grid = SimplexVector::vertex(n_mod, 0).weights().to_vec();
    for nu in simplex_grid(n_mod, divisions) {
        let nu = SimplexVector::from_unnormalized(nu)?;
        let r = generalized_info_ratio(shifted_gaps, info, &nu, alpha)?;
        if r.value > over_grid {
            over_grid = r.value;
            argmax_grid = nu.weights().to_vec();
        }
    }
    Ok(PsiEstimate { over_vertices, over_grid: over_grid.max(over_vertices), argmax_grid })
}

/// `min_{λ>0} λ^{1/(1−α)} α^{α/(1−α)} (α−1) Ψ_α^{1/(α−1)} + λε²`, minimized in
/// closed form. With `Ψ_α = 0` the bound is zero.
pub fn generalized_bound_from_psi(psi_alpha: f64, epsilon: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 1.0) {
        return Err(E2dError::InvalidParameter(format!("alpha must exceed 1, got {alpha}")));
    }
    check_epsilon(epsilon)?;
    if psi_alpha <= 0.0 {
        return Ok(0.0);
    }
    if psi_alpha.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let c = alpha.powf(alpha / (1.0 - alpha)) * (alpha - 1.0) * psi_alpha.powf(1.0 / (alpha - 1.0));
    let eps_sq = epsilon * epsilon;
    let lambda = (c / ((alpha - 1.0) * eps_sq)).powf((alpha - 1.0) / alpha);
    Ok(c * lambda.powf(1.0 / (1.0 - alpha)) + lambda * eps_sq)
}

/// Upper bound on `dec^{ac,f}_ε` through the generalized information ratio,
/// with `Ψ_α` taken over a `ν`-grid with `divisions` steps.
pub fn generalized_dec_bound(
    shifted_gaps: &GapMatrix,
    info: &InfoMatrix,
    epsilon: f64,
    alpha: f64,
    divisions: usize,
) -> Result<f64> {
    if !(alpha > 1.0) {
        return Err(E2dError::InvalidParameter(format!("alpha must exceed 1, got {alpha}")));
    }
    let psi = max_info_ratio(shifted_gaps, info, alpha, divisions)?;
    generalized_bound_from_psi(psi.over_grid, epsilon, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{gap_matrix, info_matrix, shifted_gap_matrix, FiniteInstance};

    fn unit_info_two_by_two() -> (GapMatrix, InfoMatrix) {
        let gaps = GapMatrix::from_matrix(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let info = InfoMatrix::from_matrix(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 1.0]), Some(0));
        (gaps, info)
    }

    /// Brute-force `min_μ max_g` over a μ-grid of step 1e-3 (two decisions).
    fn offset_grid_oracle(gaps: &GapMatrix, info: &InfoMatrix, lambda: f64) -> f64 {
        let mut best = f64::INFINITY;
        for k in 0..=1000 {
            let p = k as f64 / 1000.0;
            let mu = [p, 1.0 - p];
            let worst = (0..gaps.n_models())
                .map(|g| (0..2).map(|pi| mu[pi] * (gaps.get(pi, g) - lambda * info.get(pi, g))).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max);
            best = best.min(worst);
        }
        best
    }

    #[test]
    fn offset_closed_form_on_two_by_two() {
        let (gaps, info) = unit_info_two_by_two();
        for &lambda in &[0.0, 0.25, 0.5, 0.9, 1.0, 1.5, 3.0] {
            let s = dec_offset(&gaps, &info, lambda).unwrap();
            let closed = f64::max(0.0, (1.0 - lambda) / 2.0);
            let oracle = offset_grid_oracle(&gaps, &info, lambda);
            assert!((oracle - closed).abs() < 1e-3, "oracle {oracle} vs closed form {closed}");
            assert!((s.value - closed).abs() < 1e-10, "λ={lambda}: {} vs {closed}", s.value);
        }
    }

    #[test]
    fn offset_at_zero_lambda_is_minimax_gap() {
        let (gaps, info) = unit_info_two_by_two();
        let s = dec_offset(&gaps, &info, 0.0).unwrap();
        assert!((s.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn singleton_class_is_zero() {
        let inst = FiniteInstance::with_reward_observations(vec![vec![0.2, 0.9, 0.4]], 0.5).unwrap();
        let gaps = gap_matrix(&inst);
        let info = info_matrix(&inst, 0).unwrap();
        let s = dec_offset(&gaps, &info, 2.0).unwrap();
        assert!(s.value.abs() < 1e-12);
        assert_eq!(s.mu.argmax(), 1);
        assert!((s.mu.weights()[1] - 1.0).abs() < 1e-12);
        for eps in [0.05, 0.3, 1.0] {
            let ac = dec_ac(&gaps, &info, eps, &LambdaSearch::default()).unwrap();
            assert!(ac.value.abs() < 1e-12);
            let sh = dec_ac_shifted(&shifted_gap_matrix(&inst, 0).unwrap(), &info, eps, &LambdaSearch::default()).unwrap();
            assert!(sh.value.abs() < 1e-12);
            assert!(dec_constrained_oracle(&gaps, &info, eps, 0.05).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn ac_closed_form_on_two_by_two() {
        let (gaps, info) = unit_info_two_by_two();
        for &eps_sq in &[0.01, 0.1, 0.25, 0.4, 0.5] {
            let s = dec_ac(&gaps, &info, f64::sqrt(eps_sq), &LambdaSearch::default()).unwrap();
            assert!((s.value - eps_sq).abs() < 1e-6, "ε²={eps_sq}: {}", s.value);
            // At ε² = ½ every λ ∈ [0, 1] is optimal.
            if eps_sq < 0.5 {
                assert!((s.lambda_star - 1.0).abs() < 1e-3, "λ* = {}", s.lambda_star);
                assert!(s.mu.weights()[0] > 1.0 - 1e-6);
            }
            assert!(s.lambda_star * eps_sq <= s.value + 1e-6);
        }
    }

    #[test]
    fn constrained_oracle_on_two_by_two() {
        let (gaps, info) = unit_info_two_by_two();
        let v = dec_constrained_oracle(&gaps, &info, 0.5, 0.01).unwrap();
        assert!(v <= 0.25 + 1e-12, "{v}");
        let big = GapMatrix::from_matrix(DMatrix::zeros(5, 2));
        let big_info = InfoMatrix::from_matrix(DMatrix::zeros(5, 2), None);
        assert!(dec_constrained_oracle(&big, &big_info, 0.5, 0.1).is_err());
    }

    #[test]
    fn pac_dec_zero_when_optimal_values_agree() {
        let (_, info) = unit_info_two_by_two();
        let s = pac_dec(&[0.0, 0.0], &info, 0.3, &LambdaSearch::default()).unwrap();
        assert!(s.value.abs() < 1e-12);
        assert!(pac_dec(&[0.0], &info, 0.3, &LambdaSearch::default()).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        let (gaps, info) = unit_info_two_by_two();
        assert!(dec_offset(&gaps, &info, -1.0).is_err());
        assert!(dec_ac(&gaps, &info, 0.0, &LambdaSearch::default()).is_err());
        assert!(dec_ac(&gaps, &info, 0.1, &LambdaSearch::grid_only(1)).is_err());
        let wrong = InfoMatrix::from_matrix(DMatrix::zeros(3, 2), None);
        assert!(dec_offset(&gaps, &wrong, 1.0).is_err());
        assert!(generalized_dec_bound(&gaps, &info, 0.1, 1.0, 10).is_err());
    }

    /// Grid search for `min_μ (μa)₊²/(μb)` over the simplex with step 1e-3.
    fn ratio_grid_oracle(a: &[f64], b: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        for mu in simplex_grid(a.len(), 1000) {
            let x: f64 = mu.iter().zip(a).map(|(m, v)| m * v).sum();
            let y: f64 = mu.iter().zip(b).map(|(m, v)| m * v).sum();
            best = best.min(ratio(x, y, 2.0));
        }
        best
    }

    #[test]
    fn info_ratio_matches_grid_on_assumption_one_instance() {
        let inst = FiniteInstance::with_reward_observations(vec![vec![1.0, 0.0], vec![0.0, 1.0]], 0.5).unwrap();
        let shifted = shifted_gap_matrix(&inst, 0).unwrap();
        let info = info_matrix(&inst, 0).unwrap();
        let nu = SimplexVector::uniform(2);
        let r = info_ratio(&shifted, &info, &nu).unwrap();
        let nu_v = nalgebra::DVector::from_column_slice(nu.weights());
        let a = shifted.matrix() * &nu_v;
        let b = info.matrix() * &nu_v;
        let oracle = ratio_grid_oracle(a.as_slice(), b.as_slice());
        assert!(r.value.is_finite());
        assert!(r.value <= oracle + 1e-12);
        assert!(oracle - r.value < 1e-3, "closed form {} grid {}", r.value, oracle);
    }

    #[test]
    fn info_ratio_at_reference_vertex() {
        let inst = FiniteInstance::with_reward_observations(vec![vec![1.0, 0.0], vec![0.0, 1.0]], 0.5).unwrap();
        let shifted = shifted_gap_matrix(&inst, 0).unwrap();
        let info = info_matrix(&inst, 0).unwrap();
        let r = info_ratio(&shifted, &info, &SimplexVector::vertex(2, 0)).unwrap();
        assert!(r.degenerate);
        // Playing π*_f makes the numerator zero.
        assert_eq!(r.value, 0.0);
        // Positive numerator everywhere and b ≡ 0 gives +∞.
        let inf = minimize_ratio(&[1.0, 2.0], &[0.0, 0.0], 2.0).unwrap();
        assert!(inf.degenerate && inf.value.is_infinite());
    }

    #[test]
    fn ratio_minimum_can_be_interior() {
        // Vertices give 1 and 1, the midpoint 0.9.
        let r = minimize_ratio(&[1.0, 2.0], &[1.0, 4.0], 2.0).unwrap();
        assert!(r.value < 0.9 + 1e-12);
        let oracle = ratio_grid_oracle(&[1.0, 2.0], &[1.0, 4.0]);
        assert!((r.value - oracle).abs() < 1e-5);
    }

    #[test]
    fn generalized_bound_at_alpha_two_is_eps_sqrt_psi() {
        for &(psi, eps) in &[(0.5, 0.1), (3.0, 0.4), (10.0, 0.05)] {
            let b = generalized_bound_from_psi(psi, eps, 2.0).unwrap();
            assert!((b - eps * f64::sqrt(psi)).abs() < 1e-12);
        }
        assert_eq!(generalized_bound_from_psi(0.0, 0.1, 3.0).unwrap(), 0.0);
    }
}
