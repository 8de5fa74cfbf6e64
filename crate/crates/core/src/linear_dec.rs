//! DEC for linear instances by Frank–Wolfe over the decision simplex.
//!
//! For fixed `λ` the inner problem is the convex program
//!
//! ```text
//! min_μ max_b ⟨φ_b − φ_μ, f̂⟩ + ‖φ_b‖²_{V(μ)⁻¹} / (4λ) + λε²,
//! V(μ) = Σ_π μ_π M_πᵀ M_π + γI.
//! ```
//!
//! Every feature lies in the row space of its observation map, so all the
//! quadratic forms live in the span `S` of the observation rows. With an
//! orthonormal basis `Q` of `S`, `V(μ) = Q (QᵀV(μ)Q) Qᵀ + γ(I − QQᵀ)` and
//! `φᵀV(μ)⁻¹φ` equals the same form computed with the `k × k` matrix
//! `QᵀV(μ)Q`. The solver works in those coordinates throughout, which is exact
//! and makes each objective evaluation cost `O(k³ + |Π|k²)` instead of `O(d³)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dec::DecSolution;
use crate::error::{E2dError, Result};
use crate::model::LinearInstance;
use crate::simplex::{argmin, SimplexVector};

/// Numerical ridge added to `V(μ)`.
pub const DESIGN_RIDGE: f64 = 1e-9;
const RANK_TOL: f64 = 1e-10;

/// Which gap the objective is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapKind {
    /// `r_g(π*_g) − r_f̂(π)`; the norm term is `‖φ_b‖²_{V⁻¹}`.
    #[default]
    Shifted,
    /// `r_g(π*_g) − r_g(π)`; the norm term is `‖φ_b − φ_μ‖²_{V⁻¹}`.
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FwOptions {
    pub steps: usize,
    /// Initial log-sum-exp temperature `τ₀` for the max over `b`, decayed as
    /// `τ₀/√(k+1)`. `None` uses the subgradient of the active term, which can
    /// stall at a kink of the max.
    pub smoothing: Option<f64>,
}

pub const DEFAULT_SMOOTHING: f64 = 0.1;

impl FwOptions {
    pub fn with_steps(steps: usize) -> Self {
        Self { steps, ..Self::default() }
    }
}

impl Default for FwOptions {
    fn default() -> Self {
        Self { steps: 100, smoothing: Some(DEFAULT_SMOOTHING) }
    }
}

/// `V(μ)` and friends in reduced coordinates.
#[derive(Debug, Clone)]
pub struct DesignState {
    pub mu: SimplexVector,
    pub v: DMatrix<f64>,
    pub v_inv: DMatrix<f64>,
    pub phi_mu: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct FwResult {
    pub mu: SimplexVector,
    pub value: f64,
    /// Iteration at which the best iterate was found (0 is the start point).
    pub best_iteration: usize,
}

/// Precomputed reduced representation of a linear instance. Matrices are
/// stored flat and row-major; the hot loop allocates nothing.
#[derive(Debug, Clone)]
pub struct LinearDecSolver {
    dim: usize,
    k: usize,
    /// `n × k` reduced features `Qᵀφ_π`.
    features: Vec<f64>,
    full_features: Vec<DVector<f64>>,
    /// `n` blocks of `k × k` reduced Gram matrices `QᵀM_πᵀM_πQ`.
    grams: Vec<f64>,
    gap: GapKind,
}

/// Scratch buffers for one objective evaluation.
struct Workspace {
    chol: Vec<f64>,
    /// `n × k`: `L⁻¹x_b` for every `b`.
    whitened: Vec<f64>,
    phi_mu: Vec<f64>,
    x: Vec<f64>,
    u: Vec<f64>,
    /// `Σ_b w_b u_b u_bᵀ`, row-major `k × k`.
    outer: Vec<f64>,
    u_sum: Vec<f64>,
    values: Vec<f64>,
    grad: Vec<f64>,
}

impl Workspace {
    fn new(n: usize, k: usize) -> Self {
        Self {
            chol: vec![0.0; k * k],
            whitened: vec![0.0; n * k],
            phi_mu: vec![0.0; k],
            x: vec![0.0; k],
            u: vec![0.0; k],
            outer: vec![0.0; k * k],
            u_sum: vec![0.0; k],
            values: vec![0.0; n],
            grad: vec![0.0; n],
        }
    }
}

impl LinearDecSolver {
    pub fn new(inst: &LinearInstance) -> Self {
        Self::with_gap(inst, GapKind::Shifted)
    }

    pub fn with_gap(inst: &LinearInstance, gap: GapKind) -> Self {
        let d = inst.dim();
        let rows: usize = inst.obs_maps().iter().map(|m| m.nrows()).sum::<usize>() + inst.n_decisions();
        let mut stacked = DMatrix::zeros(rows, d);
        let mut r = 0;
        for m in inst.obs_maps() {
            stacked.rows_mut(r, m.nrows()).copy_from(m);
            r += m.nrows();
        }
        for phi in inst.features() {
            stacked.row_mut(r).copy_from(&phi.transpose());
            r += 1;
        }
        // Eigenvectors of the d×d Gram matrix with non-negligible eigenvalue
        // span the row space.
        let gram = stacked.transpose() * &stacked;
        let eig = gram.symmetric_eigen();
        let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..d).filter(|&i| eig.eigenvalues[i] > RANK_TOL * top.max(1.0)).collect();
        let basis = if keep.is_empty() {
            DMatrix::zeros(d, 0)
        } else {
            DMatrix::from_columns(&keep.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>())
        };
        let k = basis.ncols();

        let mut features = Vec::with_capacity(inst.n_decisions() * k);
        for phi in inst.features() {
            features.extend((basis.transpose() * phi).iter());
        }
        let mut grams = Vec::with_capacity(inst.n_decisions() * k * k);
        for m in inst.obs_maps() {
            let mq = m * &basis;
            let g = mq.transpose() * &mq;
            for i in 0..k {
                for j in 0..k {
                    grams.push(g[(i, j)]);
                }
            }
        }
        Self { dim: d, k, features, full_features: inst.features().to_vec(), grams, gap }
    }

    pub fn n_decisions(&self) -> usize {
        self.full_features.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dimension of the observed subspace.
    pub fn reduced_dim(&self) -> usize {
        self.k
    }

    pub fn gap(&self) -> GapKind {
        self.gap
    }

    fn feature(&self, pi: usize) -> &[f64] {
        &self.features[pi * self.k..(pi + 1) * self.k]
    }

    /// `⟨φ_π, f̂⟩` for every decision.
    pub fn scores(&self, f_hat: &DVector<f64>) -> Result<Vec<f64>> {
        if f_hat.len() != self.dim {
            return Err(E2dError::DimensionMismatch { expected: self.dim, got: f_hat.len() });
        }
        Ok(self.full_features.iter().map(|phi| phi.dot(f_hat)).collect())
    }

    /// Materializes `V(μ)` and its inverse in reduced coordinates.
    pub fn design_state(&self, mu: &SimplexVector) -> DesignState {
        let k = self.k;
        let mut v = DMatrix::identity(k, k) * DESIGN_RIDGE;
        let mut phi_mu = DVector::zeros(k);
        for (pi, &w) in mu.weights().iter().enumerate() {
            if w > 0.0 {
                v += DMatrix::from_row_slice(k, k, &self.grams[pi * k * k..(pi + 1) * k * k]) * w;
                phi_mu += DVector::from_column_slice(self.feature(pi)) * w;
            }
        }
        let sym = (&v + v.transpose()) * 0.5;
        let v_inv = sym.cholesky().expect("design matrix is positive definite").inverse();
        DesignState { mu: mu.clone(), v, v_inv, phi_mu }
    }

    /// Fills `ws.values` with the per-`b` objective (without `λε²`) and
    /// returns the active `b`, lowest index on ties.
    fn evaluate(&self, ws: &mut Workspace, scores: &[f64], mu: &[f64], lambda: f64) -> Result<usize> {
        let k = self.k;
        let n = self.n_decisions();
        let chol = &mut ws.chol;
        chol.iter_mut().for_each(|x| *x = 0.0);
        ws.phi_mu.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..k {
            chol[i * k + i] = DESIGN_RIDGE;
        }
        for (pi, &w) in mu.iter().enumerate() {
            if w > 0.0 {
                let g = &self.grams[pi * k * k..(pi + 1) * k * k];
                // Only the lower triangle is read by the factorization.
                for i in 0..k {
                    for j in 0..=i {
                        chol[i * k + j] += w * g[i * k + j];
                    }
                }
                for (acc, f) in ws.phi_mu.iter_mut().zip(self.feature(pi)) {
                    *acc += w * f;
                }
            }
        }
        cholesky_in_place(chol, k)?;

        let base: f64 = mu.iter().zip(scores).map(|(w, s)| w * s).sum();
        let mut active = 0;
        for b in 0..n {
            for (x, (f, m)) in ws.x.iter_mut().zip(self.feature(b).iter().zip(&ws.phi_mu)) {
                *x = match self.gap {
                    GapKind::Shifted => *f,
                    GapKind::Plain => f - m,
                };
            }
            let z = &mut ws.whitened[b * k..(b + 1) * k];
            forward_solve(chol, k, &ws.x, z);
            let norm: f64 = z.iter().map(|v| v * v).sum();
            ws.values[b] = scores[b] - base + norm / (4.0 * lambda);
            if ws.values[b] > ws.values[active] {
                active = b;
            }
        }
        Ok(active)
    }

    /// Adds `weight · u_b u_bᵀ` and `weight · u_b` to the gradient
    /// accumulators, where `u_b = V⁻¹x_b`.
    fn accumulate_term(&self, ws: &mut Workspace, b: usize, weight: f64) {
        let k = self.k;
        back_solve(&ws.chol, k, &ws.whitened[b * k..(b + 1) * k], &mut ws.u);
        for i in 0..k {
            let wu = weight * ws.u[i];
            ws.u_sum[i] += wu;
            for j in 0..k {
                ws.outer[i * k + j] += wu * ws.u[j];
            }
        }
    }

    /// Writes `∇_μ` of the accumulated mixture of terms into `ws.grad`. The
    /// quadratic part for decision `π` is `⟨G_π, Σ_b w_b u_b u_bᵀ⟩`.
    fn finish_gradient(&self, ws: &mut Workspace, scores: &[f64], lambda: f64) {
        let k = self.k;
        let scale = 1.0 / (4.0 * lambda);
        for pi in 0..self.n_decisions() {
            let gram = &self.grams[pi * k * k..(pi + 1) * k * k];
            let quad: f64 = gram.iter().zip(&ws.outer).map(|(a, b)| a * b).sum();
            let mut g = -scores[pi] - quad * scale;
            if self.gap == GapKind::Plain {
                let dot: f64 = self.feature(pi).iter().zip(&ws.u_sum).map(|(a, b)| a * b).sum();
                g -= 2.0 * dot * scale;
            }
            ws.grad[pi] = g;
        }
    }

    /// Objective value at `μ` and the maximizing `b` (lowest index on ties).
    pub fn objective(&self, scores: &[f64], mu: &SimplexVector, lambda: f64, epsilon: f64) -> Result<(f64, usize)> {
        self.check(scores, lambda, epsilon, mu)?;
        let mut ws = Workspace::new(self.n_decisions(), self.k);
        let active = self.evaluate(&mut ws, scores, mu.weights(), lambda)?;
        Ok((ws.values[active] + lambda * epsilon * epsilon, active))
    }

    fn check(&self, scores: &[f64], lambda: f64, epsilon: f64, mu: &SimplexVector) -> Result<()> {
        if scores.len() != self.n_decisions() || mu.len() != self.n_decisions() {
            return Err(E2dError::DimensionMismatch { expected: self.n_decisions(), got: mu.len().min(scores.len()) });
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(E2dError::InvalidParameter(format!("λ must be positive and finite, got {lambda}")));
        }
        if !(epsilon >= 0.0) {
            return Err(E2dError::InvalidParameter(format!("ε must be non-negative, got {epsilon}")));
        }
        Ok(())
    }

    /// Frank–Wolfe with step `2/(k+2)`; returns the best iterate seen, judged
    /// on the unsmoothed objective.
    pub fn frank_wolfe_min(
        &self,
        scores: &[f64],
        lambda: f64,
        epsilon: f64,
        options: &FwOptions,
        mu0: &SimplexVector,
    ) -> Result<FwResult> {
        self.check(scores, lambda, epsilon, mu0)?;
        if options.steps == 0 {
            return Err(E2dError::InvalidParameter("Frank–Wolfe needs at least one step".into()));
        }
        if let Some(tau) = options.smoothing {
            if !(tau > 0.0) {
                return Err(E2dError::InvalidParameter(format!("smoothing temperature must be positive, got {tau}")));
            }
        }
        let n = self.n_decisions();
        let offset = lambda * epsilon * epsilon;
        let mut ws = Workspace::new(n, self.k);
        let mut mu = mu0.weights().to_vec();
        let mut best_mu = mu.clone();
        let mut best_value = f64::INFINITY;
        let mut best_iteration = 0;
        for it in 0..=options.steps {
            let active = self.evaluate(&mut ws, scores, &mu, lambda)?;
            let value = ws.values[active] + offset;
            if value < best_value {
                best_value = value;
                best_mu.copy_from_slice(&mu);
                best_iteration = it;
            }
            if it == options.steps {
                break;
            }
            ws.outer.iter_mut().for_each(|x| *x = 0.0);
            ws.u_sum.iter_mut().for_each(|x| *x = 0.0);
            match options.smoothing {
                None => self.accumulate_term(&mut ws, active, 1.0),
                Some(tau0) => {
                    let tau = tau0 / ((it + 1) as f64).sqrt();
                    let top = ws.values[active];
                    let total: f64 = ws.values.iter().map(|v| ((v - top) / tau).exp()).sum();
                    for b in 0..n {
                        let w = ((ws.values[b] - top) / tau).exp() / total;
                        if w > 1e-12 {
                            self.accumulate_term(&mut ws, b, w);
                        }
                    }
                }
            }
            self.finish_gradient(&mut ws, scores, lambda);
            let vertex = argmin(&ws.grad);
            let step = 2.0 / (it as f64 + 2.0);
            mu.iter_mut().for_each(|w| *w *= 1.0 - step);
            mu[vertex] += step;
        }
        Ok(FwResult { mu: SimplexVector::from_unnormalized(best_mu)?, value: best_value, best_iteration })
    }

    /// Geometric `λ` grid on `[λ_max·10⁻³, λ_max]`.
    pub fn lambda_grid(scores: &[f64], epsilon: f64, size: usize) -> Vec<f64> {
        let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
        let lambda_max = (hi - lo).max(1.0) / (epsilon * epsilon);
        if size <= 1 {
            return vec![lambda_max];
        }
        (0..size)
            .map(|j| lambda_max * 10f64.powf(-3.0 + 3.0 * j as f64 / (size - 1) as f64))
            .collect()
    }

    /// Minimizes over a `λ` grid, running Frank–Wolfe at each point from the
    /// warm start (uniform when absent).
    pub fn solve(
        &self,
        f_hat: &DVector<f64>,
        epsilon: f64,
        options: &FwOptions,
        lambda_grid_size: usize,
        warm_start: Option<&SimplexVector>,
    ) -> Result<DecSolution> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(E2dError::InvalidParameter(format!("ε must be positive, got {epsilon}")));
        }
        if lambda_grid_size == 0 {
            return Err(E2dError::InvalidParameter("λ grid must have at least one point".into()));
        }
        let scores = self.scores(f_hat)?;
        let start = match warm_start {
            Some(mu) if mu.len() == self.n_decisions() => mu.clone(),
            Some(mu) => return Err(E2dError::DimensionMismatch { expected: self.n_decisions(), got: mu.len() }),
            None => SimplexVector::uniform(self.n_decisions()),
        };
        let mut best: Option<DecSolution> = None;
        for lambda in Self::lambda_grid(&scores, epsilon, lambda_grid_size) {
            let fw = self.frank_wolfe_min(&scores, lambda, epsilon, options, &start)?;
            if best.as_ref().is_none_or(|b| fw.value < b.value) {
                best = Some(DecSolution { value: fw.value, mu: fw.mu, lambda_star: lambda, adversary: None });
            }
        }
        Ok(best.expect("grid is non-empty"))
    }

    /// `Ω = min_μ max_b ‖φ_b‖_{V(μ)⁻¹}`, started from the uniform design.
    pub fn g_optimal_value(&self, options: &FwOptions) -> Result<(f64, SimplexVector)> {
        let zeros = vec![0.0; self.n_decisions()];
        let shifted = Self { gap: GapKind::Shifted, ..self.clone() };
        // With λ = ¼ and ε = 0 the objective is exactly max_b ‖φ_b‖²_{V⁻¹}.
        let fw = shifted.frank_wolfe_min(&zeros, 0.25, 0.0, options, &SimplexVector::uniform(self.n_decisions()))?;
        Ok((fw.value.max(0.0).sqrt(), fw.mu))
    }
}

/// Lower Cholesky factor of the row-major `k × k` matrix, in place; only the
/// lower triangle of the input is read.
fn cholesky_in_place(a: &mut [f64], k: usize) -> Result<()> {
    for j in 0..k {
        let mut d = a[j * k + j];
        for p in 0..j {
            d -= a[j * k + p] * a[j * k + p];
        }
        if !(d > 0.0) {
            return Err(E2dError::Solver(format!("design matrix lost positive definiteness (pivot {d:e})")));
        }
        let d = d.sqrt();
        a[j * k + j] = d;
        for i in j + 1..k {
            let mut v = a[i * k + j];
            for p in 0..j {
                v -= a[i * k + p] * a[j * k + p];
            }
            a[i * k + j] = v / d;
        }
        for p in j + 1..k {
            a[j * k + p] = 0.0;
        }
    }
    Ok(())
}

/// Solves `Lz = x`.
fn forward_solve(l: &[f64], k: usize, x: &[f64], z: &mut [f64]) {
    for i in 0..k {
        let mut v = x[i];
        for p in 0..i {
            v -= l[i * k + p] * z[p];
        }
        z[i] = v / l[i * k + i];
    }
}

/// Solves `Lᵀu = z`.
fn back_solve(l: &[f64], k: usize, z: &[f64], u: &mut [f64]) {
    for i in (0..k).rev() {
        let mut v = z[i];
        for p in i + 1..k {
            v -= l[p * k + i] * u[p];
        }
        u[i] = v / l[i * k + i];
    }
}

/// One-shot convenience around [`LinearDecSolver::solve`].
pub fn solve_linear_dec(
    inst: &LinearInstance,
    f_hat: &DVector<f64>,
    epsilon: f64,
    fw_steps: usize,
    lambda_grid_size: usize,
    warm_start: Option<&SimplexVector>,
) -> Result<DecSolution> {
    LinearDecSolver::new(inst).solve(
        f_hat,
        epsilon,
        &FwOptions::with_steps(fw_steps),
        lambda_grid_size,
        warm_start,
    )
}

pub fn g_optimal_value(inst: &LinearInstance, fw_steps: usize) -> Result<(f64, SimplexVector)> {
    LinearDecSolver::new(inst).g_optimal_value(&FwOptions::with_steps(fw_steps))
}
