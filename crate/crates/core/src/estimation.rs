//! Online estimators: exponential weights for finite classes and projected
//! ridge regression for linear models, plus the estimation-error ledger.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::env::RngStream;
use crate::error::{check_index, E2dError, Result};
use crate::model::{FiniteInstance, LinearInstance};
use crate::simplex::{argmax, SimplexVector};

/// Exponential weights over a finite model class (uniform prior).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EwaState {
    /// `−η L(g)`, unnormalized.
    pub log_weights: Vec<f64>,
    pub eta: f64,
    /// Cumulative log loss of each model, `L(g) = −Σ log p(y_s | π_s, g)`.
    pub model_log_loss: Vec<f64>,
    /// Cumulative log loss of the posterior-mixture predictor.
    pub mixture_log_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EwaMode {
    Sample,
    Map,
    Mixture,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EwaEstimate {
    Model(usize),
    Mixture(SimplexVector),
}

impl EwaState {
    pub fn new(n_models: usize, eta: f64) -> Result<Self> {
        if n_models == 0 {
            return Err(E2dError::InvalidParameter("empty model class".into()));
        }
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(E2dError::InvalidParameter(format!("learning rate must be positive, got {eta}")));
        }
        Ok(Self {
            log_weights: vec![0.0; n_models],
            eta,
            model_log_loss: vec![0.0; n_models],
            mixture_log_loss: 0.0,
        })
    }

    pub fn posterior(&self) -> SimplexVector {
        let m = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = self.log_weights.iter().map(|l| (l - m).exp()).collect();
        SimplexVector::from_unnormalized(w).expect("posterior has positive mass")
    }

    /// Mixture log-loss regret against the best single model in hindsight.
    pub fn mixture_regret(&self) -> f64 {
        let best = self.model_log_loss.iter().copied().fold(f64::INFINITY, f64::min);
        self.mixture_log_loss - best
    }
}

/// Gaussian log density `log p(y | π, g)`.
pub fn gaussian_log_density(inst: &FiniteInstance, decision: usize, model: usize, y: &[f64]) -> f64 {
    let var = inst.obs_variance();
    let mean = inst.obs_mean(model, decision);
    let norm = -0.5 * (2.0 * std::f64::consts::PI * var).ln();
    mean.iter().zip(y).map(|(m, v)| norm - (v - m) * (v - m) / (2.0 * var)).sum()
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn ewa_update(state: &mut EwaState, decision: usize, y: &[f64], inst: &FiniteInstance) -> Result<()> {
    check_index("decision", decision, inst.n_decisions())?;
    if state.log_weights.len() != inst.n_models() {
        return Err(E2dError::DimensionMismatch { expected: inst.n_models(), got: state.log_weights.len() });
    }
    if y.len() != inst.obs_dim(decision) {
        return Err(E2dError::DimensionMismatch { expected: inst.obs_dim(decision), got: y.len() });
    }
    let loglik: Vec<f64> = (0..inst.n_models()).map(|g| gaussian_log_density(inst, decision, g, y)).collect();

    // Mixture prediction uses the posterior before this observation.
    let norm = log_sum_exp(state.log_weights.iter().copied());
    let mix = log_sum_exp(state.log_weights.iter().zip(&loglik).map(|(w, l)| w - norm + l));
    state.mixture_log_loss -= mix;

    for g in 0..inst.n_models() {
        state.log_weights[g] += state.eta * loglik[g];
        state.model_log_loss[g] -= loglik[g];
    }
    // Renormalize in log space to keep the weights bounded.
    let top = state.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    state.log_weights.iter_mut().for_each(|w| *w -= top);
    Ok(())
}

pub fn ewa_estimate(state: &EwaState, mode: EwaMode, rng: &mut RngStream) -> EwaEstimate {
    let posterior = state.posterior();
    match mode {
        EwaMode::Sample => EwaEstimate::Model(rng.categorical(&posterior)),
        EwaMode::Map => EwaEstimate::Model(argmax(&state.log_weights)),
        EwaMode::Mixture => EwaEstimate::Mixture(posterior),
    }
}

/// Regularized least squares with optional projection onto a Euclidean ball.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RidgeState {
    pub v: DMatrix<f64>,
    pub b: DVector<f64>,
    pub v0: DMatrix<f64>,
    /// `None` disables the projection.
    pub projection_radius: Option<f64>,
    pub logdet_v0: f64,
}

const BISECTION_ITERS: usize = 200;
const PROJECTION_TOL: f64 = 1e-8;

impl RidgeState {
    /// `V₀ = ηI`.
    pub fn new(dim: usize, eta: f64, projection_radius: Option<f64>) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(E2dError::InvalidParameter(format!("ridge prior must be positive, got {eta}")));
        }
        if let Some(r) = projection_radius {
            if !(r > 0.0) {
                return Err(E2dError::InvalidParameter(format!("projection radius must be positive, got {r}")));
            }
        }
        let v0 = DMatrix::identity(dim, dim) * eta;
        Ok(Self {
            v: v0.clone(),
            b: DVector::zeros(dim),
            v0,
            projection_radius: projection_radius.filter(|r| r.is_finite()),
            logdet_v0: dim as f64 * eta.ln(),
        })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// `log det V_t − log det V₀`.
    pub fn logdet_ratio(&self) -> f64 {
        let chol = self.v.clone().cholesky().expect("V stays positive definite");
        let logdet: f64 = chol.l().diagonal().iter().map(|x| 2.0 * x.ln()).sum();
        logdet - self.logdet_v0
    }

    /// Unprojected least-squares solution `V⁻¹ b`.
    pub fn least_squares(&self) -> DVector<f64> {
        let chol = self.v.clone().cholesky().expect("V stays positive definite");
        chol.solve(&self.b)
    }

    pub fn v_inverse(&self) -> DMatrix<f64> {
        self.v.clone().cholesky().expect("V stays positive definite").inverse()
    }
}

pub fn ridge_update(state: &mut RidgeState, decision: usize, y: &[f64], inst: &LinearInstance) -> Result<()> {
    check_index("decision", decision, inst.n_decisions())?;
    let m = inst.obs_map(decision);
    if y.len() != m.nrows() {
        return Err(E2dError::DimensionMismatch { expected: m.nrows(), got: y.len() });
    }
    if m.ncols() != state.dim() {
        return Err(E2dError::DimensionMismatch { expected: state.dim(), got: m.ncols() });
    }
    let mt = m.transpose();
    state.v += &mt * m;
    state.b += mt * DVector::from_column_slice(y);
    Ok(())
}

/// Outcome of the ridge estimate; `converged` is false when bisection ran out
/// of iterations (the best `θ` found is still returned).
#[derive(Debug, Clone)]
pub struct RidgeEstimate {
    pub estimate: DVector<f64>,
    pub theta: f64,
    pub converged: bool,
}

pub fn ridge_estimate(state: &RidgeState) -> RidgeEstimate {
    let x_hat = state.least_squares();
    match state.projection_radius {
        Some(radius) if x_hat.norm() > radius => project_onto_ball(&state.v, &x_hat, radius),
        _ => RidgeEstimate { estimate: x_hat, theta: 0.0, converged: true },
    }
}

/// `argmin_{‖x‖ ≤ R} ‖x − x̂‖²_V` via the secular equation: the minimizer is
/// `x(θ) = (V + θI)⁻¹ V x̂` with `θ ≥ 0` chosen so that `‖x(θ)‖ = R`.
pub fn project_onto_ball(v: &DMatrix<f64>, x_hat: &DVector<f64>, radius: f64) -> RidgeEstimate {
    if x_hat.norm() <= radius {
        return RidgeEstimate { estimate: x_hat.clone(), theta: 0.0, converged: true };
    }
    let eig = v.clone().symmetric_eigen();
    let z = eig.eigenvectors.transpose() * x_hat;
    let lams = &eig.eigenvalues;
    let point = |theta: f64| -> DVector<f64> {
        let scaled = DVector::from_fn(z.len(), |i, _| lams[i] / (lams[i] + theta) * z[i]);
        &eig.eigenvectors * scaled
    };
    let norm_at = |theta: f64| -> f64 {
        (0..z.len()).map(|i| (lams[i] / (lams[i] + theta) * z[i]).powi(2)).sum::<f64>().sqrt()
    };

    let mut lo = 0.0;
    let mut hi = lams.max().max(1.0);
    while norm_at(hi) > radius {
        hi *= 2.0;
    }
    let mut theta = hi;
    let mut converged = false;
    for _ in 0..BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        let n = norm_at(mid);
        if (n - radius).abs() <= PROJECTION_TOL {
            theta = mid;
            converged = true;
            break;
        }
        if n > radius {
            lo = mid;
        } else {
            hi = mid;
        }
        theta = hi;
    }
    if !converged {
        converged = (norm_at(theta) - radius).abs() <= PROJECTION_TOL;
    }
    RidgeEstimate { estimate: point(theta), theta, converged }
}

/// Running estimation error `Est_n = Σ_t μ_t I_{f̂_t} e_{f*}`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EstLedger {
    pub total: f64,
    pub per_round: Vec<f64>,
}

impl EstLedger {
    pub fn record(&mut self, increment: f64) -> Result<()> {
        if !(increment >= 0.0) {
            return Err(E2dError::InvalidParameter(format!("estimation increment {increment} is negative")));
        }
        self.total += increment;
        self.per_round.push(increment);
        Ok(())
    }
}

/// `Σ_π μ_π I_{f̂}(π, f*)` given the per-decision divergences.
pub fn est_increment(mu: &SimplexVector, divergence_per_decision: &[f64]) -> Result<f64> {
    if mu.len() != divergence_per_decision.len() {
        return Err(E2dError::DimensionMismatch { expected: mu.len(), got: divergence_per_decision.len() });
    }
    Ok(mu.dot(divergence_per_decision).max(0.0))
}

/// Per-decision divergences `I_{f̂}(π, f*)` for a finite class.
pub fn finite_divergences(inst: &FiniteInstance, f_hat: usize, f_star: usize) -> Vec<f64> {
    (0..inst.n_decisions()).map(|pi| inst.kl(pi, f_hat, f_star)).collect()
}

/// Per-decision divergences `‖M_π(f* − f̂)‖²/(2σ²)` for a linear model.
pub fn linear_divergences(inst: &LinearInstance, f_hat: &DVector<f64>, f_star: &DVector<f64>) -> Vec<f64> {
    (0..inst.n_decisions()).map(|pi| inst.kl(pi, f_hat, f_star)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_gaussians() -> FiniteInstance {
        FiniteInstance::with_reward_observations(vec![vec![0.0], vec![1.0]], 1.0).unwrap()
    }

    #[test]
    fn ewa_symmetric_observation() {
        let inst = two_gaussians();
        let mut s = EwaState::new(2, 1.0).unwrap();
        ewa_update(&mut s, 0, &[0.5], &inst).unwrap();
        let p = s.posterior();
        assert!((p.weights()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ewa_closed_form_posterior() {
        let inst = two_gaussians();
        let mut s = EwaState::new(2, 1.0).unwrap();
        ewa_update(&mut s, 0, &[0.0], &inst).unwrap();
        let expected = 1.0 / (1.0 + (-0.5f64).exp());
        assert!((s.posterior().weights()[0] - expected).abs() < 1e-12);
        assert!((expected - 0.6225).abs() < 1e-4);
    }

    #[test]
    fn ewa_prior_is_uniform_and_modes_agree_on_point_mass() {
        let s = EwaState::new(4, 1.0).unwrap();
        assert_eq!(s.posterior(), SimplexVector::uniform(4));
        let mut rng = RngStream::new(9);
        let mut a = rng.clone();
        assert_eq!(ewa_estimate(&s, EwaMode::Sample, &mut rng), ewa_estimate(&s, EwaMode::Sample, &mut a));

        let mut point = EwaState::new(3, 1.0).unwrap();
        point.log_weights = vec![f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY];
        assert_eq!(ewa_estimate(&point, EwaMode::Map, &mut rng), EwaEstimate::Model(1));
        for _ in 0..10 {
            assert_eq!(ewa_estimate(&point, EwaMode::Sample, &mut rng), EwaEstimate::Model(1));
        }
        assert_eq!(ewa_estimate(&point, EwaMode::Mixture, &mut rng), EwaEstimate::Mixture(SimplexVector::vertex(3, 1)));
    }

    #[test]
    fn ewa_rejects_wrong_shapes() {
        let inst = two_gaussians();
        let mut s = EwaState::new(3, 1.0).unwrap();
        assert!(ewa_update(&mut s, 0, &[0.0], &inst).is_err());
        let mut s = EwaState::new(2, 1.0).unwrap();
        assert!(ewa_update(&mut s, 1, &[0.0], &inst).is_err());
        assert!(ewa_update(&mut s, 0, &[0.0, 1.0], &inst).is_err());
    }

    fn scalar_instance() -> LinearInstance {
        LinearInstance::new(1, vec![DVector::from_vec(vec![1.0])], vec![DMatrix::from_element(1, 1, 1.0)], 1.0, 10.0, 20.0)
            .unwrap()
    }

    #[test]
    fn ridge_scalar_closed_form() {
        let inst = scalar_instance();
        let mut s = RidgeState::new(1, 1.0, None).unwrap();
        ridge_update(&mut s, 0, &[2.0], &inst).unwrap();
        assert_eq!(s.v[(0, 0)], 2.0);
        assert!((ridge_estimate(&s).estimate[0] - 1.0).abs() < 1e-15);
        assert!(ridge_update(&mut s, 0, &[1.0, 2.0], &inst).is_err());
    }

    #[test]
    fn zero_map_leaves_state_unchanged() {
        let inst = LinearInstance::new(
            2,
            vec![DVector::zeros(2)],
            vec![DMatrix::zeros(1, 2)],
            1.0,
            1.0,
            1.0,
        )
        .unwrap();
        let mut s = RidgeState::new(2, 1.0, Some(1.0)).unwrap();
        let before = s.clone();
        ridge_update(&mut s, 0, &[3.0], &inst).unwrap();
        assert_eq!(s.v, before.v);
        assert_eq!(s.b, before.b);
    }

    #[test]
    fn isotropic_projection_rescales() {
        let x = DVector::from_vec(vec![3.0, 4.0]);
        let p = project_onto_ball(&DMatrix::identity(2, 2), &x, 1.0);
        assert!(p.converged);
        assert!((p.estimate - &x / 5.0).norm() < 1e-8);
        let inside = DVector::from_vec(vec![0.1, 0.2]);
        assert_eq!(project_onto_ball(&DMatrix::identity(2, 2), &inside, 1.0).estimate, inside);
    }

    #[test]
    fn anisotropic_projection_matches_angular_grid() {
        let v = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]));
        let x_hat = DVector::from_vec(vec![2.0, 0.0]);
        let p = project_onto_ball(&v, &x_hat, 1.0);
        let dist = |x: &DVector<f64>| {
            let d = x - &x_hat;
            (d.transpose() * &v * &d)[(0, 0)]
        };
        let mut best = f64::INFINITY;
        for k in 0..6284 {
            let a = k as f64 * 1e-3;
            best = best.min(dist(&DVector::from_vec(vec![a.cos(), a.sin()])));
        }
        assert!((p.estimate.norm() - 1.0).abs() < 1e-6);
        assert!(dist(&p.estimate) <= best + 1e-9);
    }

    #[test]
    fn ledger_accumulates() {
        let mut l = EstLedger::default();
        l.record(0.5).unwrap();
        l.record(0.25).unwrap();
        assert!(l.record(-1.0).is_err());
        assert_eq!(l.total, 0.75);
        assert_eq!(l.per_round.len(), 2);
    }

    #[test]
    fn est_increment_lookups() {
        let inst = FiniteInstance::with_reward_observations(vec![vec![1.0, 0.0], vec![0.0, 1.0]], 0.5).unwrap();
        let same = finite_divergences(&inst, 1, 1);
        assert_eq!(est_increment(&SimplexVector::uniform(2), &same).unwrap(), 0.0);
        let div = finite_divergences(&inst, 0, 1);
        assert_eq!(est_increment(&SimplexVector::vertex(2, 1), &div).unwrap(), div[1]);
    }

    proptest! {
        #[test]
        fn mixture_regret_bounded_by_log_class_size(
            means in prop::collection::vec(-2.0f64..2.0, 2..6),
            ys in prop::collection::vec(-4.0f64..4.0, 1..60),
        ) {
            let k = means.len();
            let inst = FiniteInstance::with_reward_observations(means.iter().map(|&m| vec![m]).collect(), 1.0).unwrap();
            let mut s = EwaState::new(k, 1.0).unwrap();
            for y in &ys {
                ewa_update(&mut s, 0, &[*y], &inst).unwrap();
            }
            prop_assert!(s.mixture_regret() <= (k as f64).ln() + 1e-9);
        }

        #[test]
        fn posterior_invariant_to_constant_shift(
            w in prop::collection::vec(-5.0f64..5.0, 1..8),
            c in -100.0f64..100.0,
        ) {
            let mut a = EwaState::new(w.len(), 1.0).unwrap();
            a.log_weights = w.clone();
            let mut b = a.clone();
            b.log_weights = w.iter().map(|x| x + c).collect();
            for (p, q) in a.posterior().weights().iter().zip(b.posterior().weights()) {
                prop_assert!((p - q).abs() < 1e-12);
            }
        }

        #[test]
        fn unprojected_ridge_solves_normal_equations(
            entries in prop::collection::vec(-1.0f64..1.0, 9),
            ys in prop::collection::vec(-3.0f64..3.0, 10),
        ) {
            let features: Vec<DVector<f64>> = entries.chunks(3).map(DVector::from_column_slice).collect();
            let inst = LinearInstance::linear_bandit(features, 1.0, 1.0).unwrap();
            let mut s = RidgeState::new(3, 1.0, None).unwrap();
            for (t, y) in ys.iter().enumerate() {
                ridge_update(&mut s, t % 3, &[*y], &inst).unwrap();
            }
            let x = ridge_estimate(&s).estimate;
            let resid = (&s.v * &x - &s.b).norm();
            prop_assert!(resid <= 1e-8 * s.b.norm().max(1e-300) || s.b.norm() == 0.0);
        }

        #[test]
        fn projection_beats_random_feasible_points(
            diag in prop::collection::vec(0.1f64..10.0, 3),
            x in prop::collection::vec(-5.0f64..5.0, 3),
            seed in 0u64..1000,
        ) {
            let v = DMatrix::from_diagonal(&DVector::from_vec(diag));
            let x_hat = DVector::from_vec(x);
            let p = project_onto_ball(&v, &x_hat, 1.0);
            prop_assert!(p.estimate.norm() <= 1.0 + 1e-6);
            let dist = |y: &DVector<f64>| { let d = y - &x_hat; (d.transpose() * &v * &d)[(0, 0)] };
            let mut rng = RngStream::new(seed);
            let dp = dist(&p.estimate);
            for _ in 0..10_000 {
                let dir = rng.unit_sphere(3);
                let r = rng.uniform().cbrt();
                prop_assert!(dp <= dist(&(dir * r)) + 1e-7);
            }
        }
    }
}
