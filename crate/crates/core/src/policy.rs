//! Decision-making policies driven one round at a time by the harness.
//!
//! Each round the harness calls [`Policy::decide`], samples an observation for
//! the returned decision and hands it back through [`Policy::observe`].

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dec::{dec_ac, dec_offset, LambdaSearch};
use crate::env::{FiniteProblem, LinearProblem, Problem, RngStream};
use crate::error::{E2dError, Result};
use crate::estimation::{
    ewa_estimate, ewa_update, ridge_estimate, ridge_update, EwaEstimate, EwaMode, EwaState, RidgeState,
};
use crate::linear_dec::{FwOptions, GapKind, LinearDecSolver};
use crate::model::{gap_matrix, info_matrix, shifted_gap_matrix, FiniteInstance, LinearInstance};
use crate::simplex::{argmax, SimplexVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EpsilonSchedule {
    /// `ε_t² = log|H| / t`.
    Finite { n_models: usize },
    /// `ε_t² = d / t`.
    Linear { dim: usize },
    /// `ε² = β / n` for every round.
    FixedHorizon { beta: f64, horizon: usize },
}

impl EpsilonSchedule {
    pub fn epsilon_sq(&self, t: usize) -> Result<f64> {
        if t == 0 {
            return Err(E2dError::InvalidParameter("rounds are numbered from 1".into()));
        }
        match *self {
            EpsilonSchedule::Finite { n_models } if n_models >= 1 => Ok((n_models as f64).ln() / t as f64),
            EpsilonSchedule::Linear { dim } if dim >= 1 => Ok(dim as f64 / t as f64),
            EpsilonSchedule::FixedHorizon { beta, horizon } if beta > 0.0 && horizon >= 1 => Ok(beta / horizon as f64),
            other => Err(E2dError::InvalidParameter(format!("invalid schedule {other:?}"))),
        }
    }
}

pub fn epsilon_schedule(schedule: &EpsilonSchedule, t: usize) -> Result<f64> {
    schedule.epsilon_sq(t)
}

/// `λ = √(n / (4 ln n))`, the fixed-horizon E2D tuning for horizon `n`.
pub fn tuned_lambda(horizon: usize) -> Result<f64> {
    if horizon < 2 {
        return Err(E2dError::InvalidParameter(format!("tuning horizon must be at least 2, got {horizon}")));
    }
    let n = horizon as f64;
    Ok((n / (4.0 * n.ln())).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMode {
    /// Minimize over a `λ` grid every round.
    #[default]
    Grid,
    /// `λ_t = t/4` (linear schedule only).
    ClosedForm,
}

fn default_ridge() -> f64 {
    1.0
}

fn default_scale() -> f64 {
    1.0
}

/// Policy parameters as they appear in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    AnytimeE2d {
        #[serde(default)]
        lambda_mode: LambdaMode,
        #[serde(default)]
        gap: GapKind,
        #[serde(default = "default_ridge")]
        ridge: f64,
    },
    FixedE2d {
        /// Explicit `λ`; otherwise tuned from `tuned_horizon`.
        #[serde(default)]
        lambda: Option<f64>,
        #[serde(default)]
        tuned_horizon: Option<usize>,
        #[serde(default)]
        gap: GapKind,
        #[serde(default = "default_ridge")]
        ridge: f64,
    },
    Ucb {
        #[serde(default = "default_ridge")]
        ridge: f64,
        /// Multiplies the confidence width `β_t`.
        #[serde(default = "default_scale")]
        confidence_scale: f64,
    },
    Ts {
        #[serde(default = "default_ridge")]
        ridge: f64,
        /// Multiplies the posterior standard deviation.
        #[serde(default = "default_scale")]
        posterior_scale: f64,
    },
}

/// The estimate a policy acted on in a round.
#[derive(Debug, Clone, PartialEq)]
pub enum Estimate {
    Finite(usize),
    Linear(DVector<f64>),
}

/// One round's decision and diagnostics. Fields that a policy does not
/// compute are `None`.
#[derive(Debug, Clone)]
pub struct Step {
    pub decision: usize,
    pub mu: SimplexVector,
    pub epsilon_sq: Option<f64>,
    pub lambda: Option<f64>,
    pub dec_value: Option<f64>,
    pub estimate: Estimate,
}

pub trait Policy: Send {
    /// Chooses the decision for round `t` (starting at 1).
    fn decide(&mut self, t: usize, rng: &mut RngStream) -> Result<Step>;
    /// Ingests the observation for the decision returned by the last `decide`.
    fn observe(&mut self, decision: usize, y: &[f64]) -> Result<()>;
}

pub struct FiniteE2d {
    instance: FiniteInstance,
    ewa: EwaState,
    gap: GapKind,
    /// `None` runs the anytime variant.
    fixed_lambda: Option<f64>,
    search: LambdaSearch,
}

impl FiniteE2d {
    pub fn anytime(instance: FiniteInstance, gap: GapKind) -> Result<Self> {
        let ewa = EwaState::new(instance.n_models(), 1.0)?;
        Ok(Self { instance, ewa, gap, fixed_lambda: None, search: LambdaSearch::default() })
    }

    pub fn fixed(instance: FiniteInstance, gap: GapKind, lambda: f64) -> Result<Self> {
        check_positive("λ", lambda)?;
        let ewa = EwaState::new(instance.n_models(), 1.0)?;
        Ok(Self { instance, ewa, gap, fixed_lambda: Some(lambda), search: LambdaSearch::default() })
    }
}

impl Policy for FiniteE2d {
    fn decide(&mut self, t: usize, rng: &mut RngStream) -> Result<Step> {
        let f_hat = match ewa_estimate(&self.ewa, EwaMode::Sample, rng) {
            EwaEstimate::Model(g) => g,
            EwaEstimate::Mixture(_) => unreachable!("sampling mode returns a model"),
        };
        let gaps = match self.gap {
            GapKind::Shifted => shifted_gap_matrix(&self.instance, f_hat)?,
            GapKind::Plain => gap_matrix(&self.instance),
        };
        let info = info_matrix(&self.instance, f_hat)?;
        let (mu, epsilon_sq, lambda, value) = match self.fixed_lambda {
            None => {
                let eps_sq = EpsilonSchedule::Finite { n_models: self.instance.n_models() }.epsilon_sq(t)?;
                if self.instance.n_models() == 1 {
                    // ε = 0 here; the only model is f̂ itself, so the
                    // constraint is vacuous and λ = 0 is exact.
                    let sol = dec_offset(&gaps, &info, 0.0)?;
                    (sol.mu, Some(eps_sq), 0.0, sol.value)
                } else {
                    let sol = dec_ac(&gaps, &info, eps_sq.sqrt(), &self.search)?;
                    (sol.mu, Some(eps_sq), sol.lambda_star, sol.value)
                }
            }
            Some(lambda) => {
                let sol = dec_offset(&gaps, &info, lambda)?;
                (sol.mu, None, lambda, sol.value)
            }
        };
        let decision = rng.categorical(&mu);
        Ok(Step {
            decision,
            mu,
            epsilon_sq,
            lambda: Some(lambda),
            dec_value: Some(value),
            estimate: Estimate::Finite(f_hat),
        })
    }

    fn observe(&mut self, decision: usize, y: &[f64]) -> Result<()> {
        ewa_update(&mut self.ewa, decision, y, &self.instance)
    }
}

pub struct LinearE2d {
    instance: LinearInstance,
    ridge: RidgeState,
    solver: LinearDecSolver,
    fw: FwOptions,
    lambda_grid: usize,
    mode: LambdaMode,
    fixed_lambda: Option<f64>,
    last_mu: SimplexVector,
}

impl LinearE2d {
    pub fn anytime(
        instance: LinearInstance,
        gap: GapKind,
        mode: LambdaMode,
        ridge: f64,
        fw: FwOptions,
        lambda_grid: usize,
    ) -> Result<Self> {
        Self::build(instance, gap, ridge, fw, lambda_grid, mode, None)
    }

    pub fn fixed(instance: LinearInstance, gap: GapKind, ridge: f64, fw: FwOptions, lambda: f64) -> Result<Self> {
        check_positive("λ", lambda)?;
        Self::build(instance, gap, ridge, fw, 1, LambdaMode::Grid, Some(lambda))
    }

    fn build(
        instance: LinearInstance,
        gap: GapKind,
        ridge: f64,
        fw: FwOptions,
        lambda_grid: usize,
        mode: LambdaMode,
        fixed_lambda: Option<f64>,
    ) -> Result<Self> {
        let ridge = RidgeState::new(instance.dim(), ridge, Some(instance.param_bound()))?;
        let solver = LinearDecSolver::with_gap(&instance, gap);
        let last_mu = SimplexVector::uniform(instance.n_decisions());
        Ok(Self { instance, ridge, solver, fw, lambda_grid, mode, fixed_lambda, last_mu })
    }
}

impl Policy for LinearE2d {
    fn decide(&mut self, t: usize, rng: &mut RngStream) -> Result<Step> {
        let f_hat = ridge_estimate(&self.ridge).estimate;
        let (mu, epsilon_sq, lambda, value) = match self.fixed_lambda {
            Some(lambda) => {
                let scores = self.solver.scores(&f_hat)?;
                let fw = self.solver.frank_wolfe_min(&scores, lambda, 0.0, &self.fw, &self.last_mu)?;
                (fw.mu, None, lambda, fw.value)
            }
            None => {
                let eps_sq = EpsilonSchedule::Linear { dim: self.instance.dim() }.epsilon_sq(t)?;
                let eps = eps_sq.sqrt();
                match self.mode {
                    LambdaMode::Grid => {
                        let sol = self.solver.solve(&f_hat, eps, &self.fw, self.lambda_grid, Some(&self.last_mu))?;
                        (sol.mu, Some(eps_sq), sol.lambda_star, sol.value)
                    }
                    LambdaMode::ClosedForm => {
                        let lambda = t as f64 / 4.0;
                        let scores = self.solver.scores(&f_hat)?;
                        let fw = self.solver.frank_wolfe_min(&scores, lambda, eps, &self.fw, &self.last_mu)?;
                        (fw.mu, Some(eps_sq), lambda, fw.value)
                    }
                }
            }
        };
        self.last_mu = mu.clone();
        let decision = rng.categorical(&mu);
        Ok(Step {
            decision,
            mu,
            epsilon_sq,
            lambda: Some(lambda),
            dec_value: Some(value),
            estimate: Estimate::Linear(f_hat),
        })
    }

    fn observe(&mut self, decision: usize, y: &[f64]) -> Result<()> {
        ridge_update(&mut self.ridge, decision, y, &self.instance)
    }
}

/// Confidence-ellipsoid UCB on the unprojected ridge estimate.
pub struct LinUcb {
    instance: LinearInstance,
    ridge: RidgeState,
    eta: f64,
    scale: f64,
    obs_norm: f64,
}

impl LinUcb {
    pub fn new(instance: LinearInstance, ridge: f64, confidence_scale: f64) -> Result<Self> {
        if !(confidence_scale >= 0.0) || !confidence_scale.is_finite() {
            return Err(E2dError::InvalidParameter(format!("confidence scale must be non-negative, got {confidence_scale}")));
        }
        let state = RidgeState::new(instance.dim(), ridge, None)?;
        let obs_norm = instance.max_obs_norm();
        Ok(Self { instance, ridge: state, eta: ridge, scale: confidence_scale, obs_norm })
    }

    /// `β_t = σ√(2 log t + d log(1 + tL²/(ηd))) + √η R`.
    pub fn beta(&self, t: usize) -> f64 {
        let d = self.instance.dim() as f64;
        let t = t as f64;
        let sigma = self.instance.noise_sd();
        let l2 = self.obs_norm * self.obs_norm;
        sigma * (2.0 * t.ln() + d * (1.0 + t * l2 / (self.eta * d)).ln()).sqrt()
            + self.eta.sqrt() * self.instance.param_bound()
    }
}

impl Policy for LinUcb {
    fn decide(&mut self, t: usize, _rng: &mut RngStream) -> Result<Step> {
        let x_hat = self.ridge.least_squares();
        let v_inv = self.ridge.v_inverse();
        let beta = self.scale * self.beta(t);
        let index: Vec<f64> = self
            .instance
            .features()
            .iter()
            .map(|phi| phi.dot(&x_hat) + beta * phi.dot(&(&v_inv * phi)).max(0.0).sqrt())
            .collect();
        let decision = argmax(&index);
        Ok(Step {
            decision,
            mu: SimplexVector::vertex(self.instance.n_decisions(), decision),
            epsilon_sq: None,
            lambda: None,
            dec_value: None,
            estimate: Estimate::Linear(x_hat),
        })
    }

    fn observe(&mut self, decision: usize, y: &[f64]) -> Result<()> {
        ridge_update(&mut self.ridge, decision, y, &self.instance)
    }
}

/// Thompson sampling from the Gaussian posterior `N(x̂, σ²V⁻¹)`.
pub struct LinTs {
    instance: LinearInstance,
    ridge: RidgeState,
    scale: f64,
}

impl LinTs {
    pub fn new(instance: LinearInstance, ridge: f64, posterior_scale: f64) -> Result<Self> {
        if !(posterior_scale >= 0.0) {
            return Err(E2dError::InvalidParameter(format!("posterior scale must be non-negative, got {posterior_scale}")));
        }
        let state = RidgeState::new(instance.dim(), ridge, None)?;
        Ok(Self { instance, ridge: state, scale: posterior_scale })
    }
}

impl Policy for LinTs {
    fn decide(&mut self, _t: usize, rng: &mut RngStream) -> Result<Step> {
        let x_hat = self.ridge.least_squares();
        // V = LLᵀ, so L⁻ᵀz has covariance V⁻¹.
        let chol = self.ridge.v.clone().cholesky().expect("V stays positive definite");
        let z = rng.normal_vector(self.instance.dim());
        let offset = chol
            .l()
            .transpose()
            .solve_upper_triangular(&z)
            .expect("Cholesky factor is invertible");
        let sample = &x_hat + offset * (self.scale * self.instance.noise_sd());
        let decision = self.instance.optimal_decision(&sample);
        Ok(Step {
            decision,
            mu: SimplexVector::vertex(self.instance.n_decisions(), decision),
            epsilon_sq: None,
            lambda: None,
            dec_value: None,
            estimate: Estimate::Linear(x_hat),
        })
    }

    fn observe(&mut self, decision: usize, y: &[f64]) -> Result<()> {
        ridge_update(&mut self.ridge, decision, y, &self.instance)
    }
}

fn check_positive(what: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(E2dError::InvalidParameter(format!("{what} must be positive and finite, got {x}")))
    }
}

/// Solver settings shared by every policy in an experiment.
#[derive(Debug, Clone, Copy)]
pub struct SolverSettings {
    pub fw: FwOptions,
    pub lambda_grid: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { fw: FwOptions::default(), lambda_grid: 50 }
    }
}

fn fixed_lambda(lambda: Option<f64>, tuned_horizon: Option<usize>) -> Result<f64> {
    match (lambda, tuned_horizon) {
        (Some(l), None) => Ok(l),
        (None, Some(n)) => tuned_lambda(n),
        _ => Err(E2dError::InvalidParameter("fixed E2D needs exactly one of `lambda` and `tuned_horizon`".into())),
    }
}

pub fn build_policy(spec: &PolicySpec, problem: &Problem, settings: &SolverSettings) -> Result<Box<dyn Policy>> {
    match problem {
        Problem::Finite(FiniteProblem { instance, .. }) => match *spec {
            PolicySpec::AnytimeE2d { lambda_mode: LambdaMode::Grid, gap, .. } => {
                Ok(Box::new(FiniteE2d::anytime(instance.clone(), gap)?))
            }
            PolicySpec::AnytimeE2d { lambda_mode: LambdaMode::ClosedForm, .. } => Err(E2dError::InvalidParameter(
                "the closed-form λ mode applies to linear instances only".into(),
            )),
            PolicySpec::FixedE2d { lambda, tuned_horizon, gap, .. } => {
                Ok(Box::new(FiniteE2d::fixed(instance.clone(), gap, fixed_lambda(lambda, tuned_horizon)?)?))
            }
            PolicySpec::Ucb { .. } | PolicySpec::Ts { .. } => Err(E2dError::InvalidParameter(
                "UCB and TS are implemented for linear instances only".into(),
            )),
        },
        Problem::Linear(LinearProblem { instance, .. }) => match *spec {
            PolicySpec::AnytimeE2d { lambda_mode, gap, ridge } => Ok(Box::new(LinearE2d::anytime(
                instance.clone(),
                gap,
                lambda_mode,
                ridge,
                settings.fw,
                settings.lambda_grid,
            )?)),
            PolicySpec::FixedE2d { lambda, tuned_horizon, gap, ridge } => Ok(Box::new(LinearE2d::fixed(
                instance.clone(),
                gap,
                ridge,
                settings.fw,
                fixed_lambda(lambda, tuned_horizon)?,
            )?)),
            PolicySpec::Ucb { ridge, confidence_scale } => {
                Ok(Box::new(LinUcb::new(instance.clone(), ridge, confidence_scale)?))
            }
            PolicySpec::Ts { ridge, posterior_scale } => Ok(Box::new(LinTs::new(instance.clone(), ridge, posterior_scale)?)),
        },
    }
}
