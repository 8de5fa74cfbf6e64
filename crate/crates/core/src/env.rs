//! Simulators and instance generators.
//!
//! Every random draw goes through [`RngStream`]: ChaCha8 seeded from a 64-bit
//! seed, uniforms built from the top 53 bits of each word, and Gaussians from
//! the Box–Muller transform. The generator is portable, so a seed reproduces
//! the same trajectory on every platform.

use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_index, E2dError, Result};
use crate::model::{observed_diameter, FiniteInstance, LinearInstance};
use crate::simplex::SimplexVector;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box–Muller; consumes two uniforms per draw.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform(); // (0, 1]
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn normal_vector(&mut self, dim: usize) -> DVector<f64> {
        DVector::from_fn(dim, |_, _| self.normal())
    }

    /// Uniform on the unit sphere in `dim` dimensions.
    pub fn unit_sphere(&mut self, dim: usize) -> DVector<f64> {
        loop {
            let v = self.normal_vector(dim);
            let n = v.norm();
            if n > 1e-12 {
                return v / n;
            }
        }
    }

    pub fn categorical(&mut self, dist: &SimplexVector) -> usize {
        let u = self.uniform();
        dist.sample_with(u)
    }
}

/// A finite instance together with the true model `f*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteProblem {
    #[serde(flatten)]
    pub instance: FiniteInstance,
    pub f_star: usize,
}

/// A linear instance together with the true parameter `f*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProblem {
    #[serde(flatten)]
    pub instance: LinearInstance,
    pub f_star: Vec<f64>,
    /// Index of the revealing action, when the instance has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revealing: Option<usize>,
}

impl LinearProblem {
    pub fn f_star(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.f_star)
    }
}

/// Either kind of problem; the JSON form is told apart by its keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Problem {
    Finite(FiniteProblem),
    Linear(LinearProblem),
}

impl Problem {
    pub fn validate(&self) -> Result<()> {
        match self {
            Problem::Finite(p) => check_index("model", p.f_star, p.instance.n_models()),
            Problem::Linear(p) => {
                if p.f_star.len() != p.instance.dim() {
                    return Err(E2dError::DimensionMismatch { expected: p.instance.dim(), got: p.f_star.len() });
                }
                if let Some(r) = p.revealing {
                    check_index("decision", r, p.instance.n_decisions())?;
                }
                Ok(())
            }
        }
    }

    pub fn n_decisions(&self) -> usize {
        match self {
            Problem::Finite(p) => p.instance.n_decisions(),
            Problem::Linear(p) => p.instance.n_decisions(),
        }
    }

    pub fn sample_observation(&self, decision: usize, rng: &mut RngStream) -> Vec<f64> {
        match self {
            Problem::Finite(p) => sample_finite_observation(&p.instance, p.f_star, decision, p.instance.obs_variance().sqrt(), rng),
            Problem::Linear(p) => {
                let f = p.f_star();
                sample_linear_observation(&p.instance, &f, decision, p.instance.noise_sd(), rng).as_slice().to_vec()
            }
        }
    }

    pub fn instant_regret(&self, decision: usize) -> f64 {
        match self {
            Problem::Finite(p) => finite_instant_regret(&p.instance, p.f_star, decision),
            Problem::Linear(p) => linear_instant_regret(&p.instance, &p.f_star(), decision),
        }
    }
}

/// `y ~ N(m_{f*}(π), σ² I)` with an explicit noise scale (0 returns the mean).
pub fn sample_finite_observation(
    inst: &FiniteInstance,
    f_star: usize,
    decision: usize,
    noise_sd: f64,
    rng: &mut RngStream,
) -> Vec<f64> {
    inst.obs_mean(f_star, decision).iter().map(|m| m + noise_sd * rng.normal()).collect()
}

/// `y ~ N(M_π f*, σ² I_{m_π})` with an explicit noise scale (0 returns the mean).
pub fn sample_linear_observation(
    inst: &LinearInstance,
    f_star: &DVector<f64>,
    decision: usize,
    noise_sd: f64,
    rng: &mut RngStream,
) -> DVector<f64> {
    let mean = inst.obs_map(decision) * f_star;
    let noise = rng.normal_vector(mean.len());
    mean + noise * noise_sd
}

pub fn finite_instant_regret(inst: &FiniteInstance, f_star: usize, decision: usize) -> f64 {
    inst.optimal_reward(f_star) - inst.reward(f_star, decision)
}

pub fn linear_instant_regret(inst: &LinearInstance, f_star: &DVector<f64>, decision: usize) -> f64 {
    let rewards = inst.rewards(f_star);
    let best = rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (best - rewards[decision]).max(0.0)
}

const MAX_RESAMPLES: usize = 100;

/// Semi-bandit with a revealing action: features uniform on the unit sphere,
/// `M_π = φ_πᵀ` except for the revealing action, whose map stacks every
/// feature row. `f*` is redrawn until the revealing action is suboptimal.
pub fn make_revealing_semibandit(d: usize, n_decisions: usize, rng: &mut RngStream) -> Result<LinearProblem> {
    if d == 0 || n_decisions < 2 {
        return Err(E2dError::InvalidParameter(format!(
            "revealing semi-bandit needs d ≥ 1 and at least 2 decisions, got d={d}, n={n_decisions}"
        )));
    }
    let features: Vec<DVector<f64>> = (0..n_decisions).map(|_| rng.unit_sphere(d)).collect();
    let revealing = n_decisions - 1;
    let stacked = DMatrix::from_fn(n_decisions, d, |r, c| features[r][c]);
    let obs_maps: Vec<DMatrix<f64>> = (0..n_decisions)
        .map(|pi| if pi == revealing { stacked.clone() } else { DMatrix::from_row_slice(1, d, features[pi].as_slice()) })
        .collect();

    let param_bound = 1.0;
    let diameter = observed_diameter(&obs_maps, param_bound);
    let instance = LinearInstance::new(d, features, obs_maps, 1.0, param_bound, diameter)?;
    for _ in 0..MAX_RESAMPLES {
        let f_star = rng.unit_sphere(d);
        let rewards = instance.rewards(&f_star);
        let best = rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if rewards[revealing] < best {
            return Ok(LinearProblem {
                instance,
                f_star: f_star.as_slice().to_vec(),
                revealing: Some(revealing),
            });
        }
    }
    Err(E2dError::InvalidInstance(format!(
        "revealing action stayed optimal after {MAX_RESAMPLES} draws of f*"
    )))
}

/// Plain linear bandit with unit-sphere features and parameter.
pub fn make_linear_bandit(d: usize, n_decisions: usize, rng: &mut RngStream) -> Result<LinearProblem> {
    if d == 0 || n_decisions == 0 {
        return Err(E2dError::InvalidParameter("linear bandit needs d ≥ 1 and a decision".into()));
    }
    let features: Vec<DVector<f64>> = (0..n_decisions).map(|_| rng.unit_sphere(d)).collect();
    let instance = LinearInstance::linear_bandit(features, 1.0, 1.0)?;
    let f_star = rng.unit_sphere(d);
    Ok(LinearProblem { instance, f_star: f_star.as_slice().to_vec(), revealing: None })
}

/// Finite multi-armed bandit class: `n_models` reward vectors uniform on
/// `[0, 1]^{n_decisions}`, observed with variance ½ so that the KL equals the
/// squared reward difference.
pub fn make_finite_mab(n_decisions: usize, n_models: usize, rng: &mut RngStream) -> Result<FiniteProblem> {
    if n_decisions == 0 || n_models == 0 {
        return Err(E2dError::InvalidParameter("finite bandit needs decisions and models".into()));
    }
    let rewards: Vec<Vec<f64>> = (0..n_models).map(|_| (0..n_decisions).map(|_| rng.uniform()).collect()).collect();
    let instance = FiniteInstance::with_reward_observations(rewards, 0.5)?;
    let f_star = (rng.uniform() * n_models as f64) as usize;
    Ok(FiniteProblem { instance, f_star: f_star.min(n_models - 1) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_streams_repeat() {
        let mut a = RngStream::new(42);
        let mut b = a.clone();
        let xs: Vec<f64> = (0..10).map(|_| a.normal()).collect();
        let ys: Vec<f64> = (0..10).map(|_| b.normal()).collect();
        assert_eq!(xs, ys);
        let mut c = RngStream::new(42);
        assert_eq!(c.normal(), xs[0]);
    }

    #[test]
    fn zero_noise_returns_mean() {
        let mut rng = RngStream::new(1);
        let p = make_revealing_semibandit(3, 4, &mut rng).unwrap();
        let f = p.f_star();
        for pi in 0..4 {
            let y = sample_linear_observation(&p.instance, &f, pi, 0.0, &mut rng);
            assert_eq!(y, p.instance.obs_map(pi) * &f);
        }
        let fin = FiniteInstance::with_reward_observations(vec![vec![0.3, 0.6]], 1.0).unwrap();
        assert_eq!(sample_finite_observation(&fin, 0, 1, 0.0, &mut rng), vec![0.6]);
    }

    #[test]
    fn empirical_mean_concentrates() {
        let mut rng = RngStream::new(7);
        let p = make_linear_bandit(2, 3, &mut rng).unwrap();
        let f = p.f_star();
        let n = 100_000;
        let mut total = 0.0;
        for _ in 0..n {
            total += sample_linear_observation(&p.instance, &f, 1, 1.0, &mut rng)[0];
        }
        let mean = total / n as f64;
        let expected = p.instance.reward(&f, 1);
        assert!((mean - expected).abs() < 4.0 / (n as f64).sqrt(), "{mean} vs {expected}");
    }

    #[test]
    fn regret_definitions() {
        let fin = FiniteInstance::with_reward_observations(vec![vec![1.0, 0.0], vec![0.0, 1.0]], 0.5).unwrap();
        assert_eq!(finite_instant_regret(&fin, 0, 0), 0.0);
        assert_eq!(finite_instant_regret(&fin, 0, 1), 1.0);

        let mut rng = RngStream::new(3);
        let p = make_linear_bandit(3, 5, &mut rng).unwrap();
        let f = p.f_star();
        let best = p.instance.optimal_decision(&f);
        assert_eq!(linear_instant_regret(&p.instance, &f, best), 0.0);
        for pi in 0..5 {
            let direct = p.instance.rewards(&f).iter().copied().fold(f64::MIN, f64::max) - p.instance.reward(&f, pi);
            assert!((linear_instant_regret(&p.instance, &f, pi) - direct).abs() < 1e-15);
        }
    }

    #[test]
    fn revealing_instance_structure() {
        let mut rng = RngStream::new(11);
        let p = make_revealing_semibandit(4, 6, &mut rng).unwrap();
        let r = p.revealing.unwrap();
        assert_eq!(p.instance.obs_map(r).nrows(), 6);
        let f = p.f_star();
        assert_ne!(p.instance.optimal_decision(&f), r);
        assert!(p.instance.features().iter().all(|phi| (phi.norm() - 1.0).abs() < 1e-12));
        assert!(make_revealing_semibandit(3, 1, &mut rng).is_err());
    }

    #[test]
    fn problem_json_is_distinguished_by_keys() {
        let mut rng = RngStream::new(5);
        let lin = Problem::Linear(make_revealing_semibandit(2, 3, &mut rng).unwrap());
        let fin = Problem::Finite(make_finite_mab(3, 4, &mut rng).unwrap());
        for p in [lin, fin] {
            let text = serde_json::to_string(&p).unwrap();
            let back: Problem = serde_json::from_str(&text).unwrap();
            assert_eq!(std::mem::discriminant(&back), std::mem::discriminant(&p));
            back.validate().unwrap();
        }
    }
}
