//! Instances and the gap / information matrices every solver consumes.
//!
//! Matrices are indexed `(decision π, model g)`, i.e. `|Π| × |H|`, so that a
//! sampling distribution `μ` acts from the left and an adversary `ν` from the
//! right.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_index, E2dError, Result};
use crate::simplex::argmax;

/// Slack allowed on the reward-observability check `φφᵀ ⪯ MᵀM`.
pub const OBSERVABILITY_TOL: f64 = 1e-9;

/// Finite model class with Gaussian observations of shared variance.
///
/// `rewards[g][π]` is the mean reward of decision `π` under model `g`;
/// `obs_mean[g][π]` is the (possibly multi-dimensional) observation mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FiniteInstanceDoc", into = "FiniteInstanceDoc")]
pub struct FiniteInstance {
    decisions: Vec<String>,
    models: Vec<String>,
    rewards: Vec<Vec<f64>>,
    obs_mean: Vec<Vec<Vec<f64>>>,
    obs_variance: f64,
}

/// On-disk form: `obs_mean` is either `|H|×|Π|` (scalar observations) or
/// `|H|×|Π|×k` (stacked per-dimension means).
#[derive(Debug, Clone, Serialize, Deserialize)]
struct FiniteInstanceDoc {
    decisions: Vec<String>,
    models: Vec<String>,
    rewards: Vec<Vec<f64>>,
    obs_mean: ObsMeanDoc,
    obs_variance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum ObsMeanDoc {
    Scalar(Vec<Vec<f64>>),
    Stacked(Vec<Vec<Vec<f64>>>),
}

impl TryFrom<FiniteInstanceDoc> for FiniteInstance {
    type Error = E2dError;
    fn try_from(doc: FiniteInstanceDoc) -> Result<Self> {
        let obs_mean = match doc.obs_mean {
            ObsMeanDoc::Scalar(m) => m
                .into_iter()
                .map(|row| row.into_iter().map(|x| vec![x]).collect())
                .collect(),
            ObsMeanDoc::Stacked(m) => m,
        };
        FiniteInstance::new(doc.decisions, doc.models, doc.rewards, obs_mean, doc.obs_variance)
    }
}

impl From<FiniteInstance> for FiniteInstanceDoc {
    fn from(inst: FiniteInstance) -> Self {
        let scalar = inst.obs_mean.iter().flatten().all(|cell| cell.len() == 1);
        let obs_mean = if scalar {
            ObsMeanDoc::Scalar(
                inst.obs_mean
                    .iter()
                    .map(|row| row.iter().map(|cell| cell[0]).collect())
                    .collect(),
            )
        } else {
            ObsMeanDoc::Stacked(inst.obs_mean)
        };
        FiniteInstanceDoc {
            decisions: inst.decisions,
            models: inst.models,
            rewards: inst.rewards,
            obs_mean,
            obs_variance: inst.obs_variance,
        }
    }
}

impl FiniteInstance {
    pub fn new(
        decisions: Vec<String>,
        models: Vec<String>,
        rewards: Vec<Vec<f64>>,
        obs_mean: Vec<Vec<Vec<f64>>>,
        obs_variance: f64,
    ) -> Result<Self> {
        let n_dec = decisions.len();
        let n_mod = models.len();
        if n_dec == 0 || n_mod == 0 {
            return Err(E2dError::InvalidInstance("need at least one decision and one model".into()));
        }
        if !(obs_variance > 0.0) || !obs_variance.is_finite() {
            return Err(E2dError::InvalidInstance(format!("obs_variance must be positive, got {obs_variance}")));
        }
        if rewards.len() != n_mod || rewards.iter().any(|r| r.len() != n_dec) {
            return Err(E2dError::InvalidInstance(format!("rewards must be {n_mod}×{n_dec}")));
        }
        if obs_mean.len() != n_mod || obs_mean.iter().any(|r| r.len() != n_dec) {
            return Err(E2dError::InvalidInstance(format!("obs_mean must be {n_mod}×{n_dec}")));
        }
        // Each decision has a fixed observation dimension across models.
        for pi in 0..n_dec {
            let dim = obs_mean[0][pi].len();
            if dim == 0 || obs_mean.iter().any(|row| row[pi].len() != dim) {
                return Err(E2dError::InvalidInstance(format!(
                    "observation dimension of decision {pi} differs across models"
                )));
            }
        }
        let finite = rewards.iter().flatten().chain(obs_mean.iter().flatten().flatten()).all(|x| x.is_finite());
        if !finite {
            return Err(E2dError::InvalidInstance("non-finite reward or observation mean".into()));
        }
        Ok(Self { decisions, models, rewards, obs_mean, obs_variance })
    }

    /// Scalar observations equal to the rewards, with default labels.
    pub fn with_reward_observations(rewards: Vec<Vec<f64>>, obs_variance: f64) -> Result<Self> {
        let n_mod = rewards.len();
        let n_dec = rewards.first().map_or(0, Vec::len);
        let obs_mean = rewards.iter().map(|r| r.iter().map(|&x| vec![x]).collect()).collect();
        Self::new(
            (0..n_dec).map(|i| format!("pi{i}")).collect(),
            (0..n_mod).map(|i| format!("f{i}")).collect(),
            rewards,
            obs_mean,
            obs_variance,
        )
    }

    pub fn n_decisions(&self) -> usize {
        self.decisions.len()
    }

    pub fn n_models(&self) -> usize {
        self.models.len()
    }

    pub fn decisions(&self) -> &[String] {
        &self.decisions
    }

    pub fn models(&self) -> &[String] {
        &self.models
    }

    pub fn obs_variance(&self) -> f64 {
        self.obs_variance
    }

    pub fn reward(&self, model: usize, decision: usize) -> f64 {
        self.rewards[model][decision]
    }

    pub fn rewards(&self, model: usize) -> &[f64] {
        &self.rewards[model]
    }

    pub fn obs_mean(&self, model: usize, decision: usize) -> &[f64] {
        &self.obs_mean[model][decision]
    }

    pub fn obs_dim(&self, decision: usize) -> usize {
        self.obs_mean[0][decision].len()
    }

    /// Optimal decision of `model`, lowest index on ties.
    pub fn optimal_decision(&self, model: usize) -> usize {
        argmax(&self.rewards[model])
    }

    pub fn optimal_reward(&self, model: usize) -> f64 {
        self.rewards[model][self.optimal_decision(model)]
    }

    /// `δ_f(g) = r_g(π*_g) − r_f(π*_f)`.
    pub fn optimal_value_gaps(&self, f: usize) -> Result<Vec<f64>> {
        check_index("model", f, self.n_models())?;
        let base = self.optimal_reward(f);
        Ok((0..self.n_models()).map(|g| self.optimal_reward(g) - base).collect())
    }

    /// Gaussian KL divergence `KL(M_g(π) ‖ M_f(π))` with shared variance.
    pub fn kl(&self, decision: usize, f: usize, g: usize) -> f64 {
        let mf = &self.obs_mean[f][decision];
        let mg = &self.obs_mean[g][decision];
        let sq: f64 = mf.iter().zip(mg).map(|(a, b)| (a - b) * (a - b)).sum();
        sq / (2.0 * self.obs_variance)
    }
}

/// Gap matrix `Δ(π, g)` or its reference-shifted variant `Δ_f(π, g)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GapMatrix(DMatrix<f64>);

impl GapMatrix {
    pub fn from_matrix(m: DMatrix<f64>) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn n_decisions(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_models(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, decision: usize, model: usize) -> f64 {
        self.0[(decision, model)]
    }

    /// Largest positive entry, or `None` when every entry is `≤ 0`.
    pub fn max_positive(&self) -> Option<f64> {
        let m = self.0.max();
        (m > 0.0).then_some(m)
    }
}

/// Information matrix `I_f(π, g)` for a fixed reference model `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoMatrix {
    matrix: DMatrix<f64>,
    reference: Option<usize>,
}

impl InfoMatrix {
    pub fn from_matrix(matrix: DMatrix<f64>, reference: Option<usize>) -> Self {
        Self { matrix, reference }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn reference(&self) -> Option<usize> {
        self.reference
    }

    pub fn get(&self, decision: usize, model: usize) -> f64 {
        self.matrix[(decision, model)]
    }

    pub fn column(&self, model: usize) -> Vec<f64> {
        self.matrix.column(model).iter().copied().collect()
    }
}

/// `Δ(π, g) = max_π' r_g(π') − r_g(π)`.
pub fn gap_matrix(inst: &FiniteInstance) -> GapMatrix {
    let (n_dec, n_mod) = (inst.n_decisions(), inst.n_models());
    let m = DMatrix::from_fn(n_dec, n_mod, |pi, g| inst.optimal_reward(g) - inst.reward(g, pi));
    GapMatrix(m)
}

/// `Δ_f(π, g) = max_π' r_g(π') − r_f(π)`; entries may be negative.
pub fn shifted_gap_matrix(inst: &FiniteInstance, f: usize) -> Result<GapMatrix> {
    check_index("model", f, inst.n_models())?;
    let (n_dec, n_mod) = (inst.n_decisions(), inst.n_models());
    let m = DMatrix::from_fn(n_dec, n_mod, |pi, g| inst.optimal_reward(g) - inst.reward(f, pi));
    Ok(GapMatrix(m))
}

/// `I_f(π, g) = ‖m_g(π) − m_f(π)‖² / (2σ²)`, summed over observation dimensions.
pub fn info_matrix(inst: &FiniteInstance, f: usize) -> Result<InfoMatrix> {
    check_index("model", f, inst.n_models())?;
    let (n_dec, n_mod) = (inst.n_decisions(), inst.n_models());
    let m = DMatrix::from_fn(n_dec, n_mod, |pi, g| inst.kl(pi, f, g));
    Ok(InfoMatrix { matrix: m, reference: Some(f) })
}

/// Pointwise reward data-processing: `(r_f(π) − r_g(π))² ≤ I_f(π, g)` for all
/// `π, f, g`. Averaging over `μ` (Jensen) gives the averaged inequality.
pub fn check_reward_data_processing(inst: &FiniteInstance) -> bool {
    const SLACK: f64 = 1e-12;
    for f in 0..inst.n_models() {
        for g in 0..inst.n_models() {
            for pi in 0..inst.n_decisions() {
                let dr = inst.reward(f, pi) - inst.reward(g, pi);
                if dr * dr > inst.kl(pi, f, g) * (1.0 + SLACK) + SLACK {
                    return false;
                }
            }
        }
    }
    true
}

/// Linear model with side-observations: `r_f(π) = ⟨φ_π, f⟩`,
/// `y ~ N(M_π f, σ² I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LinearInstanceDoc", into = "LinearInstanceDoc")]
pub struct LinearInstance {
    dim: usize,
    features: Vec<DVector<f64>>,
    obs_maps: Vec<DMatrix<f64>>,
    noise_sd: f64,
    param_bound: f64,
    diameter_b: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LinearInstanceDoc {
    dim: usize,
    features: Vec<Vec<f64>>,
    obs_maps: Vec<Vec<Vec<f64>>>,
    noise_sd: f64,
    param_bound: f64,
    #[serde(rename = "diameter_B")]
    diameter_b: f64,
}

impl TryFrom<LinearInstanceDoc> for LinearInstance {
    type Error = E2dError;
    fn try_from(doc: LinearInstanceDoc) -> Result<Self> {
        let features = doc.features.into_iter().map(DVector::from_vec).collect();
        let mut obs_maps = Vec::with_capacity(doc.obs_maps.len());
        for rows in doc.obs_maps {
            let n_rows = rows.len();
            let n_cols = rows.first().map_or(doc.dim, Vec::len);
            if rows.iter().any(|r| r.len() != n_cols) {
                return Err(E2dError::InvalidInstance("ragged observation map".into()));
            }
            obs_maps.push(DMatrix::from_row_iterator(n_rows, n_cols, rows.into_iter().flatten()));
        }
        LinearInstance::new(doc.dim, features, obs_maps, doc.noise_sd, doc.param_bound, doc.diameter_b)
    }
}

impl From<LinearInstance> for LinearInstanceDoc {
    fn from(inst: LinearInstance) -> Self {
        LinearInstanceDoc {
            dim: inst.dim,
            features: inst.features.iter().map(|f| f.iter().copied().collect()).collect(),
            obs_maps: inst
                .obs_maps
                .iter()
                .map(|m| m.row_iter().map(|r| r.iter().copied().collect()).collect())
                .collect(),
            noise_sd: inst.noise_sd,
            param_bound: inst.param_bound,
            diameter_b: inst.diameter_b,
        }
    }
}

impl LinearInstance {
    pub fn new(
        dim: usize,
        features: Vec<DVector<f64>>,
        obs_maps: Vec<DMatrix<f64>>,
        noise_sd: f64,
        param_bound: f64,
        diameter_b: f64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(E2dError::InvalidInstance("dim must be positive".into()));
        }
        if features.is_empty() {
            return Err(E2dError::InvalidInstance("need at least one decision".into()));
        }
        if features.len() != obs_maps.len() {
            return Err(E2dError::InvalidInstance(format!(
                "{} features but {} observation maps",
                features.len(),
                obs_maps.len()
            )));
        }
        for (pi, (phi, m)) in features.iter().zip(&obs_maps).enumerate() {
            if phi.len() != dim || m.ncols() != dim || m.nrows() == 0 {
                return Err(E2dError::InvalidInstance(format!("decision {pi} has inconsistent dimensions")));
            }
        }
        for (name, v) in [("noise_sd", noise_sd), ("param_bound", param_bound), ("diameter_B", diameter_b)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(E2dError::InvalidInstance(format!("{name} must be positive, got {v}")));
            }
        }
        let inst = Self { dim, features, obs_maps, noise_sd, param_bound, diameter_b };
        if let Some(pi) = inst.first_unobservable_decision() {
            return Err(E2dError::InvalidInstance(format!(
                "decision {pi} violates reward observability φφᵀ ⪯ MᵀM"
            )));
        }
        Ok(inst)
    }

    /// Linear bandit (rewards observed directly): `M_π = φ_πᵀ`.
    pub fn linear_bandit(features: Vec<DVector<f64>>, noise_sd: f64, param_bound: f64) -> Result<Self> {
        let dim = features.first().map_or(0, |f| f.len());
        let obs_maps: Vec<DMatrix<f64>> = features.iter().map(|f| DMatrix::from_row_slice(1, f.len(), f.as_slice())).collect();
        let diameter_b = observed_diameter(&obs_maps, param_bound);
        Self::new(dim, features, obs_maps, noise_sd, param_bound, diameter_b)
    }

    fn first_unobservable_decision(&self) -> Option<usize> {
        (0..self.n_decisions()).find(|&pi| {
            let m = &self.obs_maps[pi];
            let phi = &self.features[pi];
            let diff = m.transpose() * m - phi * phi.transpose();
            let min_eig = diff.symmetric_eigenvalues().min();
            min_eig < -OBSERVABILITY_TOL
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_decisions(&self) -> usize {
        self.features.len()
    }

    pub fn feature(&self, decision: usize) -> &DVector<f64> {
        &self.features[decision]
    }

    pub fn features(&self) -> &[DVector<f64>] {
        &self.features
    }

    pub fn obs_map(&self, decision: usize) -> &DMatrix<f64> {
        &self.obs_maps[decision]
    }

    pub fn obs_maps(&self) -> &[DMatrix<f64>] {
        &self.obs_maps
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    pub fn param_bound(&self) -> f64 {
        self.param_bound
    }

    pub fn diameter_b(&self) -> f64 {
        self.diameter_b
    }

    /// Largest operator norm `max_π ‖M_π‖`.
    pub fn max_obs_norm(&self) -> f64 {
        self.obs_maps.iter().map(spectral_norm).fold(0.0, f64::max)
    }

    pub fn reward(&self, param: &DVector<f64>, decision: usize) -> f64 {
        self.features[decision].dot(param)
    }

    pub fn rewards(&self, param: &DVector<f64>) -> Vec<f64> {
        self.features.iter().map(|phi| phi.dot(param)).collect()
    }

    /// Optimal decision under `param`, lowest index on ties.
    pub fn optimal_decision(&self, param: &DVector<f64>) -> usize {
        argmax(&self.rewards(param))
    }

    /// Gaussian KL `‖M_π(g − f)‖² / (2σ²)`.
    pub fn kl(&self, decision: usize, f: &DVector<f64>, g: &DVector<f64>) -> f64 {
        let d = &self.obs_maps[decision] * (g - f);
        d.norm_squared() / (2.0 * self.noise_sd * self.noise_sd)
    }
}

pub(crate) fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    let gram = m.transpose() * m;
    gram.symmetric_eigenvalues().max().max(0.0).sqrt()
}

/// `max_π max_{f,g ∈ K} ‖M_π(f − g)‖` for the Euclidean ball `K` of radius `radius`.
pub fn observed_diameter(obs_maps: &[DMatrix<f64>], radius: f64) -> f64 {
    2.0 * radius * obs_maps.iter().map(spectral_norm).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::SimplexVector;
    use proptest::prelude::*;

    fn two_by_two(variance: f64) -> FiniteInstance {
        FiniteInstance::with_reward_observations(vec![vec![1.0, 0.0], vec![0.0, 1.0]], variance).unwrap()
    }

    #[test]
    fn gap_of_single_model() {
        let inst = FiniteInstance::with_reward_observations(vec![vec![1.0, 0.5]], 1.0).unwrap();
        let gaps = gap_matrix(&inst);
        assert_eq!(gaps.get(0, 0), 0.0);
        assert_eq!(gaps.get(1, 0), 0.5);
    }

    #[test]
    fn constant_rewards_have_zero_gap() {
        let inst = FiniteInstance::with_reward_observations(vec![vec![0.3; 4], vec![1.0, 0.0, 0.0, 0.0]], 1.0).unwrap();
        let gaps = gap_matrix(&inst);
        assert!((0..4).all(|pi| gaps.get(pi, 0) == 0.0));
    }

    #[test]
    fn two_by_two_gaps() {
        let inst = two_by_two(1.0);
        let gaps = gap_matrix(&inst);
        assert_eq!(gaps.matrix(), &DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let shifted = shifted_gap_matrix(&inst, 0).unwrap();
        // Δ_f(π1, g) = 1 − 1, Δ_f(π2, g) = 1 − 0.
        assert_eq!(shifted.get(0, 1), 0.0);
        assert_eq!(shifted.get(1, 1), 1.0);
        // g = f column coincides with Δ.
        assert_eq!(shifted.get(0, 0), gaps.get(0, 0));
        assert_eq!(shifted.get(1, 0), gaps.get(1, 0));
        assert!(shifted_gap_matrix(&inst, 2).is_err());
    }

    #[test]
    fn gaussian_kl_closed_form() {
        let unit = two_by_two(1.0);
        let info = info_matrix(&unit, 0).unwrap();
        assert_eq!(info.get(0, 1), 0.5);
        assert_eq!(info.column(0), vec![0.0, 0.0]);
        let half = two_by_two(0.5);
        assert_eq!(info_matrix(&half, 0).unwrap().get(0, 1), 1.0);
    }

    #[test]
    fn data_processing_check() {
        assert!(check_reward_data_processing(&two_by_two(0.5)));
        assert!(!check_reward_data_processing(&two_by_two(1.0)));
        let same = FiniteInstance::with_reward_observations(vec![vec![0.2, 0.7], vec![0.2, 0.7]], 1.0).unwrap();
        assert!(check_reward_data_processing(&same));
    }

    #[test]
    fn json_round_trip_scalar_and_stacked() {
        let inst = two_by_two(0.5);
        let text = serde_json::to_string(&inst).unwrap();
        assert!(text.contains("\"obs_mean\":[[1.0,0.0],[0.0,1.0]]"));
        assert_eq!(serde_json::from_str::<FiniteInstance>(&text).unwrap(), inst);

        let doc = r#"{"decisions":["a"],"models":["f","g"],"rewards":[[0.0],[1.0]],
                      "obs_mean":[[[0.0,1.0]],[[1.0,1.0]]],"obs_variance":0.5}"#;
        let stacked: FiniteInstance = serde_json::from_str(doc).unwrap();
        assert_eq!(stacked.obs_dim(0), 2);
        assert_eq!(info_matrix(&stacked, 0).unwrap().get(0, 1), 1.0);
    }

    #[test]
    fn rejects_malformed_instances() {
        assert!(FiniteInstance::with_reward_observations(vec![vec![1.0]], 0.0).is_err());
        assert!(FiniteInstance::with_reward_observations(vec![], 1.0).is_err());
        let bad = r#"{"decisions":["a","b"],"models":["f"],"rewards":[[0.0]],"obs_mean":[[0.0,0.0]],"obs_variance":1.0}"#;
        assert!(serde_json::from_str::<FiniteInstance>(bad).is_err());
    }

    #[test]
    fn linear_instance_observability() {
        let phi = DVector::from_vec(vec![1.0, 0.0]);
        let ok = LinearInstance::new(2, vec![phi.clone()], vec![DMatrix::identity(2, 2)], 1.0, 1.0, 2.0);
        assert!(ok.is_ok());
        let bad = LinearInstance::new(2, vec![phi], vec![DMatrix::from_row_slice(1, 2, &[0.0, 1.0])], 1.0, 1.0, 2.0);
        assert!(bad.is_err());
        let text = serde_json::to_string(&ok.unwrap()).unwrap();
        assert!(text.contains("\"diameter_B\""));
        let back: LinearInstance = serde_json::from_str(&text).unwrap();
        assert_eq!(back.obs_map(0), &DMatrix::<f64>::identity(2, 2));
    }

    fn instance_strategy() -> impl Strategy<Value = FiniteInstance> {
        (1usize..5, 1usize..5, 0.2f64..2.0).prop_flat_map(|(n_dec, n_mod, var)| {
            (
                prop::collection::vec(prop::collection::vec(-1.0f64..1.0, n_dec), n_mod),
                prop::collection::vec(prop::collection::vec(-1.0f64..1.0, n_dec), n_mod),
            )
                .prop_map(move |(rewards, means)| {
                    let obs = means.iter().map(|r| r.iter().map(|&x| vec![x]).collect()).collect();
                    FiniteInstance::new(
                        (0..n_dec).map(|i| i.to_string()).collect(),
                        (0..n_mod).map(|i| i.to_string()).collect(),
                        rewards,
                        obs,
                        var,
                    )
                    .unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn gaps_nonnegative_with_zero_per_column(inst in instance_strategy()) {
            let gaps = gap_matrix(&inst);
            for g in 0..inst.n_models() {
                let col: Vec<f64> = (0..inst.n_decisions()).map(|pi| gaps.get(pi, g)).collect();
                prop_assert!(col.iter().all(|&x| x >= 0.0));
                prop_assert!(col.iter().any(|&x| x == 0.0));
                prop_assert_eq!(gaps.get(inst.optimal_decision(g), g), 0.0);
            }
        }

        #[test]
        fn info_is_symmetric_and_zero_on_reference(inst in instance_strategy()) {
            for f in 0..inst.n_models() {
                let info = info_matrix(&inst, f).unwrap();
                prop_assert!(info.column(f).iter().all(|&x| x == 0.0));
                for g in 0..inst.n_models() {
                    let swapped = info_matrix(&inst, g).unwrap();
                    for pi in 0..inst.n_decisions() {
                        prop_assert!(info.get(pi, g) >= 0.0);
                        prop_assert_eq!(info.get(pi, g), swapped.get(pi, f));
                    }
                }
            }
        }

        #[test]
        fn shifted_gap_decouples(
            inst in instance_strategy(),
            raw_mu in prop::collection::vec(0.01f64..1.0, 4),
            raw_nu in prop::collection::vec(0.01f64..1.0, 4),
        ) {
            let mu = SimplexVector::from_unnormalized(raw_mu[..inst.n_decisions()].to_vec()).unwrap();
            let nu = SimplexVector::from_unnormalized(raw_nu[..inst.n_models()].to_vec()).unwrap();
            for f in 0..inst.n_models() {
                let shifted = shifted_gap_matrix(&inst, f).unwrap();
                let delta = inst.optimal_value_gaps(f).unwrap();
                let m = shifted.matrix();
                let lhs = (DVector::from_column_slice(mu.weights()).transpose() * m
                    * DVector::from_column_slice(nu.weights()))[(0, 0)];
                let ef_term: f64 = (0..inst.n_decisions()).map(|pi| mu.weights()[pi] * m[(pi, f)]).sum();
                let rhs = nu.dot(&delta) + ef_term;
                prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
            }
        }
    }
}
