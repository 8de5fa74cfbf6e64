#![allow(dead_code)]

use e2d_core::env::RngStream;
use e2d_core::model::{gap_matrix, info_matrix, shifted_gap_matrix};
use e2d_core::simplex::simplex_grid;
use e2d_core::{FiniteInstance, GapMatrix, InfoMatrix};

/// Random finite class with scalar observations drawn independently of the
/// rewards, everything uniform on `[0, 1]`, unit variance.
pub fn random_finite(rng: &mut RngStream, n_dec: usize, n_mod: usize) -> FiniteInstance {
    let rewards: Vec<Vec<f64>> = (0..n_mod).map(|_| (0..n_dec).map(|_| rng.uniform()).collect()).collect();
    let obs: Vec<Vec<Vec<f64>>> =
        (0..n_mod).map(|_| (0..n_dec).map(|_| vec![rng.uniform() * 2.0]).collect()).collect();
    FiniteInstance::new(
        (0..n_dec).map(|i| format!("pi{i}")).collect(),
        (0..n_mod).map(|i| format!("f{i}")).collect(),
        rewards,
        obs,
        1.0,
    )
    .unwrap()
}

/// Rewards observed directly with variance ½, so `I_f(π, g) = (r_f(π) − r_g(π))²`.
pub fn assumption_one(rng: &mut RngStream, n_dec: usize, n_mod: usize) -> FiniteInstance {
    let rewards: Vec<Vec<f64>> = (0..n_mod).map(|_| (0..n_dec).map(|_| rng.uniform()).collect()).collect();
    FiniteInstance::with_reward_observations(rewards, 0.5).unwrap()
}

/// The twenty small instances shared by the equivalence checks: sizes cycle
/// through `|Π|, |H| ∈ {2, 3}`, reference model 0.
pub fn small_instances() -> Vec<(FiniteInstance, GapMatrix, InfoMatrix)> {
    let mut rng = RngStream::new(20_240_611);
    (0..20)
        .map(|i| {
            let n_dec = 2 + i % 2;
            let n_mod = 2 + (i / 2) % 2;
            let inst = random_finite(&mut rng, n_dec, n_mod);
            let gaps = gap_matrix(&inst);
            let info = info_matrix(&inst, 0).unwrap();
            (inst, gaps, info)
        })
        .collect()
}

pub fn shifted(inst: &FiniteInstance, f: usize) -> GapMatrix {
    shifted_gap_matrix(inst, f).unwrap()
}

/// Exhaustive `dec^ac`: `μ` and `ν` both range over regular simplex grids
/// with `divisions` steps and the constraint `μ I ν ≤ ε²` is checked directly.
pub fn ac_grid_oracle(gaps: &GapMatrix, info: &InfoMatrix, epsilon: f64, divisions: usize) -> f64 {
    let (n_dec, n_mod) = (gaps.n_decisions(), gaps.n_models());
    let nus: Vec<Vec<f64>> = simplex_grid(n_mod, divisions).collect();
    let eps_sq = epsilon * epsilon;
    let mut best = f64::INFINITY;
    for mu in simplex_grid(n_dec, divisions) {
        let row_gap: Vec<f64> = (0..n_mod).map(|g| (0..n_dec).map(|p| mu[p] * gaps.get(p, g)).sum()).collect();
        let row_info: Vec<f64> = (0..n_mod).map(|g| (0..n_dec).map(|p| mu[p] * info.get(p, g)).sum()).collect();
        let mut worst = f64::NEG_INFINITY;
        for nu in &nus {
            let inf: f64 = nu.iter().zip(&row_info).map(|(a, b)| a * b).sum();
            if inf <= eps_sq + 1e-12 {
                let gap: f64 = nu.iter().zip(&row_gap).map(|(a, b)| a * b).sum();
                worst = worst.max(gap);
            }
        }
        best = best.min(worst);
    }
    best
}

pub fn max_entry(gaps: &GapMatrix) -> f64 {
    gaps.matrix().iter().copied().fold(f64::NEG_INFINITY, f64::max)
}
