//! Dense tableau simplex for finite two-player zero-sum games.
//!
//! The row player minimizes `μ C ν` and the column player maximizes it. After
//! shifting `C` to be strictly positive, the row player's problem becomes
//!
//! ```text
//! maximize 1ᵀu  subject to  Cᵀu ≤ 1, u ≥ 0,
//! ```
//!
//! with `μ = u / 1ᵀu` and game value `1 / 1ᵀu`. The origin is feasible, so no
//! phase one is needed; the column strategy is read off the slack reduced
//! costs (the LP dual).

use nalgebra::DMatrix;

use crate::error::{E2dError, Result};
use crate::simplex::SimplexVector;

const PIVOT_TOL: f64 = 1e-12;
const MAX_PIVOTS_FACTOR: usize = 50;

#[derive(Debug, Clone)]
pub struct GameSolution {
    /// `min_μ max_ν μ C ν`.
    pub value: f64,
    /// Minimizing row strategy.
    pub row: SimplexVector,
    /// Maximizing column strategy recovered from the dual.
    pub column: SimplexVector,
}

/// Solves the zero-sum game with payoff `payoff[(row, col)]` paid by the
/// minimizing row player to the maximizing column player.
pub fn solve_zero_sum(payoff: &DMatrix<f64>) -> Result<GameSolution> {
    let (n_rows, n_cols) = payoff.shape();
    if n_rows == 0 || n_cols == 0 {
        return Err(E2dError::Solver("empty payoff matrix".into()));
    }
    if payoff.iter().any(|x| !x.is_finite()) {
        return Err(E2dError::Solver("non-finite payoff entry".into()));
    }
    let shift = 1.0 - payoff.min();
    let scale = (payoff.max() + shift).max(1.0);

    // Tableau rows: one constraint per column-player strategy; objective last.
    // Columns: n_rows decision variables u, n_cols slacks, rhs.
    let width = n_rows + n_cols + 1;
    let height = n_cols + 1;
    let mut tab = vec![0.0; width * height];
    for j in 0..n_cols {
        let row = &mut tab[j * width..(j + 1) * width];
        for i in 0..n_rows {
            row[i] = (payoff[(i, j)] + shift) / scale;
        }
        row[n_rows + j] = 1.0;
        row[width - 1] = 1.0;
    }
    {
        let obj = &mut tab[n_cols * width..];
        for x in obj.iter_mut().take(n_rows) {
            *x = -1.0;
        }
    }
    let mut basis: Vec<usize> = (n_rows..n_rows + n_cols).collect();

    let max_pivots = MAX_PIVOTS_FACTOR * (n_rows + n_cols);
    let mut pivots = 0;
    let mut bland = false;
    let mut stall = 0;
    loop {
        let obj = &tab[n_cols * width..(n_cols + 1) * width];
        let entering = if bland {
            (0..width - 1).find(|&k| obj[k] < -PIVOT_TOL)
        } else {
            let mut best = None;
            let mut best_val = -PIVOT_TOL;
            for (k, &v) in obj[..width - 1].iter().enumerate() {
                if v < best_val {
                    best_val = v;
                    best = Some(k);
                }
            }
            best
        };
        let Some(col) = entering else { break };

        // Ratio test; ties go to the lowest basic index (Bland).
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for r in 0..n_cols {
            let a = tab[r * width + col];
            if a > PIVOT_TOL {
                let ratio = tab[r * width + width - 1] / a;
                let better = match leave {
                    None => true,
                    Some(l) => ratio < best_ratio - 1e-15 || (ratio <= best_ratio + 1e-15 && basis[r] < basis[l]),
                };
                if better {
                    best_ratio = ratio;
                    leave = Some(r);
                }
            }
        }
        let Some(pr) = leave else {
            return Err(E2dError::Solver("unbounded game LP (should be impossible)".into()));
        };
        if best_ratio <= 1e-15 {
            stall += 1;
            if stall > n_rows + n_cols {
                bland = true;
            }
        } else {
            stall = 0;
        }
        pivot(&mut tab, width, height, pr, col);
        basis[pr] = col;
        pivots += 1;
        if pivots > max_pivots {
            return Err(E2dError::Solver(format!("simplex did not terminate after {pivots} pivots")));
        }
    }

    let mut u = vec![0.0; n_rows];
    for (r, &b) in basis.iter().enumerate() {
        if b < n_rows {
            u[b] = tab[r * width + width - 1];
        }
    }
    let total: f64 = u.iter().sum();
    if !(total > 0.0) {
        return Err(E2dError::Solver("degenerate game LP solution".into()));
    }
    let obj = &tab[n_cols * width..];
    let duals: Vec<f64> = (0..n_cols).map(|j| obj[n_rows + j].max(0.0)).collect();

    let value = scale / total - shift;
    let row = SimplexVector::from_unnormalized(u)?;
    let column = SimplexVector::from_unnormalized(duals)?;
    Ok(GameSolution { value, row, column })
}

fn pivot(tab: &mut [f64], width: usize, height: usize, pr: usize, pc: usize) {
    let p = tab[pr * width + pc];
    for k in 0..width {
        tab[pr * width + k] /= p;
    }
    let pivot_row: Vec<f64> = tab[pr * width..(pr + 1) * width].to_vec();
    for r in 0..height {
        if r == pr {
            continue;
        }
        let factor = tab[r * width + pc];
        if factor != 0.0 {
            let row = &mut tab[r * width..(r + 1) * width];
            for (x, p) in row.iter_mut().zip(&pivot_row) {
                *x -= factor * p;
            }
        }
    }
}

/// `max_j μ C e_j` for a fixed row strategy.
pub fn best_response_value(payoff: &DMatrix<f64>, row: &SimplexVector) -> f64 {
    (0..payoff.ncols())
        .map(|j| (0..payoff.nrows()).map(|i| row.weights()[i] * payoff[(i, j)]).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `min_i e_i C ν` for a fixed column strategy.
pub fn best_response_row_value(payoff: &DMatrix<f64>, column: &SimplexVector) -> f64 {
    (0..payoff.nrows())
        .map(|i| (0..payoff.ncols()).map(|j| column.weights()[j] * payoff[(i, j)]).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}
