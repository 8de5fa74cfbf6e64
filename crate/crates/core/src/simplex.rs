//! Probability vectors over decisions (`μ`) and models (`ν`).

use serde::{Deserialize, Serialize};

use crate::error::{E2dError, Result};

/// Tolerance on the total mass of a [`SimplexVector`].
pub const SIMPLEX_TOL: f64 = 1e-9;

/// A probability vector: nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexVector {
    weights: Vec<f64>,
}

impl SimplexVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(E2dError::NotSimplex("empty weight vector".into()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(E2dError::NotSimplex(format!("weight {w} is negative or not finite")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(E2dError::NotSimplex(format!("weights sum to {total}")));
        }
        Ok(Self { weights })
    }

    /// Normalizes nonnegative weights; negative entries within `1e-12` of zero
    /// (LP round-off) are clamped.
    pub fn from_unnormalized(mut weights: Vec<f64>) -> Result<Self> {
        for w in weights.iter_mut() {
            if *w < 0.0 && *w > -1e-12 {
                *w = 0.0;
            }
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(E2dError::NotSimplex("negative or non-finite weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(E2dError::NotSimplex("weights have zero mass".into()));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Self::new(weights)
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform distribution over an empty set");
        Self { weights: vec![1.0 / n as f64; n] }
    }

    /// Point mass on `index`.
    pub fn vertex(n: usize, index: usize) -> Self {
        assert!(index < n, "vertex index {index} out of range {n}");
        let mut weights = vec![0.0; n];
        weights[index] = 1.0;
        Self { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dot(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// `(1 - step) * self + step * e_vertex`, the Frank–Wolfe update.
    pub fn step_toward_vertex(&self, vertex: usize, step: f64) -> Self {
        let mut weights: Vec<f64> = self.weights.iter().map(|w| (1.0 - step) * w).collect();
        weights[vertex] += step;
        // Keep the mass exactly one after many updates.
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Self { weights }
    }

    /// `t * self + (1 - t) * other`.
    pub fn mix(&self, other: &Self, t: f64) -> Self {
        let weights = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| t * a + (1.0 - t) * b)
            .collect();
        Self { weights }
    }

    /// Index of the largest weight, lowest index on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.weights)
    }

    /// Inverse-CDF draw from a uniform variate in `[0, 1)`.
    pub fn sample_with(&self, u: f64) -> usize {
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, w) in self.weights.iter().enumerate() {
            if *w > 0.0 {
                last_positive = i;
                acc += w;
                if u < acc {
                    return i;
                }
            }
        }
        last_positive
    }
}

impl TryFrom<Vec<f64>> for SimplexVector {
    type Error = E2dError;
    fn try_from(weights: Vec<f64>) -> Result<Self> {
        Self::new(weights)
    }
}

impl From<SimplexVector> for Vec<f64> {
    fn from(v: SimplexVector) -> Self {
        v.weights
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Index of the smallest value, lowest index on ties.
pub fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Every point of the regular grid `{k / divisions}` on the probability
/// simplex of dimension `dim`, in lexicographic order of the integer counts.
pub fn simplex_grid(dim: usize, divisions: usize) -> SimplexGrid {
    SimplexGrid::new(dim, divisions)
}

pub struct SimplexGrid {
    counts: Vec<usize>,
    divisions: usize,
    done: bool,
}

impl SimplexGrid {
    fn new(dim: usize, divisions: usize) -> Self {
        assert!(dim > 0 && divisions > 0);
        let mut counts = vec![0; dim];
        counts[dim - 1] = divisions;
        Self { counts, divisions, done: false }
    }

    fn advance(&mut self) {
        // Counts are compositions of `divisions`; the last entry is implied.
        let dim = self.counts.len();
        if dim == 1 {
            self.done = true;
            return;
        }
        let free = dim - 1;
        let mut i = free;
        loop {
            if i == 0 {
                self.done = true;
                return;
            }
            i -= 1;
            let used: usize = self.counts[..free].iter().sum();
            if used < self.divisions {
                self.counts[i] += 1;
                for c in &mut self.counts[i + 1..free] {
                    *c = 0;
                }
                let used: usize = self.counts[..free].iter().sum();
                self.counts[dim - 1] = self.divisions - used;
                return;
            }
            self.counts[i] = 0;
        }
    }
}

impl Iterator for SimplexGrid {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        if self.done {
            return None;
        }
        let scale = self.divisions as f64;
        let point = self.counts.iter().map(|&c| c as f64 / scale).collect();
        self.advance();
        Some(point)
    }
}
