use serde::{Deserialize, Serialize};

use super::cloud::TargetCloud;
use crate::rootsys::dot;

/// `φ(x) = max_j (⟨x, y_j⟩ − ψ_j) + offset`, gauged so that `φ(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPotential {
    pub rank: usize,
    /// Flat slopes, `rank` entries per affine piece.
    pub points: Vec<f64>,
    pub dual_weights: Vec<f64>,
    pub offset: f64,
}

impl ConvexPotential {
    pub fn len(&self) -> usize {
        self.dual_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dual_weights.is_empty()
    }

    pub fn slope(&self, j: usize) -> &[f64] {
        &self.points[j * self.rank..(j + 1) * self.rank]
    }

    /// Value of affine piece `j` at `x`, without the offset.
    fn piece(&self, j: usize, x: &[f64]) -> f64 {
        dot(x, self.slope(j)) - self.dual_weights[j]
    }

    /// Index of the active piece at `x`; ties go to the lowest index.
    pub fn active(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut value = f64::NEG_INFINITY;
        for j in 0..self.len() {
            let v = self.piece(j, x);
            if v > value {
                value = v;
                best = j;
            }
        }
        best
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.piece(self.active(x), x) + self.offset
    }

    /// A subgradient at `x` (the active slope).
    pub fn subgradient(&self, x: &[f64]) -> &[f64] {
        self.slope(self.active(x))
    }

    /// All slopes whose pieces are within `tol` of the maximum at `x`: the
    /// numerically multi-valued gradient.
    pub fn active_slopes(&self, x: &[f64], tol: f64) -> Vec<usize> {
        let top = self.eval(x) - self.offset;
        (0..self.len())
            .filter(|&j| self.piece(j, x) >= top - tol)
            .collect()
    }
}

/// Envelope of the affine pieces with slopes at the cloud points and
/// intercepts `−ψ_j`, shifted so that `φ(0) = 0`.
pub fn build_potential(cloud: &TargetCloud, psi: &[f64]) -> ConvexPotential {
    let offset = psi.iter().copied().fold(f64::INFINITY, f64::min);
    ConvexPotential {
        rank: cloud.rank,
        points: cloud.coords.clone(),
        dual_weights: psi.to_vec(),
        offset,
    }
}
