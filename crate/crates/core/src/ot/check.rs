use serde::{Deserialize, Serialize};

use super::cells::laguerre_masses;
use super::grid::SourceGrid;
use super::potential::ConvexPotential;
use crate::error::{Error, Result};
use crate::rootsys::dot;

/// Test region for the Monge-Ampère measure check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl Region {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Ball { center, radius } => {
                let d: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                d <= radius * radius
            }
            Region::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (a, b))| *a <= *v && *v <= *b),
        }
    }

    fn inside_ball(&self, k: f64) -> bool {
        let slack = k * (1.0 + 1e-12);
        match self {
            Region::Ball { center, radius } => dot(center, center).sqrt() + radius <= slack,
            Region::Box { lo, hi } => {
                // The farthest corner takes the coordinate of larger magnitude.
                let far: f64 = lo
                    .iter()
                    .zip(hi)
                    .map(|(a, b)| a.abs().max(b.abs()).powi(2))
                    .sum();
                far.sqrt() <= slack
            }
        }
    }

    fn dim(&self) -> usize {
        match self {
            Region::Ball { center, .. } => center.len(),
            Region::Box { lo, .. } => lo.len(),
        }
    }
}

/// `|∫_B g − Σ_j ν_j · (fraction of cell j in B)| / ∫_B g` on the assignment
/// grid, where fractions are grid-measure fractions of the Laguerre cells.
pub fn ma_measure_check(
    potential: &ConvexPotential,
    masses: &[f64],
    grid: &SourceGrid,
    region: &Region,
) -> Result<f64> {
    if region.dim() != grid.rank() {
        return Err(Error::Domain(format!(
            "region dimension {} does not match rank {}",
            region.dim(),
            grid.rank()
        )));
    }
    if !region.inside_ball(grid.radius()) {
        return Err(Error::Domain(format!(
            "region {region:?} leaves the solved ball of radius {}",
            grid.radius()
        )));
    }
    let filter = |x: &[f64]| region.contains(x);
    let inside = laguerre_masses(
        grid,
        &potential.points,
        &potential.dual_weights,
        Some(&filter),
        false,
    );
    let full = laguerre_masses(grid, &potential.points, &potential.dual_weights, None, false);
    let lhs = grid.mass_where(&filter);
    if !(lhs > 0.0) {
        return Err(Error::Domain(format!("region {region:?} carries no source mass")));
    }
    let rhs: f64 = (0..masses.len())
        .filter(|&j| inside.masses[j] > 0.0)
        .map(|j| masses[j] * inside.masses[j] / full.masses[j])
        .sum();
    Ok((lhs - rhs).abs() / lhs)
}
