use crate::densities::{source_density, DensitySpec, MAX_QUADRATURE_CELLS};
use crate::error::{Error, Result};
use crate::quad::pairwise_sum;
use crate::rootsys::dot;

/// Piecewise-constant source measure on the ball `B_radius`: a uniform grid
/// of `resolution^n` cells on `[-radius, radius]^n`, each cell carrying the
/// source density at its center when that center lies in the ball and zero
/// otherwise.
#[derive(Debug, Clone)]
pub struct SourceGrid {
    rank: usize,
    resolution: usize,
    radius: f64,
    h: f64,
    /// Cell densities, first axis fastest.
    density: Vec<f64>,
    total_mass: f64,
}

impl SourceGrid {
    pub fn new(spec: &DensitySpec, radius: f64, resolution: usize) -> Result<Self> {
        let rank = spec.rank();
        if !(radius > 0.0) {
            return Err(Error::Domain(format!("grid radius {radius} must be positive")));
        }
        if !(1..=3).contains(&rank) {
            return Err(Error::Domain(format!("transport grids support rank 1..=3, got {rank}")));
        }
        let cells = (resolution as f64).powi(rank as i32);
        if resolution < 2 || cells > MAX_QUADRATURE_CELLS as f64 {
            return Err(Error::ResolutionOverflow { resolution, rank });
        }
        let h = 2.0 * radius / resolution as f64;
        let total = resolution.pow(rank as u32);
        let r2 = radius * radius;
        let mut density = vec![0.0; total];
        let mut x = vec![0.0; rank];
        for (flat, d) in density.iter_mut().enumerate() {
            let mut rem = flat;
            for xi in x.iter_mut() {
                *xi = -radius + ((rem % resolution) as f64 + 0.5) * h;
                rem /= resolution;
            }
            if dot(&x, &x) <= r2 {
                *d = source_density(spec, &x)?;
            }
        }
        let vol = h.powi(rank as i32);
        let total_mass = pairwise_sum(&density) * vol;
        Ok(SourceGrid {
            rank,
            resolution,
            radius,
            h,
            density,
            total_mass,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.rank as i32)
    }

    /// Lower edge of cell `i` along any axis.
    pub(crate) fn edge(&self, i: usize) -> f64 {
        -self.radius + i as f64 * self.h
    }

    pub(crate) fn center_coord(&self, i: usize) -> f64 {
        -self.radius + (i as f64 + 0.5) * self.h
    }

    /// Index of the cell containing coordinate `x`, clamped to the grid.
    pub(crate) fn index_of(&self, x: f64) -> usize {
        let i = ((x + self.radius) / self.h).floor();
        if i <= 0.0 {
            0
        } else {
            (i as usize).min(self.resolution - 1)
        }
    }

    /// Signed index, `None` when `x` is outside the grid box.
    pub(crate) fn index_checked(&self, x: f64) -> Option<usize> {
        let i = ((x + self.radius) / self.h).floor();
        if i < 0.0 || i >= self.resolution as f64 {
            None
        } else {
            Some(i as usize)
        }
    }

    pub(crate) fn densities(&self) -> &[f64] {
        &self.density
    }

    pub fn cell_center(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().map(|&i| self.center_coord(i)).collect()
    }

    /// Mass of the cells whose centers satisfy `region`.
    pub fn mass_where(&self, region: &dyn Fn(&[f64]) -> bool) -> f64 {
        let n = self.rank;
        let mut x = vec![0.0; n];
        let vals: Vec<f64> = self
            .density
            .iter()
            .enumerate()
            .map(|(flat, &d)| {
                if d == 0.0 {
                    return 0.0;
                }
                let mut rem = flat;
                for xi in x.iter_mut() {
                    *xi = self.center_coord(rem % self.resolution);
                    rem /= self.resolution;
                }
                if region(&x) {
                    d
                } else {
                    0.0
                }
            })
            .collect();
        pairwise_sum(&vals) * self.cell_volume()
    }
}
