use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::densities::{DensitySpec, DEFAULT_OVERFLOW_RADIUS};
use crate::error::{Error, Result};
use crate::geometry::DEFAULT_WALL_EPS;
use crate::ot::{Regularization, SequenceOptions, SolverOptions};
use crate::rootsys::{load_root_system, RootSource, RootSystem};
use crate::uexpr::UExpr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Semi-discrete transport solves along `k_list`.
    #[default]
    Transport,
    /// Analytic SU(2) profile; no transport data is stored.
    Su2Oracle,
}

fn default_u() -> String {
    "zero".into()
}
fn default_tol() -> f64 {
    1e-6
}
fn default_overflow() -> f64 {
    DEFAULT_OVERFLOW_RADIUS
}
fn default_wall() -> f64 {
    DEFAULT_WALL_EPS
}
fn default_scale() -> f64 {
    1.0
}
fn default_max_iter() -> usize {
    200
}
fn default_regularization() -> Regularization {
    Regularization::InverseK
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub group: RootSource,
    /// Multiplier applied to every root (inner-product normalization).
    #[serde(default = "default_scale")]
    pub root_scale: f64,
    #[serde(default = "default_u")]
    pub u_spec: String,
    pub k_list: Vec<f64>,
    pub m_schedule: Vec<usize>,
    pub grid_resolution: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_overflow")]
    pub overflow_radius: f64,
    #[serde(default = "default_wall")]
    pub eps_wall: f64,
    #[serde(default = "default_regularization")]
    pub regularization: Regularization,
    /// Rank-1 stratum jitter in units of the stratum width.
    #[serde(default)]
    pub jitter: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub backend: Backend,
}

impl SolveConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: SolveConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.k_list.is_empty() {
            return bad("k_list is empty".into());
        }
        if self.k_list.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return bad("k_list entries must be positive".into());
        }
        if self.k_list.windows(2).any(|w| w[1] <= w[0]) {
            return bad("k_list must be increasing".into());
        }
        if self.m_schedule.len() != self.k_list.len() {
            return bad(format!(
                "m_schedule has {} entries for {} values of k",
                self.m_schedule.len(),
                self.k_list.len()
            ));
        }
        if !(self.tol > 1e-12 && self.tol < 1e-2) {
            return bad(format!("tol {} outside (1e-12, 1e-2)", self.tol));
        }
        if !(self.root_scale > 0.0 && self.root_scale.is_finite()) {
            return bad(format!("root_scale {} must be positive", self.root_scale));
        }
        if !(self.overflow_radius > 0.0) {
            return bad("overflow_radius must be positive".into());
        }
        if !(self.eps_wall > 0.0) {
            return bad("eps_wall must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.jitter) {
            return bad(format!("jitter {} outside [0, 1]", self.jitter));
        }
        if self.grid_resolution < 2 {
            return bad("grid_resolution must be at least 2".into());
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive".into());
        }
        let rs = self.root_system()?;
        UExpr::parse(&self.u_spec)?;
        if self.backend == Backend::Su2Oracle
            && (rs.rank() != 1 || self.root_scale != 1.0 || !self.u()?.is_zero())
        {
            return bad("the su2_oracle backend needs A1, root_scale 1 and u = zero".into());
        }
        Ok(())
    }

    pub fn root_system(&self) -> Result<RootSystem> {
        let rs = load_root_system(&self.group)?;
        if self.root_scale == 1.0 {
            Ok(rs)
        } else {
            rs.scaled(self.root_scale)
        }
    }

    pub fn u(&self) -> Result<UExpr> {
        UExpr::parse(&self.u_spec)
    }

    /// Density data without regularization; the sequence sets `ε` per `k`.
    pub fn density_spec(&self) -> Result<DensitySpec> {
        Ok(DensitySpec::new(self.root_system()?)
            .with_u(self.u()?)
            .with_overflow_radius(self.overflow_radius))
    }

    pub fn sequence_options(&self) -> SequenceOptions {
        SequenceOptions {
            grid_resolution: self.grid_resolution,
            solver: SolverOptions {
                tol: self.tol,
                max_iter: self.max_iter,
            },
            seed: self.seed,
            jitter: self.jitter,
            regularization: self.regularization,
        }
    }
}
