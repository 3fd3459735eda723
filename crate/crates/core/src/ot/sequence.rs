use serde::{Deserialize, Serialize};

use super::cloud::{sample_target_cloud, CloudOptions, TargetCloud};
use super::grid::SourceGrid;
use super::potential::{build_potential, ConvexPotential};
use super::solver::{solve_weights, SolverOptions, TransportDiagnostics};
use crate::densities::{balance_radius, DensitySpec};
use crate::error::{Error, Result};
use crate::rootsys::dot;

/// Source/target regularization `ε` used at step `k`; serialized as the
/// string `"inverse_k"` or a number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularization {
    /// `ε = 1/k`
    InverseK,
    Fixed(f64),
}

impl Serialize for Regularization {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Regularization::InverseK => s.serialize_str("inverse_k"),
            Regularization::Fixed(e) => s.serialize_f64(*e),
        }
    }
}

impl<'de> Deserialize<'de> for Regularization {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Name(String),
            Value(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Name(s) if s == "inverse_k" => Ok(Regularization::InverseK),
            Raw::Name(s) => Err(serde::de::Error::custom(format!(
                "unknown regularization `{s}`"
            ))),
            Raw::Value(e) if e >= 0.0 => Ok(Regularization::Fixed(e)),
            Raw::Value(e) => Err(serde::de::Error::custom(format!(
                "regularization {e} must be nonnegative"
            ))),
        }
    }
}

impl Regularization {
    pub fn at(self, k: f64) -> f64 {
        match self {
            Regularization::InverseK => 1.0 / k,
            Regularization::Fixed(e) => e,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SequenceOptions {
    pub grid_resolution: usize,
    pub solver: SolverOptions,
    pub seed: u64,
    pub jitter: f64,
    pub regularization: Regularization,
}

#[derive(Debug, Clone)]
pub struct SequenceStep {
    pub k: f64,
    pub regularization: f64,
    pub radius: f64,
    pub cloud: TargetCloud,
    pub potential: ConvexPotential,
    pub diagnostics: TransportDiagnostics,
    /// `sup |φ_k − φ_{k_prev}|` on the ball of radius `k_1/2`.
    pub sup_difference: Option<f64>,
    /// Largest selected subgradient norm on `B_{k/2}`.
    pub lipschitz: f64,
}

/// Sample points of the ball of radius `r`: a uniform grid with `per_axis`
/// points per axis, clipped to the ball.
pub fn ball_samples(rank: usize, r: f64, per_axis: usize) -> Vec<Vec<f64>> {
    let total = per_axis.pow(rank as u32);
    let step = 2.0 * r / (per_axis - 1) as f64;
    (0..total)
        .filter_map(|flat| {
            let mut rem = flat;
            let x: Vec<f64> = (0..rank)
                .map(|_| {
                    let i = rem % per_axis;
                    rem /= per_axis;
                    -r + i as f64 * step
                })
                .collect();
            (dot(&x, &x) <= r * r * (1.0 + 1e-12)).then_some(x)
        })
        .collect()
}

fn monitor_samples(rank: usize, r: f64) -> Vec<Vec<f64>> {
    let per_axis = match rank {
        1 => 2001,
        2 => 81,
        _ => 31,
    };
    ball_samples(rank, r, per_axis)
}

pub fn sup_difference(a: &ConvexPotential, b: &ConvexPotential, r: f64) -> f64 {
    monitor_samples(a.rank, r)
        .iter()
        .map(|x| (a.eval(x) - b.eval(x)).abs())
        .fold(0.0, f64::max)
}

pub fn lipschitz_monitor(p: &ConvexPotential, r: f64) -> f64 {
    monitor_samples(p.rank, r)
        .iter()
        .map(|x| {
            let g = p.subgradient(x);
            dot(g, g).sqrt()
        })
        .fold(0.0, f64::max)
}

/// Solve one step: balance radius, target cloud, dual weights.
pub fn solve_step(
    spec: &DensitySpec,
    k: f64,
    m: usize,
    opts: &SequenceOptions,
) -> Result<(SourceGrid, f64, TargetCloud, Vec<f64>, TransportDiagnostics)> {
    let radius = balance_radius(spec, k, opts.grid_resolution)?;
    let grid = SourceGrid::new(spec, k, opts.grid_resolution)?;
    let cloud = sample_target_cloud(
        spec,
        radius,
        m,
        &CloudOptions {
            seed: opts.seed,
            jitter: opts.jitter,
            source_mass: grid.total_mass(),
            lumping_resolution: None,
        },
    )?;
    let (psi, diagnostics) = solve_weights(&cloud, &grid, &opts.solver)?;
    Ok((grid, radius, cloud, psi, diagnostics))
}

/// Run the regularized sequence over `k_list`, one transport solve per `k`,
/// with compact-convergence and Lipschitz monitors.
pub fn solve_sequence(
    spec: &DensitySpec,
    k_list: &[f64],
    m_schedule: &[usize],
    opts: &SequenceOptions,
) -> Result<Vec<SequenceStep>> {
    if k_list.is_empty() {
        return Err(Error::Config("k_list is empty".into()));
    }
    if k_list.len() != m_schedule.len() {
        return Err(Error::Config(format!(
            "k_list has {} entries but m_schedule has {}",
            k_list.len(),
            m_schedule.len()
        )));
    }
    if k_list.iter().any(|k| !(*k > 0.0)) || k_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("k_list must be positive and increasing".into()));
    }
    let inner = 0.5 * k_list[0];
    let mut steps: Vec<SequenceStep> = Vec::with_capacity(k_list.len());
    for (&k, &m) in k_list.iter().zip(m_schedule) {
        let eps = opts.regularization.at(k);
        let spec_k = spec.clone().with_regularization(eps);
        let (_, radius, cloud, psi, diagnostics) = solve_step(&spec_k, k, m, opts)?;
        let potential = build_potential(&cloud, &psi);
        let sup = steps.last().map(|prev| sup_difference(&prev.potential, &potential, inner));
        let lipschitz = lipschitz_monitor(&potential, 0.5 * k);
        steps.push(SequenceStep {
            k,
            regularization: eps,
            radius,
            cloud,
            potential,
            diagnostics,
            sup_difference: sup,
            lipschitz,
        });
    }
    Ok(steps)
}
