use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::cells::{laguerre_masses, CellAssignment};
use super::cloud::TargetCloud;
use super::grid::SourceGrid;
use crate::error::{Error, Result};
use crate::quad::pairwise_sum;
use crate::rootsys::dot;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportDiagnostics {
    pub max_rel_cell_residual: f64,
    pub iterations: usize,
    pub empty_cells: usize,
    pub duality_gap_estimate: f64,
    /// Dual objective after every accepted step, starting with the initial
    /// guess.
    pub dual_history: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-6,
            max_iter: 200,
        }
    }
}

const MAX_HALVINGS: usize = 60;

struct State {
    psi_orbit: Vec<f64>,
    cells: CellAssignment,
    orbit_mass: Vec<f64>,
    dual: f64,
    err: f64,
}

fn expand(cloud: &TargetCloud, psi_orbit: &[f64]) -> Vec<f64> {
    cloud.orbit_of.iter().map(|&o| psi_orbit[o]).collect()
}

fn evaluate(
    grid: &SourceGrid,
    cloud: &TargetCloud,
    nu: &[f64],
    psi_orbit: Vec<f64>,
    with_hessian: bool,
) -> State {
    let psi = expand(cloud, &psi_orbit);
    let cells = laguerre_masses(grid, &cloud.coords, &psi, None, with_hessian);
    let mut orbit_mass = vec![0.0; nu.len()];
    for (j, &o) in cloud.orbit_of.iter().enumerate() {
        orbit_mass[o] += cells.masses[j];
    }
    let dual = dual_objective(cloud, &psi, &cells);
    let err = orbit_mass
        .iter()
        .zip(nu)
        .map(|(m, n)| (m - n) * (m - n))
        .sum::<f64>()
        .sqrt();
    State {
        psi_orbit,
        cells,
        orbit_mass,
        dual,
        err,
    }
}

/// Kantorovich dual in power-weight form, `w_j = ½|y_j|² − ψ_j`.
fn dual_objective(cloud: &TargetCloud, psi: &[f64], cells: &CellAssignment) -> f64 {
    let terms: Vec<f64> = (0..cloud.len())
        .map(|j| {
            let y = cloud.point(j);
            let w = 0.5 * dot(y, y) - psi[j];
            w * (cloud.masses[j] - cells.masses[j]) + cells.costs[j]
        })
        .collect();
    pairwise_sum(&terms)
}

fn gap(cloud: &TargetCloud, psi: &[f64], cells: &CellAssignment) -> f64 {
    let terms: Vec<f64> = (0..cloud.len())
        .map(|j| {
            let y = cloud.point(j);
            (0.5 * dot(y, y) - psi[j]) * (cloud.masses[j] - cells.masses[j])
        })
        .collect();
    pairwise_sum(&terms).abs()
}

fn max_rel(orbit_mass: &[f64], nu: &[f64]) -> f64 {
    orbit_mass
        .iter()
        .zip(nu)
        .map(|(m, n)| ((m - n) / n).abs())
        .fold(0.0, f64::max)
}

/// Orbit-level Jacobian `∂M_o/∂ψ_p` with orbit 0 pinned.
fn reduced_jacobian(cloud: &TargetCloud, cells: &CellAssignment, orbits: usize) -> DMatrix<f64> {
    let mut jac = DMatrix::<f64>::zeros(orbits, orbits);
    for (j, row) in cells.hessian.iter().enumerate() {
        let oj = cloud.orbit_of[j];
        for &(i, v) in row {
            let oi = cloud.orbit_of[i];
            jac[(oj, oi)] += v;
            jac[(oj, oj)] -= v;
        }
    }
    jac.remove_row(0).remove_column(0)
}

/// Dual weights `ψ` (one per point, tied along Weyl orbits) whose Laguerre
/// cells carry the cloud masses, by damped Newton iteration on the concave
/// dual. Returned weights are gauged to mass-weighted mean zero.
pub fn solve_weights(
    cloud: &TargetCloud,
    grid: &SourceGrid,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, TransportDiagnostics)> {
    let k = grid.radius();
    let fail = |message: String| Error::Solver { k, message };
    if !(opts.tol > 1e-12 && opts.tol < 1e-2) {
        return Err(Error::Config(format!("tol {} outside (1e-12, 1e-2)", opts.tol)));
    }
    if cloud.rank != grid.rank() {
        return Err(fail("cloud and grid ranks differ".into()));
    }
    let orbits = cloud.orbit_count();
    let mut nu = vec![0.0; orbits];
    for (j, &o) in cloud.orbit_of.iter().enumerate() {
        nu[o] += cloud.masses[j];
    }
    let radius = cloud.max_norm().max(f64::MIN_POSITIVE);
    let mut psi0 = vec![0.0; orbits];
    for j in 0..cloud.len() {
        let y = cloud.point(j);
        psi0[cloud.orbit_of[j]] = k / (2.0 * radius) * dot(y, y);
    }
    let mut state = evaluate(grid, cloud, &nu, psi0, true);
    let min_nu = nu.iter().copied().fold(f64::INFINITY, f64::min);
    let min_start = state.orbit_mass.iter().copied().fold(f64::INFINITY, f64::min);
    let floor = 0.5 * min_nu.min(min_start);
    if !(floor > 0.0) || state.cells.empty_cells() > 0 {
        return Err(fail(format!(
            "empty Laguerre cells at the initial guess ({} of {}); m is too large for the grid resolution",
            state.cells.empty_cells(),
            cloud.len()
        )));
    }
    let mut history = vec![state.dual];
    let mut iterations = 0;
    while max_rel(&state.orbit_mass, &nu) > opts.tol {
        if iterations == opts.max_iter {
            return Err(fail(format!(
                "max_iter {} exceeded; best residual {:.3e}",
                opts.max_iter,
                max_rel(&state.orbit_mass, &nu)
            )));
        }
        iterations += 1;
        let jac = reduced_jacobian(cloud, &state.cells, orbits);
        let rhs = DVector::from_iterator(
            orbits - 1,
            (1..orbits).map(|o| nu[o] - state.orbit_mass[o]),
        );
        let step = if orbits > 1 {
            jac.lu()
                .solve(&rhs)
                .ok_or_else(|| fail("singular transport Hessian; empty-cell deadlock".into()))?
        } else {
            rhs
        };
        let mut tau = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let mut trial = state.psi_orbit.clone();
            for o in 1..orbits {
                trial[o] += tau * step[o - 1];
            }
            let next = evaluate(grid, cloud, &nu, trial, false);
            let min_mass = next.orbit_mass.iter().copied().fold(f64::INFINITY, f64::min);
            if min_mass > floor
                && next.cells.empty_cells() == 0
                && next.err <= (1.0 - tau / 2.0) * state.err
                && next.dual >= state.dual - 1e-12 * (state.dual.abs() + 1.0)
            {
                accepted = Some(next);
                break;
            }
            tau *= 0.5;
        }
        let Some(next) = accepted else {
            return Err(fail(format!(
                "step control failed after {MAX_HALVINGS} halvings; residual {:.3e}",
                max_rel(&state.orbit_mass, &nu)
            )));
        };
        state = evaluate(grid, cloud, &nu, next.psi_orbit, true);
        history.push(state.dual);
    }

    let mut psi = expand(cloud, &state.psi_orbit);
    let total = cloud.total_mass();
    let mean = pairwise_sum(
        &psi.iter().zip(&cloud.masses).map(|(p, m)| p * m).collect::<Vec<_>>(),
    ) / total;
    for p in psi.iter_mut() {
        *p -= mean;
    }
    let diagnostics = TransportDiagnostics {
        max_rel_cell_residual: max_rel(&state.orbit_mass, &nu),
        iterations,
        empty_cells: state.cells.empty_cells(),
        duality_gap_estimate: gap(cloud, &psi, &state.cells),
        dual_history: history,
        converged: true,
    };
    Ok((psi, diagnostics))
}

/// Per-point relative residuals `|mass_j − ν_j| / ν_j` with cell masses
/// averaged over each orbit (the Weyl-symmetrized source measure).
pub fn cell_residuals(cloud: &TargetCloud, grid: &SourceGrid, psi: &[f64]) -> Vec<f64> {
    let cells = laguerre_masses(grid, &cloud.coords, psi, None, false);
    let mut orbit_mass = vec![0.0; cloud.orbit_count()];
    let mut orbit_nu = vec![0.0; cloud.orbit_count()];
    for (j, &o) in cloud.orbit_of.iter().enumerate() {
        orbit_mass[o] += cells.masses[j];
        orbit_nu[o] += cloud.masses[j];
    }
    cloud
        .orbit_of
        .iter()
        .map(|&o| ((orbit_mass[o] - orbit_nu[o]) / orbit_nu[o]).abs())
        .collect()
}
