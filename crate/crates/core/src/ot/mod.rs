//! Weak solutions of the Monge-Ampère equation `f(∇φ) det D²φ = g` by
//! semi-discrete optimal transport from the source measure on `B_k` to a
//! Weyl-symmetric point cloud on `B_{R_k}`.

mod cells;
pub mod check;
pub mod cloud;
pub mod grid;
pub mod potential;
pub mod rank1;
pub mod sequence;
pub mod solver;

pub use cells::{laguerre_masses, CellAssignment};
pub use check::{ma_measure_check, Region};
pub use cloud::{sample_target_cloud, CloudOptions, TargetCloud};
pub use grid::SourceGrid;
pub use potential::{build_potential, ConvexPotential};
pub use rank1::rank1_closed_form;
pub use sequence::{solve_sequence, solve_step, Regularization, SequenceOptions, SequenceStep};
pub use solver::{cell_residuals, solve_weights, SolverOptions, TransportDiagnostics};
