//! Invariant Kähler metrics with prescribed Ricci form on complexified
//! compact Lie groups.
//!
//! A `G×G`-invariant metric on `G^C` is encoded by a convex Weyl-invariant
//! potential on a Cartan subalgebra solving a Monge-Ampère equation. This
//! crate solves that equation weakly by semi-discrete optimal transport
//! ([`ot`]), assembles the metric from the potential's spectral data
//! ([`geometry`]), and checks everything against closed-form solutions
//! ([`oracles`]).

pub mod cli;
pub mod densities;
pub mod error;
pub mod geometry;
pub mod oracles;
pub mod ot;
pub mod quad;
pub mod rootsys;
pub mod uexpr;

pub use error::{Error, Result};
