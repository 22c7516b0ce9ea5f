//! Numerical toolkit for Musielak–Orlicz spaces with `(t,x)`-dependent
//! N-functions, together with a Galerkin solver for parabolic problems whose
//! flux is tied to the gradient through a maximal monotone graph.
//!
//! The crate is organised bottom-up:
//!
//! * [`nfunction`]: N-functions `M(t,x,a)` and their conjugates.
//! * [`field`] and [`modular`]: discretised fields on `Q = (0,T) × Ω` and
//!   the norms built on them.
//! * [`boundary_map`]: the interior-shift map `Ψ^δ` used before mollifying.
//! * [`mollify`]: space-time convolution composed with `Ψ^δ`.
//! * [`graph`]: monotone graphs and their mollified selections.
//! * [`solver`]: sine-basis Galerkin integration with energy and inclusion
//!   diagnostics.
//! * [`config`] and [`cli`]: the config-driven experiment runner.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boundary_map;
pub mod cli;
pub mod config;
pub mod domain;
pub mod error;
pub mod expr;
pub mod field;
pub mod graph;
pub mod modular;
pub mod mollify;
pub mod nfunction;
pub mod numerics;
pub mod solver;

pub use boundary_map::{BoundaryMap, MapConstants, MapDomain};
pub use domain::{Grid, Omega, SpaceTime};
pub use error::{Error, Result};
pub use field::GridField;
pub use graph::{LipschitzRep, MonotoneGraph};
pub use mollify::Kernel;
pub use nfunction::{ExponentField, NFunction, NKind};
pub use solver::{GalerkinBasis, GalerkinTrajectory};
