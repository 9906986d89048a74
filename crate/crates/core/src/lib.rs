//! Numerical study of the mean field equation on an annulus and on a flat torus.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod functional;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod minimax;
mod ode;
pub mod radial;
pub mod torus;

pub use error::{Error, Result};
pub use functional::{EnergyBreakdown, ProblemSpec};
pub use grid::{build_annulus_grid, DomainKind, Field, GridSpec};
