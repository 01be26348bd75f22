//! Beam-to-beam point coupling for geometrically exact Simo–Reissner beams.
//!
//! The crate is organised bottom up:
//!
//! * [`so3`] – rotation algebra (exponential/logarithm map, tangent map).
//! * [`beam`] – Lagrange-interpolated Simo–Reissner elements and the maps from
//!   nodal degrees of freedom to cross-section kinematics.
//! * [`coupling`] – positional and rotational point-coupling constraints,
//!   Lagrange multiplier and penalty enforcement, closest-point projection.
//! * [`model`], [`assembly`], [`solver`] – global problem, assembly and the
//!   quasi-static Newton solver.
//! * [`scenarios`] – model documents, example geometries and study drivers.

pub mod ad;
pub mod assembly;
pub mod beam;
pub mod coupling;
mod error;
pub mod linsolve;
pub mod model;
pub mod scenarios;
pub mod so3;
pub mod solver;

pub use error::{Error, Result};
