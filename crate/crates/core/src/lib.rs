//! Normal synchronized states of lossless power grids and networks of
//! Kuramoto oscillators.
//!
//! Every normal fixed point is the minimizer of a strictly convex function of
//! the loop amplitudes, one per winding vector. The crate enumerates the
//! admissible winding vectors, solves each convex program and classifies the
//! result. It also provides the linear (DC) flow, improved closed-form
//! approximations with error bounds, and max-flow feasibility certificates.

pub mod approx;
pub mod error;
pub mod experiment;
pub mod feasibility;
pub mod graph;
pub mod io;
pub mod linear;
pub mod network;
pub mod solver;

pub use error::{Error, Result};
pub use network::{Edge, Network};
