//! Greedy subspace clustering.
//!
//! Points lying on a union of low-dimensional linear subspaces are clustered in
//! two stages. First, [`nsn`] builds a neighborhood for every point by growing a
//! subspace from the point and repeatedly collecting the point closest to it.
//! Second, the neighborhoods are turned into clusters either by greedy subspace
//! recovery ([`gsr`]) or by spectral clustering of the symmetrized neighborhood
//! graph ([`spectral`]).
//!
//! The remaining modules provide the supporting pieces: subspace primitives
//! ([`geometry`]), synthetic data from the fully-random and semi-random models
//! ([`synthgen`]), clustering and neighborhood error metrics ([`metrics`]),
//! a seeded Monte-Carlo experiment engine ([`harness`]) and the plain-text file
//! formats used by the command line tool ([`io`]).

pub mod assignment;
pub mod error;
pub mod geometry;
pub mod gsr;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod nsn;
pub mod spectral;
pub mod synthgen;

pub use error::{Error, Result};
pub use geometry::{Basis, PointSet};
pub use metrics::Labeling;
pub use nsn::{NeighborhoodMatrix, NsnParams};
