//! Jacobi, Heisenberg and metaplectic group machinery, half-integral
//! automorphic factors, the Schrödinger-Weil action on covariant Gaussians
//! and theta series with certified truncation.

pub mod autfactors;
pub mod error;
pub mod groups;
pub mod lattice;
pub mod matcore;
pub mod report;
pub mod suites;
pub mod theta;
pub mod weilrep;

pub use error::{Error, Result};
pub use groups::*;
pub use matcore::*;
