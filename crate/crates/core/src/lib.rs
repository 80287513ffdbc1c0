//! Closest-separable-state approximation for bipartite density matrices.
//!
//! The crate implements Gilbert's algorithm under the Hilbert–Schmidt metric
//! together with three entanglement indicators computed from a finished run:
//!
//! * `D_Last`, the last logged distance to the separable approximation,
//! * `D_Est`, the asymptote of the distance decay found by maximizing a
//!   linear regression coefficient,
//! * `D_Wit`, a certified lower bound obtained from an entanglement witness.
//!
//! Around that core sit the two-qutrit Bell basis and the "magic simplex"
//! state families ([`simplex`]), and batch tooling that maps entanglement over
//! parameter planes ([`cartography`]).
//!
//! All randomness flows through an explicit [`RngStream`]; identical seeds give
//! bit-identical results.

pub mod cartography;
pub mod error;
pub mod estimators;
pub mod gilbert;
pub mod qmat;
pub mod simplex;

pub use error::{Error, Result};
pub use qmat::{CMat, DensityMatrix, ProductState, PureState, RngSeed, RngStream, Subsystem, C64};
