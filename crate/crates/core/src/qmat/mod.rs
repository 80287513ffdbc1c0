//! Dense complex linear algebra for small bipartite quantum states.
//!
//! Matrices are stored row-major; the joint index of `|i>_A |j>_B` is
//! `i * d_B + j`.

mod cmat;
mod eig;
mod rng;
mod state;

pub use cmat::{hs_inner, kron, kron_vec, CMat, C64};
pub use eig::{eig_hermitian, eigh, top_eigenpair, Eigh, HERMITIAN_TOL};
pub use rng::{hash64, RngSeed, RngStream};
pub use state::{
    conditioned_on_a, conditioned_on_b, fill_haar, haar_pure, hs_distance_sq, min_pt_eigenvalue,
    partial_transpose, partial_transpose_mat, product_density, DensityMatrix, DensityMatrixJson,
    ProductState, PureState, Subsystem, DM_HERMITIAN_TOL, DM_PSD_TOL, DM_TRACE_TOL, NORM_TOL,
};

pub(crate) use cmat::{hs_inner_unchecked, ONE, ZERO};
pub(crate) use state::distance_sq_unchecked;
