#![allow(dead_code)]

use gilbert_core::{CMat, DensityMatrix, RngSeed, RngStream, C64};

/// Random full-rank density matrix `G G† / Tr(G G†)` with Gaussian `G`.
pub fn random_density(dims: (usize, usize), rng: &mut RngStream) -> DensityMatrix {
    let d = dims.0 * dims.1;
    let g = CMat::from_fn(d, |_, _| C64::new(rng.normal(), rng.normal()));
    let m = &g * &g.dagger();
    let tr = m.trace().re;
    DensityMatrix::new(m.scale(1.0 / tr), dims).unwrap()
}

pub fn rng(seed: u64) -> RngStream {
    RngStream::new(RngSeed(seed))
}
