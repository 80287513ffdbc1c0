use serde::{Deserialize, Serialize};

use super::cmat::{hs_inner_unchecked, kron_vec, CMat, C64, ZERO};
use super::eig::eig_hermitian;
use super::rng::RngStream;
use crate::error::{Error, Result};

/// Hermiticity tolerance for a valid density matrix.
pub const DM_HERMITIAN_TOL: f64 = 1e-10;
/// Trace tolerance for a valid density matrix.
pub const DM_TRACE_TOL: f64 = 1e-10;
/// Most negative eigenvalue still accepted as numerical noise.
pub const DM_PSD_TOL: f64 = 1e-9;
/// Squared-norm tolerance for pure states.
pub const NORM_TOL: f64 = 1e-12;

/// Normalized state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amps: Vec<C64>,
}

impl PureState {
    /// Wraps amplitudes that must already be normalized.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        let n2: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        if amps.is_empty() || (n2 - 1.0).abs() > NORM_TOL {
            return Err(Error::Unnormalized(n2));
        }
        Ok(PureState { amps })
    }

    /// Normalizes arbitrary non-zero amplitudes.
    pub fn normalized(mut amps: Vec<C64>) -> Result<Self> {
        let n2: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        if !(n2 > 0.0) || !n2.is_finite() {
            return Err(Error::Unnormalized(n2));
        }
        let inv = 1.0 / n2.sqrt();
        for z in amps.iter_mut() {
            *z *= inv;
        }
        Ok(PureState { amps })
    }

    /// Computational basis state `|k>`.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut amps = vec![ZERO; dim];
        amps[k] = C64::new(1.0, 0.0);
        PureState { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amps(self) -> Vec<C64> {
        self.amps
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> C64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn projector(&self) -> CMat {
        CMat::outer(&self.amps)
    }
}

/// Haar-random pure state in dimension `d`: `2d` standard normals form the
/// real and imaginary parts of the amplitudes, which are then normalized.
pub fn haar_pure(d: usize, rng: &mut RngStream) -> PureState {
    assert!(d >= 1, "dimension must be positive");
    let mut amps = vec![C64::new(0.0, 0.0); d];
    fill_haar(&mut amps, rng);
    PureState { amps }
}

/// Writes a Haar-random unit vector into `buf`, consuming the same stream as
/// [`haar_pure`].
pub fn fill_haar(buf: &mut [C64], rng: &mut RngStream) {
    loop {
        let mut norm_sq = 0.0;
        for z in buf.iter_mut() {
            let re = rng.normal();
            let im = rng.normal();
            *z = C64::new(re, im);
            norm_sq += re * re + im * im;
        }
        // The zero vector has probability zero; redraw if it ever shows up.
        if norm_sq > 0.0 {
            let inv = 1.0 / norm_sq.sqrt();
            for z in buf.iter_mut() {
                *z *= inv;
            }
            return;
        }
    }
}

/// `|phi_A> ⊗ |phi_B>`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductState {
    pub a: PureState,
    pub b: PureState,
}

impl ProductState {
    pub fn new(a: PureState, b: PureState) -> Self {
        ProductState { a, b }
    }

    pub fn haar(dims: (usize, usize), rng: &mut RngStream) -> Self {
        let a = haar_pure(dims.0, rng);
        let b = haar_pure(dims.1, rng);
        ProductState { a, b }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.a.dim(), self.b.dim())
    }

    /// Joint state vector, index `i * d_B + j`.
    pub fn vector(&self) -> Vec<C64> {
        kron_vec(self.a.amps(), self.b.amps())
    }
}

/// Rank-one projector onto a product vector.
pub fn product_density(ps: &ProductState) -> DensityMatrix {
    DensityMatrix {
        mat: CMat::outer(&ps.vector()),
        dims: ps.dims(),
    }
}

/// Which tensor factor to transpose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subsystem {
    A,
    B,
}

/// Bipartite density matrix on `C^{d_A} ⊗ C^{d_B}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: CMat,
    dims: (usize, usize),
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(mat: CMat, dims: (usize, usize)) -> Result<Self> {
        let rho = Self::from_parts_unchecked(mat, dims)?;
        let herm = rho.mat.hermiticity_defect();
        if herm > DM_HERMITIAN_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "not Hermitian (defect {herm:e})"
            )));
        }
        let tr = rho.mat.trace();
        if (tr.re - 1.0).abs() > DM_TRACE_TOL || tr.im.abs() > DM_TRACE_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "trace {} differs from 1",
                tr
            )));
        }
        let min = eig_hermitian(&rho.mat)?[0];
        if min < -DM_PSD_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "negative eigenvalue {min:e}"
            )));
        }
        Ok(rho)
    }

    /// Only checks that the dimensions agree. For matrices that are density
    /// matrices by construction.
    pub fn from_parts_unchecked(mat: CMat, dims: (usize, usize)) -> Result<Self> {
        if dims.0 == 0 || dims.1 == 0 || dims.0 * dims.1 != mat.dim() {
            return Err(Error::DimensionMismatch(format!(
                "dims {}x{} for a {}x{} matrix",
                dims.0,
                dims.1,
                mat.dim(),
                mat.dim()
            )));
        }
        Ok(DensityMatrix { mat, dims })
    }

    /// `I / (d_A d_B)`.
    pub fn maximally_mixed(dims: (usize, usize)) -> Self {
        let n = dims.0 * dims.1;
        DensityMatrix {
            mat: CMat::identity(n).scale(1.0 / n as f64),
            dims,
        }
    }

    pub fn pure(psi: &PureState, dims: (usize, usize)) -> Result<Self> {
        Self::from_parts_unchecked(psi.projector(), dims)
    }

    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    pub fn into_mat(self) -> CMat {
        self.mat
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn purity(&self) -> f64 {
        hs_inner_unchecked(&self.mat, &self.mat)
    }

    pub(crate) fn check_compatible(&self, other: &DensityMatrix) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(format!(
                "dims {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> DensityMatrixJson {
        let n = self.dim();
        let row = |i: usize, f: fn(&C64) -> f64| (0..n).map(|j| f(&self.mat[(i, j)])).collect();
        DensityMatrixJson {
            dims: [self.dims.0, self.dims.1],
            re: (0..n).map(|i| row(i, |z| z.re)).collect(),
            im: (0..n).map(|i| row(i, |z| z.im)).collect(),
        }
    }

    /// Parses and validates the JSON form.
    pub fn from_json(json: &DensityMatrixJson) -> Result<Self> {
        let n = json.dims[0] * json.dims[1];
        let rows_ok = |rows: &Vec<Vec<f64>>| rows.len() == n && rows.iter().all(|r| r.len() == n);
        if !rows_ok(&json.re) || !rows_ok(&json.im) {
            return Err(Error::DimensionMismatch(format!(
                "expected {n}x{n} `re` and `im` arrays for dims {:?}",
                json.dims
            )));
        }
        let mat = CMat::from_fn(n, |i, j| C64::new(json.re[i][j], json.im[i][j]));
        Self::new(mat, (json.dims[0], json.dims[1]))
    }
}

/// Serialized density matrix: full row-major real and imaginary parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrixJson {
    pub dims: [usize; 2],
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

/// `sum_ij |(A - B)_ij|^2`.
pub fn hs_distance_sq(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    a.check_compatible(b)?;
    Ok(distance_sq_unchecked(&a.mat, &b.mat))
}

#[inline]
pub(crate) fn distance_sq_unchecked(a: &CMat, b: &CMat) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum()
}

/// Partial transpose of a `d_A d_B`-dimensional operator on one factor.
pub fn partial_transpose_mat(m: &CMat, dims: (usize, usize), sub: Subsystem) -> CMat {
    let (da, db) = dims;
    assert_eq!(da * db, m.dim(), "dims do not match matrix size");
    CMat::from_fn(m.dim(), |r, c| {
        let (i, j) = (r / db, r % db);
        let (k, l) = (c / db, c % db);
        match sub {
            Subsystem::A => m[(k * db + j, i * db + l)],
            Subsystem::B => m[(i * db + l, k * db + j)],
        }
    })
}

pub fn partial_transpose(rho: &DensityMatrix, sub: Subsystem) -> CMat {
    partial_transpose_mat(&rho.mat, rho.dims, sub)
}

/// Smallest eigenvalue of the partial transpose over `B`.
pub fn min_pt_eigenvalue(rho: &DensityMatrix) -> Result<f64> {
    Ok(eig_hermitian(&partial_transpose(rho, Subsystem::B))?[0])
}

/// `(I ⊗ <b|) H (I ⊗ |b>)`, an operator on factor A.
pub fn conditioned_on_b(h: &CMat, dims: (usize, usize), b: &[C64]) -> CMat {
    let (da, db) = dims;
    let n = da * db;
    let d = h.as_slice();
    let mut out = CMat::zeros(da);
    for i in 0..da {
        for k in 0..da {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..db {
                let row = (i * db + j) * n + k * db;
                let mut inner = C64::new(0.0, 0.0);
                for l in 0..db {
                    inner += d[row + l] * b[l];
                }
                acc += b[j].conj() * inner;
            }
            out[(i, k)] = acc;
        }
    }
    out
}

/// `(<a| ⊗ I) H (|a> ⊗ I)`, an operator on factor B.
pub fn conditioned_on_a(h: &CMat, dims: (usize, usize), a: &[C64]) -> CMat {
    let (da, db) = dims;
    let n = da * db;
    let d = h.as_slice();
    let mut out = CMat::zeros(db);
    for j in 0..db {
        for l in 0..db {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..da {
                let mut inner = C64::new(0.0, 0.0);
                for k in 0..da {
                    inner += d[(i * db + j) * n + k * db + l] * a[k];
                }
                acc += a[i].conj() * inner;
            }
            out[(j, l)] = acc;
        }
    }
    out
}
