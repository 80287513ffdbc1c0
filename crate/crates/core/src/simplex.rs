//! Two-qutrit Bell basis and the Bell-diagonal ("magic simplex") states.
//!
//! The Bell states are `|psi_ij> = (I ⊗ X^i Z^j) |psi_00>` with the shift
//! `X|k> = |k+1 mod 3>`, the clock `Z = diag(1, w, w^2)`, `w = e^{2πi/3}`, and
//! `|psi_00> = (|00> + |11> + |22>) / sqrt(3)`. Weights `p_ij` are stored in a
//! 3×3 array indexed `[i][j]`.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmat::{
    kron, min_pt_eigenvalue, CMat, DensityMatrix, PureState, RngStream, C64, ONE, ZERO,
};

/// Tolerance on `sum p_ij = 1`.
pub const SUM_TOL: f64 = 1e-12;
/// Negative weights down to this value are treated as rounding noise.
pub const WEIGHT_TOL: f64 = 1e-12;
/// PPT iff the smallest partial-transpose eigenvalue is at least `-PPT_TOL`.
pub const PPT_TOL: f64 = 1e-10;

const DIMS: (usize, usize) = (3, 3);

/// The qutrit shift and clock operators.
#[derive(Debug, Clone)]
pub struct WeylPair {
    pub x: CMat,
    pub z: CMat,
}

/// `e^{2πi/3}`.
pub fn omega() -> C64 {
    C64::from_polar(1.0, TAU / 3.0)
}

pub fn weyl_pair() -> WeylPair {
    let mut x = CMat::zeros(3);
    for k in 0..3 {
        x[((k + 1) % 3, k)] = ONE;
    }
    let w = omega();
    let mut z = CMat::zeros(3);
    for k in 0..3 {
        z[(k, k)] = w.powu(k as u32);
    }
    WeylPair { x, z }
}

fn mat_pow(m: &CMat, e: usize) -> CMat {
    (0..e).fold(CMat::identity(m.dim()), |acc, _| &acc * m)
}

/// `|psi_00>`, the maximally entangled two-qutrit state.
pub fn psi00() -> PureState {
    let s = C64::new(1.0 / 3f64.sqrt(), 0.0);
    let mut v = vec![ZERO; 9];
    for i in 0..3 {
        v[i * 3 + i] = s;
    }
    PureState::normalized(v).expect("non-zero vector")
}

/// The nine Bell states, ordered `i * 3 + j`.
pub fn bell_basis() -> Vec<PureState> {
    let WeylPair { x, z } = weyl_pair();
    let root = psi00();
    let mut out = Vec::with_capacity(9);
    for i in 0..3 {
        for j in 0..3 {
            let local = &mat_pow(&x, i) * &mat_pow(&z, j);
            let op = kron(&CMat::identity(3), &local);
            let amps = op.apply(root.amps()).expect("9x9 operator on 9-vector");
            out.push(PureState::normalized(amps).expect("unitary image is non-zero"));
        }
    }
    out
}

/// Bell weights `p_ij` of a physical magic-simplex state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexCoords {
    p: [[f64; 3]; 3],
}

impl SimplexCoords {
    /// Checks normalization and non-negativity.
    pub fn new(p: [[f64; 3]; 3]) -> Result<Self> {
        if let Some(reason) = physicality_violation(&p) {
            return Err(Error::Unphysical(reason));
        }
        Ok(SimplexCoords { p })
    }

    pub fn uniform() -> Self {
        SimplexCoords {
            p: [[1.0 / 9.0; 3]; 3],
        }
    }

    pub fn weights(&self) -> &[[f64; 3]; 3] {
        &self.p
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i][j]
    }

    pub fn flat(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                out[i * 3 + j] = self.p[i][j];
            }
        }
        out
    }

    /// Bell fidelities `<psi_ij| rho |psi_ij>` of an arbitrary two-qutrit
    /// state. For Bell-diagonal states these are the weights.
    pub fn extract(rho: &DensityMatrix) -> Result<[[f64; 3]; 3]> {
        if rho.dims() != DIMS {
            return Err(Error::DimensionMismatch(format!(
                "Bell weights need 3x3 dims, got {:?}",
                rho.dims()
            )));
        }
        let basis = bell_basis();
        let mut p = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                p[i][j] = rho.mat().expectation(basis[i * 3 + j].amps()).re;
            }
        }
        Ok(p)
    }
}

/// Names the first violated invariant, if any.
fn physicality_violation(p: &[[f64; 3]; 3]) -> Option<String> {
    let mut sum = 0.0;
    for (i, row) in p.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Some(format!("weight p_{i}{j} is not finite"));
            }
            if v < -WEIGHT_TOL {
                return Some(format!("weight p_{i}{j} = {v} is negative"));
            }
            sum += v;
        }
    }
    if (sum - 1.0).abs() > SUM_TOL {
        return Some(format!("weights sum to {sum}, not 1"));
    }
    None
}

/// `sum_ij p_ij |psi_ij><psi_ij|`.
pub fn bell_diag(coords: &SimplexCoords) -> DensityMatrix {
    let basis = bell_basis();
    let mut m = CMat::zeros(9);
    for (k, psi) in basis.iter().enumerate() {
        let w = coords.p[k / 3][k % 3];
        if w != 0.0 {
            m.axpby(1.0, w, &psi.projector());
        }
    }
    DensityMatrix::from_parts_unchecked(m, DIMS).expect("9x9 matrix with 3x3 dims")
}

/// PPT test: `(min eigenvalue of rho^{T_B} >= -1e-10, that eigenvalue)`.
pub fn is_ppt(rho: &DensityMatrix) -> Result<(bool, f64)> {
    let min = min_pt_eigenvalue(rho)?;
    Ok((min >= -PPT_TOL, min))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    A,
    B,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::A => write!(f, "A"),
            Family::B => write!(f, "B"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FamilyParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Unused by family A.
    pub delta: f64,
}

/// A point of family A or B. The point may be unphysical; that is reported by
/// [`FamilyPoint::coords`] rather than clipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyPoint {
    pub family: Family,
    pub params: FamilyParams,
}

/// Family A:
/// `(1-α-β-γ) I/9 + α|ψ00><ψ00| + β|ψ01><ψ01| + γ|ψ02><ψ02|`.
pub fn family_a(alpha: f64, beta: f64, gamma: f64) -> FamilyPoint {
    FamilyPoint {
        family: Family::A,
        params: FamilyParams {
            alpha,
            beta,
            gamma,
            delta: 0.0,
        },
    }
}

/// Family B: white noise `(1-α-β-γ-δ) I/9` plus `α` on `ψ00`, `β/2` on each of
/// `ψ01, ψ02`, `γ/3` on each `ψ1j` and `δ/3` on each `ψ2j`.
pub fn family_b(alpha: f64, beta: f64, gamma: f64, delta: f64) -> FamilyPoint {
    FamilyPoint {
        family: Family::B,
        params: FamilyParams {
            alpha,
            beta,
            gamma,
            delta,
        },
    }
}

pub const B1_GAMMA: f64 = -0.577_350_269_189_625_8; // -1/sqrt(3)
pub const B2_GAMMA: f64 = -0.83;

/// `5/3 (sqrt(3) - 1)`.
pub fn b3_alpha() -> f64 {
    5.0 / 3.0 * (3f64.sqrt() - 1.0)
}
pub const B3_BETA: f64 = -0.1;

/// Slice B1: `γ = -1/sqrt(3)`, `δ = 0`.
pub fn family_b1(alpha: f64, beta: f64) -> FamilyPoint {
    family_b(alpha, beta, -1.0 / 3f64.sqrt(), 0.0)
}

/// Slice B2: `γ = -0.83`, `δ = 0`.
pub fn family_b2(alpha: f64, beta: f64) -> FamilyPoint {
    family_b(alpha, beta, B2_GAMMA, 0.0)
}

/// Slice B3: `α = 5/3 (sqrt(3) - 1)`, `β = -1/10`.
pub fn family_b3(gamma: f64, delta: f64) -> FamilyPoint {
    family_b(b3_alpha(), B3_BETA, gamma, delta)
}

impl FamilyPoint {
    /// Bell weights before any physicality check.
    pub fn raw_weights(&self) -> [[f64; 3]; 3] {
        let FamilyParams {
            alpha,
            beta,
            gamma,
            delta,
        } = self.params;
        match self.family {
            Family::A => {
                let noise = (1.0 - alpha - beta - gamma) / 9.0;
                let mut p = [[noise; 3]; 3];
                p[0][0] += alpha;
                p[0][1] += beta;
                p[0][2] += gamma;
                p
            }
            Family::B => {
                let noise = (1.0 - alpha - beta - gamma - delta) / 9.0;
                let mut p = [[noise; 3]; 3];
                p[0][0] += alpha;
                p[0][1] += beta / 2.0;
                p[0][2] += beta / 2.0;
                for j in 0..3 {
                    p[1][j] += gamma / 3.0;
                    p[2][j] += delta / 3.0;
                }
                p
            }
        }
    }

    pub fn coords(&self) -> Result<SimplexCoords> {
        SimplexCoords::new(self.raw_weights()).map_err(|e| match e {
            Error::Unphysical(why) => Error::Unphysical(format!(
                "family {} point {:?}: {why}",
                self.family, self.params
            )),
            other => other,
        })
    }

    pub fn is_physical(&self) -> bool {
        physicality_violation(&self.raw_weights()).is_none()
    }

    pub fn density(&self) -> Result<DensityMatrix> {
        Ok(bell_diag(&self.coords()?))
    }
}

/// A two-parameter plane through the families, as used for charts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "slice")]
pub enum Slice {
    /// Family A with fixed `γ`; free `(α, β)`.
    A {
        #[serde(default)]
        gamma: f64,
    },
    /// Free `(α, β)`.
    B1,
    /// Free `(α, β)`.
    B2,
    /// Free `(γ, δ)`.
    B3,
}

impl Slice {
    pub fn point(&self, p1: f64, p2: f64) -> FamilyPoint {
        match *self {
            Slice::A { gamma } => family_a(p1, p2, gamma),
            Slice::B1 => family_b1(p1, p2),
            Slice::B2 => family_b2(p1, p2),
            Slice::B3 => family_b3(p1, p2),
        }
    }

    /// The two free parameters of a point on this slice.
    pub fn free_params(&self, point: &FamilyPoint) -> (f64, f64) {
        match self {
            Slice::A { .. } | Slice::B1 | Slice::B2 => (point.params.alpha, point.params.beta),
            Slice::B3 => (point.params.gamma, point.params.delta),
        }
    }

    pub fn param_names(&self) -> (&'static str, &'static str) {
        match self {
            Slice::A { .. } | Slice::B1 | Slice::B2 => ("alpha", "beta"),
            Slice::B3 => ("gamma", "delta"),
        }
    }
}

/// Random magic-simplex samplers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimplexSampler {
    /// The eight weights `p_ij, (i,j) != (2,2)` uniform subject to physicality,
    /// remainder on `ψ22`.
    Simplex,
    /// Each `a_ij` uniform on `[-1/8, 1]`, remainder as white noise; rejected
    /// until all Bell weights are non-negative.
    Noise,
}

impl fmt::Display for SimplexSampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimplexSampler::Simplex => write!(f, "simplex"),
            SimplexSampler::Noise => write!(f, "noise"),
        }
    }
}

/// A physical draw together with the number of candidates it took.
#[derive(Debug, Clone, Copy)]
pub struct SimplexDraw {
    pub coords: SimplexCoords,
    pub candidates: u64,
}

impl SimplexSampler {
    pub fn sample(&self, rng: &mut RngStream) -> SimplexDraw {
        match self {
            SimplexSampler::Simplex => SimplexDraw {
                coords: sample_simplex(rng),
                candidates: 1,
            },
            SimplexSampler::Noise => sample_simplex_noise(rng),
        }
    }
}

/// Uniform draw from the probability simplex over the nine Bell weights.
///
/// Conditioning eight independent `U[0,1]` weights on `sum <= 1` gives the
/// uniform distribution on that corner simplex; it is generated directly from
/// normalized exponential spacings, so every candidate is physical.
pub fn sample_simplex(rng: &mut RngStream) -> SimplexCoords {
    let mut e = [0.0; 9];
    for x in e.iter_mut() {
        // 1 - u is in (0, 1].
        *x = -(1.0 - rng.uniform()).ln();
    }
    let total: f64 = e.iter().sum();
    let mut p = [[0.0; 3]; 3];
    let mut acc = 0.0;
    for k in 0..8 {
        let v = e[k] / total;
        p[k / 3][k % 3] = v;
        acc += v;
    }
    p[2][2] = (1.0 - acc).max(0.0);
    SimplexCoords::new(p).expect("normalized exponential spacings are physical")
}

/// White-noise parametrization: rejection loop over `a_ij ~ U[-1/8, 1]`.
pub fn sample_simplex_noise(rng: &mut RngStream) -> SimplexDraw {
    let mut candidates = 0u64;
    loop {
        candidates += 1;
        let mut a = [0.0; 9];
        for x in a.iter_mut() {
            *x = rng.uniform_in(-0.125, 1.0);
        }
        let noise = (1.0 - a.iter().sum::<f64>()) / 9.0;
        if a.iter().all(|&x| x + noise >= 0.0) {
            let mut p = [[0.0; 3]; 3];
            for k in 0..9 {
                p[k / 3][k % 3] = a[k] + noise;
            }
            if let Ok(coords) = SimplexCoords::new(p) {
                return SimplexDraw { coords, candidates };
            }
        }
    }
}

/// Serialized magic-simplex state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexStateJson {
    /// `"A"`, `"B"` or `"raw"`.
    pub family: String,
    pub params: BTreeMap<String, f64>,
    pub p: [[f64; 3]; 3],
}

impl FamilyPoint {
    pub fn to_json(&self) -> SimplexStateJson {
        let mut params = BTreeMap::new();
        params.insert("alpha".to_string(), self.params.alpha);
        params.insert("beta".to_string(), self.params.beta);
        params.insert("gamma".to_string(), self.params.gamma);
        if self.family == Family::B {
            params.insert("delta".to_string(), self.params.delta);
        }
        SimplexStateJson {
            family: self.family.to_string(),
            params,
            p: self.raw_weights(),
        }
    }
}

impl SimplexCoords {
    pub fn to_json(&self) -> SimplexStateJson {
        SimplexStateJson {
            family: "raw".to_string(),
            params: BTreeMap::new(),
            p: self.p,
        }
    }
}

impl SimplexStateJson {
    /// Weights described by this record: recomputed from the parameters for
    /// family points, taken from `p` for raw states.
    pub fn coords(&self) -> Result<SimplexCoords> {
        let get = |k: &str| self.params.get(k).copied().unwrap_or(0.0);
        match self.family.as_str() {
            "A" => family_a(get("alpha"), get("beta"), get("gamma")).coords(),
            "B" => family_b(get("alpha"), get("beta"), get("gamma"), get("delta")).coords(),
            "raw" => SimplexCoords::new(self.p),
            other => Err(Error::InvalidConfig(format!("unknown family `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::{eig_hermitian, RngSeed};

    #[test]
    fn weyl_relations() {
        let WeylPair { x, z } = weyl_pair();
        let id = CMat::identity(3);
        assert!(mat_pow(&x, 3).approx_eq(&id, 1e-12));
        assert!(mat_pow(&z, 3).approx_eq(&id, 1e-12));
        let zx = &z * &x;
        let xz = (&x * &z).scale(1.0);
        let w = omega();
        let wxz = CMat::from_fn(3, |i, j| xz[(i, j)] * w);
        assert!(zx.approx_eq(&wxz, 1e-12));
    }

    #[test]
    fn psi00_amplitudes() {
        let b = bell_basis();
        let s = 1.0 / 3f64.sqrt();
        for (k, a) in b[0].amps().iter().enumerate() {
            let expect = if k % 4 == 0 { s } else { 0.0 };
            assert!((a - C64::new(expect, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn gram_and_completeness() {
        let b = bell_basis();
        for (m, u) in b.iter().enumerate() {
            for (n, v) in b.iter().enumerate() {
                let g = u.inner(v);
                let expect = if m == n { 1.0 } else { 0.0 };
                assert!(
                    (g - C64::new(expect, 0.0)).norm() < 1e-12,
                    "<{m}|{n}> = {g}"
                );
            }
        }
        let mut sum = CMat::zeros(9);
        for v in &b {
            sum.axpby(1.0, 1.0, &v.projector());
        }
        assert!(sum.approx_eq(&CMat::identity(9), 1e-12));
    }

    #[test]
    fn bell_diag_examples() {
        let mm = bell_diag(&SimplexCoords::uniform());
        assert!(mm
            .mat()
            .approx_eq(&CMat::identity(9).scale(1.0 / 9.0), 1e-15));
        let mut p = [[0.0; 3]; 3];
        p[0][0] = 1.0;
        let pure = bell_diag(&SimplexCoords::new(p).unwrap());
        assert!(pure.mat().approx_eq(&psi00().projector(), 1e-15));
    }

    #[test]
    fn spectrum_equals_weights() {
        let mut rng = RngStream::new(RngSeed(8));
        for _ in 0..20 {
            let c = sample_simplex(&mut rng);
            let mut w = c.flat().to_vec();
            w.sort_by(f64::total_cmp);
            let vals = eig_hermitian(bell_diag(&c).mat()).unwrap();
            for (a, b) in vals.iter().zip(&w) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn coords_round_trip() {
        let mut rng = RngStream::new(RngSeed(10));
        for _ in 0..20 {
            let c = sample_simplex(&mut rng);
            let back = SimplexCoords::extract(&bell_diag(&c)).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    assert!((back[i][j] - c.get(i, j)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn unphysical_coords_rejected() {
        let mut p = [[0.0; 3]; 3];
        p[0][0] = 1.2;
        p[1][1] = -0.2;
        let err = SimplexCoords::new(p).unwrap_err();
        assert!(err.to_string().contains("p_11"), "{err}");
        p[1][1] = 0.0;
        assert!(SimplexCoords::new(p)
            .unwrap_err()
            .to_string()
            .contains("sum"));
    }

    #[test]
    fn family_a_examples() {
        let noise = family_a(0.0, 0.0, 0.0).density().unwrap();
        assert!(noise
            .mat()
            .approx_eq(&CMat::identity(9).scale(1.0 / 9.0), 1e-15));
        let pure = family_a(1.0, 0.0, 0.0).density().unwrap();
        assert!(pure.mat().approx_eq(&psi00().projector(), 1e-15));
        let (ppt, min) = is_ppt(&family_a(0.25, 0.0, 0.0).density().unwrap()).unwrap();
        assert!(ppt && min.abs() < 1e-12, "min {min}");
        assert!(!family_a(2.0, 0.0, 0.0).is_physical());
    }

    #[test]
    fn family_b_examples() {
        let noise = family_b(0.0, 0.0, 0.0, 0.0).density().unwrap();
        assert!(noise
            .mat()
            .approx_eq(&CMat::identity(9).scale(1.0 / 9.0), 1e-15));
        let b1 = family_b1(0.1, 0.2);
        assert_eq!(b1.params.gamma, -1.0 / 3f64.sqrt());
        assert_eq!(b1.params.delta, 0.0);
        let b3 = family_b3(-0.0226, 0.3067);
        assert_eq!(b3.params.alpha, 5.0 / 3.0 * (3f64.sqrt() - 1.0));
        assert_eq!(b3.params.beta, -0.1);
        let w = family_b(0.3, 0.2, 0.3, 0.15).raw_weights();
        let total: f64 = w.iter().flatten().sum();
        assert!((total - 1.0).abs() < 1e-15);
        assert!((w[0][1] - (0.05 / 9.0 + 0.1)).abs() < 1e-15);
        assert!((w[2][2] - (0.05 / 9.0 + 0.05)).abs() < 1e-15);
    }

    #[test]
    fn b3_slice_is_unphysical_everywhere_on_a_wide_grid() {
        for gi in -50..=50 {
            for di in -50..=50 {
                let p = family_b3(gi as f64 * 0.1, di as f64 * 0.1);
                assert!(!p.is_physical());
            }
        }
    }

    #[test]
    fn ppt_examples() {
        let (ppt, min) = is_ppt(&bell_diag(&SimplexCoords::uniform())).unwrap();
        assert!(ppt && (min - 1.0 / 9.0).abs() < 1e-12);
        let mut p = [[0.0; 3]; 3];
        p[0][0] = 1.0;
        let (ppt, min) = is_ppt(&bell_diag(&SimplexCoords::new(p).unwrap())).unwrap();
        assert!(!ppt && (min + 1.0 / 3.0).abs() < 1e-10);
        let (ppt, _) = is_ppt(&family_a(0.3, 0.0, 0.0).density().unwrap()).unwrap();
        assert!(!ppt);
    }

    #[test]
    fn isotropic_ppt_boundary_by_bisection() {
        let min_eig =
            |a: f64| min_pt_eigenvalue(&family_a(a, 0.0, 0.0).density().unwrap()).unwrap();
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if min_eig(mid) >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lo - 0.25).abs() < 1e-6, "boundary at {lo}");
    }

    #[test]
    fn samplers_return_physical_states() {
        let mut rng = RngStream::new(RngSeed(12));
        for _ in 0..200 {
            assert!(SimplexCoords::new(*sample_simplex(&mut rng).weights()).is_ok());
        }
        for _ in 0..20 {
            let d = sample_simplex_noise(&mut rng);
            assert!(d.candidates >= 1);
            assert!(SimplexCoords::new(*d.coords.weights()).is_ok());
        }
    }

    #[test]
    fn json_forms() {
        let pt = family_a(0.2, -0.05, 0.0);
        let j = pt.to_json();
        assert_eq!(j.family, "A");
        let text = serde_json::to_string(&j).unwrap();
        let back: SimplexStateJson = serde_json::from_str(&text).unwrap();
        assert_eq!(back.coords().unwrap(), pt.coords().unwrap());
        let raw = SimplexCoords::uniform().to_json();
        assert_eq!(raw.family, "raw");
        assert_eq!(raw.coords().unwrap(), SimplexCoords::uniform());
    }
}
