//! Gilbert's algorithm for the closest separable state under the
//! Hilbert–Schmidt metric.
//!
//! Each step draws a random product state (the trial), keeps it only if it
//! lies on the far side of the hyperplane through the current approximation
//! `rho1` orthogonal to `rho0 - rho1` (preselection), improves it with random
//! local phase rotations, and then moves `rho1` to the closest point of the
//! segment between `rho1` and the trial. An accepted move is a correction.
//! The squared distance is logged every `log_cadence` corrections.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmat::{
    conditioned_on_a, conditioned_on_b, distance_sq_unchecked, fill_haar, haar_pure,
    hs_inner_unchecked, CMat, DensityMatrix, DensityMatrixJson, ProductState, PureState, RngSeed,
    RngStream, C64, ZERO,
};

/// Mixture weights below this are dropped from the decomposition.
pub const PRUNE_WEIGHT: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GilbertConfig {
    pub max_corrections: u64,
    pub max_trials: u64,
    /// Halt once the squared distance drops below this value.
    pub d2_halt_threshold: f64,
    pub log_cadence: u64,
    /// Local-unitary rounds per accepted trial.
    pub lu_opt_iterations: u64,
    /// Rotation angle of each local-unitary step, radians.
    pub lu_phase: f64,
    pub lu_opt_enabled: bool,
    pub seed: RngSeed,
}

impl Default for GilbertConfig {
    fn default() -> Self {
        GilbertConfig {
            max_corrections: 10_000,
            max_trials: 2_000_000_000,
            d2_halt_threshold: 1e-7,
            log_cadence: 50,
            lu_opt_iterations: 1500,
            lu_phase: PI / 100.0,
            lu_opt_enabled: true,
            seed: RngSeed(0),
        }
    }
}

impl GilbertConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.max_corrections < 1 {
            return bad("max_corrections must be at least 1".into());
        }
        if self.max_trials < 1 {
            return bad("max_trials must be at least 1".into());
        }
        if self.log_cadence < 1 {
            return bad("log_cadence must be at least 1".into());
        }
        if !(self.d2_halt_threshold >= 0.0) || !self.d2_halt_threshold.is_finite() {
            return bad(format!(
                "d2_halt_threshold must be finite and >= 0, got {}",
                self.d2_halt_threshold
            ));
        }
        if !(self.lu_phase > 0.0 && self.lu_phase < PI) {
            return bad(format!(
                "lu_phase must lie in (0, pi), got {}",
                self.lu_phase
            ));
        }
        Ok(())
    }

    fn lu_active(&self) -> bool {
        self.lu_opt_enabled && self.lu_opt_iterations > 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HaltReason {
    Threshold,
    MaxCorrections,
    MaxTrials,
}

impl fmt::Display for HaltReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            HaltReason::Threshold => "threshold",
            HaltReason::MaxCorrections => "max_corrections",
            HaltReason::MaxTrials => "max_trials",
        };
        f.write_str(s)
    }
}

/// Squared distances logged during a run.
///
/// Entry `k` of `l` was logged after `(k + 1) * log_cadence` corrections. When
/// the run halts off-cadence (or before any correction) one final entry with
/// the distance at halt is appended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionTrace {
    pub l: Vec<f64>,
    pub log_cadence: u64,
    pub corrections_done: u64,
    pub trials_used: u64,
    pub halt_reason: HaltReason,
}

impl CorrectionTrace {
    /// Wraps an externally produced list, e.g. a synthetic decay, as if it had
    /// been logged at the given cadence with no off-cadence tail.
    pub fn from_squared_distances(l: Vec<f64>, log_cadence: u64) -> Self {
        let n = l.len() as u64;
        CorrectionTrace {
            l,
            log_cadence,
            corrections_done: n * log_cadence,
            trials_used: 0,
            halt_reason: HaltReason::MaxCorrections,
        }
    }

    fn regular_entries(&self) -> usize {
        ((self.corrections_done / self.log_cadence) as usize).min(self.l.len())
    }

    /// Correction count at which each entry of `l` was logged.
    pub fn correction_indices(&self) -> Vec<f64> {
        let regular = self.regular_entries();
        (0..self.l.len())
            .map(|k| {
                if k < regular {
                    ((k as u64 + 1) * self.log_cadence) as f64
                } else {
                    self.corrections_done as f64
                }
            })
            .collect()
    }

    /// The trace as it stood after `corrections` corrections (on-cadence
    /// entries only).
    pub fn prefix(&self, corrections: u64) -> CorrectionTrace {
        let keep = ((corrections / self.log_cadence) as usize).min(self.regular_entries());
        CorrectionTrace {
            l: self.l[..keep].to_vec(),
            log_cadence: self.log_cadence,
            corrections_done: keep as u64 * self.log_cadence,
            trials_used: 0,
            halt_reason: HaltReason::MaxCorrections,
        }
    }

    pub fn last(&self) -> Option<f64> {
        self.l.last().copied()
    }

    pub fn trials_per_correction(&self) -> f64 {
        self.trials_used as f64 / self.corrections_done.max(1) as f64
    }
}

/// Test state, current separable approximation and its product decomposition.
#[derive(Debug, Clone)]
pub struct GilbertState {
    pub rho0: DensityMatrix,
    pub rho1: DensityMatrix,
    pub decomposition: Vec<(ProductState, f64)>,
}

impl GilbertState {
    /// `sum_k w_k |prod_k><prod_k|`, recomputed from the decomposition.
    pub fn remix(&self) -> CMat {
        mix(&self.decomposition, self.rho1.dim())
    }

    pub fn d2(&self) -> f64 {
        distance_sq_unchecked(self.rho0.mat(), self.rho1.mat())
    }
}

fn mix(decomposition: &[(ProductState, f64)], n: usize) -> CMat {
    let mut m = CMat::zeros(n);
    for (ps, w) in decomposition {
        let v = ps.vector();
        let data = m.as_mut_slice();
        for i in 0..n {
            let vi = v[i] * *w;
            for j in 0..n {
                data[i * n + j] += vi * v[j].conj();
            }
        }
    }
    m
}

/// The maximally mixed state as a uniform mixture of computational product
/// states.
pub fn maximally_mixed_decomposition(dims: (usize, usize)) -> Vec<(ProductState, f64)> {
    let w = 1.0 / (dims.0 * dims.1) as f64;
    let mut out = Vec::with_capacity(dims.0 * dims.1);
    for i in 0..dims.0 {
        for j in 0..dims.1 {
            out.push((
                ProductState::new(PureState::basis(dims.0, i), PureState::basis(dims.1, j)),
                w,
            ));
        }
    }
    out
}

/// `Tr[(rho0 - rho1)(rho2 - rho1)]`; the trial is accepted iff this is > 0.
pub fn preselect(rho0: &DensityMatrix, rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<f64> {
    rho0.check_compatible(rho1)?;
    rho0.check_compatible(rho2)?;
    let delta = rho0.mat() - rho1.mat();
    let dir = rho2.mat() - rho1.mat();
    Ok(hs_inner_unchecked(&delta, &dir))
}

/// Weight `p` of `rho1` in the mixture `p rho1 + (1-p) rho2` closest to
/// `rho0`, clamped to `[0, 1]`, and the squared distance it attains.
/// Returns `p = 1` when `rho1 = rho2`.
pub fn optimal_mixing_weight(
    rho0: &DensityMatrix,
    rho1: &DensityMatrix,
    rho2: &DensityMatrix,
) -> Result<(f64, f64)> {
    rho0.check_compatible(rho1)?;
    rho0.check_compatible(rho2)?;
    let a = rho0.mat() - rho2.mat();
    let b = rho1.mat() - rho2.mat();
    let bb = b.frobenius_sq();
    let p = if bb == 0.0 {
        1.0
    } else {
        (hs_inner_unchecked(&a, &b) / bb).clamp(0.0, 1.0)
    };
    let mut mixed = rho2.mat().clone();
    mixed.axpby(1.0, p, &b);
    Ok((p, distance_sq_unchecked(rho0.mat(), &mixed)))
}

/// `rho0 - rho1` with helpers for evaluating the preselection functional on
/// product vectors.
struct Objective {
    delta: CMat,
    offset: f64,
    dims: (usize, usize),
}

impl Objective {
    fn new(rho0: &CMat, rho1: &CMat, dims: (usize, usize)) -> Self {
        let delta = rho0 - rho1;
        let offset = hs_inner_unchecked(&delta, rho1);
        Objective {
            delta,
            offset,
            dims,
        }
    }

    /// `Tr[(rho0 - rho1)(|v><v| - rho1)]` for a joint unit vector `v`.
    fn value(&self, v: &[C64]) -> f64 {
        self.delta.expectation(v).re - self.offset
    }

    fn product_value(&self, a: &[C64], b: &[C64]) -> f64 {
        self.value(&crate::qmat::kron_vec(a, b))
    }

    /// Same as `product_value`, using `joint` as scratch and only the upper
    /// triangle of the Hermitian `delta`.
    #[inline]
    fn product_value_fast(&self, a: &[C64], b: &[C64], joint: &mut [C64]) -> f64 {
        let db = b.len();
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                joint[i * db + j] = x * y;
            }
        }
        let n = joint.len();
        let d = self.delta.as_slice();
        let mut diag = 0.0;
        let mut off = 0.0;
        for i in 0..n {
            let row = &d[i * n..(i + 1) * n];
            let vi = joint[i];
            diag += row[i].re * vi.norm_sqr();
            let mut s = ZERO;
            for j in (i + 1)..n {
                s += row[j] * joint[j];
            }
            off += (vi.conj() * s).re;
        }
        diag + 2.0 * off - self.offset
    }

    fn conditioned_on_b(&self, b: &[C64]) -> CMat {
        conditioned_on_b(&self.delta, self.dims, b)
    }

    fn conditioned_on_a(&self, a: &[C64]) -> CMat {
        conditioned_on_a(&self.delta, self.dims, a)
    }
}

/// Applies powers of `U = I + (e^{iθ} - 1)|ψ><ψ|` to `x` on a local factor,
/// maximizing `<x|M|x>`.
///
/// `U^n x = x_perp + e^{inθ} <ψ|x> ψ`, so the objective along the orbit is
/// `A + 2 Re(e^{inθ} B)` and every power is evaluated in closed form. `U` is
/// replaced by `U^dagger` if the first step lowers the objective, and steps
/// are repeated while the objective strictly increases.
fn phase_rotation_step(m: &CMat, x: &mut [C64], psi: &[C64], theta: f64) {
    let kappa: C64 = psi.iter().zip(x.iter()).map(|(p, v)| p.conj() * v).sum();
    if kappa.norm_sqr() == 0.0 {
        return;
    }
    let perp: Vec<C64> = x.iter().zip(psi).map(|(v, p)| v - kappa * p).collect();
    let m_psi = m.apply(psi).expect("local dims agree");
    let cross = kappa
        * perp
            .iter()
            .zip(&m_psi)
            .map(|(u, w)| u.conj() * w)
            .sum::<C64>();
    let f = |n: i64| (C64::from_polar(1.0, n as f64 * theta) * cross).re;

    let mut dir = 1i64;
    if f(0) > f(1) {
        dir = -1;
    }
    let max_steps = (2.0 * PI / theta).ceil() as i64 + 1;
    let mut n = 0i64;
    while n.abs() < max_steps && f(n + dir) > f(n) {
        n += dir;
    }
    if n != 0 {
        let rot = C64::from_polar(1.0, n as f64 * theta) * kappa;
        for ((v, u), p) in x.iter_mut().zip(&perp).zip(psi) {
            *v = u + rot * p;
        }
    }
}

fn renormalize(v: &mut [C64]) {
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in v.iter_mut() {
        *z /= n;
    }
}

fn optimize_in_place(
    obj: &Objective,
    a: &mut [C64],
    b: &mut [C64],
    cfg: &GilbertConfig,
    rng: &mut RngStream,
) {
    for j in 1..=cfg.lu_opt_iterations {
        if j % 2 == 1 {
            let m = obj.conditioned_on_b(b);
            let psi = haar_pure(obj.dims.0, rng);
            phase_rotation_step(&m, a, psi.amps(), cfg.lu_phase);
        } else {
            let m = obj.conditioned_on_a(a);
            let psi = haar_pure(obj.dims.1, rng);
            phase_rotation_step(&m, b, psi.amps(), cfg.lu_phase);
        }
    }
    renormalize(a);
    renormalize(b);
}

fn lu_optimize_with(
    obj: &Objective,
    trial: &ProductState,
    cfg: &GilbertConfig,
    rng: &mut RngStream,
) -> ProductState {
    if cfg.lu_opt_iterations == 0 {
        return trial.clone();
    }
    let before = obj.product_value(trial.a.amps(), trial.b.amps());
    let mut a = trial.a.amps().to_vec();
    let mut b = trial.b.amps().to_vec();
    optimize_in_place(obj, &mut a, &mut b, cfg, rng);
    let after = obj.product_value(&a, &b);
    if after < before {
        // Only possible through rounding in the closed-form steps.
        return trial.clone();
    }
    match (PureState::new(a), PureState::new(b)) {
        (Ok(a), Ok(b)) => ProductState::new(a, b),
        _ => trial.clone(),
    }
}

/// Improves a trial product state by `cfg.lu_opt_iterations` rounds of random
/// local phase rotations, alternating between factor A (odd rounds) and
/// factor B (even rounds). The preselection value never decreases.
pub fn lu_optimize_trial(
    rho0: &DensityMatrix,
    rho1: &DensityMatrix,
    trial: &ProductState,
    cfg: &GilbertConfig,
    rng: &mut RngStream,
) -> Result<ProductState> {
    rho0.check_compatible(rho1)?;
    if trial.dims() != rho0.dims() {
        return Err(Error::DimensionMismatch(format!(
            "trial dims {:?} vs state dims {:?}",
            trial.dims(),
            rho0.dims()
        )));
    }
    let obj = Objective::new(rho0.mat(), rho1.mat(), rho0.dims());
    Ok(lu_optimize_with(&obj, trial, cfg, rng))
}

/// Runs Gilbert's algorithm on `rho0`.
///
/// `initial` is a product-state mixture for the starting approximation; by
/// default the maximally mixed state. The run is a deterministic function of
/// `(rho0, cfg, initial)`.
pub fn run_gilbert(
    rho0: &DensityMatrix,
    cfg: &GilbertConfig,
    initial: Option<Vec<(ProductState, f64)>>,
) -> Result<(GilbertState, CorrectionTrace)> {
    cfg.validate()?;
    let dims = rho0.dims();
    let n = rho0.dim();
    let mut decomposition = match initial {
        Some(d) => {
            validate_decomposition(&d, dims)?;
            d
        }
        None => maximally_mixed_decomposition(dims),
    };
    let mut rho1 = mix(&decomposition, n);
    let mut d2 = distance_sq_unchecked(rho0.mat(), &rho1);
    let mut obj = Objective::new(rho0.mat(), &rho1, dims);

    let mut rng = RngStream::new(cfg.seed);
    let mut a = vec![ZERO; dims.0];
    let mut b = vec![ZERO; dims.1];
    let mut joint = vec![ZERO; n];
    let mut l = Vec::new();
    let mut corrections = 0u64;
    let mut trials = 0u64;

    let halt_reason = loop {
        if d2 < cfg.d2_halt_threshold {
            break HaltReason::Threshold;
        }
        if corrections >= cfg.max_corrections {
            break HaltReason::MaxCorrections;
        }
        if trials >= cfg.max_trials {
            break HaltReason::MaxTrials;
        }
        trials += 1;
        fill_haar(&mut a, &mut rng);
        fill_haar(&mut b, &mut rng);
        if !(obj.product_value_fast(&a, &b, &mut joint) > 0.0) {
            continue;
        }
        let mut trial = ProductState::new(PureState::new(a.clone())?, PureState::new(b.clone())?);
        if cfg.lu_active() {
            trial = lu_optimize_with(&obj, &trial, cfg, &mut rng);
        }

        let rho2 = CMat::outer(&trial.vector());
        let dir = &rho2 - &rho1;
        let dd = dir.frobenius_sq();
        if dd == 0.0 {
            continue;
        }
        // Step t = 1 - p along rho2 - rho1.
        let t = (hs_inner_unchecked(&obj.delta, &dir) / dd).clamp(0.0, 1.0);
        let mut next = rho1.clone();
        next.axpby(1.0, t, &dir);
        let next_d2 = distance_sq_unchecked(rho0.mat(), &next);
        if !(next_d2 < d2) {
            continue;
        }

        rho1 = next;
        d2 = next_d2;
        obj = Objective::new(rho0.mat(), &rho1, dims);
        push_component(&mut decomposition, trial, 1.0 - t);
        corrections += 1;
        if corrections.is_multiple_of(cfg.log_cadence) {
            l.push(d2);
        }
    };
    if corrections == 0 || !corrections.is_multiple_of(cfg.log_cadence) {
        l.push(d2);
    }

    let state = GilbertState {
        rho0: rho0.clone(),
        rho1: DensityMatrix::from_parts_unchecked(rho1, dims)?,
        decomposition,
    };
    let trace = CorrectionTrace {
        l,
        log_cadence: cfg.log_cadence,
        corrections_done: corrections,
        trials_used: trials,
        halt_reason,
    };
    Ok((state, trace))
}

fn push_component(decomposition: &mut Vec<(ProductState, f64)>, trial: ProductState, p: f64) {
    for (_, w) in decomposition.iter_mut() {
        *w *= p;
    }
    decomposition.push((trial, 1.0 - p));
    decomposition.retain(|(_, w)| *w >= PRUNE_WEIGHT);
    let total: f64 = decomposition.iter().map(|(_, w)| w).sum();
    for (_, w) in decomposition.iter_mut() {
        *w /= total;
    }
}

fn validate_decomposition(d: &[(ProductState, f64)], dims: (usize, usize)) -> Result<()> {
    if d.is_empty() {
        return Err(Error::InvalidConfig(
            "initial decomposition is empty".into(),
        ));
    }
    let mut total = 0.0;
    for (ps, w) in d {
        if ps.dims() != dims {
            return Err(Error::DimensionMismatch(format!(
                "initial product state dims {:?} vs {:?}",
                ps.dims(),
                dims
            )));
        }
        if !(*w >= 0.0) {
            return Err(Error::InvalidConfig(format!("negative mixture weight {w}")));
        }
        total += w;
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "initial mixture weights sum to {total}"
        )));
    }
    Ok(())
}

/// Serialized record of a finished run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceJson {
    pub config: GilbertConfig,
    pub l: Vec<f64>,
    pub corrections: u64,
    pub trials: u64,
    pub halt: HaltReason,
    pub rho1: DensityMatrixJson,
    pub decomposition_size: usize,
}

impl TraceJson {
    pub fn new(cfg: &GilbertConfig, state: &GilbertState, trace: &CorrectionTrace) -> Self {
        TraceJson {
            config: cfg.clone(),
            l: trace.l.clone(),
            corrections: trace.corrections_done,
            trials: trace.trials_used,
            halt: trace.halt_reason,
            rho1: state.rho1.to_json(),
            decomposition_size: state.decomposition.len(),
        }
    }

    pub fn trace(&self) -> CorrectionTrace {
        CorrectionTrace {
            l: self.l.clone(),
            log_cadence: self.config.log_cadence,
            corrections_done: self.corrections,
            trials_used: self.trials,
            halt_reason: self.halt,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::product_density;
    use crate::simplex::{family_a, psi00};

    fn mm() -> DensityMatrix {
        DensityMatrix::maximally_mixed((3, 3))
    }

    fn random_dm(rng: &mut RngStream) -> DensityMatrix {
        let g = CMat::from_fn(9, |_, _| C64::new(rng.normal(), rng.normal()));
        let m = &g * &g.dagger();
        let tr = m.trace().re;
        DensityMatrix::new(m.scale(1.0 / tr), (3, 3)).unwrap()
    }

    fn quick(max_corrections: u64, seed: u64) -> GilbertConfig {
        GilbertConfig {
            max_corrections,
            lu_opt_iterations: 200,
            seed: RngSeed(seed),
            ..GilbertConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(GilbertConfig::default().validate().is_ok());
        let bad = [
            GilbertConfig {
                max_corrections: 0,
                ..Default::default()
            },
            GilbertConfig {
                max_trials: 0,
                ..Default::default()
            },
            GilbertConfig {
                log_cadence: 0,
                ..Default::default()
            },
            GilbertConfig {
                lu_phase: 0.0,
                ..Default::default()
            },
            GilbertConfig {
                lu_phase: PI,
                ..Default::default()
            },
            GilbertConfig {
                d2_halt_threshold: -1.0,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(
                matches!(cfg.validate(), Err(Error::InvalidConfig(_))),
                "{cfg:?}"
            );
            assert!(run_gilbert(&mm(), &cfg, None).is_err());
        }
    }

    #[test]
    fn preselect_examples() {
        let rho0 = DensityMatrix::pure(&psi00(), (3, 3)).unwrap();
        let rho2 = product_density(&ProductState::new(
            PureState::basis(3, 0),
            PureState::basis(3, 0),
        ));
        assert_eq!(preselect(&rho0, &mm(), &mm()).unwrap(), 0.0);
        let g = preselect(&rho0, &mm(), &rho2).unwrap();
        assert!((g - 2.0 / 9.0).abs() < 1e-15, "g = {g}");
        assert_eq!(preselect(&mm(), &mm(), &rho2).unwrap(), 0.0);
    }

    #[test]
    fn mixing_weight_examples() {
        let mut rng = RngStream::new(RngSeed(1));
        let rho0 = product_density(&ProductState::haar((3, 3), &mut rng));
        let (p, d2) = optimal_mixing_weight(&rho0, &mm(), &rho0).unwrap();
        assert!(p.abs() < 1e-15 && d2 < 1e-28);
        let (p, _) = optimal_mixing_weight(&mm(), &mm(), &rho0).unwrap();
        assert_eq!(p, 1.0);
        let (p, _) = optimal_mixing_weight(&rho0, &mm(), &mm()).unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn mixing_weight_beats_grid() {
        let mut rng = RngStream::new(RngSeed(2));
        for _ in 0..20 {
            let (r0, r1, r2) = (
                random_dm(&mut rng),
                random_dm(&mut rng),
                random_dm(&mut rng),
            );
            let (_, best) = optimal_mixing_weight(&r0, &r1, &r2).unwrap();
            for k in 0..100 {
                let p = k as f64 / 99.0;
                let mut m = r2.mat().clone();
                m.axpby(1.0 - p, p, r1.mat());
                assert!(best <= distance_sq_unchecked(r0.mat(), &m) + 1e-15);
            }
        }
    }

    #[test]
    fn zero_lu_iterations_is_identity() {
        let mut rng = RngStream::new(RngSeed(3));
        let rho0 = DensityMatrix::pure(&psi00(), (3, 3)).unwrap();
        let trial = ProductState::haar((3, 3), &mut rng);
        let cfg = GilbertConfig {
            lu_opt_iterations: 0,
            ..Default::default()
        };
        assert_eq!(
            lu_optimize_trial(&rho0, &mm(), &trial, &cfg, &mut rng).unwrap(),
            trial
        );
    }

    #[test]
    fn lu_optimization_never_decreases_objective() {
        let mut rng = RngStream::new(RngSeed(4));
        let cfg = GilbertConfig {
            lu_opt_iterations: 30,
            ..Default::default()
        };
        for _ in 0..1000 {
            let rho0 = random_dm(&mut rng);
            let rho1 = random_dm(&mut rng);
            let trial = ProductState::haar((3, 3), &mut rng);
            let before = preselect(&rho0, &rho1, &product_density(&trial)).unwrap();
            let out = lu_optimize_trial(&rho0, &rho1, &trial, &cfg, &mut rng).unwrap();
            let after = preselect(&rho0, &rho1, &product_density(&out)).unwrap();
            assert!(after >= before, "{after} < {before}");
        }
    }

    #[test]
    fn conditioned_operators_match_full_evaluation() {
        let mut rng = RngStream::new(RngSeed(5));
        let r0 = random_dm(&mut rng);
        let r1 = random_dm(&mut rng);
        let obj = Objective::new(r0.mat(), r1.mat(), (3, 3));
        let ps = ProductState::haar((3, 3), &mut rng);
        let full = obj.delta.expectation(&ps.vector()).re;
        let via_a = obj
            .conditioned_on_b(ps.b.amps())
            .expectation(ps.a.amps())
            .re;
        let via_b = obj
            .conditioned_on_a(ps.a.amps())
            .expectation(ps.b.amps())
            .re;
        assert!((full - via_a).abs() < 1e-14);
        assert!((full - via_b).abs() < 1e-14);
        let mut joint = vec![ZERO; 9];
        let fast = obj.product_value_fast(ps.a.amps(), ps.b.amps(), &mut joint);
        assert!((fast - obj.product_value(ps.a.amps(), ps.b.amps())).abs() < 1e-14);
    }

    #[test]
    fn maximally_mixed_is_a_fixed_point() {
        let (state, trace) = run_gilbert(&mm(), &GilbertConfig::default(), None).unwrap();
        assert_eq!(trace.halt_reason, HaltReason::Threshold);
        assert_eq!(trace.l, vec![0.0]);
        assert_eq!(trace.corrections_done, 0);
        assert_eq!(state.d2(), 0.0);
    }

    #[test]
    fn fixed_point_without_threshold_exhausts_trials() {
        let cfg = GilbertConfig {
            d2_halt_threshold: 0.0,
            max_trials: 500,
            ..Default::default()
        };
        let (_, trace) = run_gilbert(&mm(), &cfg, None).unwrap();
        assert_eq!(trace.halt_reason, HaltReason::MaxTrials);
        assert_eq!(trace.trials_used, 500);
        assert_eq!(trace.corrections_done, 0);
    }

    #[test]
    fn trace_is_monotone_and_decomposition_consistent() {
        let rho0 = DensityMatrix::pure(&psi00(), (3, 3)).unwrap();
        let (state, trace) = run_gilbert(&rho0, &quick(600, 6), None).unwrap();
        assert_eq!(trace.corrections_done, 600);
        assert_eq!(trace.l.len(), 12);
        assert!(trace.l.windows(2).all(|w| w[1] <= w[0]));
        assert!(state.remix().approx_eq(state.rho1.mat(), 1e-9));
        let total: f64 = state.decomposition.iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(state.decomposition.iter().all(|(_, w)| *w >= PRUNE_WEIGHT));
        // Squared distance from |psi00> to the separable set is 1/2.
        assert!(trace.last().unwrap() > 0.5);
    }

    #[test]
    fn run_is_deterministic() {
        let rho0 = family_a(0.4, 0.0, 0.0).density().unwrap();
        let (_, t1) = run_gilbert(&rho0, &quick(200, 9), None).unwrap();
        let (_, t2) = run_gilbert(&rho0, &quick(200, 9), None).unwrap();
        assert_eq!(t1, t2);
        let (_, t3) = run_gilbert(&rho0, &quick(200, 10), None).unwrap();
        assert_ne!(t1.l, t3.l);
    }

    #[test]
    fn converges_without_lu_optimization() {
        let rho0 = family_a(0.1, 0.0, 0.0).density().unwrap();
        let cfg = GilbertConfig {
            max_corrections: 3000,
            lu_opt_enabled: false,
            seed: RngSeed(11),
            ..Default::default()
        };
        let (_, trace) = run_gilbert(&rho0, &cfg, None).unwrap();
        assert!(trace.l[0] > trace.last().unwrap());
        assert!(trace.last().unwrap() < 1e-4, "{:?}", trace.last());
    }

    #[test]
    fn custom_initial_state_and_validation() {
        let rho0 = family_a(0.2, 0.0, 0.0).density().unwrap();
        let start = vec![(
            ProductState::new(PureState::basis(3, 0), PureState::basis(3, 1)),
            1.0,
        )];
        let (state, trace) = run_gilbert(&rho0, &quick(100, 1), Some(start)).unwrap();
        assert!(trace.corrections_done > 0);
        assert!(state.remix().approx_eq(state.rho1.mat(), 1e-9));

        let bad = vec![(
            ProductState::new(PureState::basis(3, 0), PureState::basis(3, 1)),
            0.5,
        )];
        assert!(run_gilbert(&rho0, &quick(10, 1), Some(bad)).is_err());
    }

    #[test]
    fn correction_indices_and_prefix() {
        let t = CorrectionTrace {
            l: vec![5.0, 4.0, 3.0, 2.5],
            log_cadence: 50,
            corrections_done: 170,
            trials_used: 1000,
            halt_reason: HaltReason::Threshold,
        };
        assert_eq!(t.correction_indices(), vec![50.0, 100.0, 150.0, 170.0]);
        let p = t.prefix(120);
        assert_eq!(p.l, vec![5.0, 4.0]);
        assert_eq!(p.correction_indices(), vec![50.0, 100.0]);
        let s = CorrectionTrace::from_squared_distances(vec![1.0, 0.5], 1);
        assert_eq!(s.correction_indices(), vec![1.0, 2.0]);
    }
}
