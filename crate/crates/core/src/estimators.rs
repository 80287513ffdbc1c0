//! Entanglement indicators computed from a Gilbert run.
//!
//! * `d_last`: square root of the last logged squared distance. An upper
//!   bound on the distance to the separable set.
//! * `d_est`: asymptote of the decay of the trace, found by maximizing the
//!   linear correlation between correction numbers and `1 / (l - a)`.
//! * `d_wit`: a certified lower bound from the witness
//!   `W = rho0 - rho1 - m* I`, where `m*` is the maximum of `rho0 - rho1`
//!   over product states.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gilbert::{CorrectionTrace, GilbertState};
use crate::qmat::{
    conditioned_on_a, conditioned_on_b, haar_pure, hs_inner_unchecked, kron_vec, top_eigenpair,
    CMat, DensityMatrix, ProductState, PureState, RngStream, C64,
};

/// Number of grid points in the coarse shift scan.
pub const SCAN_POINTS: usize = 2000;
/// Gap kept between the largest scanned shift and `min l`.
pub const SCAN_EPS: f64 = 1e-12;
/// Final bracket width of the golden-section refinement.
pub const REFINE_WIDTH: f64 = 1e-10;
/// Retained entries required by [`d_est`].
pub const MIN_RETAINED: usize = 6;

pub const DEFAULT_RESTARTS: usize = 50;
pub const DEFAULT_SEESAW_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_SWEEPS: usize = 500;

pub fn d_last(trace: &CorrectionTrace) -> Result<f64> {
    match trace.l.last() {
        Some(&x) if x >= 0.0 => Ok(x.sqrt()),
        Some(&x) => Err(Error::Numerical(format!("negative squared distance {x}"))),
        None => Err(Error::Degenerate("empty correction trace".into())),
    }
}

/// Pearson correlation coefficient of two equally long lists.
pub fn regression_coeff(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "regression on lists of length {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Degenerate(
            "regression needs at least two points".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if !(sxx > 0.0 && syy > 0.0) || !(sxx * syy).is_finite() {
        return Err(Error::Degenerate(
            "regression on a list with zero or non-finite variance".into(),
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Outcome of the decay fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayEstimate {
    /// `sqrt(a_star)`.
    pub d_est: f64,
    /// Correlation at `a_star`.
    pub r: f64,
    /// Fitted squared-distance asymptote.
    pub a_star: f64,
}

/// Decay estimate of the distance from a correction trace.
///
/// The first `floor(n / 3)` entries are discarded. Over the rest, the shift
/// `a` is scanned on `[0, min l - SCAN_EPS]` and the correlation between the
/// correction numbers and `1 / (l - a)` is maximized. `a_star = 0` means the
/// decay gives no sign of entanglement.
pub fn d_est(trace: &CorrectionTrace) -> Result<DecayEstimate> {
    let n = trace.l.len();
    let skip = n / 3;
    if n - skip < MIN_RETAINED {
        return Err(Error::Degenerate(format!(
            "trace has {n} entries; at least {MIN_RETAINED} must remain after dropping the first third"
        )));
    }
    for (k, w) in trace.l.windows(2).enumerate() {
        if w[1] > w[0] {
            return Err(Error::Numerical(format!(
                "trace increases at entry {}: {} -> {}",
                k + 1,
                w[0],
                w[1]
            )));
        }
    }
    if trace.l.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::Numerical(
            "trace holds a negative or non-finite entry".into(),
        ));
    }
    let c = &trace.correction_indices()[skip..];
    let l = &trace.l[skip..];
    let min_l = l.iter().copied().fold(f64::INFINITY, f64::min);

    let mut y = vec![0.0; l.len()];
    let mut r_at = |a: f64| -> Result<f64> {
        for (yi, li) in y.iter_mut().zip(l) {
            *yi = 1.0 / (li - a);
        }
        regression_coeff(c, &y)
    };

    let r0 = r_at(0.0)?;
    let hi = min_l - SCAN_EPS;
    if !(hi > 0.0) {
        return Ok(DecayEstimate {
            d_est: 0.0,
            r: r0,
            a_star: 0.0,
        });
    }

    let step = hi / (SCAN_POINTS - 1) as f64;
    let mut best = (0usize, r0);
    for k in 1..SCAN_POINTS {
        // A non-finite correlation this close to min l only marks the edge.
        if let Ok(r) = r_at(k as f64 * step) {
            if r > best.1 {
                best = (k, r);
            }
        }
    }

    let lo_b = best.0.saturating_sub(1) as f64 * step;
    let hi_b = ((best.0 + 1).min(SCAN_POINTS - 1)) as f64 * step;
    let (mut a_star, mut r_star) = golden_max(&mut r_at, lo_b, hi_b, best.0 as f64 * step, best.1);

    if a_star < REFINE_WIDTH || r0 >= r_star {
        a_star = 0.0;
        r_star = r0;
    }
    Ok(DecayEstimate {
        d_est: a_star.sqrt(),
        r: r_star,
        a_star,
    })
}

/// Golden-section search for a maximum on `[lo, hi]`; never returns worse than
/// the seed point `(x0, f0)`.
fn golden_max(
    f: &mut impl FnMut(f64) -> Result<f64>,
    mut lo: f64,
    mut hi: f64,
    x0: f64,
    f0: f64,
) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut eval = |x: f64| f(x).unwrap_or(f64::NEG_INFINITY);
    let mut best = (x0, f0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = eval(x1);
    let mut f2 = eval(x2);
    while hi - lo > REFINE_WIDTH {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = eval(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = eval(x2);
        }
        for (x, fx) in [(x1, f1), (x2, f2)] {
            if fx > best.1 {
                best = (x, fx);
            }
        }
    }
    best
}

/// Result of maximizing `<phi_A phi_B| H |phi_A phi_B>` over product states.
#[derive(Debug, Clone)]
pub struct ProductMax {
    pub m_star: f64,
    pub argmax: ProductState,
    /// Restarts whose final value lies within `10 * tol` of `m_star`.
    pub restarts_agreeing: usize,
}

/// Seesaw maximization of a Hermitian operator over product states.
///
/// Each restart starts from a Haar-random product state and alternately
/// replaces one factor by the top eigenvector of `H` conditioned on the other
/// factor, until a sweep gains less than `tol` or `max_sweeps` is reached.
/// The best restart wins; ties go to the lowest restart index.
pub fn product_max(
    h: &CMat,
    dims: (usize, usize),
    restarts: usize,
    tol: f64,
    rng: &mut RngStream,
) -> Result<ProductMax> {
    product_max_with(h, dims, restarts, tol, DEFAULT_MAX_SWEEPS, rng)
}

pub fn product_max_with(
    h: &CMat,
    dims: (usize, usize),
    restarts: usize,
    tol: f64,
    max_sweeps: usize,
    rng: &mut RngStream,
) -> Result<ProductMax> {
    if h.dim() != dims.0 * dims.1 {
        return Err(Error::DimensionMismatch(format!(
            "operator of dimension {} vs dims {:?}",
            h.dim(),
            dims
        )));
    }
    if restarts < 1 {
        return Err(Error::InvalidConfig(
            "product_max needs at least one restart".into(),
        ));
    }
    let mut finals = Vec::with_capacity(restarts);
    let mut best: Option<(f64, Vec<C64>, Vec<C64>)> = None;
    for _ in 0..restarts {
        let (value, a, b) = seesaw(h, dims, tol, max_sweeps, rng)?;
        finals.push(value);
        if best.as_ref().is_none_or(|(v, _, _)| value > *v) {
            best = Some((value, a, b));
        }
    }
    let (m_star, a, b) = best.expect("at least one restart");
    let restarts_agreeing = finals.iter().filter(|&&v| v >= m_star - 10.0 * tol).count();
    Ok(ProductMax {
        m_star,
        argmax: ProductState::new(PureState::normalized(a)?, PureState::normalized(b)?),
        restarts_agreeing,
    })
}

fn seesaw(
    h: &CMat,
    dims: (usize, usize),
    tol: f64,
    max_sweeps: usize,
    rng: &mut RngStream,
) -> Result<(f64, Vec<C64>, Vec<C64>)> {
    let mut a = haar_pure(dims.0, rng).into_amps();
    let mut b = haar_pure(dims.1, rng).into_amps();
    let mut value = h.expectation(&kron_vec(&a, &b)).re;
    let mut best = (value, a.clone(), b.clone());
    for _ in 0..max_sweeps {
        a = top_eigenpair(&conditioned_on_b(h, dims, &b))?.1;
        let (next, vb) = top_eigenpair(&conditioned_on_a(h, dims, &a))?;
        b = vb;
        if next > best.0 {
            best = (next, a.clone(), b.clone());
        }
        let gain = next - value;
        value = next;
        if gain < tol {
            break;
        }
    }
    Ok(best)
}

/// Witness built from a finished run.
#[derive(Debug, Clone)]
pub struct WitnessReport {
    /// `W = rho0 - rho1 - m* I`.
    pub witness: CMat,
    pub offset: f64,
    pub value_on_rho0: f64,
    /// `sqrt(Tr (rho0 - rho1)^2)`.
    pub norm: f64,
    pub restarts_agreeing: usize,
}

/// Witness lower bound `max(0, Tr(W rho0) / ||rho0 - rho1||)`.
///
/// Returns `(0, None)` when `rho1 = rho0`.
pub fn d_wit(
    rho0: &DensityMatrix,
    state: &GilbertState,
    restarts: usize,
    rng: &mut RngStream,
) -> Result<(f64, Option<WitnessReport>)> {
    rho0.check_compatible(&state.rho1)?;
    let delta = rho0.mat() - state.rho1.mat();
    let norm = delta.frobenius_sq().sqrt();
    if norm == 0.0 {
        return Ok((0.0, None));
    }
    let pm = product_max(&delta, rho0.dims(), restarts, DEFAULT_SEESAW_TOL, rng)?;
    let value = hs_inner_unchecked(&delta, rho0.mat()) - pm.m_star;
    let mut witness = delta;
    for i in 0..witness.dim() {
        witness[(i, i)] -= pm.m_star;
    }
    let report = WitnessReport {
        witness,
        offset: pm.m_star,
        value_on_rho0: value,
        norm,
        restarts_agreeing: pm.restarts_agreeing,
    };
    Ok(((value / norm).max(0.0), Some(report)))
}

/// The three indicators of one run.
///
/// `d_est`, `r` and `a_star` are `None` when the trace is too short for the
/// decay fit; `m_star` is `None` when the run ended exactly on `rho0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateTriple {
    pub d_last: f64,
    pub d_est: Option<f64>,
    pub d_wit: f64,
    pub r: Option<f64>,
    pub a_star: Option<f64>,
    pub m_star: Option<f64>,
    pub restarts_agreeing: usize,
}

impl EstimateTriple {
    pub fn dest_positive(&self) -> bool {
        self.d_est.is_some_and(|d| d > 0.0)
    }

    pub fn dwit_positive(&self) -> bool {
        self.d_wit > 0.0
    }
}

/// All three indicators for a finished run.
pub fn estimate(
    state: &GilbertState,
    trace: &CorrectionTrace,
    restarts: usize,
    rng: &mut RngStream,
) -> Result<EstimateTriple> {
    let d_last = d_last(trace)?;
    let decay = match d_est(trace) {
        Ok(d) => Some(d),
        Err(Error::Degenerate(_)) => None,
        Err(e) => return Err(e),
    };
    let (d_wit, report) = d_wit(&state.rho0, state, restarts, rng)?;
    Ok(EstimateTriple {
        d_last,
        d_est: decay.map(|d| d.d_est),
        d_wit,
        r: decay.map(|d| d.r),
        a_star: decay.map(|d| d.a_star),
        m_star: report.as_ref().map(|r| r.offset),
        restarts_agreeing: report.map_or(0, |r| r.restarts_agreeing),
    })
}
