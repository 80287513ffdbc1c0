//! Cyclic Jacobi eigensolver for small dense Hermitian matrices.
//!
//! Each rotation first removes the phase of the pivot `a_pq` and then applies
//! the classical real Jacobi rotation, so the iteration is deterministic and
//! converges quadratically once the off-diagonal mass is small.

use super::cmat::{CMat, C64, ZERO};
use crate::error::{Error, Result};

/// Inputs with a larger Hermiticity defect are rejected.
pub const HERMITIAN_TOL: f64 = 1e-8;

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition `M = V diag(values) V^dagger`.
#[derive(Debug, Clone)]
pub struct Eigh {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: CMat,
}

impl Eigh {
    pub fn vector(&self, k: usize) -> Vec<C64> {
        let n = self.vectors.dim();
        (0..n).map(|i| self.vectors[(i, k)]).collect()
    }
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn eig_hermitian(m: &CMat) -> Result<Vec<f64>> {
    Ok(eigh(m)?.values)
}

/// Full eigen-decomposition of a Hermitian matrix.
pub fn eigh(m: &CMat) -> Result<Eigh> {
    let defect = m.hermiticity_defect();
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian(defect));
    }
    let n = m.dim();
    // Symmetrize so the rotations act on an exactly Hermitian matrix.
    let mut a = CMat::from_fn(n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)].conj()));
    let mut v = CMat::identity(n);

    let scale = a.frobenius_sq().sqrt().max(f64::MIN_POSITIVE);
    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum();
        if off.sqrt() <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    if !converged {
        return Err(Error::Numerical(format!(
            "Jacobi eigensolver did not converge in {MAX_SWEEPS} sweeps"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = CMat::from_fn(n, |r, c| v[(r, order[c])]);
    Ok(Eigh { values, vectors })
}

fn rotate(a: &mut CMat, v: &mut CMat, p: usize, q: usize) {
    let apq = a[(p, q)];
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    let n = a.dim();
    let phase = apq / mag;
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let tau = (aqq - app) / (2.0 * mag);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    // J = D R with D = diag(.., 1_p, .., conj(phase)_q, ..) and the real
    // rotation R = [[c, s], [-s, c]] on (p, q).
    let jpp = C64::new(c, 0.0);
    let jpq = C64::new(s, 0.0);
    let jqp = -phase.conj() * s;
    let jqq = phase.conj() * c;

    // A <- A J
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * jpp + akq * jqp;
        a[(k, q)] = akp * jpq + akq * jqq;
    }
    // A <- J^dagger A
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = jpp.conj() * apk + jqp.conj() * aqk;
        a[(q, k)] = jpq.conj() * apk + jqq.conj() * aqk;
    }
    a[(p, q)] = ZERO;
    a[(q, p)] = ZERO;
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);

    // V <- V J
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * jpp + vkq * jqp;
        v[(k, q)] = vkp * jpq + vkq * jqq;
    }
}

/// Largest eigenvalue and a unit eigenvector for it.
pub fn top_eigenpair(m: &CMat) -> Result<(f64, Vec<C64>)> {
    let e = eigh(m)?;
    let k = e.values.len() - 1;
    Ok((e.values[k], e.vector(k)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::cmat::ONE;
    use crate::qmat::RngSeed;
    use crate::qmat::RngStream;

    fn unit(n: usize, k: usize) -> Vec<C64> {
        let mut v = vec![ZERO; n];
        v[k] = ONE;
        v
    }

    fn random_hermitian(n: usize, rng: &mut RngStream) -> CMat {
        let g = CMat::from_fn(n, |_, _| C64::new(rng.normal(), rng.normal()));
        &g + &g.dagger()
    }

    fn residual(m: &CMat, e: &Eigh) -> f64 {
        (0..m.dim())
            .map(|k| {
                let v = e.vector(k);
                let mv = m.apply(&v).unwrap();
                mv.iter()
                    .zip(&v)
                    .map(|(a, b)| (a - b * e.values[k]).norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn diagonal_sorted() {
        let m = CMat::from_real_diag(&[3.0, 1.0, 2.0]);
        assert_eq!(eig_hermitian(&m).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn rank_one_projector() {
        let mut v = unit(9, 0);
        v[4] = ONE;
        v[8] = ONE;
        for z in v.iter_mut() {
            *z /= 3f64.sqrt();
        }
        let vals = eig_hermitian(&CMat::outer(&v)).unwrap();
        for x in &vals[..8] {
            assert!(x.abs() < 1e-14);
        }
        assert!((vals[8] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn residuals_on_random_hermitian() {
        let mut rng = RngStream::new(RngSeed(3));
        for n in [1, 2, 3, 4, 6, 9] {
            for _ in 0..20 {
                let m = random_hermitian(n, &mut rng);
                let e = eigh(&m).unwrap();
                assert!(residual(&m, &e) <= 1e-9, "n={n}");
                assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
                let trace: f64 = e.values.iter().sum();
                assert!((trace - m.trace().re).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn degenerate_spectrum() {
        let m = CMat::identity(9).scale(0.25);
        let e = eigh(&m).unwrap();
        assert!(e.values.iter().all(|&x| (x - 0.25).abs() < 1e-15));
        assert!(residual(&m, &e) < 1e-14);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = CMat::identity(3);
        m[(0, 2)] = C64::new(1.0, 0.0);
        assert!(matches!(eig_hermitian(&m), Err(Error::NotHermitian(_))));
    }
}
