//! Brute-force Hilbert-Schmidt distance from a two-qubit state to the
//! separable set: projected accelerated gradient over mixtures of a large
//! random pool of product states, followed by rounds of local perturbation
//! around the active products.

use gilbert_core::{CMat, RngStream, C64};

const DIM: usize = 4;
const VEC: usize = DIM * DIM;

/// Real coordinates of a Hermitian 4x4 matrix in an orthonormal basis, so
/// that Euclidean distance equals Hilbert-Schmidt distance.
fn herm_vec(m: &CMat) -> [f64; VEC] {
    let mut out = [0.0; VEC];
    let mut k = 0;
    let s = std::f64::consts::SQRT_2;
    for i in 0..DIM {
        out[k] = m[(i, i)].re;
        k += 1;
        for j in i + 1..DIM {
            out[k] = s * m[(i, j)].re;
            out[k + 1] = s * m[(i, j)].im;
            k += 2;
        }
    }
    out
}

fn product_vec(a: [C64; 2], b: [C64; 2]) -> [f64; VEC] {
    let v = [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]];
    herm_vec(&CMat::from_fn(DIM, |i, j| v[i] * v[j].conj()))
}

fn normalize(mut a: [C64; 2]) -> [C64; 2] {
    let n = (a[0].norm_sqr() + a[1].norm_sqr()).sqrt();
    a[0] /= n;
    a[1] /= n;
    a
}

fn gaussian_qubit(rng: &mut RngStream, scale: f64, around: [C64; 2]) -> [C64; 2] {
    normalize([
        around[0] + C64::new(rng.normal(), rng.normal()) * scale,
        around[1] + C64::new(rng.normal(), rng.normal()) * scale,
    ])
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &mut [f64]) {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

struct Pool {
    states: Vec<([C64; 2], [C64; 2])>,
    vecs: Vec<[f64; VEC]>,
}

impl Pool {
    fn push(&mut self, a: [C64; 2], b: [C64; 2]) {
        self.vecs.push(product_vec(a, b));
        self.states.push((a, b));
    }

    fn mix(&self, w: &[f64]) -> [f64; VEC] {
        let mut out = [0.0; VEC];
        for (v, &wk) in self.vecs.iter().zip(w) {
            if wk != 0.0 {
                for i in 0..VEC {
                    out[i] += wk * v[i];
                }
            }
        }
        out
    }

    fn lipschitz(&self) -> f64 {
        // Largest eigenvalue of V V^T by power iteration on the 16x16 Gram.
        let mut g = [[0.0; VEC]; VEC];
        for v in &self.vecs {
            for i in 0..VEC {
                for j in 0..VEC {
                    g[i][j] += v[i] * v[j];
                }
            }
        }
        let mut x = [1.0; VEC];
        let mut lambda = 0.0;
        for _ in 0..500 {
            let mut y = [0.0; VEC];
            for i in 0..VEC {
                for j in 0..VEC {
                    y[i] += g[i][j] * x[j];
                }
            }
            let n = y.iter().map(|t| t * t).sum::<f64>().sqrt();
            lambda = n;
            for i in 0..VEC {
                x[i] = y[i] / n;
            }
        }
        2.0 * lambda * 1.01
    }

    fn fista(&self, target: &[f64; VEC], w0: Vec<f64>, iters: usize) -> (Vec<f64>, f64) {
        let step = 1.0 / self.lipschitz();
        let mut w = w0;
        let mut y = w.clone();
        let mut t: f64 = 1.0;
        for _ in 0..iters {
            let m = self.mix(&y);
            let r: Vec<f64> = (0..VEC).map(|i| m[i] - target[i]).collect();
            let mut next: Vec<f64> = y
                .iter()
                .zip(&self.vecs)
                .map(|(yk, v)| yk - step * 2.0 * (0..VEC).map(|i| v[i] * r[i]).sum::<f64>())
                .collect();
            project_simplex(&mut next);
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            let beta = (t - 1.0) / t_next;
            y = next
                .iter()
                .zip(&w)
                .map(|(n, o)| n + beta * (n - o))
                .collect();
            w = next;
            t = t_next;
        }
        let m = self.mix(&w);
        let d2 = (0..VEC).map(|i| (m[i] - target[i]).powi(2)).sum();
        (w, d2)
    }
}

/// Approximate HS distance from `rho` (4x4, dims 2x2) to the separable set.
pub fn brute_force_distance(rho: &CMat, pool_size: usize, rng: &mut RngStream) -> f64 {
    let target = herm_vec(rho);
    let zero = [C64::new(0.0, 0.0); 2];
    let mut pool = Pool {
        states: Vec::new(),
        vecs: Vec::new(),
    };
    for _ in 0..pool_size {
        let a = gaussian_qubit(rng, 1.0, zero);
        let b = gaussian_qubit(rng, 1.0, zero);
        pool.push(a, b);
    }
    let n = pool.vecs.len();
    let (mut w, mut d2) = pool.fista(&target, vec![1.0 / n as f64; n], 3000);
    for scale in [0.1, 0.03, 0.01, 0.003] {
        let active: Vec<usize> = (0..w.len()).filter(|&k| w[k] > 1e-6).collect();
        for &k in &active {
            let (a, b) = pool.states[k];
            for _ in 0..20 {
                let pa = gaussian_qubit(rng, scale, a);
                let pb = gaussian_qubit(rng, scale, b);
                pool.push(pa, pb);
            }
        }
        w.resize(pool.vecs.len(), 0.0);
        let (nw, nd2) = pool.fista(&target, w, 3000);
        w = nw;
        d2 = d2.min(nd2);
    }
    d2.sqrt()
}
