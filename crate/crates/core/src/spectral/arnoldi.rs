//! Implicitly restarted Arnoldi iteration with exact shifts.

use faer::Mat;
use num_complex::Complex64;

use crate::rng::Stream;

/// A real linear map applied to vectors.
pub trait Operator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    LargestReal,
    LargestModulus,
}

pub(crate) fn order(which: Which) -> impl Fn(&Complex64, &Complex64) -> std::cmp::Ordering {
    move |a, b| {
        let key = |z: &Complex64| match which {
            Which::LargestReal => z.re,
            Which::LargestModulus => z.norm(),
        };
        key(b)
            .total_cmp(&key(a))
            .then(b.re.total_cmp(&a.re))
            .then(b.im.total_cmp(&a.im))
    }
}

pub struct ArnoldiResult {
    pub values: Vec<Complex64>,
    pub vectors: Vec<Vec<Complex64>>,
    pub converged: bool,
    pub restarts: usize,
}

pub struct ArnoldiParams {
    pub k: usize,
    pub ncv: usize,
    pub tol: f64,
    pub max_restarts: usize,
    pub seed: u64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Factorization {
    /// Orthonormal basis, `m + 1` columns once complete.
    v: Vec<Vec<f64>>,
    /// `(m + 1) x m` upper Hessenberg matrix.
    h: Mat<f64>,
    rng: Stream,
}

impl Factorization {
    /// Orthogonalizes `w` against the basis twice (classical Gram-Schmidt
    /// with one reorthogonalization) and returns the coefficients.
    fn orthogonalize(&self, w: &mut [f64], upto: usize) -> Vec<f64> {
        let mut h = vec![0.0; upto];
        for _ in 0..2 {
            for (i, vi) in self.v[..upto].iter().enumerate() {
                let c = dot(vi, w);
                h[i] += c;
                for (wj, vj) in w.iter_mut().zip(vi) {
                    *wj -= c * vj;
                }
            }
        }
        h
    }

    fn random_unit_orthogonal(&mut self, n: usize, upto: usize) -> Vec<f64> {
        loop {
            let mut w: Vec<f64> = (0..n).map(|_| self.rng.uniform_in(-1.0, 1.0)).collect();
            self.orthogonalize(&mut w, upto);
            let b = norm(&w);
            if b > 1e-8 {
                w.iter_mut().for_each(|x| *x /= b);
                return w;
            }
        }
    }

    /// Extends columns `j0..m` of the factorization.
    fn extend<O: Operator + ?Sized>(&mut self, op: &O, j0: usize, m: usize) {
        let n = op.dim();
        let mut w = vec![0.0; n];
        for j in j0..m {
            op.apply(&self.v[j], &mut w);
            let wnorm = norm(&w);
            let h = self.orthogonalize(&mut w, j + 1);
            for (i, hi) in h.iter().enumerate() {
                self.h[(i, j)] = *hi;
            }
            let beta = norm(&w);
            self.v.truncate(j + 1);
            if beta <= 1e-12 * wnorm.max(f64::MIN_POSITIVE) {
                // Invariant subspace: continue with a fresh direction.
                self.h[(j + 1, j)] = 0.0;
                let fresh = self.random_unit_orthogonal(n, j + 1);
                self.v.push(fresh);
            } else {
                self.h[(j + 1, j)] = beta;
                self.v.push(w.iter().map(|x| x / beta).collect());
            }
        }
    }
}

/// Computes the `k` wanted eigenpairs of `op` by Ritz values of a restarted
/// Krylov basis of size `ncv`.
pub fn iram<O: Operator + ?Sized>(op: &O, which: Which, params: &ArnoldiParams) -> ArnoldiResult {
    let n = op.dim();
    let m = params.ncv.min(n).max(params.k.min(n));
    let mut fac = Factorization {
        v: Vec::with_capacity(m + 1),
        h: Mat::zeros(m + 1, m),
        rng: Stream::new(params.seed),
    };
    let start = fac.random_unit_orthogonal(n, 0);
    fac.v.push(start);
    fac.extend(op, 0, m);

    let mut restarts = 0;
    loop {
        let hm = Mat::<f64>::from_fn(m, m, |i, j| fac.h[(i, j)]);
        let beta = fac.h[(m, m - 1)];
        let (vals, vecs) = small_eigen(&hm);
        let mut idx: Vec<usize> = (0..m).collect();
        let cmp = order(which);
        idx.sort_by(|&a, &b| cmp(&vals[a], &vals[b]));
        let mut keep = params.k.min(m);
        if keep < m && vals[idx[keep - 1]].im != 0.0 {
            let z = vals[idx[keep - 1]];
            if (vals[idx[keep]] - z.conj()).norm() <= 1e-12 * z.norm().max(1.0) {
                keep += 1;
            }
        }
        let hnorm = hm.norm_l2().max(f64::MIN_POSITIVE);
        let converged = idx[..keep].iter().all(|&i| {
            let s = &vecs[i];
            let est = beta * s[m - 1].norm();
            est <= params.tol * vals[i].norm().max(f64::EPSILON.powf(2.0 / 3.0) * hnorm)
        });
        if converged || m == n || restarts >= params.max_restarts {
            let vectors = idx[..keep]
                .iter()
                .map(|&i| {
                    let s = &vecs[i];
                    let mut x = vec![Complex64::new(0.0, 0.0); n];
                    for (j, sj) in s.iter().enumerate() {
                        for (xr, vr) in x.iter_mut().zip(&fac.v[j]) {
                            *xr += sj * vr;
                        }
                    }
                    x
                })
                .collect();
            return ArnoldiResult {
                values: idx[..keep].iter().map(|&i| vals[i]).collect(),
                vectors,
                converged: converged || m == n,
                restarts,
            };
        }

        // Exact shifts: the unwanted Ritz values, conjugate pairs together.
        let mut h = hm.clone();
        let mut q = Mat::<f64>::identity(m, m);
        let mut shifts: Vec<Complex64> = idx[keep..].iter().map(|&i| vals[i]).collect();
        while let Some(mu) = shifts.pop() {
            let shifted = if mu.im.abs() > 0.0 {
                if let Some(pos) = shifts
                    .iter()
                    .position(|z| (z - mu.conj()).norm() <= 1e-10 * mu.norm().max(1.0))
                {
                    shifts.swap_remove(pos);
                }
                let h2 = &h * &h;
                Mat::from_fn(m, m, |i, j| {
                    h2[(i, j)] - 2.0 * mu.re * h[(i, j)]
                        + if i == j { mu.norm_sqr() } else { 0.0 }
                })
            } else {
                Mat::from_fn(m, m, |i, j| h[(i, j)] - if i == j { mu.re } else { 0.0 })
            };
            let qi = shifted.qr().compute_Q();
            h = qi.transpose() * &h * &qi;
            for j in 0..m {
                for i in (j + 2)..m {
                    h[(i, j)] = 0.0;
                }
            }
            q = &q * &qi;
        }

        let sigma = q[(m - 1, keep - 1)];
        let bk = h[(keep, keep - 1)];
        let new_v: Vec<Vec<f64>> = (0..=keep)
            .map(|c| {
                let mut col = vec![0.0; n];
                for j in 0..m {
                    let a = q[(j, c)];
                    if a != 0.0 {
                        for (x, v) in col.iter_mut().zip(&fac.v[j]) {
                            *x += a * v;
                        }
                    }
                }
                col
            })
            .collect();
        let f: Vec<f64> = new_v[keep]
            .iter()
            .zip(&fac.v[m])
            .map(|(vk, vm)| bk * vk + beta * sigma * vm)
            .collect();
        fac.v = new_v;
        fac.v.truncate(keep);
        fac.h = Mat::zeros(m + 1, m);
        for i in 0..keep {
            for j in 0..keep {
                fac.h[(i, j)] = h[(i, j)];
            }
        }
        let mut f = f;
        fac.orthogonalize(&mut f, keep);
        let fb = norm(&f);
        if fb <= 1e-14 {
            fac.h[(keep, keep - 1)] = 0.0;
            let fresh = fac.random_unit_orthogonal(n, keep);
            fac.v.push(fresh);
        } else {
            fac.h[(keep, keep - 1)] = fb;
            fac.v.push(f.iter().map(|x| x / fb).collect());
        }
        fac.extend(op, keep, m);
        restarts += 1;
    }
}

/// Eigenvalues and unit eigenvectors of a small dense matrix.
fn small_eigen(h: &Mat<f64>) -> (Vec<Complex64>, Vec<Vec<Complex64>>) {
    let m = h.nrows();
    match h.eigen() {
        Ok(e) => {
            let s = e.S().column_vector();
            let u = e.U();
            let vals: Vec<Complex64> = (0..m).map(|i| s[i]).collect();
            let vecs = (0..m)
                .map(|j| {
                    let col: Vec<Complex64> = (0..m).map(|i| u[(i, j)]).collect();
                    let nrm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                    col.iter().map(|z| z / nrm).collect()
                })
                .collect();
            (vals, vecs)
        }
        Err(_) => {
            let nan = Complex64::new(f64::NAN, f64::NAN);
            (vec![nan; m], vec![vec![nan; m]; m])
        }
    }
}
