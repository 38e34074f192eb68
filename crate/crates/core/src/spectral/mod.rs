//! Eigen-analysis of (generally nonsymmetric) LLE matrices.

pub mod arnoldi;

use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sparse::CsrMatrix;
use arnoldi::{iram, order, ArnoldiParams, Operator, Which};

/// Matrices up to this size are solved densely.
pub const DENSE_LIMIT: usize = 2000;

/// Residual bound every returned eigenpair must satisfy.
pub const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ordering {
    ByRealDesc,
    ByModulusDesc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dense,
    Arnoldi,
    ShiftInvertArnoldi,
}

/// Eigenvalues (and optionally unit eigenvectors) in the requested order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
    /// One vector per eigenvalue, unit 2-norm, largest entry real positive.
    pub eigenvectors: Option<Vec<Vec<Complex64>>>,
    pub ordering: Ordering,
    pub method: Method,
    /// `||W v - lambda v|| / ||v||` per pair; empty when vectors were not computed.
    pub residuals: Vec<f64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn max_modulus(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct EigOptions {
    /// Number of eigenpairs; `None` means all (dense only).
    pub k: Option<usize>,
    pub ordering: Ordering,
    pub vectors: bool,
    pub dense_limit: usize,
    /// Krylov basis size; defaults to `max(2k + 1, k + 20)`.
    pub ncv: Option<usize>,
    pub max_restarts: usize,
    /// Shift for shift-invert. Defaults to `1 + 1e-3` for `ByRealDesc`
    /// (LLE spectra accumulate just left of 1) and none for `ByModulusDesc`.
    pub shift: Option<f64>,
}

impl Default for EigOptions {
    fn default() -> Self {
        Self {
            k: None,
            ordering: Ordering::ByRealDesc,
            vectors: true,
            dense_limit: DENSE_LIMIT,
            ncv: None,
            max_restarts: 500,
            shift: None,
        }
    }
}

impl EigOptions {
    pub fn top(k: usize, ordering: Ordering) -> Self {
        Self {
            k: Some(k),
            ordering,
            ..Self::default()
        }
    }
}

fn ordering_key(o: Ordering) -> Which {
    match o {
        Ordering::ByRealDesc => Which::LargestReal,
        Ordering::ByModulusDesc => Which::LargestModulus,
    }
}

/// Unit norm, then rotate so the largest-modulus entry is real positive.
pub fn fix_phase(v: &mut [Complex64]) {
    let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if nrm == 0.0 {
        return;
    }
    let big = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .map(|(i, _)| v[i])
        .unwrap();
    let rot = big.conj() / (big.norm() * nrm);
    for z in v.iter_mut() {
        *z *= rot;
    }
    // Exact zero imaginary part for the pivot.
    if let Some(z) = v.iter_mut().max_by(|a, b| a.norm().total_cmp(&b.norm())) {
        z.im = 0.0;
    }
}

/// `||W v - lambda v|| / ||v||`.
pub fn residual(w: &CsrMatrix, lambda: Complex64, v: &[Complex64]) -> f64 {
    let re: Vec<f64> = v.iter().map(|z| z.re).collect();
    let im: Vec<f64> = v.iter().map(|z| z.im).collect();
    let mut wr = vec![0.0; v.len()];
    let mut wi = vec![0.0; v.len()];
    w.matvec_into(&re, &mut wr);
    w.matvec_into(&im, &mut wi);
    let mut num = 0.0;
    for i in 0..v.len() {
        let r = Complex64::new(wr[i], wi[i]) - lambda * v[i];
        num += r.norm_sqr();
    }
    let den = v.iter().map(|z| z.norm_sqr()).sum::<f64>();
    (num / den).sqrt()
}

/// Keeps the first `k` entries, extended by one if that splits a conjugate pair.
fn cut_index(vals: &[Complex64], k: usize) -> usize {
    if k == 0 || k >= vals.len() {
        return k.min(vals.len());
    }
    let z = vals[k - 1];
    if z.im != 0.0 && (vals[k] - z.conj()).norm() <= 1e-10 * z.norm().max(1.0) {
        k + 1
    } else {
        k
    }
}

/// Eigenvalues of `w` (dense path), ordered.
pub fn dense_eigenvalues(w: &CsrMatrix, ordering: Ordering) -> Result<Vec<Complex64>> {
    square(w)?;
    let mut vals = w
        .to_dense()
        .eigenvalues()
        .map_err(|e| Error::Linalg(format!("{e:?}")))?;
    vals.sort_by(order(ordering_key(ordering)));
    Ok(vals)
}

fn square(w: &CsrMatrix) -> Result<()> {
    if w.n_rows() != w.n_cols() {
        return Err(Error::DimensionMismatch {
            expected: w.n_rows(),
            got: w.n_cols(),
        });
    }
    if w.n_rows() == 0 {
        return Err(Error::EmptyInput("matrix"));
    }
    Ok(())
}

/// Eigenpairs of `w`: dense for `n <= dense_limit`, restarted Krylov otherwise.
pub fn eig(w: &CsrMatrix, opts: &EigOptions) -> Result<Spectrum> {
    square(w)?;
    let n = w.n_rows();
    if let Some(k) = opts.k {
        if k == 0 || k > n {
            return Err(invalid(format!("requested {k} eigenpairs of a {n} x {n} matrix")));
        }
    }
    if n <= opts.dense_limit {
        eig_dense(w, opts)
    } else {
        eig_krylov(w, opts)
    }
}

fn eig_dense(w: &CsrMatrix, opts: &EigOptions) -> Result<Spectrum> {
    let n = w.n_rows();
    let evd = w
        .to_dense()
        .eigen()
        .map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let mut idx: Vec<usize> = (0..n).collect();
    let vals: Vec<Complex64> = (0..n).map(|i| s[i]).collect();
    let cmp = order(ordering_key(opts.ordering));
    idx.sort_by(|&a, &b| cmp(&vals[a], &vals[b]));
    let ordered: Vec<Complex64> = idx.iter().map(|&i| vals[i]).collect();
    let keep = cut_index(&ordered, opts.k.unwrap_or(n));
    let mut vectors = Vec::with_capacity(keep);
    let mut residuals = Vec::with_capacity(keep);
    for (pos, &i) in idx[..keep].iter().enumerate() {
        let mut v: Vec<Complex64> = (0..n).map(|r| u[(r, i)]).collect();
        fix_phase(&mut v);
        let res = residual(w, vals[i], &v);
        if !(res <= RESIDUAL_TOL) {
            return Err(Error::Residual {
                index: pos,
                residual: res,
            });
        }
        residuals.push(res);
        vectors.push(v);
    }
    Ok(Spectrum {
        eigenvalues: ordered[..keep].to_vec(),
        eigenvectors: opts.vectors.then_some(vectors),
        ordering: opts.ordering,
        method: Method::Dense,
        residuals,
    })
}

impl Operator for CsrMatrix {
    fn dim(&self) -> usize {
        self.n_rows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec_into(x, y);
    }
}

/// `x -> (W - sigma I)^{-1} x` through a sparse LU factorization.
pub struct ShiftInvert {
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    n: usize,
}

impl ShiftInvert {
    pub fn new(w: &CsrMatrix, sigma: f64) -> Result<Self> {
        let n = w.n_rows();
        let mut trips: Vec<Triplet<usize, usize, f64>> = Vec::with_capacity(w.nnz() + n);
        let mut has_diag = vec![false; n];
        for (i, j, v) in w.triplets() {
            let v = if i == j {
                has_diag[i] = true;
                v - sigma
            } else {
                v
            };
            trips.push(Triplet::new(i, j, v));
        }
        for (i, d) in has_diag.iter().enumerate() {
            if !d {
                trips.push(Triplet::new(i, i, -sigma));
            }
        }
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips)
            .map_err(|e| Error::Linalg(format!("{e:?}")))?;
        let lu = a.sp_lu().map_err(|e| Error::Linalg(format!("{e:?}")))?;
        Ok(Self { lu, n })
    }
}

impl Operator for ShiftInvert {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        use faer::linalg::solvers::Solve;
        let mut rhs = Mat::<f64>::from_fn(self.n, 1, |i, _| x[i]);
        self.lu.solve_in_place(rhs.as_mut());
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = rhs[(i, 0)];
        }
    }
}

fn eig_krylov(w: &CsrMatrix, opts: &EigOptions) -> Result<Spectrum> {
    let n = w.n_rows();
    let k = opts
        .k
        .ok_or_else(|| invalid("the Krylov path needs an explicit eigenpair count"))?;
    let shift = opts.shift.or(match opts.ordering {
        Ordering::ByRealDesc => Some(1.0 + 1e-3),
        Ordering::ByModulusDesc => None,
    });
    let ncv = opts.ncv.unwrap_or((2 * k + 1).max(k + 20)).max(k + 2).min(n);
    let mut tol = 1e-12;
    let mut last_partial = None;
    for _attempt in 0..3 {
        let params = ArnoldiParams {
            k,
            ncv,
            tol,
            max_restarts: opts.max_restarts,
            seed: 0x5eed,
        };
        let (mut vals, vecs, converged, method) = match shift {
            Some(sigma) => {
                let op = ShiftInvert::new(w, sigma)?;
                let r = iram(&op, Which::LargestModulus, &params);
                let vals = r.values.iter().map(|t| sigma + 1.0 / t).collect::<Vec<_>>();
                (vals, r.vectors, r.converged, Method::ShiftInvertArnoldi)
            }
            None => {
                let r = iram(w, ordering_key(opts.ordering), &params);
                (r.values, r.vectors, r.converged, Method::Arnoldi)
            }
        };
        let mut pairs: Vec<(Complex64, Vec<Complex64>)> =
            vals.drain(..).zip(vecs).collect();
        let cmp = order(ordering_key(opts.ordering));
        pairs.sort_by(|a, b| cmp(&a.0, &b.0));
        let mut residuals = Vec::with_capacity(pairs.len());
        for (lambda, v) in pairs.iter_mut() {
            fix_phase(v);
            residuals.push(residual(w, *lambda, v));
        }
        let ok = converged && residuals.iter().all(|r| *r <= RESIDUAL_TOL);
        let (eigenvalues, vectors): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let spectrum = Spectrum {
            eigenvalues,
            eigenvectors: opts.vectors.then_some(vectors),
            ordering: opts.ordering,
            method,
            residuals,
        };
        if ok {
            return Ok(spectrum);
        }
        last_partial = Some(spectrum);
        tol *= 1e-2;
    }
    Err(Error::Convergence {
        message: format!("no {k} eigenpairs within residual {RESIDUAL_TOL:e} of the {n} x {n} matrix"),
        partial: Box::new(last_partial.expect("at least one attempt ran")),
    })
}

/// `((W + W^T) / 2, (W - W^T) / 2)` on the union sparsity pattern.
pub fn symmetric_split(w: &CsrMatrix) -> Result<(CsrMatrix, CsrMatrix)> {
    square(w)?;
    let n = w.n_rows();
    let mut plus: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut minus: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut entries: Vec<(usize, usize, f64, f64)> = Vec::with_capacity(2 * w.nnz());
    for (i, j, v) in w.triplets() {
        entries.push((i, j, v, 0.0));
        entries.push((j, i, 0.0, v));
    }
    entries.sort_by_key(|a| (a.0, a.1));
    let mut it = entries.into_iter().peekable();
    while let Some((i, j, mut a, mut b)) = it.next() {
        while let Some(&(i2, j2, a2, b2)) = it.peek() {
            if (i2, j2) != (i, j) {
                break;
            }
            a += a2;
            b += b2;
            it.next();
        }
        plus[i].push((j, 0.5 * (a + b)));
        minus[i].push((j, 0.5 * (a - b)));
    }
    Ok((CsrMatrix::from_rows(n, plus), CsrMatrix::from_rows(n, minus)))
}

/// Bound on imaginary parts of eigenvalues from the antisymmetric part.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ImagDiagnostics {
    /// `sqrt(||W^-||_1 ||W^-||_inf)`.
    pub bound: f64,
    /// `max |W_ij - W_ji|`.
    pub max_asym: f64,
    /// Largest distance from an eigenvalue of `W` to the spectrum of `W^+`.
    pub max_distance: f64,
    pub max_imag: f64,
    pub bauer_fike_ok: bool,
}

pub fn imaginary_diagnostics(w: &CsrMatrix) -> Result<ImagDiagnostics> {
    let (plus, minus) = symmetric_split(w)?;
    let n = w.n_rows();
    let mut col_sums = vec![0.0; n];
    let mut row_max = 0.0f64;
    let mut max_asym = 0.0f64;
    for i in 0..n {
        let (c, v) = minus.row(i);
        let mut s = 0.0;
        for (&j, &x) in c.iter().zip(v) {
            s += x.abs();
            col_sums[j] += x.abs();
            max_asym = max_asym.max(2.0 * x.abs());
        }
        row_max = row_max.max(s);
    }
    let col_max = col_sums.iter().copied().fold(0.0, f64::max);
    let bound = (col_max * row_max).sqrt();
    let vals = dense_eigenvalues(w, Ordering::ByRealDesc)?;
    let sym = plus
        .to_dense()
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let max_distance = vals
        .iter()
        .map(|z| {
            sym.iter()
                .map(|&m| (z - m).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    let max_imag = vals.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    Ok(ImagDiagnostics {
        bound,
        max_asym,
        max_distance,
        max_imag,
        bauer_fike_ok: max_distance <= bound * (1.0 + 1e-10) + 1e-12,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RadiusReport {
    /// Certified lower bound on the spectral radius.
    pub rho_lower: f64,
    pub has_eig_one: bool,
    /// `||W 1 - 1||_inf`.
    pub row_sum_defect: f64,
}

impl RadiusReport {
    pub fn ok(&self) -> bool {
        self.has_eig_one && self.rho_lower >= 1.0 - 1e-10
    }
}

/// `(1, ones)` is an eigenpair up to the row-sum defect; for small matrices
/// the dense spectrum sharpens the bound.
pub fn spectral_radius_report(w: &CsrMatrix) -> Result<RadiusReport> {
    square(w)?;
    let defect = w
        .row_sums()
        .iter()
        .map(|s| (s - 1.0).abs())
        .fold(0.0, f64::max);
    let has_eig_one = defect <= 1e-12;
    let mut rho_lower = if has_eig_one { 1.0 - defect } else { 0.0 };
    if w.n_rows() <= DENSE_LIMIT {
        let vals = dense_eigenvalues(w, Ordering::ByModulusDesc)?;
        rho_lower = rho_lower.max(vals[0].norm());
    }
    Ok(RadiusReport {
        rho_lower,
        has_eig_one,
        row_sum_defect: defect,
    })
}

/// Groups eigenvalues that agree to `rel_tol * max(1, |lambda|)`, returning
/// the mean of each group and its size, ordered by descending real part.
pub fn cluster_eigenvalues(vals: &[Complex64], rel_tol: f64) -> Vec<(Complex64, usize)> {
    let mut sorted = vals.to_vec();
    sorted.sort_by(order(Which::LargestReal));
    let mut out: Vec<(Complex64, usize, Complex64)> = Vec::new();
    for z in sorted {
        match out.last_mut() {
            Some((sum, cnt, anchor)) if (z - *anchor).norm() <= rel_tol * anchor.norm().max(1.0) => {
                *sum += z;
                *cnt += 1;
            }
            _ => out.push((z, 1, z)),
        }
    }
    out.into_iter()
        .map(|(s, c, _)| (s / c as f64, c))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> CsrMatrix {
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i, 0.5 + 0.3 * (i as f64 / n as f64))];
                if i > 0 {
                    r.insert(0, (i - 1, 0.2));
                }
                if i + 1 < n {
                    r.push((i + 1, 0.3));
                }
                r
            })
            .collect();
        CsrMatrix::from_rows(n, rows)
    }

    #[test]
    fn identity_spectrum() {
        let s = eig(&CsrMatrix::identity(5), &EigOptions::default()).unwrap();
        assert!(s.eigenvalues.iter().all(|z| (z - 1.0).norm() < 1e-14));
        assert_eq!(s.method, Method::Dense);
    }

    #[test]
    fn split_examples() {
        let w = CsrMatrix::from_rows(2, vec![vec![(1, 1.0)], vec![]]);
        let (p, m) = symmetric_split(&w).unwrap();
        assert_eq!(m.get(0, 1), 0.5);
        assert_eq!(m.get(1, 0), -0.5);
        assert_eq!(p.get(0, 1), 0.5);
        let d = imaginary_diagnostics(&CsrMatrix::identity(3)).unwrap();
        assert_eq!(d.bound, 0.0);
        assert!(d.bauer_fike_ok);
    }

    #[test]
    fn phase_convention() {
        let mut v = vec![Complex64::new(0.0, 2.0), Complex64::new(1.0, 0.0)];
        fix_phase(&mut v);
        assert_eq!(v[0].im, 0.0);
        assert!(v[0].re > 0.0);
        let nrm: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        assert!((nrm - 1.0).abs() < 1e-15);
    }

    #[test]
    fn clustering_counts() {
        let vals = [1.0, 0.5, 0.5 + 1e-12, -1.0].map(|x| Complex64::new(x, 0.0));
        let c = cluster_eigenvalues(&vals, 1e-7);
        assert_eq!(c.iter().map(|x| x.1).collect::<Vec<_>>(), vec![1, 2, 1]);
    }

    #[test]
    fn krylov_matches_dense() {
        let w = tridiag(300);
        let dense = eig(&w, &EigOptions::top(6, Ordering::ByModulusDesc)).unwrap();
        for shift in [None, Some(1.4)] {
            let mut o = EigOptions::top(6, Ordering::ByModulusDesc);
            o.dense_limit = 100;
            o.shift = shift;
            if shift.is_some() {
                o.ordering = Ordering::ByRealDesc;
            }
            let kr = eig(&w, &o).unwrap();
            assert_ne!(kr.method, Method::Dense);
            for (a, b) in kr.eigenvalues.iter().zip(&dense.eigenvalues) {
                assert!((a - b).norm() < 1e-9, "{a} vs {b}");
            }
            assert!(kr.residuals.iter().all(|r| *r <= RESIDUAL_TOL));
        }
    }

    #[test]
    fn krylov_handles_complex_pairs() {
        // Rotation blocks with distinct moduli.
        let n = 200;
        let rows = (0..n)
            .map(|i| {
                let b = i / 2;
                let r = 1.0 - b as f64 / n as f64;
                let (c, s) = (0.3 * r, 0.8 * r);
                if i % 2 == 0 {
                    vec![(i, c), (i + 1, -s)]
                } else {
                    vec![(i - 1, s), (i, c)]
                }
            })
            .collect();
        let w = CsrMatrix::from_rows(n, rows);
        let mut o = EigOptions::top(4, Ordering::ByModulusDesc);
        o.dense_limit = 10;
        let s = eig(&w, &o).unwrap();
        let z = s.eigenvalues[0];
        assert!((z.norm() - (0.09f64 + 0.64).sqrt()).abs() < 1e-10);
        assert!((s.eigenvalues[1] - z.conj()).norm() < 1e-10);
    }
}
