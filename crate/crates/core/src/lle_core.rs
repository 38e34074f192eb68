//! Barycentric weights and the LLE matrix.

use faer::{Col, Mat, MatRef, Side};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::neighbors::{build_graph, local_data_matrix, NeighborGraph, NeighborScheme};
use crate::samplers::PointCloud;
use crate::sparse::CsrMatrix;

/// Unnormalized kernel values `y` and weights `w = y / sum(y)` of one point.
#[derive(Debug, Clone, PartialEq)]
pub struct BarycentricSolution {
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    pub y_sum: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolvePath {
    /// `N x N` solve when `N <= p`, eigen route otherwise.
    Auto,
    /// Cholesky solve of `(G^T G + c I) y = 1`.
    Direct,
    /// `y = (1 - G^T T) / c` with `T` from the eigendecomposition of `G G^T`.
    Eigen,
}

fn check_inputs(g: MatRef<'_, f64>, c: f64) -> Result<()> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(invalid(format!("regularizer must be positive, got {c}")));
    }
    if g.ncols() == 0 {
        return Err(Error::EmptyNeighborhood { index: usize::MAX });
    }
    Ok(())
}

/// `T = U I_{p,r} (Lambda + c I)^{-1} U^T G 1` where `G G^T = U Lambda U^T`
/// and `r` counts eigenvalues above `max(p, N) * eps_mach * lambda_max`.
pub fn augmented_vector_discrete(g: MatRef<'_, f64>, c: f64) -> Result<Vec<f64>> {
    check_inputs(g, c)?;
    let p = g.nrows();
    let n = g.ncols();
    let ggt = g * g.transpose();
    let evd = ggt
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let lam = evd.S().column_vector();
    let u = evd.U();
    let g1: Vec<f64> = (0..p).map(|i| (0..n).map(|j| g[(i, j)]).sum()).collect();
    let lmax = lam.iter().fold(0.0f64, |m, &x| m.max(x));
    let cutoff = p.max(n) as f64 * f64::EPSILON * lmax;
    let mut t = vec![0.0; p];
    for k in 0..p {
        if lam[k] <= cutoff {
            continue;
        }
        let proj: f64 = (0..p).map(|i| u[(i, k)] * g1[i]).sum();
        let scale = proj / (lam[k] + c);
        for i in 0..p {
            t[i] += u[(i, k)] * scale;
        }
    }
    Ok(t)
}

fn solve_direct(g: MatRef<'_, f64>, c: f64) -> Result<Vec<f64>> {
    let n = g.ncols();
    let mut a = g.transpose() * g;
    for i in 0..n {
        a[(i, i)] += c;
    }
    let llt = a
        .llt(Side::Lower)
        .map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let ones = Col::<f64>::from_fn(n, |_| 1.0);
    let y = faer::linalg::solvers::Solve::solve(&llt, &ones);
    Ok(y.iter().copied().collect())
}

fn solve_eigen(g: MatRef<'_, f64>, c: f64) -> Result<Vec<f64>> {
    let t = augmented_vector_discrete(g, c)?;
    Ok((0..g.ncols())
        .map(|j| {
            let gt: f64 = (0..g.nrows()).map(|i| g[(i, j)] * t[i]).sum();
            (1.0 - gt) / c
        })
        .collect())
}

/// Solves `(G^T G + c I) y = 1` and normalizes.
pub fn solve_barycentric(g: MatRef<'_, f64>, c: f64) -> Result<BarycentricSolution> {
    solve_barycentric_with(g, c, SolvePath::Auto)
}

pub fn solve_barycentric_with(g: MatRef<'_, f64>, c: f64, path: SolvePath) -> Result<BarycentricSolution> {
    check_inputs(g, c)?;
    let eigen = match path {
        SolvePath::Auto => g.ncols() > g.nrows(),
        SolvePath::Direct => false,
        SolvePath::Eigen => true,
    };
    let y = if eigen {
        solve_eigen(g, c)?
    } else {
        solve_direct(g, c)?
    };
    let y_sum: f64 = y.iter().sum();
    let w = y.iter().map(|v| v / y_sum).collect();
    Ok(BarycentricSolution { y, w, y_sum, c })
}

/// How the regularizer is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CRule {
    Fixed(f64),
    /// `c = n eps^(d+3)`; `eps` defaults to the graph radius.
    Paper { eps: Option<f64> },
}

impl CRule {
    pub fn resolve(&self, n: usize, d: usize, scheme: NeighborScheme) -> Result<f64> {
        match *self {
            CRule::Fixed(c) => Ok(c),
            CRule::Paper { eps } => {
                let e = eps.or(scheme.eps()).ok_or_else(|| {
                    invalid("the n * eps^(d+3) rule needs a radius; pass one for KNN graphs")
                })?;
                Ok(n as f64 * e.powi(d as i32 + 3))
            }
        }
    }
}

/// Provenance stored next to a matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixMeta {
    pub n: usize,
    pub scheme: String,
    pub epsilon: Option<f64>,
    #[serde(rename = "K")]
    pub k: Option<usize>,
    pub c: Option<f64>,
    pub d: usize,
    pub seed: u64,
}

/// The LLE matrix with its per-row kernel data.
#[derive(Debug, Clone)]
pub struct LleMatrix {
    weights: CsrMatrix,
    /// Unnormalized kernel values, aligned with the weight entries.
    y: Vec<f64>,
    y_sum: Vec<f64>,
    n_k: Vec<usize>,
    pub meta: MatrixMeta,
}

impl LleMatrix {
    pub fn weights(&self) -> &CsrMatrix {
        &self.weights
    }

    pub fn n(&self) -> usize {
        self.weights.n_rows()
    }

    pub fn c(&self) -> f64 {
        self.meta.c.unwrap_or(f64::NAN)
    }

    /// Unnormalized kernel values of row `k`, aligned with `weights().row(k)`.
    pub fn y_row(&self, k: usize) -> &[f64] {
        &self.y[self.weights.row_range(k)]
    }

    pub fn y_sums(&self) -> &[f64] {
        &self.y_sum
    }

    pub fn n_k(&self) -> &[usize] {
        &self.n_k
    }
}

pub(crate) fn scheme_label(s: NeighborScheme) -> String {
    match s {
        NeighborScheme::EpsilonBall(_) => "epsilon_ball".into(),
        NeighborScheme::Knn(_) => "knn".into(),
    }
}

fn require_no_isolated(graph: &NeighborGraph) -> Result<()> {
    let iso = graph.isolated();
    if iso.is_empty() {
        Ok(())
    } else {
        Err(Error::IsolatedPoints { indices: iso })
    }
}

/// Solves every row and assembles `W`. Rows are computed in parallel and
/// merged in index order.
pub fn build_lle_matrix(cloud: &PointCloud, graph: &NeighborGraph, rule: CRule) -> Result<LleMatrix> {
    if graph.n() != cloud.n() {
        return Err(Error::DimensionMismatch {
            expected: cloud.n(),
            got: graph.n(),
        });
    }
    require_no_isolated(graph)?;
    let d = cloud.intrinsic_dim;
    let c = rule.resolve(cloud.n(), d, graph.scheme)?;
    let sols = (0..cloud.n())
        .into_par_iter()
        .map(|k| {
            let g = local_data_matrix(cloud, graph, k)?;
            solve_barycentric(g.as_ref(), c)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut y = Vec::with_capacity(graph.total_edges());
    let mut y_sum = Vec::with_capacity(cloud.n());
    let mut n_k = Vec::with_capacity(cloud.n());
    let mut rows = Vec::with_capacity(cloud.n());
    for (k, s) in sols.into_iter().enumerate() {
        let nb = graph.neighbors(k);
        let mut order: Vec<usize> = (0..nb.len()).collect();
        order.sort_by_key(|&i| nb[i]);
        rows.push(order.iter().map(|&i| (nb[i], s.w[i])).collect());
        y.extend(order.iter().map(|&i| s.y[i]));
        y_sum.push(s.y_sum);
        n_k.push(nb.len());
    }
    Ok(LleMatrix {
        weights: CsrMatrix::from_rows(cloud.n(), rows),
        y,
        y_sum,
        n_k,
        meta: MatrixMeta {
            n: cloud.n(),
            scheme: scheme_label(graph.scheme),
            epsilon: graph.scheme.eps(),
            k: graph.scheme.k(),
            c: Some(c),
            d,
            seed: cloud.seed,
        },
    })
}

/// `(W - I) f`.
pub fn apply_shifted(w: &CsrMatrix, f: &[f64]) -> Result<Vec<f64>> {
    let mut out = w.matvec(f)?;
    for (o, fi) in out.iter_mut().zip(f) {
        *o -= fi;
    }
    Ok(out)
}

/// Row-normalized members of the kernel family `alpha K_1 + (1 - alpha) K_2`.
#[derive(Debug, Clone)]
pub struct AlphaKernelMatrix {
    pub matrix: CsrMatrix,
    /// Rows whose raw sum was negative; they are normalized anyway.
    pub negative_rows: Vec<usize>,
    /// Rows whose raw sum vanished; they are left unnormalized.
    pub degenerate_rows: Vec<usize>,
}

/// `K_1 = 1` on the neighborhood and `K_2(x_k, x_j) = -(x_j - x_k)^T T_n(x_k)`.
/// `alpha = 1/2` reproduces the LLE weights.
pub fn build_alpha_kernel_matrix(
    cloud: &PointCloud,
    graph: &NeighborGraph,
    c: f64,
    alpha: f64,
) -> Result<AlphaKernelMatrix> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    require_no_isolated(graph)?;
    let raw = (0..cloud.n())
        .into_par_iter()
        .map(|k| {
            let g = local_data_matrix(cloud, graph, k)?;
            let t = augmented_vector_discrete(g.as_ref(), c)?;
            Ok((0..g.ncols())
                .map(|j| {
                    let ut: f64 = (0..g.nrows()).map(|i| g[(i, j)] * t[i]).sum();
                    alpha + (1.0 - alpha) * (-ut)
                })
                .collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut negative_rows = Vec::new();
    let mut degenerate_rows = Vec::new();
    let rows = raw
        .into_iter()
        .enumerate()
        .map(|(k, vals)| {
            let sum: f64 = vals.iter().sum();
            let mag: f64 = vals.iter().map(|v| v.abs()).sum();
            let vals: Vec<f64> = if sum.abs() <= 1e-12 * mag || mag == 0.0 {
                degenerate_rows.push(k);
                vals
            } else {
                if sum < 0.0 {
                    negative_rows.push(k);
                }
                vals.iter().map(|v| v / sum).collect()
            };
            graph.neighbors(k).iter().copied().zip(vals).collect()
        })
        .collect();
    Ok(AlphaKernelMatrix {
        matrix: CsrMatrix::from_rows(cloud.n(), rows),
        negative_rows,
        degenerate_rows,
    })
}

/// Alpha-normalized Gaussian diffusion-map matrix, support cut at `4 eps`.
pub fn build_dm_matrix(cloud: &PointCloud, eps: f64, alpha: f64) -> Result<CsrMatrix> {
    if !(eps > 0.0) {
        return Err(invalid("bandwidth must be positive"));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let n = cloud.n();
    let graph = build_graph(cloud, NeighborScheme::EpsilonBall(4.0 * eps))?;
    let kernel = |d: f64| (-(d * d) / (eps * eps)).exp();
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|k| {
            let mut r: Vec<(usize, f64)> = graph
                .neighbors(k)
                .iter()
                .zip(graph.distances(k))
                .map(|(&j, &d)| (j, kernel(d)))
                .collect();
            r.push((k, 1.0));
            r.sort_by_key(|e| e.0);
            r
        })
        .collect();
    let density: Vec<f64> = rows
        .iter()
        .map(|r| r.iter().map(|e| e.1).sum::<f64>() / n as f64)
        .collect();
    let rows = rows
        .into_iter()
        .enumerate()
        .map(|(k, r)| {
            let scaled: Vec<(usize, f64)> = r
                .into_iter()
                .map(|(j, h)| (j, h / (density[k] * density[j]).powf(alpha)))
                .collect();
            let s: f64 = scaled.iter().map(|e| e.1).sum();
            scaled.into_iter().map(|(j, v)| (j, v / s)).collect()
        })
        .collect();
    Ok(CsrMatrix::from_rows(n, rows))
}

/// Convenience: dense copy of a column-major `p x N` slice as a matrix.
pub fn matrix_from_columns(p: usize, cols: &[Vec<f64>]) -> Mat<f64> {
    Mat::from_fn(p, cols.len(), |i, j| cols[j][i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;
    use crate::samplers::{circle_grid, circle_grid_eps, sample_disk, sample_interval};

    #[test]
    fn symmetric_pair_gets_equal_weights() {
        let g = matrix_from_columns(2, &[vec![0.3, 0.1], vec![-0.3, 0.1]]);
        for path in [SolvePath::Direct, SolvePath::Eigen] {
            let s = solve_barycentric_with(g.as_ref(), 1e-3, path).unwrap();
            assert!((s.y[0] - s.y[1]).abs() < 1e-9 * s.y[0].abs());
            assert!((s.w[0] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_local_matrix() {
        let g = Mat::<f64>::zeros(3, 4);
        let s = solve_barycentric(g.as_ref(), 0.5).unwrap();
        assert!(s.y.iter().all(|&v| (v - 2.0).abs() < 1e-15));
        assert!(s.w.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        assert_eq!(augmented_vector_discrete(g.as_ref(), 0.5).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn rank_one_augmented_vector() {
        let v = [0.2, -0.4, 0.1];
        let g = matrix_from_columns(3, &[v.to_vec()]);
        let c = 1e-2;
        let t = augmented_vector_discrete(g.as_ref(), c).unwrap();
        let n2: f64 = v.iter().map(|x| x * x).sum();
        for i in 0..3 {
            assert!((t[i] - v[i] / (n2 + c)).abs() < 1e-14);
        }
    }

    #[test]
    fn paths_agree_on_random_instances() {
        let mut rng = Stream::new(42);
        for &(p, n) in &[(3, 5), (2, 9), (5, 3), (4, 4)] {
            let g = Mat::from_fn(p, n, |_, _| rng.uniform_in(-1.0, 1.0));
            let a = solve_barycentric_with(g.as_ref(), 1e-3, SolvePath::Direct).unwrap();
            let b = solve_barycentric_with(g.as_ref(), 1e-3, SolvePath::Eigen).unwrap();
            let scale = a.y.iter().map(|v| v.abs()).fold(0.0, f64::max);
            for (x, y) in a.y.iter().zip(&b.y) {
                assert!((x - y).abs() <= 1e-8 * scale, "p={p} n={n}");
            }
        }
    }

    #[test]
    fn bad_inputs() {
        let g = Mat::<f64>::zeros(2, 2);
        assert!(solve_barycentric(g.as_ref(), 0.0).is_err());
        let e = Mat::<f64>::zeros(2, 0);
        assert!(matches!(
            solve_barycentric(e.as_ref(), 1.0),
            Err(Error::EmptyNeighborhood { .. })
        ));
    }

    #[test]
    fn circle_grid_rows_are_halves() {
        let n = 12;
        let cloud = circle_grid(n).unwrap();
        let graph = build_graph(&cloud, NeighborScheme::EpsilonBall(circle_grid_eps(n))).unwrap();
        let w = build_lle_matrix(&cloud, &graph, CRule::Fixed(1e-3)).unwrap();
        for k in 0..n {
            let (c, v) = w.weights().row(k);
            assert_eq!(c.len(), 2);
            assert!(v.iter().all(|x| (x - 0.5).abs() < 1e-12));
        }
    }

    #[test]
    fn row_sums_and_constant_annihilation() {
        let cloud = sample_disk(2000, 3).unwrap();
        let graph = build_graph(&cloud, NeighborScheme::EpsilonBall(0.15)).unwrap();
        let w = build_lle_matrix(&cloud, &graph, CRule::Paper { eps: None }).unwrap();
        assert!(w.weights().row_sums().iter().all(|s| (s - 1.0).abs() < 1e-12));
        let r = apply_shifted(w.weights(), &vec![3.0; cloud.n()]).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-11));
        assert!(apply_shifted(w.weights(), &[1.0]).is_err());
        let k = 17;
        let (cols, vals) = w.weights().row(k);
        assert_eq!(cols, graph.neighbors(k));
        for (wv, yv) in vals.iter().zip(w.y_row(k)) {
            assert!((wv - yv / w.y_sums()[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn paper_rule_needs_radius_for_knn() {
        let cloud = sample_interval(50, 1).unwrap();
        let graph = build_graph(&cloud, NeighborScheme::Knn(4)).unwrap();
        assert!(build_lle_matrix(&cloud, &graph, CRule::Paper { eps: None }).is_err());
        let w = build_lle_matrix(&cloud, &graph, CRule::Paper { eps: Some(0.1) }).unwrap();
        assert!((w.c() - 50.0 * 1e-4).abs() < 1e-15);
    }

    #[test]
    fn isolated_points_are_named() {
        let cloud = PointCloud::new(vec![0.0, 0.1, 5.0], 1, 1).unwrap();
        let graph = build_graph(&cloud, NeighborScheme::EpsilonBall(0.5)).unwrap();
        match build_lle_matrix(&cloud, &graph, CRule::Fixed(1e-3)) {
            Err(Error::IsolatedPoints { indices }) => assert_eq!(indices, vec![2]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn alpha_family() {
        let cloud = sample_disk(1500, 5).unwrap();
        let graph = build_graph(&cloud, NeighborScheme::EpsilonBall(0.2)).unwrap();
        let c = 1e-3;
        let w = build_lle_matrix(&cloud, &graph, CRule::Fixed(c)).unwrap();
        let half = build_alpha_kernel_matrix(&cloud, &graph, c, 0.5).unwrap();
        for (a, b) in w.weights().values().iter().zip(half.matrix.values()) {
            assert!((a - b).abs() < 1e-10);
        }
        let one = build_alpha_kernel_matrix(&cloud, &graph, c, 1.0).unwrap();
        for k in 0..cloud.n() {
            let (cols, vals) = one.matrix.row(k);
            assert!(vals.iter().all(|v| (v - 1.0 / cols.len() as f64).abs() < 1e-15));
        }
        assert!(build_alpha_kernel_matrix(&cloud, &graph, c, 1.5).is_err());

        let n = 10;
        let circle = circle_grid(n).unwrap();
        let g = build_graph(&circle, NeighborScheme::EpsilonBall(circle_grid_eps(n))).unwrap();
        let zero = build_alpha_kernel_matrix(&circle, &g, 1e-3, 0.0).unwrap();
        assert!(zero.degenerate_rows.is_empty());
        assert_eq!(zero.negative_rows.len(), n);
        for k in 0..n {
            let (_, vals) = zero.matrix.row(k);
            assert!(vals.iter().all(|v| v.is_finite() && (v - 0.5).abs() < 1e-12));
        }
    }

    #[test]
    fn dm_matrix_basics() {
        let twins = PointCloud::new(vec![0.3, 0.3], 1, 1).unwrap();
        let m = build_dm_matrix(&twins, 0.1, 0.5).unwrap();
        assert_eq!(m.to_dense(), Mat::from_fn(2, 2, |_, _| 0.5));
        let cloud = sample_interval(300, 2).unwrap();
        let m0 = build_dm_matrix(&cloud, 0.05, 0.0).unwrap();
        assert!(m0.row_sums().iter().all(|s| (s - 1.0).abs() < 1e-12));
        let (cols, vals) = m0.row(0);
        let x0 = cloud.point(0)[0];
        let raw: Vec<f64> = cols
            .iter()
            .map(|&j| (-(cloud.point(j)[0] - x0).powi(2) / 0.0025).exp())
            .collect();
        let s: f64 = raw.iter().sum();
        for (v, r) in vals.iter().zip(&raw) {
            assert!((v - r / s).abs() < 1e-14);
        }
    }
}
