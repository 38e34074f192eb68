//! Exact epsilon-ball and K-nearest-neighbor graphs.

use std::collections::HashMap;

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::samplers::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborScheme {
    /// All points at distance strictly below the radius.
    EpsilonBall(f64),
    /// The K closest points; ties go to the smaller index.
    Knn(usize),
}

impl NeighborScheme {
    pub fn eps(&self) -> Option<f64> {
        match *self {
            NeighborScheme::EpsilonBall(e) => Some(e),
            NeighborScheme::Knn(_) => None,
        }
    }

    pub fn k(&self) -> Option<usize> {
        match *self {
            NeighborScheme::EpsilonBall(_) => None,
            NeighborScheme::Knn(k) => Some(k),
        }
    }
}

/// Neighbor lists without self-loops. Epsilon-ball lists are in ascending
/// index order; KNN lists are in ascending distance order.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    pub scheme: NeighborScheme,
    neighbors: Vec<Vec<usize>>,
    distances: Vec<Vec<f64>>,
}

impl NeighborGraph {
    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, k: usize) -> &[usize] {
        &self.neighbors[k]
    }

    pub fn distances(&self, k: usize) -> &[f64] {
        &self.distances[k]
    }

    /// Points with no neighbors.
    pub fn isolated(&self) -> Vec<usize> {
        (0..self.n())
            .filter(|&k| self.neighbors[k].is_empty())
            .collect()
    }

    pub fn total_edges(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum()
    }
}

fn sqdist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn validate(cloud: &PointCloud, scheme: NeighborScheme) -> Result<()> {
    match scheme {
        NeighborScheme::EpsilonBall(e) if !(e > 0.0 && e.is_finite()) => {
            Err(invalid(format!("radius must be positive, got {e}")))
        }
        NeighborScheme::Knn(k) if k == 0 || k >= cloud.n() => Err(invalid(format!(
            "K = {k} must satisfy 1 <= K < n = {}",
            cloud.n()
        ))),
        _ => Ok(()),
    }
}

fn finish(scheme: NeighborScheme, rows: Vec<Vec<(f64, usize)>>) -> NeighborGraph {
    let (neighbors, distances) = rows
        .into_iter()
        .map(|r| {
            let idx = r.iter().map(|x| x.1).collect();
            let dist = r.iter().map(|x| x.0.sqrt()).collect();
            (idx, dist)
        })
        .unzip();
    NeighborGraph {
        scheme,
        neighbors,
        distances,
    }
}

fn by_dist_then_index(a: &(f64, usize), b: &(f64, usize)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Reference implementation comparing every pair.
pub fn build_graph_brute_force(cloud: &PointCloud, scheme: NeighborScheme) -> Result<NeighborGraph> {
    validate(cloud, scheme)?;
    let n = cloud.n();
    let rows = (0..n)
        .into_par_iter()
        .map(|k| {
            let x = cloud.point(k);
            let mut all: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != k)
                .map(|j| (sqdist(x, cloud.point(j)), j))
                .collect();
            match scheme {
                NeighborScheme::EpsilonBall(e) => {
                    all.retain(|c| c.0 < e * e);
                    all
                }
                NeighborScheme::Knn(kk) => {
                    all.sort_unstable_by(by_dist_then_index);
                    all.truncate(kk);
                    all
                }
            }
        })
        .collect();
    Ok(finish(scheme, rows))
}

/// Builds the neighbor graph using a uniform grid over (at most) the first
/// three coordinates. Results are identical to the brute-force graph.
pub fn build_graph(cloud: &PointCloud, scheme: NeighborScheme) -> Result<NeighborGraph> {
    validate(cloud, scheme)?;
    match scheme {
        NeighborScheme::EpsilonBall(e) => {
            let grid = Grid::new(cloud, e);
            let e2 = e * e;
            let rows = (0..cloud.n())
                .into_par_iter()
                .map(|k| {
                    let x = cloud.point(k);
                    let mut out = Vec::new();
                    grid.for_each_in_box(x, 1, |j| {
                        if j != k {
                            let d2 = sqdist(x, cloud.point(j));
                            if d2 < e2 {
                                out.push((d2, j));
                            }
                        }
                    });
                    out.sort_unstable_by_key(|c| c.1);
                    out
                })
                .collect();
            Ok(finish(scheme, rows))
        }
        NeighborScheme::Knn(kk) => {
            if cloud.p() > 3 {
                return build_graph_brute_force(cloud, scheme);
            }
            let h = knn_cell_size(cloud, kk);
            let grid = Grid::new(cloud, h);
            let rows = (0..cloud.n())
                .into_par_iter()
                .map(|k| grid.knn(cloud, k, kk))
                .collect();
            Ok(finish(scheme, rows))
        }
    }
}

/// Median K-distance over a deterministic subsample of the points.
fn knn_cell_size(cloud: &PointCloud, k: usize) -> f64 {
    let n = cloud.n();
    let stride = (n / 64).max(1);
    let mut kd: Vec<f64> = (0..n)
        .step_by(stride)
        .map(|i| {
            let x = cloud.point(i);
            let mut d: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| sqdist(x, cloud.point(j)))
                .collect();
            d.select_nth_unstable_by(k - 1, f64::total_cmp);
            d[k - 1].sqrt()
        })
        .collect();
    kd.sort_by(f64::total_cmp);
    let m = kd[kd.len() / 2];
    if m > 0.0 && m.is_finite() {
        m
    } else {
        1.0
    }
}

struct Grid<'a> {
    cloud: &'a PointCloud,
    h: f64,
    q: usize,
    cells: HashMap<[i64; 3], Vec<usize>>,
    lo: [i64; 3],
    hi: [i64; 3],
}

impl<'a> Grid<'a> {
    fn new(cloud: &'a PointCloud, h: f64) -> Self {
        let q = cloud.p().min(3);
        let mut cells: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        let mut lo = [i64::MAX; 3];
        let mut hi = [i64::MIN; 3];
        for i in 0..cloud.n() {
            let key = Self::key_of(cloud.point(i), h, q);
            for a in 0..3 {
                lo[a] = lo[a].min(key[a]);
                hi[a] = hi[a].max(key[a]);
            }
            cells.entry(key).or_default().push(i);
        }
        Grid {
            cloud,
            h,
            q,
            cells,
            lo,
            hi,
        }
    }

    fn key_of(x: &[f64], h: f64, q: usize) -> [i64; 3] {
        let mut key = [0i64; 3];
        for a in 0..q {
            key[a] = (x[a] / h).floor() as i64;
        }
        key
    }

    /// Visits every point in cells within Chebyshev cell distance `r`.
    fn for_each_in_box(&self, x: &[f64], r: i64, mut f: impl FnMut(usize)) {
        let c = Self::key_of(x, self.h, self.q);
        self.visit(c, r, |ring| ring <= r, &mut f);
    }

    fn visit(&self, c: [i64; 3], r: i64, keep: impl Fn(i64) -> bool, f: &mut impl FnMut(usize)) {
        let span = |a: usize| if a < self.q { -r..=r } else { 0..=0 };
        for dx in span(0) {
            for dy in span(1) {
                for dz in span(2) {
                    let ring = dx.abs().max(dy.abs()).max(dz.abs());
                    if !keep(ring) {
                        continue;
                    }
                    if let Some(v) = self.cells.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        v.iter().for_each(|&j| f(j));
                    }
                }
            }
        }
    }

    fn knn(&self, cloud: &PointCloud, k: usize, kk: usize) -> Vec<(f64, usize)> {
        let x = cloud.point(k);
        let c = Self::key_of(x, self.h, self.q);
        let mut cand: Vec<(f64, usize)> = Vec::new();
        let mut r = 0i64;
        loop {
            self.visit(c, r, |ring| ring == r, &mut |j| {
                if j != k {
                    cand.push((sqdist(x, self.cloud.point(j)), j));
                }
            });
            let covers_all = (0..self.q).all(|a| c[a] - r <= self.lo[a] && c[a] + r >= self.hi[a]);
            if covers_all {
                break;
            }
            if cand.len() >= kk {
                // Anything outside the visited block is at least `guard` away.
                let guard = (0..self.q)
                    .map(|a| {
                        let lo_edge = (c[a] - r) as f64 * self.h;
                        let hi_edge = (c[a] + r + 1) as f64 * self.h;
                        (x[a] - lo_edge).min(hi_edge - x[a])
                    })
                    .fold(f64::INFINITY, f64::min);
                cand.select_nth_unstable_by(kk - 1, by_dist_then_index);
                if cand[kk - 1].0 < guard * guard {
                    break;
                }
            }
            r += 1;
        }
        cand.sort_unstable_by(by_dist_then_index);
        cand.truncate(kk);
        cand
    }
}

/// Local data matrix of point `k`: column `j` is `x_{k,j} - x_k`.
pub fn local_data_matrix(cloud: &PointCloud, graph: &NeighborGraph, k: usize) -> Result<Mat<f64>> {
    if graph.n() != cloud.n() {
        return Err(Error::DimensionMismatch {
            expected: cloud.n(),
            got: graph.n(),
        });
    }
    let nb = graph.neighbors(k);
    if nb.is_empty() {
        return Err(Error::EmptyNeighborhood { index: k });
    }
    let x = cloud.point(k);
    Ok(Mat::from_fn(cloud.p(), nb.len(), |i, j| {
        cloud.point(nb[j])[i] - x[i]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::{sample_disk, sample_gaussian, sample_interval};

    fn line() -> PointCloud {
        PointCloud::new(vec![0.0, 1.0, 2.0], 1, 1).unwrap()
    }

    #[test]
    fn collinear_examples() {
        let g = build_graph(&line(), NeighborScheme::EpsilonBall(1.5)).unwrap();
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0, 2]);
        assert_eq!(g.neighbors(2), &[1]);
        let g = build_graph(&line(), NeighborScheme::Knn(1)).unwrap();
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0]);
        assert_eq!(g.neighbors(2), &[1]);
    }

    #[test]
    fn strict_radius() {
        let g = build_graph(&line(), NeighborScheme::EpsilonBall(1.0)).unwrap();
        assert_eq!(g.isolated(), vec![0, 1, 2]);
    }

    #[test]
    fn knn_rejects_large_k() {
        assert!(build_graph(&line(), NeighborScheme::Knn(3)).is_err());
        assert!(build_graph(&line(), NeighborScheme::Knn(0)).is_err());
        assert!(build_graph(&line(), NeighborScheme::EpsilonBall(0.0)).is_err());
    }

    #[test]
    fn grid_matches_brute_force() {
        let disk = sample_disk(640, 3).unwrap();
        for scheme in [NeighborScheme::EpsilonBall(0.1), NeighborScheme::Knn(7)] {
            let a = build_graph(&disk, scheme).unwrap();
            let b = build_graph_brute_force(&disk, scheme).unwrap();
            assert_eq!(a, b);
        }
        let line = sample_interval(300, 1).unwrap();
        let a = build_graph(&line, NeighborScheme::Knn(4)).unwrap();
        assert_eq!(a, build_graph_brute_force(&line, NeighborScheme::Knn(4)).unwrap());
        let g = sample_gaussian(60, 5, 2).unwrap();
        let a = build_graph(&g, NeighborScheme::EpsilonBall(2.5)).unwrap();
        assert_eq!(a, build_graph_brute_force(&g, NeighborScheme::EpsilonBall(2.5)).unwrap());
    }

    #[test]
    fn local_matrix_columns() {
        let c = PointCloud::new(vec![0.0, 0.0, 0.3, 0.2, -0.3, 0.2], 2, 1).unwrap();
        let g = build_graph(&c, NeighborScheme::EpsilonBall(1.0)).unwrap();
        let m = local_data_matrix(&c, &g, 0).unwrap();
        assert_eq!((m[(0, 0)], m[(1, 0)]), (0.3, 0.2));
        assert_eq!((m[(0, 1)], m[(1, 1)]), (-0.3, 0.2));
        let g = build_graph(&c, NeighborScheme::EpsilonBall(0.1)).unwrap();
        assert!(matches!(
            local_data_matrix(&c, &g, 0),
            Err(Error::EmptyNeighborhood { index: 0 })
        ));
    }
}
