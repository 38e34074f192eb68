//! Boundary indicator, region partition and the clipped LLE matrix.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::AnalyticCoeffs;
use crate::error::{Error, Result};
use crate::lle_core::{solve_barycentric, CRule, LleMatrix};
use crate::neighbors::{local_data_matrix, NeighborGraph};
use crate::samplers::PointCloud;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Boundary,
    Interior,
}

impl Label {
    pub fn name(&self) -> &'static str {
        match self {
            Label::Boundary => "boundary",
            Label::Interior => "interior",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// Closer to the boundary than `t*`.
    Wave,
    /// `t* <= dist < eps`.
    NearBoundary,
    /// `eps <= dist <= 2 eps`.
    Transition,
    /// `dist > 2 eps`.
    Interior,
}

impl Region {
    pub fn name(&self) -> &'static str {
        match self {
            Region::Wave => "wave",
            Region::NearBoundary => "near_boundary",
            Region::Transition => "transition",
            Region::Interior => "interior",
        }
    }

    pub fn of(dist: f64, eps: f64, tstar: f64) -> Region {
        if dist < tstar {
            Region::Wave
        } else if dist < eps {
            Region::NearBoundary
        } else if dist <= 2.0 * eps {
            Region::Transition
        } else {
            Region::Interior
        }
    }
}

/// Indicator values with optional labels and regions.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryReport {
    /// `B_k = (N_k - c y_k^T 1) / N_k`; NaN where the neighborhood is empty.
    pub b_values: Vec<f64>,
    pub threshold: Option<f64>,
    /// `None` for points without an indicator value.
    pub labels: Option<Vec<Option<Label>>>,
    pub regions: Option<Vec<Region>>,
}

impl BoundaryReport {
    pub fn missing(&self) -> Vec<usize> {
        (0..self.b_values.len())
            .filter(|&k| self.b_values[k].is_nan())
            .collect()
    }

    pub fn boundary_count(&self) -> usize {
        self.labels
            .as_ref()
            .map_or(0, |l| l.iter().filter(|x| **x == Some(Label::Boundary)).count())
    }
}

fn b_value(n_k: usize, c: f64, y_sum: f64) -> f64 {
    (n_k as f64 - c * y_sum) / n_k as f64
}

/// Indicator from an assembled matrix, reusing its kernel sums.
pub fn indicator_from_matrix(w: &LleMatrix) -> BoundaryReport {
    let c = w.c();
    BoundaryReport {
        b_values: w
            .n_k()
            .iter()
            .zip(w.y_sums())
            .map(|(&n, &s)| b_value(n, c, s))
            .collect(),
        threshold: None,
        labels: None,
        regions: None,
    }
}

/// Indicator computed directly; points with empty neighborhoods get NaN.
pub fn indicator(cloud: &PointCloud, graph: &NeighborGraph, rule: CRule) -> Result<BoundaryReport> {
    let c = rule.resolve(cloud.n(), cloud.intrinsic_dim, graph.scheme)?;
    let b_values = (0..cloud.n())
        .into_par_iter()
        .map(|k| {
            if graph.neighbors(k).is_empty() {
                return Ok(f64::NAN);
            }
            let g = local_data_matrix(cloud, graph, k)?;
            let s = solve_barycentric(g.as_ref(), c)?;
            Ok(b_value(g.ncols(), c, s.y_sum))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundaryReport {
        b_values,
        threshold: None,
        labels: None,
        regions: None,
    })
}

/// `B(0) (3/4)^(d+1) / 2`: half the limit value at depth `eps / 2`.
pub fn default_threshold(d: usize) -> f64 {
    let b0 = AnalyticCoeffs::new(d, 1.0)
        .expect("d >= 1")
        .b_at_boundary();
    b0 * 0.75f64.powi(d as i32 + 1) / 2.0
}

/// Labels points with `B_k > tau` as boundary.
pub fn classify(report: &BoundaryReport, tau: f64) -> BoundaryReport {
    let labels = report
        .b_values
        .iter()
        .map(|&b| {
            if b.is_nan() {
                None
            } else if b > tau {
                Some(Label::Boundary)
            } else {
                Some(Label::Interior)
            }
        })
        .collect();
    BoundaryReport {
        threshold: Some(tau),
        labels: Some(labels),
        ..report.clone()
    }
}

/// Region of each distance.
pub fn partition_distances(dists: &[f64], eps: f64, tstar: f64) -> Vec<Region> {
    dists.iter().map(|&d| Region::of(d, eps, tstar)).collect()
}

/// Boundary distances from the ground truth, or estimated from the indicator
/// by inverting the limit profile `B(t)`.
pub fn boundary_distances(
    cloud: &PointCloud,
    eps: f64,
    report: Option<&BoundaryReport>,
) -> Result<Vec<f64>> {
    if let Some(d) = cloud.boundary_dist() {
        return Ok(d.to_vec());
    }
    let report = report.ok_or_else(|| {
        Error::Validation("no boundary distances and no indicator to estimate them".into())
    })?;
    let coeffs = AnalyticCoeffs::new(cloud.intrinsic_dim, eps)?;
    Ok(report
        .b_values
        .iter()
        .map(|&b| if b.is_nan() { f64::INFINITY } else { coeffs.invert_b(b) })
        .collect())
}

pub fn partition_regions(
    cloud: &PointCloud,
    eps: f64,
    tstar: f64,
    report: Option<&BoundaryReport>,
) -> Result<Vec<Region>> {
    Ok(partition_distances(
        &boundary_distances(cloud, eps, report)?,
        eps,
        tstar,
    ))
}

/// Principal submatrix on the non-wave points.
#[derive(Debug, Clone)]
pub struct ClippedMatrix {
    pub matrix: CsrMatrix,
    /// Original index of each retained row.
    pub kept: Vec<usize>,
    /// New index of each original row, if retained.
    pub old_to_new: Vec<Option<usize>>,
}

pub fn clip(w: &CsrMatrix, regions: &[Region]) -> Result<ClippedMatrix> {
    if regions.len() != w.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: w.n_rows(),
            got: regions.len(),
        });
    }
    let kept: Vec<usize> = (0..regions.len())
        .filter(|&k| regions[k] != Region::Wave)
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyInput("every point lies in the wave region"));
    }
    let mut old_to_new = vec![None; regions.len()];
    for (new, &old) in kept.iter().enumerate() {
        old_to_new[old] = Some(new);
    }
    Ok(ClippedMatrix {
        matrix: w.principal_submatrix(&kept),
        kept,
        old_to_new,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lle_core::build_lle_matrix;
    use crate::neighbors::{build_graph, NeighborScheme};
    use crate::samplers::{circle_grid, circle_grid_eps, interval_from_params};

    #[test]
    fn region_rules() {
        let (eps, ts) = (0.01, 0.0027);
        assert_eq!(Region::of(0.03, eps, ts), Region::Interior);
        assert_eq!(Region::of(ts, eps, ts), Region::NearBoundary);
        assert_eq!(Region::of(0.001, eps, ts), Region::Wave);
        assert_eq!(Region::of(eps, eps, ts), Region::Transition);
        assert_eq!(Region::of(2.0 * eps, eps, ts), Region::Transition);
    }

    #[test]
    fn thresholds_and_labels() {
        let r = BoundaryReport {
            b_values: vec![0.7, 0.1, f64::NAN, 0.3],
            threshold: None,
            labels: None,
            regions: None,
        };
        let all = classify(&r, 0.0);
        assert_eq!(all.boundary_count(), 3);
        assert_eq!(classify(&r, 0.7).boundary_count(), 0);
        assert_eq!(classify(&r, 0.2).labels.unwrap()[2], None);
        assert_eq!(r.missing(), vec![2]);
        let t1 = default_threshold(1);
        assert!((t1 - 0.75 * 0.5625 / 2.0).abs() < 1e-14);
    }

    #[test]
    fn clipping_is_a_principal_submatrix() {
        let t: Vec<f64> = (0..200).map(|i| (i as f64 + 0.5) / 200.0).collect();
        let cloud = interval_from_params(t, 0);
        let eps = 0.03;
        let graph = build_graph(&cloud, NeighborScheme::EpsilonBall(eps)).unwrap();
        let w = build_lle_matrix(&cloud, &graph, CRule::Paper { eps: None }).unwrap();
        let ts = (2.0 - 3f64.sqrt()) * eps;
        let regions = partition_regions(&cloud, eps, ts, None).unwrap();
        let c = clip(w.weights(), &regions).unwrap();
        assert!(c.kept.len() < cloud.n());
        for (i, &oi) in c.kept.iter().enumerate() {
            for (j, &oj) in c.kept.iter().enumerate() {
                assert_eq!(c.matrix.get(i, j), w.weights().get(oi, oj));
            }
        }
        let sums = c.matrix.row_sums();
        for (i, &oi) in c.kept.iter().enumerate() {
            let all_kept = graph.neighbors(oi).iter().all(|&j| c.old_to_new[j].is_some());
            if all_kept {
                assert!((sums[i] - 1.0).abs() < 1e-12);
            } else {
                assert!(sums[i] < 1.0);
            }
        }
        let everything = vec![Region::Wave; cloud.n()];
        assert!(clip(w.weights(), &everything).is_err());
    }

    #[test]
    fn closed_manifold_is_not_clipped() {
        let n = 20;
        let cloud = circle_grid(n).unwrap();
        let g = build_graph(&cloud, NeighborScheme::EpsilonBall(circle_grid_eps(n))).unwrap();
        let w = build_lle_matrix(&cloud, &g, CRule::Fixed(1e-3)).unwrap();
        let regions = vec![Region::Interior; n];
        let c = clip(w.weights(), &regions).unwrap();
        assert_eq!(&c.matrix, w.weights());
    }

    #[test]
    fn proxy_needs_some_source() {
        let cloud = circle_grid(8).unwrap();
        assert!(partition_regions(&cloud, 0.1, 0.02, None).is_err());
        let report = BoundaryReport {
            b_values: vec![0.0; 8],
            threshold: None,
            labels: None,
            regions: None,
        };
        let r = partition_regions(&cloud, 0.1, 0.02, Some(&report)).unwrap();
        assert!(r.iter().all(|x| *x == Region::Transition));
    }

    #[test]
    fn zero_local_matrix_gives_zero_indicator() {
        let cloud = PointCloud::new(vec![0.5, 0.5, 0.5], 1, 1).unwrap();
        let g = build_graph(&cloud, NeighborScheme::EpsilonBall(0.1)).unwrap();
        let r = indicator(&cloud, &g, CRule::Fixed(0.01)).unwrap();
        assert!(r.b_values.iter().all(|b| b.abs() < 1e-12));
    }
}
