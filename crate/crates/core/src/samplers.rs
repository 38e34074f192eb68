//! Seeded point clouds on the test manifolds, with ground truth.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature;
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Manifold {
    /// `[0, 1]` in `R`.
    Interval,
    /// Closed unit disk in `R^2`.
    Disk,
    /// `t -> (t, log(0.5 + t), cos(pi t))`, `t in [0, 1]`.
    Curve,
    /// Graph `(x, y, x^2 - y^3)` over the unit disk.
    Surface,
    /// Torus-like surface cut by the plane `x = -3.4`.
    Torus,
    /// Standard normal cloud with no manifold structure.
    Gaussian,
    /// Anything built from raw coordinates.
    Custom,
}

impl Manifold {
    pub fn name(&self) -> &'static str {
        match self {
            Manifold::Interval => "interval",
            Manifold::Disk => "disk",
            Manifold::Curve => "curve",
            Manifold::Surface => "surface",
            Manifold::Torus => "torus",
            Manifold::Gaussian => "gaussian",
            Manifold::Custom => "custom",
        }
    }

    /// Intrinsic dimension, when it is fixed by the manifold.
    pub fn intrinsic_dim(&self) -> Option<usize> {
        match self {
            Manifold::Interval | Manifold::Curve => Some(1),
            Manifold::Disk | Manifold::Surface | Manifold::Torus => Some(2),
            Manifold::Gaussian | Manifold::Custom => None,
        }
    }
}

impl fmt::Display for Manifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Manifold {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "interval" | "m1" => Manifold::Interval,
            "disk" | "m2" => Manifold::Disk,
            "curve" | "m3" => Manifold::Curve,
            "surface" => Manifold::Surface,
            "torus" | "m4" => Manifold::Torus,
            "gaussian" | "null" => Manifold::Gaussian,
            "custom" => Manifold::Custom,
            other => return Err(invalid(format!("unknown manifold '{other}'"))),
        })
    }
}

/// Per-point analytic information, stored column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Intrinsic parameters, `n x param_dim` row-major.
    pub params: Vec<f64>,
    pub param_dim: usize,
    /// Distance to the boundary (geodesic, or a proxy when `exact` is false).
    pub boundary_dist: Vec<f64>,
    /// Unit outward boundary direction in ambient coordinates, `n x p`.
    pub normals: Option<Vec<f64>>,
    pub exact: bool,
}

impl GroundTruth {
    pub fn param(&self, i: usize) -> &[f64] {
        &self.params[i * self.param_dim..(i + 1) * self.param_dim]
    }
}

/// `n` points in `R^p`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    coords: Vec<f64>,
    n: usize,
    p: usize,
    pub intrinsic_dim: usize,
    pub seed: u64,
    pub manifold: Manifold,
    pub truth: Option<GroundTruth>,
}

impl PointCloud {
    pub fn new(coords: Vec<f64>, p: usize, intrinsic_dim: usize) -> Result<Self> {
        if p == 0 || coords.is_empty() {
            return Err(Error::EmptyInput("point cloud"));
        }
        if !coords.len().is_multiple_of(p) {
            return Err(invalid(format!(
                "{} coordinates do not split into rows of length {p}",
                coords.len()
            )));
        }
        if intrinsic_dim == 0 || intrinsic_dim > p {
            return Err(invalid(format!(
                "intrinsic dimension {intrinsic_dim} not in 1..={p}"
            )));
        }
        Ok(Self {
            n: coords.len() / p,
            coords,
            p,
            intrinsic_dim,
            seed: 0,
            manifold: Manifold::Custom,
            truth: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Ambient dimension.
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.p..(i + 1) * self.p]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn boundary_dist(&self) -> Option<&[f64]> {
        self.truth.as_ref().map(|t| t.boundary_dist.as_slice())
    }

    pub fn normal(&self, i: usize) -> Option<&[f64]> {
        let t = self.truth.as_ref()?;
        t.normals.as_ref().map(|v| &v[i * self.p..(i + 1) * self.p])
    }

    /// Applies `x -> R x + b` to every point; `r` is `p x p` row-major.
    pub fn transformed(&self, r: &[f64], b: &[f64]) -> Self {
        let p = self.p;
        let mut coords = vec![0.0; self.coords.len()];
        for (src, dst) in self.coords.chunks(p).zip(coords.chunks_mut(p)) {
            for i in 0..p {
                dst[i] = b[i] + (0..p).map(|j| r[i * p + j] * src[j]).sum::<f64>();
            }
        }
        Self {
            coords,
            truth: None,
            ..self.clone()
        }
    }

    /// Subset of points, in the given order.
    pub fn select(&self, idx: &[usize]) -> Self {
        let p = self.p;
        let mut coords = Vec::with_capacity(idx.len() * p);
        for &i in idx {
            coords.extend_from_slice(self.point(i));
        }
        let truth = self.truth.as_ref().map(|t| GroundTruth {
            params: idx
                .iter()
                .flat_map(|&i| t.param(i).iter().copied())
                .collect(),
            param_dim: t.param_dim,
            boundary_dist: idx.iter().map(|&i| t.boundary_dist[i]).collect(),
            normals: t.normals.as_ref().map(|v| {
                idx.iter()
                    .flat_map(|&i| v[i * p..(i + 1) * p].iter().copied())
                    .collect()
            }),
            exact: t.exact,
        });
        Self {
            coords,
            n: idx.len(),
            truth,
            ..self.clone()
        }
    }
}

fn require_count(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::EmptyInput("sample count"))
    } else {
        Ok(())
    }
}

/// Uniform samples on `[0, 1]`.
pub fn sample_interval(n: usize, seed: u64) -> Result<PointCloud> {
    require_count(n)?;
    let mut rng = Stream::new(seed);
    let t: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
    Ok(interval_from_params(t, seed))
}

/// Interval cloud at the given parameter values.
pub fn interval_from_params(t: Vec<f64>, seed: u64) -> PointCloud {
    let bdist = t.iter().map(|&x| x.min(1.0 - x)).collect();
    let normals = t.iter().map(|&x| if x < 0.5 { -1.0 } else { 1.0 }).collect();
    PointCloud {
        n: t.len(),
        p: 1,
        coords: t.clone(),
        intrinsic_dim: 1,
        seed,
        manifold: Manifold::Interval,
        truth: Some(GroundTruth {
            params: t,
            param_dim: 1,
            boundary_dist: bdist,
            normals: Some(normals),
            exact: true,
        }),
    }
}

/// Rejection draws from `[-1, 1]^2`, keeping `|(x, y)| <= 1`.
pub fn disk_params(n_raw: usize, seed: u64) -> Result<Vec<[f64; 2]>> {
    require_count(n_raw)?;
    let mut rng = Stream::new(seed);
    let mut kept = Vec::with_capacity(n_raw * 4 / 5);
    for _ in 0..n_raw {
        let x = rng.uniform_in(-1.0, 1.0);
        let y = rng.uniform_in(-1.0, 1.0);
        if x * x + y * y <= 1.0 {
            kept.push([x, y]);
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyInput("no draws landed in the disk"));
    }
    Ok(kept)
}

/// Uniform samples on the unit disk by rejection from `n_raw` square draws.
pub fn sample_disk(n_raw: usize, seed: u64) -> Result<PointCloud> {
    let xy = disk_params(n_raw, seed)?;
    Ok(disk_from_params(&xy, seed))
}

pub fn disk_from_params(xy: &[[f64; 2]], seed: u64) -> PointCloud {
    let mut coords = Vec::with_capacity(2 * xy.len());
    let mut bdist = Vec::with_capacity(xy.len());
    let mut normals = Vec::with_capacity(2 * xy.len());
    for &[x, y] in xy {
        coords.extend_from_slice(&[x, y]);
        let r = x.hypot(y);
        bdist.push(1.0 - r);
        normals.extend_from_slice(&radial(x, y));
    }
    PointCloud {
        n: xy.len(),
        p: 2,
        coords: coords.clone(),
        intrinsic_dim: 2,
        seed,
        manifold: Manifold::Disk,
        truth: Some(GroundTruth {
            params: coords,
            param_dim: 2,
            boundary_dist: bdist,
            normals: Some(normals),
            exact: true,
        }),
    }
}

fn radial(x: f64, y: f64) -> [f64; 2] {
    let r = x.hypot(y);
    if r > 0.0 {
        [x / r, y / r]
    } else {
        [1.0, 0.0]
    }
}

/// The space curve `t -> (t, log(0.5 + t), cos(pi t))`.
pub fn curve_point(t: f64) -> [f64; 3] {
    [t, (0.5 + t).ln(), (PI * t).cos()]
}

pub fn curve_tangent(t: f64) -> [f64; 3] {
    [1.0, 1.0 / (0.5 + t), -PI * (PI * t).sin()]
}

pub fn curve_speed(t: f64) -> f64 {
    let [a, b, c] = curve_tangent(t);
    (a * a + b * b + c * c).sqrt()
}

/// Arclength of the curve from 0 to `t`.
pub fn curve_arclength(t: f64) -> f64 {
    quadrature::adaptive_simpson(curve_speed, 0.0, t, 1e-10)
}

/// Uniform parameter samples on the space curve.
pub fn sample_curve(n: usize, seed: u64) -> Result<PointCloud> {
    require_count(n)?;
    let mut rng = Stream::new(seed);
    let t: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
    Ok(curve_from_params(t, seed))
}

pub fn curve_from_params(t: Vec<f64>, seed: u64) -> PointCloud {
    let total = curve_arclength(1.0);
    let mut coords = Vec::with_capacity(3 * t.len());
    let mut bdist = Vec::with_capacity(t.len());
    let mut normals = Vec::with_capacity(3 * t.len());
    for &ti in &t {
        coords.extend_from_slice(&curve_point(ti));
        let s = curve_arclength(ti);
        let sign = if s < total - s { -1.0 } else { 1.0 };
        bdist.push(s.min(total - s));
        let v = curve_tangent(ti);
        let sp = curve_speed(ti);
        normals.extend(v.iter().map(|x| sign * x / sp));
    }
    PointCloud {
        n: t.len(),
        p: 3,
        coords,
        intrinsic_dim: 1,
        seed,
        manifold: Manifold::Curve,
        truth: Some(GroundTruth {
            params: t,
            param_dim: 1,
            boundary_dist: bdist,
            normals: Some(normals),
            exact: true,
        }),
    }
}

pub fn surface_point(x: f64, y: f64) -> [f64; 3] {
    [x, y, x * x - y * y * y]
}

/// Graph surface over the unit disk. Boundary distance is the parameter
/// proxy `1 - r` and is flagged approximate.
pub fn sample_surface(n_raw: usize, seed: u64) -> Result<PointCloud> {
    let xy = disk_params(n_raw, seed)?;
    Ok(surface_from_params(&xy, seed))
}

pub fn surface_from_params(xy: &[[f64; 2]], seed: u64) -> PointCloud {
    let mut coords = Vec::with_capacity(3 * xy.len());
    let mut params = Vec::with_capacity(2 * xy.len());
    let mut bdist = Vec::with_capacity(xy.len());
    let mut normals = Vec::with_capacity(3 * xy.len());
    for &[x, y] in xy {
        coords.extend_from_slice(&surface_point(x, y));
        params.extend_from_slice(&[x, y]);
        bdist.push(1.0 - x.hypot(y));
        let [u, v] = radial(x, y);
        let d = [u, v, 2.0 * x * u - 3.0 * y * y * v];
        let nrm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        normals.extend(d.iter().map(|c| c / nrm));
    }
    PointCloud {
        n: xy.len(),
        p: 3,
        coords,
        intrinsic_dim: 2,
        seed,
        manifold: Manifold::Surface,
        truth: Some(GroundTruth {
            params,
            param_dim: 2,
            boundary_dist: bdist,
            normals: Some(normals),
            exact: false,
        }),
    }
}

pub fn torus_point(theta: f64, phi: f64) -> [f64; 3] {
    let r = 3.0 + 1.2 * theta.cos();
    [r * phi.cos(), r * phi.sin(), 1.2 * phi.sin()]
}

/// Whether a parameter pair survives the truncation.
pub fn torus_keep(theta: f64, phi: f64) -> bool {
    (3.0 + 1.2 * theta.cos()) * phi.cos() > -3.4
}

/// Uniform `(theta, phi)` draws on `[0, 2 pi)^2`, truncated at `x = -3.4`.
///
/// Boundary distance is the Euclidean distance to the cutting plane, flagged
/// approximate.
pub fn sample_torus(n_raw: usize, seed: u64) -> Result<PointCloud> {
    require_count(n_raw)?;
    let mut rng = Stream::new(seed);
    let mut coords = Vec::new();
    let mut params = Vec::new();
    let mut bdist = Vec::new();
    for _ in 0..n_raw {
        let theta = rng.uniform_in(0.0, 2.0 * PI);
        let phi = rng.uniform_in(0.0, 2.0 * PI);
        if torus_keep(theta, phi) {
            let x = torus_point(theta, phi);
            bdist.push(x[0] + 3.4);
            coords.extend_from_slice(&x);
            params.extend_from_slice(&[theta, phi]);
        }
    }
    if coords.is_empty() {
        return Err(Error::EmptyInput("no torus draws retained"));
    }
    Ok(PointCloud {
        n: bdist.len(),
        p: 3,
        coords,
        intrinsic_dim: 2,
        seed,
        manifold: Manifold::Torus,
        truth: Some(GroundTruth {
            params,
            param_dim: 2,
            boundary_dist: bdist,
            normals: None,
            exact: false,
        }),
    })
}

/// `n` standard normal vectors in `R^p`.
pub fn sample_gaussian(n: usize, p: usize, seed: u64) -> Result<PointCloud> {
    require_count(n)?;
    if p == 0 {
        return Err(Error::EmptyInput("ambient dimension"));
    }
    let mut rng = Stream::new(seed);
    let coords = (0..n * p).map(|_| rng.normal()).collect();
    Ok(PointCloud {
        n,
        p,
        coords,
        intrinsic_dim: p,
        seed,
        manifold: Manifold::Gaussian,
        truth: None,
    })
}

/// Dispatches on the manifold. For the rejection samplers `n` is the number
/// of raw draws; `p` is only used by the Gaussian cloud.
pub fn sample(manifold: Manifold, n: usize, p: usize, seed: u64) -> Result<PointCloud> {
    match manifold {
        Manifold::Interval => sample_interval(n, seed),
        Manifold::Disk => sample_disk(n, seed),
        Manifold::Curve => sample_curve(n, seed),
        Manifold::Surface => sample_surface(n, seed),
        Manifold::Torus => sample_torus(n, seed),
        Manifold::Gaussian => sample_gaussian(n, p, seed),
        Manifold::Custom => Err(invalid("custom clouds are not sampled")),
    }
}

/// `n` equally spaced points on the unit circle.
pub fn circle_grid(n: usize) -> Result<PointCloud> {
    require_count(n)?;
    let coords = (0..n)
        .flat_map(|k| {
            let a = 2.0 * PI * k as f64 / n as f64;
            [a.cos(), a.sin()]
        })
        .collect();
    PointCloud::new(coords, 2, 1)
}

/// Radius that captures exactly the two adjacent points of `circle_grid(n)`.
pub fn circle_grid_eps(n: usize) -> f64 {
    let c1 = 2.0 * (PI / n as f64).sin();
    let c2 = 2.0 * (2.0 * PI / n as f64).sin();
    0.5 * (c1 + c2)
}

/// Ten points in `R^3` whose 5-NN LLE matrix has an eigenvalue near -2.4233
/// for `c = 1e-3`.
pub fn ten_point_fixture() -> PointCloud {
    let coords = vec![
        -0.56, -0.34, 1.03, //
        -0.51, 0.32, -0.02, //
        -0.53, -1.47, -0.57, //
        1.34, 0.47, -0.15, //
        1.01, -1.56, 1.22, //
        -0.55, -1.0, -0.07, //
        0.09, -1.04, -0.2, //
        -1.27, 2.07, -0.9, //
        1.26, -0.71, -1.2, //
        1.46, 0.0, 0.61,
    ];
    PointCloud::new(coords, 3, 3).expect("fixture is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_basics() {
        let c = sample_interval(1, 3).unwrap();
        let t = c.point(0)[0];
        assert!((0.0..=1.0).contains(&t));
        assert_eq!(c.boundary_dist().unwrap()[0], t.min(1.0 - t));
        let c = sample_interval(8000, 7).unwrap();
        assert_eq!(c.n(), 8000);
        assert!(c.coords().iter().all(|x| (0.0..=1.0).contains(x)));
        let mid = interval_from_params(vec![0.5], 0);
        assert_eq!(mid.boundary_dist().unwrap()[0], 0.5);
        assert!(sample_interval(0, 1).is_err());
    }

    #[test]
    fn determinism() {
        assert_eq!(sample_disk(500, 9).unwrap(), sample_disk(500, 9).unwrap());
        assert_eq!(sample_torus(500, 9).unwrap(), sample_torus(500, 9).unwrap());
        assert_ne!(sample_disk(500, 9).unwrap(), sample_disk(500, 10).unwrap());
    }

    #[test]
    fn disk_count_and_distance() {
        let c = sample_disk(20000, 1).unwrap();
        let mean = 20000.0 * PI / 4.0;
        let sd = (20000.0 * PI / 4.0 * (1.0 - PI / 4.0)).sqrt();
        assert!((c.n() as f64 - mean).abs() < 3.0 * sd, "{}", c.n());
        for i in 0..c.n() {
            let x = c.point(i);
            assert!(x[0].hypot(x[1]) <= 1.0);
        }
        let c = disk_from_params(&[[0.0, 0.0], [0.99, 0.0]], 0);
        let b = c.boundary_dist().unwrap();
        assert_eq!(b[0], 1.0);
        assert!((b[1] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn curve_points_and_arclength() {
        let p = curve_point(0.0);
        assert_eq!(p, [0.0, 0.5f64.ln(), 1.0]);
        let p = curve_point(0.5);
        assert!(p[0] == 0.5 && p[1] == 0.0 && p[2].abs() < 1e-16);
        let oracle = quadrature::gauss_legendre_integrate(curve_speed, 0.0, 1.0, 200);
        assert!((curve_arclength(1.0) - oracle).abs() < 1e-8);
    }

    #[test]
    fn surface_and_torus_points() {
        assert_eq!(surface_point(0.0, 0.0), [0.0, 0.0, 0.0]);
        assert_eq!(surface_point(1.0, 0.0), [1.0, 0.0, 1.0]);
        assert_eq!(surface_point(0.0, 1.0), [0.0, 1.0, -1.0]);
        assert_eq!(torus_point(0.0, 0.0), [4.2, 0.0, 0.0]);
        let q = torus_point(PI, PI);
        assert!((q[0] + 1.8).abs() < 1e-12 && q[1].abs() < 1e-12 && q[2].abs() < 1e-12);
        assert!(torus_keep(PI, PI));
        assert!(!torus_keep(0.0, PI));
    }

    #[test]
    fn torus_retention() {
        let c = sample_torus(25000, 4).unwrap();
        let frac = c.n() as f64 / 25000.0;
        assert!(frac > 0.5 && frac < 1.0, "{frac}");
        let t = c.truth.as_ref().unwrap();
        for i in 0..c.n() {
            let pr = t.param(i);
            assert!(torus_keep(pr[0], pr[1]));
            assert!(t.boundary_dist[i] > 0.0);
        }
    }

    #[test]
    fn gaussian_shape_and_mean() {
        let c = sample_gaussian(400, 200, 5).unwrap();
        assert_eq!((c.n(), c.p()), (400, 200));
        for j in 0..200 {
            let m: f64 = (0..400).map(|i| c.point(i)[j]).sum::<f64>() / 400.0;
            assert!(m.abs() < 4.0 / 20.0);
        }
        let one = sample_gaussian(1, 1, 5).unwrap();
        assert_eq!(one.coords().len(), 1);
    }

    #[test]
    fn manifold_names_roundtrip() {
        for m in [
            Manifold::Interval,
            Manifold::Disk,
            Manifold::Curve,
            Manifold::Surface,
            Manifold::Torus,
            Manifold::Gaussian,
        ] {
            assert_eq!(m.name().parse::<Manifold>().unwrap(), m);
        }
        assert!("sphere".parse::<Manifold>().is_err());
    }
}
