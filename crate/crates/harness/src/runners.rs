//! Experiment runners. Each writes its files under the configured output
//! directory and returns the computed data for programmatic checks.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use lle_toolkit::analytic::AnalyticCoeffs;
use lle_toolkit::boundary::{
    self, boundary_distances, classify, default_threshold, indicator_from_matrix, BoundaryReport,
    Label, Region,
};
use lle_toolkit::io::{self, fmt_real};
use lle_toolkit::lle_core::{
    apply_shifted, build_alpha_kernel_matrix, build_lle_matrix, LleMatrix,
};
use lle_toolkit::neighbors::{build_graph, NeighborGraph};
use lle_toolkit::samplers::{self, Manifold, PointCloud};
use lle_toolkit::sparse::CsrMatrix;
use lle_toolkit::spectral::{
    self, imaginary_diagnostics, spectral_radius_report, EigOptions, ImagDiagnostics, Method,
    Ordering, RadiusReport, Spectrum,
};

use crate::config::{ExperimentConfig, FTest};

pub struct Prepared {
    pub cloud: PointCloud,
    pub graph: NeighborGraph,
    pub lle: LleMatrix,
}

pub fn sample_cloud(cfg: &ExperimentConfig) -> Result<PointCloud> {
    Ok(samplers::sample(cfg.manifold, cfg.scaled_n(), cfg.p, cfg.seed)?)
}

/// Sample, neighbor graph and LLE matrix.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let cloud = sample_cloud(cfg)?;
    let graph = build_graph(&cloud, cfg.scheme())?;
    let lle = build_lle_matrix(&cloud, &graph, cfg.c_rule)?;
    Ok(Prepared { cloud, graph, lle })
}

/// The LLE weights, or the `alpha` kernel when one is configured.
pub fn operator_matrix(cfg: &ExperimentConfig, prep: &Prepared) -> Result<CsrMatrix> {
    match cfg.alpha {
        None => Ok(prep.lle.weights().clone()),
        Some(a) => {
            let k = build_alpha_kernel_matrix(&prep.cloud, &prep.graph, prep.lle.c(), a)?;
            if !k.degenerate_rows.is_empty() {
                eprintln!(
                    "warning: {} rows of the alpha = {a} kernel have non-positive sums",
                    k.degenerate_rows.len()
                );
            }
            Ok(k.matrix)
        }
    }
}

/// Depth of the clipped strip: `t*(d)` unless overridden as a fraction of eps.
pub fn clip_depth(cfg: &ExperimentConfig, d: usize) -> Result<f64> {
    let eps = cfg.bandwidth()?;
    match cfg.tstar_clip {
        Some(r) => Ok(r * eps),
        None => Ok(AnalyticCoeffs::new(d, eps)?.tstar()?),
    }
}

pub fn regions_for(cfg: &ExperimentConfig, prep: &Prepared) -> Result<(Vec<Region>, f64)> {
    let eps = cfg.bandwidth()?;
    let depth = clip_depth(cfg, prep.cloud.intrinsic_dim)?;
    let report = indicator_from_matrix(&prep.lle);
    let regions = boundary::partition_regions(&prep.cloud, eps, depth, Some(&report))?;
    Ok((regions, depth))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn out(cfg: &ExperimentConfig, name: &str) -> PathBuf {
    cfg.output_dir.join(name)
}

fn pairs(z: &[Complex64]) -> Vec<[f64; 2]> {
    z.iter().map(|z| [z.re, z.im]).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenSummary {
    pub manifold: Manifold,
    pub n: usize,
    pub eps: Option<f64>,
    pub knn: Option<usize>,
    pub c: f64,
    pub alpha: Option<f64>,
    pub clipped: bool,
    pub clip_depth: Option<f64>,
    pub retained: usize,
    pub method: Method,
    pub eigenvalues: Vec<[f64; 2]>,
    pub residuals: Vec<f64>,
}

pub struct EigenRun {
    pub cloud: PointCloud,
    /// Original index of each row of the eigenvectors.
    pub kept: Vec<usize>,
    pub spectrum: Spectrum,
    pub summary: EigenSummary,
}

/// Leading eigenpairs of `W` (or of the clipped `W_r`) with per-point CSV.
pub fn run_eigenfunctions(cfg: &ExperimentConfig) -> Result<EigenRun> {
    let prep = prepare(cfg)?;
    let w = operator_matrix(cfg, &prep)?;
    let n = prep.cloud.n();
    let (matrix, kept, depth) = if cfg.clip {
        let (regions, depth) = regions_for(cfg, &prep)?;
        let c = boundary::clip(&w, &regions)?;
        (c.matrix, c.kept, Some(depth))
    } else {
        (w, (0..n).collect(), None)
    };
    let k = cfg.eigen_count.min(matrix.n_rows());
    let spectrum = spectral::eig(&matrix, &EigOptions::top(k, Ordering::ByRealDesc))?;
    let summary = EigenSummary {
        manifold: cfg.manifold,
        n,
        eps: cfg.eps,
        knn: cfg.knn,
        c: prep.lle.c(),
        alpha: cfg.alpha,
        clipped: cfg.clip,
        clip_depth: depth,
        retained: kept.len(),
        method: spectrum.method,
        eigenvalues: pairs(&spectrum.eigenvalues),
        residuals: spectrum.residuals.clone(),
    };
    write_eigenfunctions(&prep.cloud, &kept, &spectrum, &out(cfg, "eigenfunctions.csv"))?;
    io::write_eigenvectors(&spectrum, &out(cfg, "eigenvectors.csv"))?;
    io::write_spectrum(&spectrum, &out(cfg, "spectrum.csv"))?;
    io::write_summary(&summary, &out(cfg, "summary.json"))?;
    Ok(EigenRun {
        cloud: prep.cloud,
        kept,
        spectrum,
        summary,
    })
}

/// `idx,x1..xp,bdist,v1..vk`: real parts of the phase-fixed eigenvectors.
pub fn write_eigenfunctions(
    cloud: &PointCloud,
    kept: &[usize],
    spectrum: &Spectrum,
    path: &Path,
) -> Result<()> {
    let vecs = spectrum.eigenvectors.as_deref().unwrap_or(&[]);
    let mut f = create(path)?;
    let mut header = vec!["idx".to_string()];
    header.extend((1..=cloud.p()).map(|i| format!("x{i}")));
    header.push("bdist".into());
    header.extend((1..=vecs.len()).map(|j| format!("v{j}")));
    writeln!(f, "{}", header.join(","))?;
    let bd = cloud.boundary_dist();
    for (row, &i) in kept.iter().enumerate() {
        let mut line = vec![i.to_string()];
        line.extend(cloud.point(i).iter().map(|&x| fmt_real(x)));
        line.push(bd.map_or(String::new(), |b| fmt_real(b[i])));
        line.extend(vecs.iter().map(|v| fmt_real(v[row].re)));
        writeln!(f, "{}", line.join(","))?;
    }
    f.flush()?;
    Ok(())
}

/// Uniform sampling density of the flat manifolds.
pub fn flat_density(m: Manifold) -> Result<f64> {
    match m {
        Manifold::Interval => Ok(1.0),
        Manifold::Disk => Ok(1.0 / std::f64::consts::PI),
        other => bail!("convergence runs need a flat manifold, not {other}"),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub eps: f64,
    pub c: f64,
    pub interior_count: usize,
    /// Mean of `[(W - I) f]_k / eps^2` over points deeper than `2 eps`.
    pub interior_mean: f64,
    pub interior_target: f64,
    pub interior_err: f64,
    pub boundary_count: usize,
    pub boundary_err: f64,
}

/// Limiting-operator value at a point of boundary distance `t` with outward
/// unit normal `normal`.
pub fn operator_target(
    coeffs: &AnalyticCoeffs,
    f: FTest,
    x: &[f64],
    t: f64,
    normal: &[f64],
    density: f64,
) -> Result<f64> {
    let h = f.hessian_diag(x);
    let g = f.gradient(x);
    let lap: f64 = h.iter().sum();
    let dnn: f64 = h.iter().zip(normal).map(|(h, n)| h * n * n).sum();
    let dn: f64 = g.iter().zip(normal).map(|(g, n)| g * n).sum();
    let (phi1, phi2) = coeffs.phi(t);
    Ok(phi1 * (lap - dnn) + phi2 * dnn + coeffs.potential_v(t, density)? * dn)
}

/// One point of a convergence sweep; also writes `n{n}_eps{eps}/pointwise.csv`.
pub fn convergence_point(cfg: &ExperimentConfig, n: usize, eps: f64) -> Result<ConvergenceRow> {
    let density = flat_density(cfg.manifold)?;
    let mut local = cfg.clone();
    local.n = n;
    local.scale = 1;
    local.eps = Some(eps);
    local.knn = None;
    local.output_dir = cfg.output_dir.join(format!("n{n}_eps{eps}"));
    let prep = prepare(&local)?;
    let cloud = &prep.cloud;
    let d = cloud.intrinsic_dim;
    let coeffs = AnalyticCoeffs::new(d, eps)?;
    let bd = cloud
        .boundary_dist()
        .context("convergence runs need ground-truth boundary distances")?;
    let fvals: Vec<f64> = (0..cloud.n()).map(|i| cfg.f_test.eval(cloud.point(i))).collect();
    let lf = apply_shifted(prep.lle.weights(), &fvals)?;
    let mut file = create(&local.output_dir.join("pointwise.csv"))?;
    writeln!(file, "idx,bdist,value,target")?;
    let (mut ic, mut isum, mut itar, mut ierr) = (0usize, 0.0, 0.0, 0.0);
    let (mut bc, mut berr) = (0usize, 0.0);
    for i in 0..cloud.n() {
        let value = lf[i] / (eps * eps);
        let normal = cloud.normal(i).context("missing normals")?;
        let target = operator_target(&coeffs, cfg.f_test, cloud.point(i), bd[i], normal, density)?;
        writeln!(file, "{i},{},{},{}", fmt_real(bd[i]), fmt_real(value), fmt_real(target))?;
        if bd[i] > 2.0 * eps {
            ic += 1;
            isum += value;
            itar += target;
            ierr += (value - target).abs();
        } else if bd[i] < eps {
            bc += 1;
            berr += (value - target).abs();
        }
    }
    file.flush()?;
    let mean = |s: f64, c: usize| if c == 0 { f64::NAN } else { s / c as f64 };
    Ok(ConvergenceRow {
        n,
        eps,
        c: prep.lle.c(),
        interior_count: ic,
        interior_mean: mean(isum, ic),
        interior_target: mean(itar, ic),
        interior_err: mean(ierr, ic),
        boundary_count: bc,
        boundary_err: mean(berr, bc),
    })
}

/// Runs every `(n, eps)` of the sweep and writes `convergence.csv`.
pub fn run_convergence(cfg: &ExperimentConfig, sweep: &[(usize, f64)]) -> Result<Vec<ConvergenceRow>> {
    let rows = sweep
        .par_iter()
        .map(|&(n, eps)| convergence_point(cfg, n, eps))
        .collect::<Result<Vec<_>>>()?;
    let mut f = create(&out(cfg, "convergence.csv"))?;
    writeln!(
        f,
        "n,eps,c,interior_count,interior_mean,interior_target,interior_err,boundary_count,boundary_err"
    )?;
    for r in &rows {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{},{}",
            r.n,
            fmt_real(r.eps),
            fmt_real(r.c),
            r.interior_count,
            fmt_real(r.interior_mean),
            fmt_real(r.interior_target),
            fmt_real(r.interior_err),
            r.boundary_count,
            fmt_real(r.boundary_err)
        )?;
    }
    f.flush()?;
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct NullCaseSummary {
    pub n: usize,
    pub p: usize,
    pub knn: Option<usize>,
    pub c: f64,
    pub top: [f64; 2],
    pub imag: ImagDiagnostics,
    pub radius: RadiusReport,
}

pub struct NullCaseRun {
    pub spectrum: Spectrum,
    pub summary: NullCaseSummary,
}

/// Full complex spectrum of an LLE matrix on structureless Gaussian data.
pub fn run_null_case(cfg: &ExperimentConfig) -> Result<NullCaseRun> {
    let prep = prepare(cfg)?;
    let w = prep.lle.weights();
    let spectrum = spectral::eig(
        w,
        &EigOptions {
            vectors: false,
            ..EigOptions::default()
        },
    )?;
    let summary = NullCaseSummary {
        n: prep.cloud.n(),
        p: prep.cloud.p(),
        knn: cfg.knn,
        c: prep.lle.c(),
        top: [spectrum.eigenvalues[0].re, spectrum.eigenvalues[0].im],
        imag: imaginary_diagnostics(w)?,
        radius: spectral_radius_report(w)?,
    };
    io::write_spectrum(&spectrum, &out(cfg, "spectrum.csv"))?;
    io::write_summary(&summary, &out(cfg, "diagnostics.json"))?;
    Ok(NullCaseRun { spectrum, summary })
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionStat {
    pub region: &'static str,
    pub count: usize,
    pub labeled_boundary: usize,
    pub mean_b: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IndicatorSummary {
    pub n: usize,
    pub d: usize,
    pub eps: f64,
    pub c: f64,
    pub threshold: f64,
    pub limit_at_boundary: f64,
    pub boundary_labels: usize,
    pub missing: usize,
    /// Mean `B_k` over points closer than `eps / 4` to the boundary.
    pub near_quarter_mean: f64,
    pub near_quarter_count: usize,
    pub near_eighth_mean: f64,
    pub near_eighth_count: usize,
    /// Mean `|B_k|` over points deeper than `2 eps`.
    pub interior_mean_abs: f64,
    pub interior_count: usize,
    pub regions: Vec<RegionStat>,
}

pub struct IndicatorRun {
    pub report: BoundaryReport,
    pub bdist: Vec<f64>,
    pub summary: IndicatorSummary,
}

/// Indicator, classification and the `(t / eps, B)` profile.
pub fn run_indicator(cfg: &ExperimentConfig) -> Result<IndicatorRun> {
    let eps = cfg.bandwidth()?;
    let cloud = sample_cloud(cfg)?;
    let d = cloud.intrinsic_dim;
    let graph = build_graph(&cloud, cfg.scheme())?;
    let c = cfg.c_rule.resolve(cloud.n(), d, graph.scheme)?;
    let raw = boundary::indicator(&cloud, &graph, cfg.c_rule)?;
    let tau = cfg.threshold.unwrap_or_else(|| default_threshold(d));
    let mut report = classify(&raw, tau);
    let bdist = boundary_distances(&cloud, eps, Some(&report))?;
    let coeffs = AnalyticCoeffs::new(d, eps)?;
    let depth = clip_depth(cfg, d)?;
    let regions = boundary::partition_distances(&bdist, eps, depth);
    report.regions = Some(regions.clone());

    let band_mean = |limit: f64| {
        let v: Vec<f64> = (0..cloud.n())
            .filter(|&k| bdist[k] < limit && !report.b_values[k].is_nan())
            .map(|k| report.b_values[k])
            .collect();
        (v.iter().sum::<f64>() / v.len() as f64, v.len())
    };
    let (near_quarter_mean, near_quarter_count) = band_mean(eps / 4.0);
    let (near_eighth_mean, near_eighth_count) = band_mean(eps / 8.0);
    let labels = report.labels.as_ref().expect("classified");
    let stats: Vec<RegionStat> = [Region::Wave, Region::NearBoundary, Region::Transition, Region::Interior]
        .into_iter()
        .map(|r| {
            let idx: Vec<usize> = (0..cloud.n())
                .filter(|&k| regions[k] == r && !report.b_values[k].is_nan())
                .collect();
            RegionStat {
                region: r.name(),
                count: idx.len(),
                labeled_boundary: idx
                    .iter()
                    .filter(|&&k| labels[k] == Some(Label::Boundary))
                    .count(),
                mean_b: idx.iter().map(|&k| report.b_values[k]).sum::<f64>() / idx.len() as f64,
            }
        })
        .collect();
    let interior: Vec<f64> = (0..cloud.n())
        .filter(|&k| regions[k] == Region::Interior && !report.b_values[k].is_nan())
        .map(|k| report.b_values[k].abs())
        .collect();
    let summary = IndicatorSummary {
        n: cloud.n(),
        d,
        eps,
        c,
        threshold: tau,
        limit_at_boundary: coeffs.b_at_boundary(),
        boundary_labels: report.boundary_count(),
        missing: report.missing().len(),
        near_quarter_mean,
        near_quarter_count,
        near_eighth_mean,
        near_eighth_count,
        interior_mean_abs: interior.iter().sum::<f64>() / interior.len() as f64,
        interior_count: interior.len(),
        regions: stats,
    };

    io::write_report(&report, Some(&bdist), &out(cfg, "indicator.csv"))?;
    let mut f = create(&out(cfg, "profile.csv"))?;
    writeln!(f, "t_over_eps,B,B_limit")?;
    for k in 0..cloud.n() {
        let b = report.b_values[k];
        if b.is_nan() || !bdist[k].is_finite() {
            continue;
        }
        writeln!(
            f,
            "{},{},{}",
            fmt_real(bdist[k] / eps),
            fmt_real(b),
            fmt_real(coeffs.b(bdist[k]))
        )?;
    }
    f.flush()?;
    io::write_summary(&summary, &out(cfg, "indicator_summary.json"))?;
    Ok(IndicatorRun {
        report,
        bdist,
        summary,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SigmaRow {
    pub t_over_eps: f64,
    pub s0: f64,
    pub s1d: f64,
    pub s2: f64,
    pub s2d: f64,
    pub s3: f64,
    pub s3d: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub v: f64,
    pub b: f64,
}

/// Analytic coefficients at `t = r eps` for each `r` in `ratios`.
pub fn sigma_table(d: usize, eps: f64, ratios: &[f64], density: f64) -> Result<Vec<SigmaRow>> {
    let coeffs = AnalyticCoeffs::new(d, eps)?;
    ratios
        .iter()
        .map(|&r| {
            let t = r * eps;
            let s = coeffs.sigmas(t);
            let (phi1, phi2) = coeffs.phi(t);
            Ok(SigmaRow {
                t_over_eps: r,
                s0: s.s0,
                s1d: s.s1d,
                s2: s.s2,
                s2d: s.s2d,
                s3: s.s3,
                s3d: s.s3d,
                phi1,
                phi2,
                v: coeffs.potential_v(t, density)?,
                b: coeffs.b(t),
            })
        })
        .collect()
}

pub fn write_sigma_table(rows: &[SigmaRow], path: &Path) -> Result<()> {
    let mut f = create(path)?;
    writeln!(f, "t/eps,s0,s1d,s2,s2d,s3,s3d,phi1,phi2,V,B")?;
    for r in rows {
        let vals = [
            r.t_over_eps, r.s0, r.s1d, r.s2, r.s2d, r.s3, r.s3d, r.phi1, r.phi2, r.v, r.b,
        ];
        let line: Vec<String> = vals.iter().map(|&x| fmt_real(x)).collect();
        writeln!(f, "{}", line.join(","))?;
    }
    f.flush()?;
    Ok(())
}
