use lle_harness::config::{ExperimentConfig, FTest};
use lle_harness::runners::{self, operator_target};
use lle_toolkit::analytic::{d_epsilon_1d, AnalyticCoeffs};
use lle_toolkit::samplers::Manifold;

fn preset(m: Manifold, dir: &std::path::Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(m);
    cfg.output_dir = dir.to_path_buf();
    cfg
}

/// Squared correlation of `y` with its least-squares fit on `cols` plus a constant.
fn r_squared(y: &[f64], cols: &[Vec<f64>]) -> f64 {
    let n = y.len();
    let k = cols.len() + 1;
    let row = |i: usize| {
        let mut r = vec![1.0];
        r.extend(cols.iter().map(|c| c[i]));
        r
    };
    let mut a = vec![vec![0.0; k + 1]; k];
    for i in 0..n {
        let r = row(i);
        for p in 0..k {
            for q in 0..k {
                a[p][q] += r[p] * r[q];
            }
            a[p][k] += r[p] * y[i];
        }
    }
    for c in 0..k {
        for r in 0..k {
            if r != c {
                let f = a[r][c] / a[c][c];
                for j in c..=k {
                    a[r][j] -= f * a[c][j];
                }
            }
        }
    }
    let beta: Vec<f64> = (0..k).map(|i| a[i][k] / a[i][i]).collect();
    let mean = y.iter().sum::<f64>() / n as f64;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for i in 0..n {
        let fit: f64 = row(i).iter().zip(&beta).map(|(x, b)| x * b).sum();
        ss_res += (y[i] - fit).powi(2);
        ss_tot += (y[i] - mean).powi(2);
    }
    1.0 - ss_res / ss_tot
}

#[test]
fn interval_preset_constant_and_linear_modes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = preset(Manifold::Interval, dir.path());
    cfg.eigen_count = 3;
    let run = runners::run_eigenfunctions(&cfg).unwrap();
    let vals = &run.spectrum.eigenvalues;
    assert!((vals[0].re - 1.0).abs() < 1e-8 && vals[0].im.abs() < 1e-8);
    // The regularizer breaks exact linear reproduction; see the README.
    assert!((1.0 - vals[1].re).abs() < 1e-3, "{}", vals[1]);
    let v = &run.spectrum.eigenvectors.as_ref().unwrap()[1];
    let t: Vec<f64> = run.kept.iter().map(|&i| run.cloud.point(i)[0]).collect();
    let re: Vec<f64> = v.iter().map(|z| z.re).collect();
    assert!(r_squared(&re, &[t]) > 0.98);
    for f in ["eigenfunctions.csv", "eigenvectors.csv", "eigenvectors.json", "spectrum.csv", "summary.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn disk_preset_linear_modes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = preset(Manifold::Disk, dir.path());
    cfg.eigen_count = 3;
    let run = runners::run_eigenfunctions(&cfg).unwrap();
    let vals = &run.spectrum.eigenvalues;
    assert!((vals[0].re - 1.0).abs() < 1e-8);
    let vecs = run.spectrum.eigenvectors.as_ref().unwrap();
    let x: Vec<f64> = run.kept.iter().map(|&i| run.cloud.point(i)[0]).collect();
    let y: Vec<f64> = run.kept.iter().map(|&i| run.cloud.point(i)[1]).collect();
    for j in 1..3 {
        assert!(1.0 - vals[j].re < 1e-2, "{}", vals[j]);
        let re: Vec<f64> = vecs[j].iter().map(|z| z.re).collect();
        assert!(r_squared(&re, &[x.clone(), y.clone()]) > 0.98);
    }
}

#[test]
fn clipped_interval_leading_mode_vanishes_at_ends() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = preset(Manifold::Interval, dir.path());
    cfg.clip = true;
    cfg.eigen_count = 1;
    let run = runners::run_eigenfunctions(&cfg).unwrap();
    let v = &run.spectrum.eigenvectors.as_ref().unwrap()[0];
    let t: Vec<f64> = run.kept.iter().map(|&i| run.cloud.point(i)[0]).collect();
    let lo = (0..t.len()).min_by(|&a, &b| t[a].total_cmp(&t[b])).unwrap();
    let hi = (0..t.len()).max_by(|&a, &b| t[a].total_cmp(&t[b])).unwrap();
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(v[lo].norm() <= 0.1 * max && v[hi].norm() <= 0.1 * max);
    let depth = run.summary.clip_depth.unwrap();
    assert!((depth - (2.0 - 3f64.sqrt()) * 0.01).abs() < 1e-12);
}

#[test]
fn constant_function_has_zero_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = preset(Manifold::Interval, dir.path());
    cfg.f_test = FTest::Constant;
    let rows = runners::run_convergence(&cfg, &[(2000, 0.02), (4000, 0.02)]).unwrap();
    for r in rows {
        assert!(r.interior_err < 1e-9 && r.boundary_err < 1e-9, "{r:?}");
    }
    assert!(dir.path().join("convergence.csv").exists());
    assert!(dir.path().join("n2000_eps0.02/pointwise.csv").exists());
}

#[test]
fn disk_squared_radius_converges_in_interior() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = preset(Manifold::Disk, dir.path());
    let r = &runners::run_convergence(&cfg, &[(20000, 0.1)]).unwrap()[0];
    assert_eq!(r.interior_target, 0.5);
    assert!((r.interior_mean - 0.5).abs() < 0.075, "{r:?}");
}

#[test]
fn convergence_rejects_curved_manifolds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = preset(Manifold::Curve, dir.path());
    assert!(runners::run_convergence(&cfg, &[(500, 0.05)]).is_err());
}

#[test]
fn boundary_target_matches_one_dimensional_operator() {
    let eps = 0.01;
    let coeffs = AnalyticCoeffs::new(1, eps).unwrap();
    let t = eps / 2.0;
    let got = operator_target(&coeffs, FTest::SquaredRadius, &[t], t, &[-1.0], 1.0).unwrap();
    let (_, phi2) = coeffs.phi(t);
    let spelled = phi2 * 2.0 + (-8.0 / 9.0) * (-2.0 * t);
    let one_dim = d_epsilon_1d(2.0 * t, 2.0, t, 1.0, eps, 1.0).unwrap();
    assert!((got - spelled).abs() < 1e-12);
    assert!((got - one_dim).abs() < 1e-12);
}

#[test]
fn null_case_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let run = runners::run_null_case(&preset(Manifold::Gaussian, dir.path())).unwrap();
    let s = &run.summary;
    assert!((s.top[0] - 1.0).abs() < 1e-8 && s.top[1].abs() < 1e-8);
    assert!(s.imag.max_imag > 0.01);
    assert!(s.imag.bauer_fike_ok);
    assert_eq!(run.spectrum.len(), 400);
}

#[test]
fn indicator_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = preset(Manifold::Interval, dir.path());
    cfg.n = 3000;
    cfg.eps = Some(0.02);
    let a = runners::run_indicator(&cfg).unwrap();
    let b = runners::run_indicator(&cfg).unwrap();
    assert_eq!(
        a.report.b_values.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
        b.report.b_values.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
    );
    let s = &a.summary;
    assert!(s.interior_mean_abs < 0.1);
    assert!(s.near_quarter_mean > 0.4);
    assert!(s.boundary_labels > 0);
    assert_eq!(s.regions.len(), 4);
}

#[test]
fn sigma_table_interior_rows() {
    let rows = runners::sigma_table(2, 0.1, &[0.0, 0.5, 1.0, 1.2], 1.0).unwrap();
    for r in &rows[2..] {
        assert!((r.phi1 - 0.125).abs() < 1e-14 && (r.phi2 - 0.125).abs() < 1e-14);
        assert_eq!((r.v, r.b), (0.0, 0.0));
    }
    assert!(rows[0].phi2 < 0.0 && rows[0].v < 0.0);
}
