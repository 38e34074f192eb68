use faer::{Mat, Side};

use super::AnalyticCoeffs;
use crate::error::{invalid, Error, Result};
use crate::quadrature::gauss_legendre;

const NODES: usize = 48;

/// Moment `int u^v du` over `{|u| <= eps, u_d <= t_bd}` in `R^d`.
///
/// Evaluated by nested Gauss-Legendre rules after the substitution
/// `u_k = rho sin(theta)` on every coordinate, which turns the half-integer
/// powers of the ball's sections into smooth integrands. The result does not
/// use the sigma closed forms.
pub fn moments_oracle(d: usize, eps: f64, t_bd: f64, v: &[usize]) -> Result<f64> {
    if d == 0 || v.len() != d {
        return Err(invalid(format!(
            "multi-index length {} does not match dimension {d}",
            v.len()
        )));
    }
    if v.iter().sum::<usize>() > 3 {
        return Err(invalid("moments of total order above 3 are not supported"));
    }
    if !(eps > 0.0) || t_bd < 0.0 {
        return Err(invalid("need eps > 0 and t_bd >= 0"));
    }
    let rule = gauss_legendre(NODES);
    Ok(section_moment(&rule, eps, v, Some(t_bd)))
}

/// Moment over `{|u| <= rho, u_k <= cut}` where `k = v.len()`.
fn section_moment(rule: &(Vec<f64>, Vec<f64>), rho: f64, v: &[usize], cut: Option<f64>) -> f64 {
    let Some((&last, rest)) = v.split_last() else {
        return 1.0;
    };
    let hi = match cut {
        Some(c) if c < rho => (c / rho).asin(),
        _ => std::f64::consts::FRAC_PI_2,
    };
    let lo = -std::f64::consts::FRAC_PI_2;
    let (x, w) = rule;
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let mut acc = 0.0;
    for (xi, wi) in x.iter().zip(w) {
        let th = mid + half * xi;
        let (sin, cos) = th.sin_cos();
        let u = rho * sin;
        let inner = section_moment(rule, rho * cos, rest, None);
        acc += wi * u.powi(last as i32) * inner * rho * cos;
    }
    acc * half
}

/// Outcome of the local covariance comparison.
#[derive(Debug, Clone)]
pub struct LocalCovReport {
    /// Eigenvalues of the covariance, descending.
    pub eigenvalues: Vec<f64>,
    /// Predicted leading eigenvalues, descending.
    pub expected: Vec<f64>,
    pub max_rel_err: f64,
    pub trailing_max: f64,
    pub ok: bool,
}

/// Builds the local covariance of a flat patch at boundary distance `t_bd`,
/// embedded in `R^(d+2)` by a fixed rotation, and compares its spectrum with
/// `p_val * mu_{2 e_i}` from the sigma functions.
pub fn local_cov_check(d: usize, eps: f64, t_bd: f64, p_val: f64) -> Result<LocalCovReport> {
    let coeffs = AnalyticCoeffs::new(d, eps)?;
    let p = d + 2;
    let mut inner = Mat::<f64>::zeros(d, d);
    for i in 0..d {
        for j in 0..=i {
            let mut v = vec![0; d];
            v[i] += 1;
            v[j] += 1;
            let m = p_val * moments_oracle(d, eps, t_bd, &v)?;
            inner[(i, j)] = m;
            inner[(j, i)] = m;
        }
    }
    // Householder reflection moves the tangent block off the coordinate axes.
    let dir: Vec<f64> = (0..p).map(|k| 1.0 + k as f64).collect();
    let nrm2: f64 = dir.iter().map(|x| x * x).sum();
    let rot = Mat::<f64>::from_fn(p, p, |i, j| {
        (if i == j { 1.0 } else { 0.0 }) - 2.0 * dir[i] * dir[j] / nrm2
    });
    let cov = Mat::<f64>::from_fn(p, p, |i, j| {
        let mut s = 0.0;
        for a in 0..d {
            for b in 0..d {
                s += rot[(i, a)] * inner[(a, b)] * rot[(j, b)];
            }
        }
        s
    });
    let evd = cov
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let mut eigenvalues: Vec<f64> = evd.S().column_vector().iter().copied().collect();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));

    let scale = eps.powi(d as i32 + 2) * p_val;
    let s = coeffs.sigmas(t_bd);
    let mut expected = vec![s.s2 * scale; d - 1];
    expected.push(s.s2d * scale);
    expected.sort_by(|a, b| b.total_cmp(a));

    let max_rel_err = eigenvalues
        .iter()
        .zip(&expected)
        .map(|(a, b)| ((a - b) / b).abs())
        .fold(0.0, f64::max);
    let trailing_max = eigenvalues[d..].iter().map(|x| x.abs()).fold(0.0, f64::max);
    let ok = max_rel_err <= 1e-3 && trailing_max <= 1e-8 * eigenvalues[0];
    Ok(LocalCovReport {
        eigenvalues,
        expected,
        max_rel_err,
        trailing_max,
        ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{sphere_volume, SigmaKind};

    #[test]
    fn full_ball_volume() {
        for d in 1..=3 {
            let eps: f64 = 0.7;
            let got = moments_oracle(d, eps, eps, &vec![0; d]).unwrap();
            let want = sphere_volume(d - 1) * eps.powi(d as i32) / d as f64;
            assert!((got - want).abs() < 1e-12 * want, "d={d}");
        }
    }

    #[test]
    fn odd_tangential_moments_vanish() {
        let m = moments_oracle(3, 1.0, 0.3, &[1, 0, 0]).unwrap();
        assert!(m.abs() < 1e-13);
        let m = moments_oracle(3, 1.0, 0.3, &[1, 1, 1]).unwrap();
        assert!(m.abs() < 1e-13);
        let m = moments_oracle(2, 1.0, 0.3, &[1, 2]).unwrap();
        assert!(m.abs() < 1e-13);
    }

    #[test]
    fn d2_first_normal_moment() {
        let eps = 0.4;
        let mu = moments_oracle(2, eps, eps / 2.0, &[0, 1]).unwrap();
        let c = AnalyticCoeffs::new(2, eps).unwrap();
        let sigma = c.sigma(SigmaKind::S1d, eps / 2.0);
        assert!((mu / eps.powi(3) - sigma).abs() < 1e-4);
    }

    #[test]
    fn rejects_high_order() {
        assert!(moments_oracle(2, 1.0, 0.0, &[2, 2]).is_err());
        assert!(moments_oracle(2, 1.0, 0.0, &[1]).is_err());
    }

    #[test]
    fn local_covariance_examples() {
        let eps: f64 = 0.3;
        let r = local_cov_check(2, eps, eps, 2.0).unwrap();
        assert!(r.ok, "{r:?}");
        let want = 2.0 * std::f64::consts::PI * eps.powi(4) / 4.0;
        assert!((r.eigenvalues[0] - want).abs() < 1e-10 * want);
        assert!((r.eigenvalues[1] - want).abs() < 1e-10 * want);

        let r = local_cov_check(1, eps, 0.0, 1.5).unwrap();
        assert!(r.ok, "{r:?}");
        assert!((r.eigenvalues[0] - 1.5 * eps.powi(3) / 3.0).abs() < 1e-12);
        assert!(r.trailing_max < 1e-15);
    }
}
