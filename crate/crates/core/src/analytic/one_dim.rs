//! The limiting operator on a curve `[0, a]` and its Sturm-Liouville form.

use crate::error::{invalid, Result};

const SQRT3: f64 = 1.732_050_807_568_877_2;

fn check_domain(t: f64, a: f64, eps: f64) -> Result<()> {
    if !(eps > 0.0) {
        return Err(invalid("bandwidth must be positive"));
    }
    if a <= 2.0 * eps {
        return Err(invalid(format!(
            "boundary layers overlap: domain length {a} <= 2 * eps = {}",
            2.0 * eps
        )));
    }
    if !(0.0..=a).contains(&t) {
        return Err(invalid(format!("t = {t} outside [0, {a}]")));
    }
    Ok(())
}

/// Second-order coefficient on the left boundary layer, `s = t / eps`.
fn left_a(s: f64) -> f64 {
    -(1.0 - 4.0 * s + s * s) / 12.0
}

/// First-order coefficient on the left boundary layer (multiplies `f'`).
fn left_b(t: f64, eps: f64, density: f64) -> f64 {
    6.0 * eps * eps * (eps - t) / (density * (eps + t).powi(3))
}

/// Limiting LLE operator applied to `f` at `t` on the curve `[0, a]`, given
/// `f'(t)`, `f''(t)` and the sampling density value at `t`.
pub fn d_epsilon_1d(f1: f64, f2: f64, t: f64, a: f64, eps: f64, density: f64) -> Result<f64> {
    check_domain(t, a, eps)?;
    if !(density > 0.0) {
        return Err(invalid("density must be positive"));
    }
    let (ac, bc) = coefficients(t, a, eps, density);
    Ok(ac * f2 + bc * f1)
}

fn coefficients(t: f64, a: f64, eps: f64, density: f64) -> (f64, f64) {
    if t < eps {
        (left_a(t / eps), left_b(t, eps, density))
    } else if t <= a - eps {
        (1.0 / 6.0, 0.0)
    } else {
        let u = a - t;
        (left_a(u / eps), -left_b(u, eps, density))
    }
}

/// `(A_eps(t), B_eps(t))` for the uniform density `1 / a` on `[0, a]`.
pub fn sl_coefficients(t: f64, eps: f64, a: f64) -> Result<(f64, f64)> {
    check_domain(t, a, eps)?;
    Ok(coefficients(t, a, eps, 1.0 / a))
}

/// Integrating factor `p` and weight `w` of the Sturm-Liouville form, with
/// the auxiliary functions `g` and `h` evaluated at the mirrored point.
#[derive(Debug, Clone, Copy)]
pub struct SlFunctions {
    pub g: f64,
    pub h: f64,
    pub p: f64,
    pub w: f64,
}

/// Evaluates `g`, `h` on `[0, eps]`.
///
/// The `(t + eps)` exponent is `-8 a eps`; that is the sign for which
/// `g' / g = B / A`.
fn g_h(t: f64, eps: f64, a: f64) -> (f64, f64) {
    let ae = a * eps;
    let e1 = (4.0 + 2.0 * SQRT3) * ae;
    let e2 = (4.0 - 2.0 * SQRT3) * ae;
    let d1 = (t - (2.0 - SQRT3) * eps).abs();
    let d2 = (t - (2.0 + SQRT3) * eps).abs();
    let common = (t + eps).powf(-8.0 * ae)
        * (12.0 * ae * eps * eps / (eps + t).powi(2) + 12.0 * ae * eps / (eps + t)).exp();
    let g = d1.powf(e1) * d2.powf(e2) * common;
    let h = if d1 == 0.0 {
        f64::INFINITY
    } else {
        d1.powf(e1 - 1.0) * d2.powf(e2 - 1.0) * common
    };
    (g, h)
}

/// Sturm-Liouville functions for the uniform density on `[0, a]`.
///
/// `w` carries the factor `12 eps^2` so that `p / w = A_eps` and
/// `p' / w = B_eps` hold exactly. At the degeneracy points `h` and `w` are
/// `+inf` and `p` is 0.
pub fn sl_functions(t: f64, eps: f64, a: f64) -> Result<SlFunctions> {
    check_domain(t, a, eps)?;
    let tstar = (2.0 - SQRT3) * eps;
    let (u, mirrored) = if t <= eps {
        (t, false)
    } else if t < a - eps {
        (eps, false)
    } else {
        (a - t, true)
    };
    let (g, h) = g_h(u, eps, a);
    let wave = if mirrored { u < tstar } else { t < tstar };
    let p = if u == tstar {
        0.0
    } else if wave {
        -g
    } else {
        g
    };
    Ok(SlFunctions {
        g,
        h,
        p,
        w: 12.0 * eps * eps * h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_value() {
        let v = d_epsilon_1d(3.0, 6.0, 0.5, 1.0, 0.1, 1.0).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degeneracy_leaves_first_order_term() {
        let eps = 0.1;
        let t = (2.0 - SQRT3) * eps;
        let a = 1.0;
        let p = 1.0 / a;
        let with = d_epsilon_1d(0.7, 5.0, t, a, eps, p).unwrap();
        let without = d_epsilon_1d(0.7, 0.0, t, a, eps, p).unwrap();
        assert!((with - without).abs() < 1e-14);
        let s = 2.0 - SQRT3;
        let coeff = 6.0 * (1.0 - s) / (p * (1.0 + s).powi(3));
        assert!((without - coeff * 0.7).abs() < 1e-13);
    }

    #[test]
    fn overlapping_layers_rejected() {
        assert!(d_epsilon_1d(0.0, 0.0, 0.1, 0.2, 0.1, 1.0).is_err());
        assert!(sl_functions(0.1, 0.1, 0.15).is_err());
    }

    #[test]
    fn right_layer_mirrors_left() {
        let (a, eps) = (1.0, 0.1);
        for t in [0.0, 0.02, 0.05, 0.09] {
            let l = d_epsilon_1d(1.3, -0.4, t, a, eps, 1.0).unwrap();
            let r = d_epsilon_1d(-1.3, -0.4, a - t, a, eps, 1.0).unwrap();
            assert!((l - r).abs() < 1e-13);
        }
    }

    #[test]
    fn p_zero_at_degeneracy_and_negative_in_wave_region() {
        let (eps, a) = (0.05, 1.0);
        let ts = (2.0 - SQRT3) * eps;
        let f = sl_functions(ts, eps, a).unwrap();
        assert_eq!(f.p, 0.0);
        assert!(f.w.is_infinite() && f.w > 0.0);
        assert_eq!(sl_functions(a - ts, eps, a).unwrap().p, 0.0);
        for i in 1..20 {
            let t = ts * i as f64 / 20.0;
            assert!(sl_functions(t, eps, a).unwrap().p < 0.0);
            assert!(sl_functions(a - t, eps, a).unwrap().p < 0.0);
        }
        assert!(sl_functions(0.5, eps, a).unwrap().p > 0.0);
    }

    #[test]
    fn sturm_liouville_identity() {
        let (eps, a) = (0.05, 1.0);
        let ts = (2.0 - SQRT3) * eps;
        let step = 1e-6 * eps;
        for i in 1..200 {
            let t = eps * i as f64 / 200.0;
            if (t - ts).abs() < 1e-3 * eps {
                continue;
            }
            let f = sl_functions(t, eps, a).unwrap();
            let dp = (sl_functions(t + step, eps, a).unwrap().p
                - sl_functions(t - step, eps, a).unwrap().p)
                / (2.0 * step);
            let (aa, bb) = sl_coefficients(t, eps, a).unwrap();
            assert!((f.p / f.w - aa).abs() < 1e-10, "t={t}");
            assert!((dp / f.w - bb).abs() < 1e-5, "t={t}: {} vs {bb}", dp / f.w);
        }
    }
}
