//! Closed-form boundary coefficients of the LLE operator.
//!
//! All quantities are written in the rescaled boundary distance `s = t / eps`
//! of a flat region `{|u| <= 1, u_d <= s}` whose outward normal is `e_d`.
//! The sigma functions are normalized moments of that region.

mod moments;
mod one_dim;

pub use moments::{local_cov_check, moments_oracle, LocalCovReport};
pub use one_dim::{d_epsilon_1d, sl_coefficients, sl_functions, SlFunctions};

use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::quadrature;

/// Volume of the unit sphere `S^m` embedded in `R^(m+1)`.
pub fn sphere_volume(m: usize) -> f64 {
    2.0 * PI.powf((m as f64 + 1.0) / 2.0) / gamma_half(m + 1)
}

/// Gamma(k / 2) for a positive integer k.
fn gamma_half(k: usize) -> f64 {
    assert!(k > 0);
    let mut g = if k.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    let mut x = if k.is_multiple_of(2) { 1.0 } else { 0.5 };
    while 2.0 * x < k as f64 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Volume of the unit ball in `R^(d-1)`, i.e. `|S^(d-2)| / (d-1)`.
///
/// For `d = 1` this is the zero-dimensional ball, whose volume is taken to be 1.
/// Every sigma function goes through here.
pub fn cap_factor(d: usize) -> f64 {
    assert!(d >= 1);
    if d == 1 {
        1.0
    } else {
        sphere_volume(d - 2) / (d as f64 - 1.0)
    }
}

/// Bounds on the sphere ratio `|S^(d-2)|^2 / ((d-1)^2 |S^(d-1)|^2)`.
#[derive(Debug, Clone, Copy)]
pub struct SphereRatio {
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
}

impl SphereRatio {
    pub fn holds(&self) -> bool {
        self.lower < self.value && self.value < self.upper
    }
}

pub fn sphere_ratio(d: usize) -> SphereRatio {
    let df = d as f64;
    let a = cap_factor(d);
    let s = sphere_volume(d - 1);
    SphereRatio {
        lower: (df + 1.0).powi(2) * (df + 3.0) / (8.0 * df * df * (df + 2.0).powi(2)),
        value: a * a / (s * s),
        upper: (df + 1.0).powi(2) / (4.0 * df * df * (df + 2.0)),
    }
}

pub fn sphere_ratio_check(d: usize) -> bool {
    sphere_ratio(d).holds()
}

/// Which sigma function to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaKind {
    /// Volume of the truncated ball.
    S0,
    /// First moment along the normal.
    S1d,
    /// Second moment along a tangential direction.
    S2,
    /// Second moment along the normal.
    S2d,
    /// Mixed moment: tangential squared times normal.
    S3,
    /// Third moment along the normal.
    S3d,
}

/// All six sigma values at one boundary distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sigmas {
    pub s0: f64,
    pub s1d: f64,
    pub s2: f64,
    pub s2d: f64,
    pub s3: f64,
    pub s3d: f64,
}

/// Limit values of the LLE kernel.
#[derive(Debug, Clone, Copy)]
pub struct KernelLimits {
    /// Smallest value of the limiting kernel, attained at a boundary point.
    pub kernel_inf: f64,
    /// Limiting kernel value at interior points.
    pub interior: f64,
}

/// Diffusion-map comparison coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmCoeffs {
    pub psi1: f64,
    pub psi2: f64,
    pub drift: f64,
}

/// Evaluator for the boundary coefficients in dimension `d` at bandwidth `eps`.
#[derive(Debug, Clone, Copy)]
pub struct AnalyticCoeffs {
    d: usize,
    eps: f64,
    sphere: f64,
    cap: f64,
    use_closed_form: bool,
}

impl AnalyticCoeffs {
    pub fn new(d: usize, eps: f64) -> Result<Self> {
        if d == 0 {
            return Err(invalid("intrinsic dimension must be at least 1"));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(invalid(format!("bandwidth must be positive, got {eps}")));
        }
        Ok(Self {
            d,
            eps,
            sphere: sphere_volume(d - 1),
            cap: cap_factor(d),
            use_closed_form: d <= 3,
        })
    }

    /// Forces adaptive quadrature for the slab integrals even when closed
    /// forms exist. Used to cross-check the two routes.
    pub fn with_quadrature(mut self) -> Self {
        self.use_closed_form = false;
        self
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// True when the `d = 1` ball-volume convention is in effect.
    pub fn convention_flag(&self) -> bool {
        self.d == 1
    }

    /// `|S^(d-1)|`.
    pub fn sphere(&self) -> f64 {
        self.sphere
    }

    fn scaled(&self, t: f64) -> Option<f64> {
        assert!(t >= 0.0, "boundary distance must be nonnegative, got {t}");
        let s = t / self.eps;
        (s < 1.0).then_some(s)
    }

    /// `int_0^s (1 - x^2)^(k/2) dx`.
    fn slab(&self, k: usize, s: f64) -> f64 {
        if self.use_closed_form && k <= 4 {
            slab_closed(k, s)
        } else {
            let h = 0.5 * k as f64;
            quadrature::integrate(|x| (1.0 - x * x).max(0.0).powf(h), 0.0, s, 1e-12, 1e-13)
        }
    }

    pub fn sigma(&self, kind: SigmaKind, t: f64) -> f64 {
        let d = self.d as f64;
        let a = self.cap;
        let half_ball = self.sphere / (2.0 * d);
        let half_m2 = self.sphere / (2.0 * d * (d + 2.0));
        match self.scaled(t) {
            None => match kind {
                SigmaKind::S0 => 2.0 * half_ball,
                SigmaKind::S2 | SigmaKind::S2d => 2.0 * half_m2,
                SigmaKind::S1d | SigmaKind::S3 | SigmaKind::S3d => 0.0,
            },
            Some(s) => {
                let q = 1.0 - s * s;
                match kind {
                    SigmaKind::S0 => half_ball + a * self.slab(self.d - 1, s),
                    SigmaKind::S1d => -a / (d + 1.0) * q.powf((d + 1.0) / 2.0),
                    SigmaKind::S2 => half_m2 + a / (d + 1.0) * self.slab(self.d + 1, s),
                    SigmaKind::S2d => {
                        // x^2 (1-x^2)^((d-1)/2) = (1-x^2)^((d-1)/2) - (1-x^2)^((d+1)/2)
                        half_m2 + a * (self.slab(self.d - 1, s) - self.slab(self.d + 1, s))
                    }
                    SigmaKind::S3 => -a / ((d + 1.0) * (d + 3.0)) * q.powf((d + 3.0) / 2.0),
                    SigmaKind::S3d => {
                        -a / ((d + 1.0) * (d + 3.0))
                            * (2.0 + (d + 1.0) * s * s)
                            * q.powf((d + 1.0) / 2.0)
                    }
                }
            }
        }
    }

    pub fn sigmas(&self, t: f64) -> Sigmas {
        Sigmas {
            s0: self.sigma(SigmaKind::S0, t),
            s1d: self.sigma(SigmaKind::S1d, t),
            s2: self.sigma(SigmaKind::S2, t),
            s2d: self.sigma(SigmaKind::S2d, t),
            s3: self.sigma(SigmaKind::S3, t),
            s3d: self.sigma(SigmaKind::S3d, t),
        }
    }

    /// Second-order coefficients `(phi_1, phi_2)` of the limiting operator.
    pub fn phi(&self, t: f64) -> (f64, f64) {
        let s = self.sigmas(t);
        let den = s.s2d * s.s0 - s.s1d * s.s1d;
        let phi1 = 0.5 * (s.s2d * s.s2 - s.s3 * s.s1d) / den;
        let phi2 = 0.5 * (s.s2d * s.s2d - s.s3d * s.s1d) / den;
        (phi1, phi2)
    }

    /// First-order (normal) coefficient for sampling density value `p_val`.
    pub fn potential_v(&self, t: f64, p_val: f64) -> Result<f64> {
        if !(p_val > 0.0) {
            return Err(invalid(format!("density must be positive, got {p_val}")));
        }
        let s = self.sigmas(t);
        Ok(s.s1d / (p_val * (s.s2d * s.s0 - s.s1d * s.s1d)))
    }

    /// Brackets `(delta_1, delta_2)` with `delta_1 eps < t* < delta_2 eps`.
    pub fn deltas(&self) -> (f64, f64) {
        let d = self.d as f64;
        let r = (d + 1.0) * self.sphere / (2.0 * d * (d + 2.0) * self.cap);
        let e = 2.0 / (d + 1.0);
        let d1 = (1.0 - ((1.0 + r) / (1.0 + (2.0 / (d + 3.0)).sqrt())).powf(e)).sqrt();
        let d2 = (1.0 - (0.5 * r + 1.0 / (d + 3.0)).powf(e)).sqrt();
        (d1, d2)
    }

    /// Boundary distance where `phi_2` changes sign.
    pub fn tstar(&self) -> Result<f64> {
        let (d1, d2) = self.deltas();
        let lo = 0.99 * d1 * self.eps;
        let hi = (1.01 * d2).min(1.0) * self.eps;
        let f = |t: f64| {
            let s = self.sigmas(t);
            s.s2d * s.s2d - s.s3d * s.s1d
        };
        quadrature::bisect(f, lo, hi, 1e-15 * self.eps)
    }

    /// Limit of the boundary indicator at boundary distance `t`.
    pub fn b(&self, t: f64) -> f64 {
        if t >= self.eps {
            return 0.0;
        }
        let s = self.sigmas(t);
        s.s1d * s.s1d / (s.s0 * s.s2d)
    }

    /// `B(0)` in closed form.
    pub fn b_at_boundary(&self) -> f64 {
        let d = self.d as f64;
        4.0 * (d + 2.0) * self.cap * self.cap / ((d + 1.0).powi(2) * self.sphere * self.sphere)
            * d
            * d
    }

    pub fn kernel_limits(&self) -> KernelLimits {
        let d = self.d as f64;
        KernelLimits {
            kernel_inf: 1.0 - self.cap * 2.0 * d * (d + 2.0) / ((d + 1.0) * self.sphere),
            interior: 1.0,
        }
    }

    /// Slope of the limiting kernel along the normal at boundary distance `t`.
    pub fn boundary_slope(&self, t: f64) -> f64 {
        let s = self.sigmas(t);
        -s.s1d / (s.s2d * self.eps)
    }

    pub fn dm_coeffs(&self, t: f64) -> DmCoeffs {
        let s = self.sigmas(t);
        DmCoeffs {
            psi1: 0.5 * s.s2 / s.s0,
            psi2: 0.5 * s.s2d / s.s0,
            drift: s.s1d / s.s0,
        }
    }

    /// Inverts `t -> B(t)` on `[0, eps)`; `B` is decreasing there.
    pub fn invert_b(&self, value: f64) -> f64 {
        if value >= self.b(0.0) {
            return 0.0;
        }
        if value <= 0.0 {
            return self.eps;
        }
        let f = |t: f64| self.b(t) - value;
        quadrature::bisect(f, 0.0, self.eps * (1.0 - 1e-12), 1e-12 * self.eps)
            .unwrap_or(self.eps)
    }
}

fn slab_closed(k: usize, s: f64) -> f64 {
    let q = (1.0 - s * s).max(0.0);
    let i1 = 0.5 * (s * q.sqrt() + s.asin());
    match k {
        0 => s,
        1 => i1,
        2 => s - s * s * s / 3.0,
        3 => 0.25 * s * q.powf(1.5) + 0.75 * i1,
        4 => 0.2 * s * q * q + 0.8 * (s - s * s * s / 3.0),
        _ => unreachable!("closed forms cover k <= 4"),
    }
}
