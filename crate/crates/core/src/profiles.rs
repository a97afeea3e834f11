//! Closed-form small-mass limit profiles and the parameter formulas attached
//! to them.
//!
//! All evaluators return exactly `0.0` outside their support descriptor.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{integrate, periodic_cubic};
use crate::solver::Sym2;

/// Mass of the radial profile `1/2 - r^2/4 + r^4/32` on `r <= 2`:
/// `2 pi int_0^2 (1/2 - r^2/4 + r^4/32) r dr = 2 pi / 3`.
pub const KAPPA: f64 = 2.0 * PI / 3.0;

/// The value `73 pi / 96` that appears in the literature for the same
/// integral. It does not match the radial profile and is kept for reference.
pub const KAPPA_STATED: f64 = 73.0 * PI / 96.0;

/// `alpha0 = (1 - gmax) / gmax`, the multiplier limit as the mass vanishes.
pub fn alpha0(gmax: f64) -> Result<f64> {
    if !(gmax > 0.0 && gmax < 1.0) {
        return Err(Error::Domain(format!("gmax {gmax} outside (0, 1)")));
    }
    Ok((1.0 - gmax) / gmax)
}

/// Parameters of the quadratic-obstacle profile
/// `Phi = C0 - t + t^2 / (4 C0)`, `t = k1 x1^2 + k2 x2^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadProfileParams {
    pub s: f64,
    pub c0: f64,
    pub beta2: f64,
    pub beta4: f64,
    pub k1: f64,
    pub k2: f64,
}

impl QuadProfileParams {
    /// Residuals of the three coefficient-matching equations.
    pub fn residuals(&self) -> [f64; 3] {
        let (s, c0, b2, b4) = (self.s, self.c0, self.beta2, self.beta4);
        [
            (0.25 - b2).powi(2) - 4.0 * c0 * (s / 12.0 + b4),
            (0.25 + b2).powi(2) - 4.0 * c0 * ((1.0 - s) / 12.0 + b4),
            (0.25 - b2) * (0.25 + b2) + 12.0 * c0 * b4,
        ]
    }

    /// Semiaxes `sqrt(2 C0 / k1) >= sqrt(2 C0 / k2)` of the support ellipse.
    pub fn semiaxes(&self) -> [f64; 2] {
        [(2.0 * self.c0 / self.k1).sqrt(), (2.0 * self.c0 / self.k2).sqrt()]
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        let t = self.k1 * x[0] * x[0] + self.k2 * x[1] * x[1];
        if t >= 2.0 * self.c0 {
            return 0.0;
        }
        (self.c0 - t + t * t / (4.0 * self.c0)).max(0.0)
    }

    /// `int Phi dx`.
    pub fn mass(&self) -> f64 {
        KAPPA * self.c0 * self.c0 / (self.k1 * self.k2).sqrt()
    }
}

fn check_s(s: f64) -> Result<()> {
    if !(s > 0.0 && s <= 0.5) {
        return Err(Error::Domain(format!("anisotropy ratio {s} outside (0, 1/2]")));
    }
    Ok(())
}

/// Profile parameters for the anisotropy ratio `s`.
pub fn quad_params(s: f64) -> Result<QuadProfileParams> {
    check_s(s)?;
    let q = (1.0 - 2.0 * s) / 3.0;
    let c0 = 1.0 / (1.0 + 4.0 * (1.0 / 16.0 - 0.5 * q * q).sqrt());
    let beta2 = c0 * q;
    let beta4 = 1.0 / 48.0 - 1.0 / (64.0 * c0);
    Ok(QuadProfileParams { s, c0, beta2, beta4, k1: 0.25 - beta2, k2: 0.25 + beta2 })
}

/// `C0` in the textbook quadratic-formula form; loses accuracy as `s -> 1/2`.
pub fn c0_direct(s: f64) -> Result<f64> {
    check_s(s)?;
    let q = (1.0 - 2.0 * s) / 3.0;
    Ok((1.0 / (q * q)) * (0.125 - 0.5 * (1.0 / 16.0 - 0.5 * q * q).sqrt()))
}

pub fn quad_profile_eval(params: &QuadProfileParams, point: [f64; 2]) -> f64 {
    params.eval(point)
}

/// `M(s) = kappa C0^2 / sqrt(k1 k2)` with `kappa = 2 pi / 3`.
pub fn quad_mass(s: f64) -> Result<f64> {
    Ok(quad_params(s)?.mass())
}

/// Same formula with `kappa = 73 pi / 96`.
pub fn quad_mass_stated(s: f64) -> Result<f64> {
    Ok(quad_mass(s)? * KAPPA_STATED / KAPPA)
}

/// `s = sigma_min / (sigma_min + sigma_max)` of an SPD form.
pub fn anisotropy_ratio(form: &Sym2) -> Result<f64> {
    if !form.is_spd() {
        return Err(Error::NotSpd(format!("{form:?}")));
    }
    let [l0, l1] = form.eigenvalues();
    Ok(l0 / (l0 + l1))
}

/// Mass fractions `M(s_i) tr_i^(-p) / sum_j M(s_j) tr_j^(-p)`.
pub fn lambda_fractions_with_exponent(hessians: &[Sym2], p: f64) -> Result<Vec<f64>> {
    if hessians.is_empty() {
        return Err(Error::Domain("no maxima given".into()));
    }
    let w = hessians
        .iter()
        .map(|h| Ok(quad_mass(anisotropy_ratio(h)?)? * h.trace().powf(-p)))
        .collect::<Result<Vec<f64>>>()?;
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / total).collect())
}

/// Limit mass fractions in the published form, with trace exponent `-3/2`.
pub fn lambda_fractions(hessians: &[Sym2]) -> Result<Vec<f64>> {
    lambda_fractions_with_exponent(hessians, 1.5)
}

/// Limit mass fractions with trace exponent `-2`, the exponent produced by
/// integrating the rescaled profile `alpha^2 gmax^3 / tr(A) Phi(sqrt(tr A / (gmax^2 alpha)) y)`.
pub fn lambda_fractions_scaled(hessians: &[Sym2]) -> Result<Vec<f64>> {
    lambda_fractions_with_exponent(hessians, 2.0)
}

/// `alpha_bar = (sum gmax^5 M(s_i) / tr(A_i)^p)^(-1/3)` for forms `A_i` with
/// `g = gmax - x^T A_i x` near each maximum.
pub fn morse_alpha_bar_with_exponent(forms: &[Sym2], gmax: f64, p: f64) -> Result<f64> {
    if forms.is_empty() {
        return Err(Error::Domain("no maxima given".into()));
    }
    let mut total = 0.0;
    for a in forms {
        total += gmax.powi(5) * quad_mass(anisotropy_ratio(a)?)? / a.trace().powf(p);
    }
    Ok(total.powf(-1.0 / 3.0))
}

/// Mass-consistent `alpha_bar` (trace exponent 2).
pub fn morse_alpha_bar(forms: &[Sym2], gmax: f64) -> Result<f64> {
    morse_alpha_bar_with_exponent(forms, gmax, 2.0)
}

/// `alpha_bar` in the published form (trace exponent 3/2).
pub fn morse_alpha_bar_stated(forms: &[Sym2], gmax: f64) -> Result<f64> {
    morse_alpha_bar_with_exponent(forms, gmax, 1.5)
}

type PointFn = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;

/// Description of `{profile > 0}`.
#[derive(Clone)]
pub enum Support {
    /// Rotated ellipse; `angle` is the direction of the first semiaxis.
    Ellipse { center: [f64; 2], semiaxes: [f64; 2], angle: f64 },
    /// `|y1 / r1|^p1 + |y2 / r2|^p2 <= 1`.
    PowerBall { center: [f64; 2], radii: [f64; 2], powers: [f64; 2] },
    /// `level(y) <= 1` inside a bounding box.
    Implicit { lo: [f64; 2], hi: [f64; 2], level: PointFn },
}

impl fmt::Debug for Support {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Support::Ellipse { center, semiaxes, angle } => f
                .debug_struct("Ellipse")
                .field("center", center)
                .field("semiaxes", semiaxes)
                .field("angle", angle)
                .finish(),
            Support::PowerBall { center, radii, powers } => f
                .debug_struct("PowerBall")
                .field("center", center)
                .field("radii", radii)
                .field("powers", powers)
                .finish(),
            Support::Implicit { lo, hi, .. } => {
                f.debug_struct("Implicit").field("lo", lo).field("hi", hi).finish()
            }
        }
    }
}

impl Support {
    /// Level function, `<= 1` exactly on the support.
    pub fn level(&self, y: [f64; 2]) -> f64 {
        match self {
            Support::Ellipse { center, semiaxes, angle } => {
                let (s, c) = angle.sin_cos();
                let (dx, dy) = (y[0] - center[0], y[1] - center[1]);
                let (u, v) = (c * dx + s * dy, -s * dx + c * dy);
                (u / semiaxes[0]).powi(2) + (v / semiaxes[1]).powi(2)
            }
            Support::PowerBall { center, radii, powers } => {
                ((y[0] - center[0]).abs() / radii[0]).powf(powers[0])
                    + ((y[1] - center[1]).abs() / radii[1]).powf(powers[1])
            }
            Support::Implicit { level, .. } => level(y),
        }
    }

    pub fn contains(&self, y: [f64; 2]) -> bool {
        self.level(y) <= 1.0
    }

    /// Axis-aligned bounding box `(lo, hi)`.
    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        match self {
            Support::Ellipse { center, semiaxes, angle } => {
                let (s, c) = angle.sin_cos();
                let ex = ((semiaxes[0] * c).powi(2) + (semiaxes[1] * s).powi(2)).sqrt();
                let ey = ((semiaxes[0] * s).powi(2) + (semiaxes[1] * c).powi(2)).sqrt();
                ([center[0] - ex, center[1] - ey], [center[0] + ex, center[1] + ey])
            }
            Support::PowerBall { center, radii, .. } => (
                [center[0] - radii[0], center[1] - radii[1]],
                [center[0] + radii[0], center[1] + radii[1]],
            ),
            Support::Implicit { lo, hi, .. } => (*lo, *hi),
        }
    }

    /// Support of `y -> p(y / k)`.
    pub fn dilated(&self, k: [f64; 2]) -> Support {
        match self {
            Support::Ellipse { center, semiaxes, angle } if k[0] == k[1] => Support::Ellipse {
                center: [center[0] * k[0], center[1] * k[1]],
                semiaxes: [semiaxes[0] * k[0], semiaxes[1] * k[1]],
                angle: *angle,
            },
            Support::PowerBall { center, radii, powers } => Support::PowerBall {
                center: [center[0] * k[0], center[1] * k[1]],
                radii: [radii[0] * k[0], radii[1] * k[1]],
                powers: *powers,
            },
            other => {
                let (lo, hi) = other.bounding_box();
                let inner = other.clone();
                Support::Implicit {
                    lo: [lo[0] * k[0], lo[1] * k[1]],
                    hi: [hi[0] * k[0], hi[1] * k[1]],
                    level: Arc::new(move |y| inner.level([y[0] / k[0], y[1] / k[1]])),
                }
            }
        }
    }

    /// Sample `n` points on the boundary curve (ellipses and power balls).
    pub fn boundary_points(&self, n: usize) -> Option<Vec<[f64; 2]>> {
        match self {
            Support::Ellipse { center, semiaxes, angle } => {
                let (s, c) = angle.sin_cos();
                Some(
                    (0..n)
                        .map(|k| {
                            let t = 2.0 * PI * k as f64 / n as f64;
                            let (u, v) = (semiaxes[0] * t.cos(), semiaxes[1] * t.sin());
                            [center[0] + c * u - s * v, center[1] + s * u + c * v]
                        })
                        .collect(),
                )
            }
            Support::PowerBall { center, radii, powers } => Some(
                (0..n)
                    .map(|k| {
                        let t = 2.0 * PI * k as f64 / n as f64;
                        let (ct, st) = (t.cos(), t.sin());
                        let x = ct.abs().powf(2.0 / powers[0]).copysign(ct);
                        let y = st.abs().powf(2.0 / powers[1]).copysign(st);
                        [center[0] + radii[0] * x, center[1] + radii[1] * y]
                    })
                    .collect(),
            ),
            Support::Implicit { .. } => None,
        }
    }
}

/// A nonnegative planar profile together with its support descriptor.
#[derive(Clone)]
pub struct ProfileField {
    raw: PointFn,
    support: Support,
}

impl fmt::Debug for ProfileField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProfileField").field("support", &self.support).finish()
    }
}

impl ProfileField {
    pub fn new(raw: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static, support: Support) -> Self {
        Self { raw: Arc::new(raw), support }
    }

    pub fn eval(&self, y: [f64; 2]) -> f64 {
        if !self.support.contains(y) {
            return 0.0;
        }
        (self.raw)(y).max(0.0)
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    /// Midpoint quadrature on an `n x n` grid over the support's bounding box.
    pub fn mass(&self, n: usize) -> f64 {
        let (lo, hi) = self.support.bounding_box();
        crate::numerics::midpoint_2d(&|y| self.eval(y), lo, hi, n)
    }

    /// `y -> amplitude * p(y / k)`.
    pub fn rescaled(&self, amplitude: f64, k: [f64; 2]) -> ProfileField {
        let raw = self.raw.clone();
        ProfileField {
            raw: Arc::new(move |y| amplitude * raw([y[0] / k[0], y[1] / k[1]])),
            support: self.support.dilated(k),
        }
    }
}

/// Limit profile for `g = gmax - x^T A x`:
/// `v(x) = alpha^2 gmax^3 / tr(A) Phi(sqrt(tr(A) / (gmax^2 alpha)) R^T x; s)`.
pub fn general_quadratic_profile(a: &Sym2, alpha: f64, gmax: f64) -> Result<ProfileField> {
    if !a.is_spd() {
        return Err(Error::NotSpd(format!("{a:?}")));
    }
    if !(alpha > 0.0 && gmax > 0.0) {
        return Err(Error::Domain("alpha and gmax must be positive".into()));
    }
    let (ev, angle) = a.eigen();
    let tr = ev[0] + ev[1];
    let params = quad_params(ev[0] / tr)?;
    let scale = (tr / (gmax * gmax * alpha)).sqrt();
    let amp = alpha * alpha * gmax.powi(3) / tr;
    let (s, c) = angle.sin_cos();
    let semi = params.semiaxes();
    let support = Support::Ellipse {
        center: [0.0, 0.0],
        semiaxes: [semi[0] / scale, semi[1] / scale],
        angle,
    };
    Ok(ProfileField::new(
        move |x| {
            let z = [c * x[0] + s * x[1], -s * x[0] + c * x[1]];
            amp * params.eval([scale * z[0], scale * z[1]])
        },
        support,
    ))
}

/// `v_alpha(y) = alpha^(1 + 2/gamma) v(y / alpha^(1/gamma))`.
pub fn homogeneous_rescale(profile: &ProfileField, alpha: f64, gamma: f64) -> Result<ProfileField> {
    if !(alpha > 0.0 && gamma > 0.0) {
        return Err(Error::Domain("alpha and gamma must be positive".into()));
    }
    let k = alpha.powf(1.0 / gamma);
    Ok(profile.rescaled(alpha.powf(1.0 + 2.0 / gamma), [k, k]))
}

/// Degenerate profile `alpha^2 Phi(y1 / alpha^(1/4), y2 / alpha^(1/2))`,
/// `Phi = 3/4 - 3/2 w + 3/4 w^2`, `w = y2^2 / 3 + y1^4`, zero for `w > 1`.
pub fn deg_profile_eval(point: [f64; 2], alpha: f64) -> f64 {
    let y1 = point[0] / alpha.powf(0.25);
    let y2 = point[1] / alpha.sqrt();
    let w = y2 * y2 / 3.0 + y1.powi(4);
    if w > 1.0 {
        return 0.0;
    }
    (alpha * alpha * (0.75 - 1.5 * w + 0.75 * w * w)).max(0.0)
}

/// `int_{-1}^{1} (1 - s^4)^(5/2) ds`.
pub fn quartic_strip_integral() -> f64 {
    integrate(&|s: f64| (1.0 - s.powi(4)).max(0.0).powf(2.5), -1.0, 1.0, 1e-15)
}

/// Limit profile for `g = gmax - a x1^4 - b x2^2` in rescaled variables:
/// `-d22 U = (gmax alpha - (a y1^4 + b y2^2) / gmax)` on `{U > 0}`.
pub fn aniso_limit_profile(a: f64, b: f64, gmax: f64, alpha: f64) -> Result<ProfileField> {
    if !(a > 0.0 && b > 0.0 && gmax > 0.0 && alpha > 0.0) {
        return Err(Error::Domain("coefficients must be positive".into()));
    }
    let (p, q, c) = (a / gmax, b / gmax, gmax * alpha);
    let support = Support::PowerBall {
        center: [0.0, 0.0],
        radii: [(c / p).powf(0.25), (3.0 * c / q).sqrt()],
        powers: [4.0, 2.0],
    };
    Ok(ProfileField::new(
        move |y| {
            let k = c - p * y[0].powi(4);
            if k <= 0.0 {
                return 0.0;
            }
            0.75 * k * k / q - 0.5 * k * y[1] * y[1] + q * y[1].powi(4) / 12.0
        },
        support,
    ))
}

/// `K` with `int U = K (gmax alpha)^(11/4)` for [`aniso_limit_profile`].
pub fn aniso_mass_constant(a: f64, b: f64, gmax: f64) -> f64 {
    let (p, q) = (a / gmax, b / gmax);
    0.8 * 3f64.sqrt() * q.powf(-1.5) * p.powf(-0.25) * quartic_strip_integral()
}

/// `alpha_bar` making [`aniso_limit_profile`] carry unit mass.
pub fn aniso_alpha_bar(a: f64, b: f64, gmax: f64) -> f64 {
    aniso_mass_constant(a, b, gmax).powf(-4.0 / 11.0) / gmax
}

/// Limit profile over the strip `(eta, t)` for a maximum along a circle.
#[derive(Debug, Clone)]
pub struct CurveProfile {
    pub field: ProfileField,
    pub alpha_bar: f64,
}

fn integral_inv_a32(a: &[f64]) -> Result<f64> {
    if a.is_empty() || a.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Domain("a(t) samples must be positive".into()));
    }
    // Integrate the same periodic interpolant the profile evaluates, one
    // sample interval at a time.
    let step = 2.0 * PI / a.len() as f64;
    let f = |t: f64| {
        let v = periodic_cubic(a, 2.0 * PI, t);
        if v > 0.0 {
            v.powf(-1.5)
        } else {
            f64::INFINITY
        }
    };
    let total: f64 = (0..a.len()).map(|k| integrate(&f, k as f64 * step, (k + 1) as f64 * step, 1e-13)).sum();
    if !total.is_finite() {
        return Err(Error::Domain("interpolated a(t) is not positive".into()));
    }
    Ok(total)
}

/// `U(eta, t) = 3 alpha^2 / (4 a) - alpha eta^2 / 2 + a eta^4 / 12` on
/// `a eta^2 / 3 <= alpha`, with `alpha` chosen so that
/// `int int U = 1 / sin(phi0)`: `alpha = (4 sqrt(3) / 5 sin(phi0) int a^(-3/2))^(-2/5)`.
pub fn curve_profile(a_samples: &[f64], phi0: f64) -> Result<CurveProfile> {
    let integral = integral_inv_a32(a_samples)?;
    if !(phi0 > 0.0 && phi0 < PI) {
        return Err(Error::Domain(format!("phi0 {phi0} outside (0, pi)")));
    }
    let alpha = (0.8 * 3f64.sqrt() * phi0.sin() * integral).powf(-0.4);
    let a = Arc::new(a_samples.to_vec());
    let a_eval = {
        let a = a.clone();
        move |t: f64| periodic_cubic(&a, 2.0 * PI, t)
    };
    let a_min = a_samples.iter().copied().fold(f64::INFINITY, f64::min);
    let half = (3.0 * alpha / a_min).sqrt() * 1.5;
    let a_level = a_eval.clone();
    let support = Support::Implicit {
        lo: [-half, 0.0],
        hi: [half, 2.0 * PI],
        level: Arc::new(move |y| a_level(y[1]) * y[0] * y[0] / (3.0 * alpha)),
    };
    let field = ProfileField::new(
        move |y| {
            let at = a_eval(y[1]);
            0.75 * alpha * alpha / at - 0.5 * alpha * y[0] * y[0] + at * y[0].powi(4) / 12.0
        },
        support,
    );
    Ok(CurveProfile { field, alpha_bar: alpha })
}

/// `alpha = (23 sqrt(3) / 20 sin(phi0) int a^(-3/2))^(-2/5)`, the published
/// closed form (it does not normalise the profile above).
pub fn curve_alpha_bar_stated(a_samples: &[f64], phi0: f64) -> Result<f64> {
    let integral = integral_inv_a32(a_samples)?;
    Ok((23.0 * 3f64.sqrt() / 20.0 * phi0.sin() * integral).powf(-0.4))
}

/// Heuristic one-dimensional profile
/// `(1 - t^10)^(4/3) t^(-2/3) (3 7^(1/3) / 8 - z^2 / 2 + z^8 / 56)`,
/// `z = t^(1/3) y1 / (1 - t^10)^(1/6)`, zero for `z^6 > 7`.
pub fn heuristic_profile_eval(y1: f64, t: f64) -> Result<f64> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Domain(format!("t {t} outside (0, 1)")));
    }
    let e = 1.0 - t.powi(10);
    let z = t.cbrt() * y1 / e.powf(1.0 / 6.0);
    if z.powi(6) > 7.0 {
        return Ok(0.0);
    }
    let k = e.powf(4.0 / 3.0) / t.powf(2.0 / 3.0);
    Ok((k * (3.0 * 7f64.cbrt() / 8.0 - 0.5 * z * z + z.powi(8) / 56.0)).max(0.0))
}

/// Structural case of a maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum ScalingCase {
    Homogeneous { gamma: f64 },
    Anisotropic42,
    Noncoercive,
}

/// Blow-up exponents: `U_m(y) = m^(-amplitude) u(m^spatial[0] y1, m^spatial[1] y2)`
/// and `beta ~ m^alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingExponents {
    pub spatial: [f64; 2],
    pub amplitude: f64,
    pub alpha: f64,
}

pub fn scaling_exponents(case: ScalingCase) -> Result<ScalingExponents> {
    Ok(match case {
        ScalingCase::Homogeneous { gamma } => {
            if !(gamma > 0.0) {
                return Err(Error::Domain(format!("gamma {gamma} must be positive")));
            }
            let d = gamma + 4.0;
            ScalingExponents { spatial: [1.0 / d, 1.0 / d], amplitude: (gamma + 2.0) / d, alpha: gamma / d }
        }
        ScalingCase::Anisotropic42 => ScalingExponents {
            spatial: [1.0 / 11.0, 2.0 / 11.0],
            amplitude: 8.0 / 11.0,
            alpha: 4.0 / 11.0,
        },
        ScalingCase::Noncoercive => ScalingExponents {
            spatial: [1.0 / 8.0, 1.0 / 8.0],
            amplitude: 0.75,
            alpha: 0.5,
        },
    })
}
