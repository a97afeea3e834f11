//! Signal fields `g` with known maxima and local Taylor models.
//!
//! Polynomial local models are planted inside an elliptical window and blended
//! into a constant background with a quintic smoothstep, so `g` equals the
//! model exactly on the window.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::periodic_cubic;
use crate::solver::{DomainKind, DomainSpec, Field, Sym2};

/// Local description of `gmax - g` near a maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum LocalModel {
    /// `g = gmax - x^T H x / 2`.
    Quadratic { hessian: Sym2 },
    /// `g = gmax - r^gamma w(theta)`, `w(theta) = sum_k c_k cos(k theta)`.
    Homogeneous { gamma: f64, coeffs: Vec<f64> },
    /// `g = gmax - a x1^4 - b x2^2`.
    Anisotropic { a: f64, b: f64 },
    /// `g = gmax - a x1^4 - b x1^2 x2^2 - c x2^6`.
    Noncoercive { a: f64, b: f64, c: f64 },
    /// `g = gmax - a(theta) (phi - phi0)^2` on the sphere.
    Curve { phi0: f64, a: Vec<f64> },
}

impl LocalModel {
    /// `gmax - g` at displacement `d` from the maximum (for the curve model,
    /// `d = (theta, phi - phi0)`).
    pub fn deficit(&self, d: [f64; 2]) -> f64 {
        let [x, y] = d;
        match self {
            LocalModel::Quadratic { hessian } => 0.5 * hessian.quad(x, y),
            LocalModel::Homogeneous { gamma, coeffs } => {
                let r = x.hypot(y);
                if r == 0.0 {
                    return 0.0;
                }
                r.powf(*gamma) * angular(coeffs, y.atan2(x))
            }
            LocalModel::Anisotropic { a, b } => a * x.powi(4) + b * y * y,
            LocalModel::Noncoercive { a, b, c } => {
                a * x.powi(4) + b * x * x * y * y + c * y.powi(6)
            }
            LocalModel::Curve { a, .. } => periodic_cubic(a, 2.0 * PI, x) * y * y,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            LocalModel::Quadratic { hessian } => hessian.is_spd(),
            LocalModel::Homogeneous { gamma, coeffs } => {
                *gamma > 0.0
                    && !coeffs.is_empty()
                    && (0..720).all(|k| angular(coeffs, k as f64 * PI / 360.0) > 0.0)
            }
            LocalModel::Anisotropic { a, b } => *a > 0.0 && *b > 0.0,
            LocalModel::Noncoercive { a, b, c } => *a > 0.0 && *b > 0.0 && *c > 0.0,
            LocalModel::Curve { phi0, a } => {
                *phi0 > 0.0 && *phi0 < PI && !a.is_empty() && a.iter().all(|&v| v > 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid local model {self:?}")))
        }
    }
}

fn angular(coeffs: &[f64], theta: f64) -> f64 {
    coeffs.iter().enumerate().map(|(k, c)| c * (k as f64 * theta).cos()).sum()
}

/// A declared maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Maximum {
    pub position: [f64; 2],
    pub model: LocalModel,
}

/// Sampled signal with analytic metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalField {
    pub values: Field,
    pub gmax: f64,
    pub maxima: Vec<Maximum>,
}

impl SignalField {
    fn checked(values: Field, gmax: f64, maxima: Vec<Maximum>) -> Result<Self> {
        let (lo, hi) = (values.min(), values.max());
        if !(lo > 0.0 && hi < 1.0) {
            return Err(Error::Range(format!("samples span [{lo}, {hi}], need (0, 1)")));
        }
        if hi > gmax * (1.0 + 1e-14) {
            return Err(Error::Range(format!("sample maximum {hi} exceeds gmax {gmax}")));
        }
        Ok(Self { values, gmax, maxima })
    }
}

fn check_levels(gmax: f64, background: f64) -> Result<()> {
    if !(0.0 < background && background < gmax && gmax < 1.0) {
        return Err(Error::Range(format!(
            "need 0 < background ({background}) < gmax ({gmax}) < 1"
        )));
    }
    Ok(())
}

/// `6x^5 - 15x^4 + 10x^3` clamped to `[0, 1]`.
pub fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x * (x * (6.0 * x - 15.0) + 10.0)
}

/// Elliptical window: the model is exact for `rho <= 1` and fully blended into
/// the background at `rho >= 1 + blend`, `rho^2 = (d1/r1)^2 + (d2/r2)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub radii: [f64; 2],
    pub blend: f64,
}

impl Window {
    /// Window filling a fraction of the chart around a point.
    pub fn default_for(domain: &DomainSpec) -> Self {
        let e = domain.extent();
        Window { radii: [0.25 * e[0], 0.25 * e[1]], blend: 0.6 }
    }

    pub fn weight(&self, d: [f64; 2]) -> f64 {
        let rho = ((d[0] / self.radii[0]).powi(2) + (d[1] / self.radii[1]).powi(2)).sqrt();
        1.0 - smoothstep((rho - 1.0) / self.blend)
    }
}

/// Gaussian bump truncation in terms of `q = d^T B d / 2`: the bump is
/// `exp(-q)` for `q <= q_inner` and vanishes for `q >= q_outer`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpCutoff {
    pub q_inner: f64,
    pub q_outer: f64,
}

impl Default for BumpCutoff {
    fn default() -> Self {
        // exp(-36) ~ 2e-16.
        Self { q_inner: 30.0, q_outer: 36.0 }
    }
}

/// Sum of truncated Gaussian bumps over a background level:
/// `g = background + (gmax - background) sum_i exp(-q_i)`,
/// `q_i = (x - p_i)^T B_i (x - p_i) / 2`, `B_i = H_i / (gmax - background)`,
/// so that `-D^2 g(p_i) = H_i`.
pub fn morse_signal(
    domain: &DomainSpec,
    maxima: &[([f64; 2], Sym2)],
    gmax: f64,
    background: f64,
    cutoff: BumpCutoff,
) -> Result<SignalField> {
    check_levels(gmax, background)?;
    if maxima.is_empty() {
        return Err(Error::Domain("no maxima given".into()));
    }
    if !(0.0 < cutoff.q_inner && cutoff.q_inner < cutoff.q_outer) {
        return Err(Error::Domain("bump cutoff must satisfy 0 < q_inner < q_outer".into()));
    }
    let depth = gmax - background;
    let mut forms = Vec::with_capacity(maxima.len());
    for (_, h) in maxima {
        if !h.is_spd() {
            return Err(Error::NotSpd(format!("{h:?}")));
        }
        let b = h.scale(1.0 / depth);
        // The truncated support must not reach its own periodic image.
        let [lmin, _] = b.eigenvalues();
        let radius = (2.0 * cutoff.q_outer / lmin).sqrt();
        let e = domain.extent();
        if 2.0 * radius >= e[0].min(e[1]) {
            return Err(Error::Domain(format!(
                "bump radius {radius} too large for chart extent {e:?}"
            )));
        }
        forms.push(b);
    }
    let span = 1.0 / (cutoff.q_outer - cutoff.q_inner);
    let [n1, n2] = domain.dims();
    let mut values = Vec::with_capacity(domain.len());
    for j in 0..n2 {
        for i in 0..n1 {
            let x = domain.coords(i, j);
            let mut sum = 0.0;
            let mut hits = 0;
            for ((p, _), b) in maxima.iter().zip(&forms) {
                let d = domain.displacement(x, *p);
                let q = 0.5 * b.quad(d[0], d[1]);
                if q < cutoff.q_outer {
                    hits += 1;
                    sum += (-q).exp() * (1.0 - smoothstep((q - cutoff.q_inner) * span));
                }
            }
            if hits > 1 {
                return Err(Error::Domain(format!("bump supports overlap at {x:?}")));
            }
            values.push(background + depth * sum);
        }
    }
    let maxima = maxima
        .iter()
        .map(|(p, h)| Maximum { position: *p, model: LocalModel::Quadratic { hessian: *h } })
        .collect();
    SignalField::checked(Field::from_vec(n1, n2, values)?, gmax, maxima)
}

/// Plant polynomial local models inside windows around their maxima.
pub fn windowed_signal(
    domain: &DomainSpec,
    maxima: &[(Maximum, Window)],
    gmax: f64,
    background: f64,
) -> Result<SignalField> {
    check_levels(gmax, background)?;
    if maxima.is_empty() {
        return Err(Error::Domain("no maxima given".into()));
    }
    let e = domain.extent();
    for (m, w) in maxima {
        m.model.validate()?;
        let reach = [w.radii[0] * (1.0 + w.blend), w.radii[1] * (1.0 + w.blend)];
        if !(w.radii[0] > 0.0 && w.radii[1] > 0.0 && w.blend > 0.0) {
            return Err(Error::Domain("window radii and blend must be positive".into()));
        }
        if 2.0 * reach[0] >= e[0] || (domain.periodic_second_axis() && 2.0 * reach[1] >= e[1]) {
            return Err(Error::Domain(format!("window {reach:?} exceeds chart {e:?}")));
        }
    }
    plant(domain, maxima, gmax, background)
}

/// Displacement in the model's own coordinates.
fn local_offset(domain: &DomainSpec, x: [f64; 2], m: &Maximum) -> [f64; 2] {
    match &m.model {
        LocalModel::Curve { phi0, .. } => [x[0], x[1] - phi0],
        _ => domain.displacement(x, m.position),
    }
}

/// Offset fed to the window weight (the curve window only limits `phi`).
fn window_offset(model: &LocalModel, d: [f64; 2]) -> [f64; 2] {
    match model {
        LocalModel::Curve { .. } => [0.0, d[1]],
        _ => d,
    }
}

/// `g = gmax - r^gamma w(theta)` near `p`.
pub fn homogeneous_signal(
    domain: &DomainSpec,
    p: [f64; 2],
    gamma: f64,
    angular_coeffs: &[f64],
    gmax: f64,
    background: f64,
    window: Option<Window>,
) -> Result<SignalField> {
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!("gamma {gamma} must be positive")));
    }
    let m = Maximum {
        position: p,
        model: LocalModel::Homogeneous { gamma, coeffs: angular_coeffs.to_vec() },
    };
    windowed_signal(domain, &[(m, window.unwrap_or_else(|| Window::default_for(domain)))], gmax, background)
}

/// `g = gmax - a x1^4 - b x2^2` near `p`.
pub fn anisotropic_signal(
    domain: &DomainSpec,
    p: [f64; 2],
    a: f64,
    b: f64,
    gmax: f64,
    background: f64,
    window: Option<Window>,
) -> Result<SignalField> {
    let m = Maximum { position: p, model: LocalModel::Anisotropic { a, b } };
    windowed_signal(domain, &[(m, window.unwrap_or_else(|| Window::default_for(domain)))], gmax, background)
}

/// `g = gmax - a x1^4 - b x1^2 x2^2 - c x2^6` near `p`.
#[allow(clippy::too_many_arguments)]
pub fn noncoercive_signal(
    domain: &DomainSpec,
    p: [f64; 2],
    a: f64,
    b: f64,
    c: f64,
    gmax: f64,
    background: f64,
    window: Option<Window>,
) -> Result<SignalField> {
    let m = Maximum { position: p, model: LocalModel::Noncoercive { a, b, c } };
    windowed_signal(domain, &[(m, window.unwrap_or_else(|| Window::default_for(domain)))], gmax, background)
}

/// `g = gmax - a(theta) (phi - phi0)^2` in a band around the circle
/// `phi = phi0` of a lat-lon sphere; `a` is given at equally spaced longitudes.
pub fn curve_signal(
    domain: &DomainSpec,
    phi0: f64,
    a_samples: &[f64],
    gmax: f64,
    background: f64,
    half_width: f64,
) -> Result<SignalField> {
    let DomainKind::LatLonSphere { phi_min } = domain.kind() else {
        return Err(Error::Domain("curve signals live on the lat-lon sphere".into()));
    };
    if !(phi0 > 0.0 && phi0 < PI) {
        return Err(Error::Domain(format!("phi0 {phi0} outside (0, pi)")));
    }
    if a_samples.is_empty() || a_samples.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::Domain("a(t) samples must be positive".into()));
    }
    let blend = 0.5;
    if phi0 - half_width * (1.0 + blend) <= phi_min || phi0 + half_width * (1.0 + blend) >= PI - phi_min {
        return Err(Error::Domain("curve band reaches the polar caps".into()));
    }
    let m = Maximum {
        position: [0.0, phi0],
        model: LocalModel::Curve { phi0, a: a_samples.to_vec() },
    };
    let w = Window { radii: [f64::INFINITY, half_width], blend };
    m.model.validate()?;
    plant(domain, &[(m, w)], gmax, background)
}

fn plant(
    domain: &DomainSpec,
    maxima: &[(Maximum, Window)],
    gmax: f64,
    background: f64,
) -> Result<SignalField> {
    check_levels(gmax, background)?;
    let depth = gmax - background;
    let [n1, n2] = domain.dims();
    let mut values = Vec::with_capacity(domain.len());
    for j in 0..n2 {
        for i in 0..n1 {
            let x = domain.coords(i, j);
            let mut deficit = depth;
            let mut hits = 0;
            for (m, w) in maxima {
                let d = local_offset(domain, x, m);
                let chi = w.weight(window_offset(&m.model, d));
                if chi > 0.0 {
                    hits += 1;
                    let f = m.model.deficit(d);
                    if !(f < depth) {
                        return Err(Error::Range(format!(
                            "local model deficit {f} reaches gmax - background = {depth} at {x:?}"
                        )));
                    }
                    deficit = chi * f + (1.0 - chi) * depth;
                }
            }
            if hits > 1 {
                return Err(Error::Domain(format!("windows overlap at {x:?}")));
            }
            values.push(gmax - deficit);
        }
    }
    let maxima = maxima.iter().map(|(m, _)| m.clone()).collect();
    SignalField::checked(Field::from_vec(n1, n2, values)?, gmax, maxima)
}

/// Second-order central-difference Hessian `-D^2 g` at node `(i, j)`.
pub fn fd_neg_hessian(domain: &DomainSpec, g: &Field, i: usize, j: usize) -> Sym2 {
    let [n1, n2] = domain.dims();
    let [h1, h2] = domain.spacing();
    let at = |di: isize, dj: isize| {
        let ii = (i as isize + di).rem_euclid(n1 as isize) as usize;
        let jj = (j as isize + dj).rem_euclid(n2 as isize) as usize;
        g.get(ii, jj)
    };
    let c = at(0, 0);
    let g11 = (at(1, 0) - 2.0 * c + at(-1, 0)) / (h1 * h1);
    let g22 = (at(0, 1) - 2.0 * c + at(0, -1)) / (h2 * h2);
    let g12 = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * h1 * h2);
    Sym2::new(-g11, -g12, -g22)
}
