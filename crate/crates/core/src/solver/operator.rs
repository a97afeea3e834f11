//! Conservative five-point discretisation of `-(1/mu) div(mu G^{-1} grad u)`.

use super::domain::{DomainKind, DomainSpec};
use crate::error::{Error, Result};

/// Assembled stencil. Row `k` of the symmetric form is
/// `diag[k] u_k - west[k] u_w - east[k] u_e - south[k] u_s - north[k] u_n`;
/// the surface operator divides that row by `mu[k]`.
#[derive(Debug, Clone)]
pub struct Stencil {
    pub(crate) n1: usize,
    pub(crate) n2: usize,
    pub(crate) periodic2: bool,
    pub(crate) west: Vec<f64>,
    pub(crate) east: Vec<f64>,
    pub(crate) south: Vec<f64>,
    pub(crate) north: Vec<f64>,
    pub(crate) diag: Vec<f64>,
    pub(crate) mu: Vec<f64>,
}

/// Assemble the metric-weighted stencil for a domain.
pub fn assemble_operator(domain: &DomainSpec) -> Result<Stencil> {
    let [n1, n2] = domain.dims();
    let [h1, h2] = domain.spacing();
    let metric = domain.metric();
    let mu = domain.area_weights().to_vec();
    let periodic2 = domain.periodic_second_axis();

    // Conductivities mu G^{-1} at nodes (diagonal metrics only).
    let mut k11 = Vec::with_capacity(n1 * n2);
    let mut k22 = Vec::with_capacity(n1 * n2);
    for (idx, g) in metric.iter().enumerate() {
        if !g.is_spd() {
            return Err(Error::NonElliptic { i: idx % n1, j: idx / n1 });
        }
        if g.a12 != 0.0 {
            return Err(Error::Domain(
                "five-point stencil requires a diagonal metric".into(),
            ));
        }
        k11.push(mu[idx] / g.a11);
        k22.push(mu[idx] / g.a22);
    }

    let len = n1 * n2;
    let mut east = vec![0.0; len];
    let mut north = vec![0.0; len];
    for j in 0..n2 {
        for i in 0..n1 {
            let k = j * n1 + i;
            let ke = j * n1 + (i + 1) % n1;
            east[k] = 0.5 * (k11[k] + k11[ke]) / (h1 * h1);
            if j + 1 < n2 {
                north[k] = 0.5 * (k22[k] + k22[k + n1]) / (h2 * h2);
            } else if periodic2 {
                north[k] = 0.5 * (k22[k] + k22[i]) / (h2 * h2);
            }
        }
    }
    let mut west = vec![0.0; len];
    let mut south = vec![0.0; len];
    for j in 0..n2 {
        for i in 0..n1 {
            let k = j * n1 + i;
            west[k] = east[j * n1 + (i + n1 - 1) % n1];
            south[k] = if j > 0 {
                north[k - n1]
            } else if periodic2 {
                north[(n2 - 1) * n1 + i]
            } else {
                0.0
            };
        }
    }
    debug_assert!(matches!(domain.kind(), DomainKind::PeriodicRect) || !periodic2);
    let diag = (0..len).map(|k| west[k] + east[k] + south[k] + north[k]).collect();
    Ok(Stencil { n1, n2, periodic2, west, east, south, north, diag, mu })
}

impl Stencil {
    pub fn dims(&self) -> [usize; 2] {
        [self.n1, self.n2]
    }

    #[inline]
    pub(crate) fn neighbours(&self, i: usize, j: usize) -> [usize; 4] {
        let n1 = self.n1;
        let iw = if i == 0 { n1 - 1 } else { i - 1 };
        let ie = if i + 1 == n1 { 0 } else { i + 1 };
        let js = if j == 0 { if self.periodic2 { self.n2 - 1 } else { 0 } } else { j - 1 };
        let jn = if j + 1 == self.n2 { if self.periodic2 { 0 } else { j } } else { j + 1 };
        [j * n1 + iw, j * n1 + ie, js * n1 + i, jn * n1 + i]
    }

    /// Symmetric-form row at node `(i, j)` (no division by the area weight).
    #[inline]
    pub(crate) fn symmetric_row(&self, u: &[f64], i: usize, j: usize) -> f64 {
        let k = j * self.n1 + i;
        let [w, e, s, n] = self.neighbours(i, j);
        self.diag[k] * u[k]
            - self.west[k] * u[w]
            - self.east[k] * u[e]
            - self.south[k] * u[s]
            - self.north[k] * u[n]
    }

    /// Apply the surface operator `-Delta_Gamma` to a nodal field.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for j in 0..self.n2 {
            for i in 0..self.n1 {
                let k = j * self.n1 + i;
                out[k] = self.symmetric_row(u, i, j) / self.mu[k];
            }
        }
        out
    }

    /// Apply the symmetric form `diag(mu) * (-Delta_Gamma)` (unit cell area).
    pub fn apply_symmetric(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for j in 0..self.n2 {
            for i in 0..self.n1 {
                out[j * self.n1 + i] = self.symmetric_row(u, i, j);
            }
        }
        out
    }

    pub fn area_weights(&self) -> &[f64] {
        &self.mu
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_is_in_kernel_on_torus() {
        let d = DomainSpec::centered_square(1.0, 16).unwrap();
        let op = assemble_operator(&d).unwrap();
        let lu = op.apply(&vec![3.0; d.len()]);
        assert!(lu.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn sine_mode_eigenvalue_is_second_order() {
        let mut errs = Vec::new();
        for &n in &[32usize, 64] {
            let l = 2.0;
            let d = DomainSpec::periodic_rect([0.0, 0.0], [l, l], n, n).unwrap();
            let op = assemble_operator(&d).unwrap();
            let u = d.sample(|x| (2.0 * PI * x[0] / l).sin());
            let lu = op.apply(&u.values);
            let lam = (2.0 * PI / l).powi(2);
            let err = u
                .values
                .iter()
                .zip(&lu)
                .map(|(a, b)| (b - lam * a).abs())
                .fold(0.0, f64::max);
            errs.push(err);
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.9, "order {order}");
    }

    #[test]
    fn sphere_first_zonal_harmonic() {
        let mut errs = Vec::new();
        for &n in &[64usize, 128] {
            let d = DomainSpec::lat_lon_sphere(n, n / 2, 5f64.to_radians()).unwrap();
            let op = assemble_operator(&d).unwrap();
            let u = d.sample(|x| x[1].cos());
            let lu = op.apply(&u.values);
            let [n1, n2] = d.dims();
            // Interior rows only: the cap walls are no-flux and cos(phi) has flux there.
            let mut err: f64 = 0.0;
            for j in 2..n2 - 2 {
                for i in 0..n1 {
                    let k = j * n1 + i;
                    err = err.max((lu[k] - 2.0 * u.values[k]).abs());
                }
            }
            errs.push(err);
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.8, "order {order}, errs {errs:?}");
    }

    #[test]
    fn symmetric_form_is_symmetric() {
        let d = DomainSpec::lat_lon_sphere(16, 12, 0.2).unwrap();
        let op = assemble_operator(&d).unwrap();
        let u = d.sample(|x| (x[0]).sin() + x[1] * x[1]);
        let v = d.sample(|x| (2.0 * x[0]).cos() * x[1]);
        let su = op.apply_symmetric(&u.values);
        let sv = op.apply_symmetric(&v.values);
        let a: f64 = v.values.iter().zip(&su).map(|(x, y)| x * y).sum();
        let b: f64 = u.values.iter().zip(&sv).map(|(x, y)| x * y).sum();
        assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
        let quad: f64 = u.values.iter().zip(&su).map(|(x, y)| x * y).sum();
        assert!(quad >= -1e-9);
    }
}
