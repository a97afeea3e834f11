//! Structured surface grids: a periodic planar rectangle (flat torus) and a
//! latitude/longitude sphere with polar caps removed.
//!
//! Samples live on nodes indexed `(i, j)` with `i` running along the first
//! coordinate (fastest in memory). Every node carries the metric tensor of
//! the chart and the area weight `mu = sqrt(det metric)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric 2x2 tensor sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sym2 {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 { a11: 1.0, a12: 0.0, a22: 1.0 };

    pub fn new(a11: f64, a12: f64, a22: f64) -> Self {
        Self { a11, a12, a22 }
    }

    pub fn diag(a11: f64, a22: f64) -> Self {
        Self { a11, a12: 0.0, a22 }
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a12
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let half_tr = 0.5 * self.trace();
        let d = 0.5 * (self.a11 - self.a22);
        let disc = d.hypot(self.a12);
        [half_tr - disc, half_tr + disc]
    }

    /// Eigen-decomposition: ascending eigenvalues and the rotation angle of the
    /// eigenvector belonging to the smaller one.
    pub fn eigen(&self) -> ([f64; 2], f64) {
        let ev = self.eigenvalues();
        // Eigenvector of the smallest eigenvalue: (a12, lmin - a11) or (lmin - a22, a12).
        let (vx, vy) = if (self.a11 - ev[0]).abs() > (self.a22 - ev[0]).abs() {
            (self.a12, ev[0] - self.a11)
        } else {
            (ev[0] - self.a22, self.a12)
        };
        let angle = if vx == 0.0 && vy == 0.0 { 0.0 } else { vy.atan2(vx) };
        (ev, angle)
    }

    pub fn is_spd(&self) -> bool {
        self.a11.is_finite()
            && self.a12.is_finite()
            && self.a22.is_finite()
            && self.a11 > 0.0
            && self.det() > 0.0
    }

    pub fn quad(&self, x: f64, y: f64) -> f64 {
        self.a11 * x * x + 2.0 * self.a12 * x * y + self.a22 * y * y
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(c * self.a11, c * self.a12, c * self.a22)
    }

    /// `R diag(l1, l2) R^T` with `R` the rotation by `angle`.
    pub fn from_eigen(l1: f64, l2: f64, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(
            l1 * c * c + l2 * s * s,
            (l1 - l2) * c * s,
            l1 * s * s + l2 * c * c,
        )
    }
}

/// Surface chart kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainKind {
    /// Flat torus `[x0, x0 + l1) x [y0, y0 + l2)` with identity metric.
    PeriodicRect,
    /// Unit sphere in `(theta, phi)` coordinates, `phi` restricted to
    /// `[phi_min, pi - phi_min]`; no-flux walls at the cap edges.
    LatLonSphere { phi_min: f64 },
}

/// Grid geometry plus per-node metric samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    kind: DomainKind,
    n: [usize; 2],
    origin: [f64; 2],
    spacing: [f64; 2],
    metric: Vec<Sym2>,
    mu: Vec<f64>,
}

impl DomainSpec {
    /// Periodic rectangle with `n1 x n2` nodes at `origin + (i h1, j h2)`.
    pub fn periodic_rect(origin: [f64; 2], extent: [f64; 2], n1: usize, n2: usize) -> Result<Self> {
        if n1 < 4 || n2 < 4 {
            return Err(Error::Domain(format!("grid {n1}x{n2} too small")));
        }
        if !(extent[0] > 0.0 && extent[1] > 0.0) {
            return Err(Error::Domain("extents must be positive".into()));
        }
        let count = n1 * n2;
        Ok(Self {
            kind: DomainKind::PeriodicRect,
            n: [n1, n2],
            origin,
            spacing: [extent[0] / n1 as f64, extent[1] / n2 as f64],
            metric: vec![Sym2::IDENTITY; count],
            mu: vec![1.0; count],
        })
    }

    /// Square periodic window `[-half, half)^2` with `n` nodes per axis.
    pub fn centered_square(half: f64, n: usize) -> Result<Self> {
        Self::periodic_rect([-half, -half], [2.0 * half, 2.0 * half], n, n)
    }

    /// Lat-lon sphere: `n_theta` longitudes over `[0, 2pi)`, `n_phi` cell-centred
    /// colatitude rows spanning `[phi_min, pi - phi_min]`.
    pub fn lat_lon_sphere(n_theta: usize, n_phi: usize, phi_min: f64) -> Result<Self> {
        use std::f64::consts::PI;
        if n_theta < 4 || n_phi < 4 {
            return Err(Error::Domain(format!("grid {n_theta}x{n_phi} too small")));
        }
        if !(phi_min > 0.0 && phi_min < 0.5 * PI) {
            return Err(Error::Domain(format!("phi_min {phi_min} outside (0, pi/2)")));
        }
        let dtheta = 2.0 * PI / n_theta as f64;
        let dphi = (PI - 2.0 * phi_min) / n_phi as f64;
        let mut metric = Vec::with_capacity(n_theta * n_phi);
        let mut mu = Vec::with_capacity(n_theta * n_phi);
        for j in 0..n_phi {
            let phi = phi_min + (j as f64 + 0.5) * dphi;
            let s = phi.sin();
            for _ in 0..n_theta {
                metric.push(Sym2::diag(s * s, 1.0));
                mu.push(s);
            }
        }
        Ok(Self {
            kind: DomainKind::LatLonSphere { phi_min },
            n: [n_theta, n_phi],
            origin: [0.0, phi_min + 0.5 * dphi],
            spacing: [dtheta, dphi],
            metric,
            mu,
        })
    }

    /// Replace the metric samples (the area weights follow as `sqrt(det)`).
    pub fn with_metric(mut self, metric: Vec<Sym2>) -> Result<Self> {
        if metric.len() != self.len() {
            return Err(Error::Shape { expected: self.len(), got: metric.len() });
        }
        for (k, m) in metric.iter().enumerate() {
            if !m.is_spd() {
                return Err(Error::NonElliptic { i: k % self.n[0], j: k / self.n[0] });
            }
        }
        self.mu = metric.iter().map(|m| m.det().sqrt()).collect();
        self.metric = metric;
        Ok(self)
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn dims(&self) -> [usize; 2] {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> [f64; 2] {
        self.spacing
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    /// Chart extent along each axis (period for periodic axes).
    pub fn extent(&self) -> [f64; 2] {
        [self.spacing[0] * self.n[0] as f64, self.spacing[1] * self.n[1] as f64]
    }

    pub fn metric(&self) -> &[Sym2] {
        &self.metric
    }

    pub fn area_weights(&self) -> &[f64] {
        &self.mu
    }

    pub fn cell_area(&self) -> f64 {
        self.spacing[0] * self.spacing[1]
    }

    /// Whether the second axis wraps around.
    pub fn periodic_second_axis(&self) -> bool {
        matches!(self.kind, DomainKind::PeriodicRect)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n[0] + i
    }

    /// Chart coordinates of node `(i, j)`.
    #[inline]
    pub fn coords(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + i as f64 * self.spacing[0],
            self.origin[1] + j as f64 * self.spacing[1],
        ]
    }

    /// Signed displacement `x - p` along each axis, using the nearest periodic
    /// image on periodic axes.
    pub fn displacement(&self, x: [f64; 2], p: [f64; 2]) -> [f64; 2] {
        let ext = self.extent();
        let mut d = [x[0] - p[0], x[1] - p[1]];
        d[0] -= ext[0] * (d[0] / ext[0]).round();
        if self.periodic_second_axis() {
            d[1] -= ext[1] * (d[1] / ext[1]).round();
        }
        d
    }

    /// Fractional node index of a chart point.
    pub fn fractional_index(&self, x: [f64; 2]) -> [f64; 2] {
        [
            (x[0] - self.origin[0]) / self.spacing[0],
            (x[1] - self.origin[1]) / self.spacing[1],
        ]
    }

    /// Nearest node to a chart point (wrapping periodic axes, clamping the rest).
    pub fn nearest_node(&self, x: [f64; 2]) -> (usize, usize) {
        let f = self.fractional_index(x);
        let i = (f[0].round() as i64).rem_euclid(self.n[0] as i64) as usize;
        let j = if self.periodic_second_axis() {
            (f[1].round() as i64).rem_euclid(self.n[1] as i64) as usize
        } else {
            (f[1].round().max(0.0) as usize).min(self.n[1] - 1)
        };
        (i, j)
    }

    /// Evaluate a function of chart coordinates on every node.
    pub fn sample<F: Fn([f64; 2]) -> f64>(&self, f: F) -> Field {
        let mut values = Vec::with_capacity(self.len());
        for j in 0..self.n[1] {
            for i in 0..self.n[0] {
                values.push(f(self.coords(i, j)));
            }
        }
        Field::from_vec(self.n[0], self.n[1], values).expect("sized by construction")
    }

    /// Minimum node distance (in cells) from the chart edge, for nodes where
    /// `mask` is set. Periodic rectangles treat the fundamental window edges
    /// as the chart edge; spheres measure against the polar caps only.
    pub fn edge_distance(&self, mask: &[bool]) -> Option<usize> {
        let [n1, n2] = self.n;
        let mut best: Option<usize> = None;
        for j in 0..n2 {
            for i in 0..n1 {
                if !mask[j * n1 + i] {
                    continue;
                }
                let dj = j.min(n2 - 1 - j);
                let d = match self.kind {
                    DomainKind::PeriodicRect => dj.min(i.min(n1 - 1 - i)),
                    DomainKind::LatLonSphere { .. } => dj,
                };
                best = Some(best.map_or(d, |b: usize| b.min(d)));
            }
        }
        best
    }
}

/// Scalar samples on a grid, row-major with the first axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub n1: usize,
    pub n2: usize,
    pub values: Vec<f64>,
}

impl Field {
    pub fn zeros(n1: usize, n2: usize) -> Self {
        Self { n1, n2, values: vec![0.0; n1 * n2] }
    }

    pub fn from_vec(n1: usize, n2: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n1 * n2 {
            return Err(Error::Shape { expected: n1 * n2, got: values.len() });
        }
        Ok(Self { n1, n2, values })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.n1 + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[j * self.n1 + i] = v;
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Node index of the maximum (first in scan order on ties).
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (k, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = k;
            }
        }
        (best % self.n1, best / self.n1)
    }

    pub fn matches(&self, domain: &DomainSpec) -> bool {
        [self.n1, self.n2] == domain.dims()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn periodic_rect_has_identity_metric() {
        let d = DomainSpec::centered_square(3.0, 64).unwrap();
        assert!(d.metric().iter().all(|m| *m == Sym2::IDENTITY));
        assert!(d.area_weights().iter().all(|&w| w == 1.0));
        assert_eq!(d.coords(32, 32), [0.0, 0.0]);
    }

    #[test]
    fn sphere_excludes_caps() {
        let phi_min = 5f64.to_radians();
        let d = DomainSpec::lat_lon_sphere(64, 32, phi_min).unwrap();
        let [_, n2] = d.dims();
        let first = d.coords(0, 0)[1];
        let last = d.coords(0, n2 - 1)[1];
        assert!(first > phi_min && last < PI - phi_min);
        for (k, w) in d.area_weights().iter().enumerate() {
            let phi = d.coords(k % 64, k / 64)[1];
            assert!((w - phi.sin()).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_non_elliptic_metric() {
        let d = DomainSpec::centered_square(1.0, 8).unwrap();
        let mut m = vec![Sym2::IDENTITY; 64];
        m[9] = Sym2::new(1.0, 2.0, 1.0);
        assert_eq!(d.with_metric(m).unwrap_err(), Error::NonElliptic { i: 1, j: 1 });
    }

    #[test]
    fn displacement_uses_nearest_image() {
        let d = DomainSpec::centered_square(1.0, 8).unwrap();
        let dx = d.displacement([0.9, -0.9], [-0.9, 0.9]);
        assert!((dx[0] + 0.2).abs() < 1e-12 && (dx[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn sym2_eigen_roundtrip() {
        let m = Sym2::from_eigen(1.0, 4.0, 0.3);
        let (ev, angle) = m.eigen();
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 4.0).abs() < 1e-12);
        let back = Sym2::from_eigen(ev[0], ev[1], angle);
        assert!((back.a11 - m.a11).abs() < 1e-12);
        assert!((back.a12 - m.a12).abs() < 1e-12);
        assert!((back.a22 - m.a22).abs() < 1e-12);
    }
}
