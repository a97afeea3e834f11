//! Post-processing of solved fields: active-set components, free-boundary
//! polylines, Hausdorff distances, blow-up resampling and ellipse fits.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::{ProfileField, ScalingExponents};
use crate::solver::{DomainSpec, Field, Sym2};

/// Ordered points tracing part of `d{u > 0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPolyline {
    pub points: Vec<[f64; 2]>,
    pub closed: bool,
}

/// One 4-connected component of `{u > 0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub id: usize,
    pub cells: usize,
    pub mass: f64,
    /// Mass-weighted centroid in chart coordinates (unwrapped across seams).
    pub centroid: [f64; 2],
    /// `[lo, hi]` corners of the node bounding box, unwrapped.
    pub bbox: [[f64; 2]; 2],
    pub boundary: Vec<BoundaryPolyline>,
    /// Node indices of the component.
    #[serde(skip)]
    pub nodes: Vec<usize>,
}

struct RawComponent {
    nodes: Vec<usize>,
    /// Unwrapped integer coordinates, parallel to `nodes`.
    coords: Vec<[i64; 2]>,
}

fn label_components(u: &Field, periodic2: bool) -> Vec<RawComponent> {
    let (n1, n2) = (u.n1 as i64, u.n2 as i64);
    let mut seen = vec![false; u.len()];
    let mut out = Vec::new();
    for start in 0..u.len() {
        if seen[start] || u.values[start] <= 0.0 {
            continue;
        }
        seen[start] = true;
        let s = [(start % u.n1) as i64, (start / u.n1) as i64];
        let mut stack = vec![s];
        let mut comp = RawComponent { nodes: Vec::new(), coords: Vec::new() };
        while let Some(c) = stack.pop() {
            let k = (c[1].rem_euclid(n2) * n1 + c[0].rem_euclid(n1)) as usize;
            comp.nodes.push(k);
            comp.coords.push(c);
            for d in [[-1, 0], [1, 0], [0, -1], [0, 1]] {
                let nb = [c[0] + d[0], c[1] + d[1]];
                if !periodic2 && (nb[1] < 0 || nb[1] >= n2) {
                    continue;
                }
                let kk = (nb[1].rem_euclid(n2) * n1 + nb[0].rem_euclid(n1)) as usize;
                if !seen[kk] && u.values[kk] > 0.0 {
                    seen[kk] = true;
                    stack.push(nb);
                }
            }
        }
        out.push(comp);
    }
    out
}

/// 4-connected components of `{u > 0}` ordered by descending mass (ties in
/// scan order of their first node).
pub fn active_components(u: &Field, domain: &DomainSpec) -> Result<Vec<ComponentReport>> {
    if !u.matches(domain) {
        return Err(Error::Shape { expected: domain.len(), got: u.len() });
    }
    let mu = domain.area_weights();
    let da = domain.cell_area();
    let [h1, h2] = domain.spacing();
    let o = domain.origin();
    let mut reports = Vec::new();
    for (id, c) in label_components(u, domain.periodic_second_axis()).into_iter().enumerate() {
        let mut mass = 0.0;
        let mut cx = [0.0, 0.0];
        let mut lo = [i64::MAX, i64::MAX];
        let mut hi = [i64::MIN, i64::MIN];
        for (&k, xy) in c.nodes.iter().zip(&c.coords) {
            let w = u.values[k] * mu[k] * da;
            mass += w;
            cx[0] += w * (o[0] + xy[0] as f64 * h1);
            cx[1] += w * (o[1] + xy[1] as f64 * h2);
            for a in 0..2 {
                lo[a] = lo[a].min(xy[a]);
                hi[a] = hi[a].max(xy[a]);
            }
        }
        let boundary = march_component(&c, lo, hi, domain);
        reports.push(ComponentReport {
            id,
            cells: c.nodes.len(),
            mass,
            centroid: [cx[0] / mass, cx[1] / mass],
            bbox: [
                [o[0] + lo[0] as f64 * h1, o[1] + lo[1] as f64 * h2],
                [o[0] + hi[0] as f64 * h1, o[1] + hi[1] as f64 * h2],
            ],
            boundary,
            nodes: c.nodes,
        });
    }
    reports.sort_by(|a, b| b.mass.total_cmp(&a.mass).then(a.id.cmp(&b.id)));
    for (k, r) in reports.iter_mut().enumerate() {
        r.id = k;
    }
    Ok(reports)
}

/// Marching squares at level 1/2 on the 0/1 indicator of one component,
/// on its unwrapped bounding box padded by one node.
fn march_component(c: &RawComponent, lo: [i64; 2], hi: [i64; 2], domain: &DomainSpec) -> Vec<BoundaryPolyline> {
    let w = (hi[0] - lo[0] + 3) as usize;
    let h = (hi[1] - lo[1] + 3) as usize;
    let mut mask = vec![false; w * h];
    for xy in &c.coords {
        let i = (xy[0] - lo[0] + 1) as usize;
        let j = (xy[1] - lo[1] + 1) as usize;
        mask[j * w + i] = true;
    }
    let [h1, h2] = domain.spacing();
    let o = domain.origin();
    let base = [o[0] + (lo[0] - 1) as f64 * h1, o[1] + (lo[1] - 1) as f64 * h2];
    march_mask(&mask, w, h)
        .into_iter()
        .map(|line| BoundaryPolyline {
            points: line
                .points
                .into_iter()
                .map(|p| [base[0] + p[0] * h1, base[1] + p[1] * h2])
                .collect(),
            closed: line.closed,
        })
        .collect()
}

/// Marching squares on a boolean mask; points are in node-index units.
/// Saddle cells keep diagonal nodes apart, matching 4-connectivity.
pub fn march_mask(mask: &[bool], w: usize, h: usize) -> Vec<BoundaryPolyline> {
    // Edge midpoints are keyed in doubled index coordinates.
    type Key = (i64, i64);
    let mut segs: Vec<(Key, Key)> = Vec::new();
    let at = |i: usize, j: usize| mask[j * w + i];
    for j in 0..h.saturating_sub(1) {
        for i in 0..w.saturating_sub(1) {
            let (a, b, c, d) = (at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1));
            let (x, y) = (2 * i as i64, 2 * j as i64);
            let bottom = (x + 1, y);
            let right = (x + 2, y + 1);
            let top = (x + 1, y + 2);
            let left = (x, y + 1);
            let code = (a as u8) | (b as u8) << 1 | (c as u8) << 2 | (d as u8) << 3;
            match code {
                0 | 15 => {}
                1 | 14 => segs.push((left, bottom)),
                2 | 13 => segs.push((bottom, right)),
                3 | 12 => segs.push((left, right)),
                4 | 11 => segs.push((right, top)),
                6 | 9 => segs.push((bottom, top)),
                7 | 8 => segs.push((left, top)),
                5 => {
                    segs.push((left, bottom));
                    segs.push((right, top));
                }
                10 => {
                    segs.push((bottom, right));
                    segs.push((left, top));
                }
                _ => unreachable!(),
            }
        }
    }
    let mut ends: HashMap<Key, Vec<usize>> = HashMap::new();
    for (s, (p, q)) in segs.iter().enumerate() {
        ends.entry(*p).or_default().push(s);
        ends.entry(*q).or_default().push(s);
    }
    let mut used = vec![false; segs.len()];
    let mut lines = Vec::new();
    for s0 in 0..segs.len() {
        if used[s0] {
            continue;
        }
        used[s0] = true;
        let (start, mut cur) = segs[s0];
        let mut pts = vec![start, cur];
        let mut closed = false;
        loop {
            if cur == start {
                closed = true;
                pts.pop();
                break;
            }
            let next = ends[&cur].iter().copied().find(|&s| !used[s]);
            let Some(s) = next else { break };
            used[s] = true;
            let (p, q) = segs[s];
            cur = if p == cur { q } else { p };
            pts.push(cur);
        }
        lines.push(BoundaryPolyline {
            points: pts.into_iter().map(|(x, y)| [x as f64 * 0.5, y as f64 * 0.5]).collect(),
            closed,
        });
    }
    lines
}

/// Closed polylines of `d{u > 0}`, component by component (descending mass).
pub fn extract_free_boundary(u: &Field, domain: &DomainSpec) -> Result<Vec<BoundaryPolyline>> {
    Ok(active_components(u, domain)?.into_iter().flat_map(|c| c.boundary).collect())
}

/// Symmetric Hausdorff distance between two finite point sets.
pub fn hausdorff_distance(p: &[[f64; 2]], q: &[[f64; 2]]) -> Result<f64> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::Domain("Hausdorff distance of an empty set".into()));
    }
    Ok(directed(p, q).max(directed(q, p)))
}

fn directed(p: &[[f64; 2]], q: &[[f64; 2]]) -> f64 {
    p.iter()
        .map(|a| {
            q.iter()
                .map(|b| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
        .sqrt()
}

/// Uniform node grid on `[lo, hi]` (both ends included).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefGrid {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub n: [usize; 2],
}

impl RefGrid {
    /// Square grid covering `factor` times the given bounding box.
    pub fn around(lo: [f64; 2], hi: [f64; 2], factor: f64, n: usize) -> Self {
        let c = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
        let r = [0.5 * factor * (hi[0] - lo[0]), 0.5 * factor * (hi[1] - lo[1])];
        RefGrid { lo: [c[0] - r[0], c[1] - r[1]], hi: [c[0] + r[0], c[1] + r[1]], n: [n, n] }
    }

    pub fn spacing(&self) -> [f64; 2] {
        [
            (self.hi[0] - self.lo[0]) / (self.n[0] - 1) as f64,
            (self.hi[1] - self.lo[1]) / (self.n[1] - 1) as f64,
        ]
    }

    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        let h = self.spacing();
        [self.lo[0] + i as f64 * h[0], self.lo[1] + j as f64 * h[1]]
    }

    pub fn sample(&self, f: impl Fn([f64; 2]) -> f64) -> Field {
        let mut v = Vec::with_capacity(self.n[0] * self.n[1]);
        for j in 0..self.n[1] {
            for i in 0..self.n[0] {
                v.push(f(self.point(i, j)));
            }
        }
        Field { n1: self.n[0], n2: self.n[1], values: v }
    }
}

/// Bilinear interpolation of a nodal field at a chart point.
pub fn bilinear(u: &Field, domain: &DomainSpec, x: [f64; 2]) -> Result<f64> {
    let f = domain.fractional_index(x);
    let [n1, n2] = domain.dims();
    let (i0, j0) = (f[0].floor(), f[1].floor());
    let (tx, ty) = (f[0] - i0, f[1] - j0);
    let i0 = i0 as i64;
    let j0 = j0 as i64;
    let periodic2 = domain.periodic_second_axis();
    if !periodic2 && (j0 < 0 || j0 + 1 >= n2 as i64) && !(ty == 0.0 && j0 >= 0 && j0 < n2 as i64) {
        return Err(Error::Domain(format!("point {x:?} outside the chart")));
    }
    let idx = |i: i64, j: i64| -> usize {
        let jj = if periodic2 { j.rem_euclid(n2 as i64) } else { j.min(n2 as i64 - 1) };
        (jj * n1 as i64 + i.rem_euclid(n1 as i64)) as usize
    };
    let v00 = u.values[idx(i0, j0)];
    let v10 = u.values[idx(i0 + 1, j0)];
    let v01 = u.values[idx(i0, j0 + 1)];
    let v11 = u.values[idx(i0 + 1, j0 + 1)];
    Ok((1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11))
}

/// `U_m(y) = m^(-amplitude) u(center + (m^spatial[0] y1, m^spatial[1] y2))`
/// sampled on a reference grid.
pub fn rescale_solution(
    u: &Field,
    domain: &DomainSpec,
    center: [f64; 2],
    exponents: &ScalingExponents,
    m: f64,
    grid: &RefGrid,
) -> Result<Field> {
    if !(m > 0.0) {
        return Err(Error::Domain(format!("mass {m} must be positive")));
    }
    let k = [m.powf(exponents.spatial[0]), m.powf(exponents.spatial[1])];
    let amp = m.powf(-exponents.amplitude);
    let e = domain.extent();
    for a in 0..2 {
        let reach = k[a] * grid.lo[a].abs().max(grid.hi[a].abs());
        if reach >= 0.5 * e[a] {
            return Err(Error::Domain("reference window exits the physical chart".into()));
        }
    }
    let mut v = Vec::with_capacity(grid.n[0] * grid.n[1]);
    for j in 0..grid.n[1] {
        for i in 0..grid.n[0] {
            let y = grid.point(i, j);
            let x = [center[0] + k[0] * y[0], center[1] + k[1] * y[1]];
            v.push(amp * bilinear(u, domain, x)?);
        }
    }
    Ok(Field { n1: grid.n[0], n2: grid.n[1], values: v })
}

/// Sup and L1 distances between a reference-grid field and a profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileError {
    pub linf: f64,
    pub l1: f64,
}

pub fn profile_error(u: &Field, grid: &RefGrid, profile: &ProfileField) -> Result<ProfileError> {
    if [u.n1, u.n2] != grid.n {
        return Err(Error::Shape { expected: grid.n[0] * grid.n[1], got: u.len() });
    }
    let h = grid.spacing();
    let mut linf: f64 = 0.0;
    let mut l1 = 0.0;
    for j in 0..grid.n[1] {
        for i in 0..grid.n[0] {
            let d = (u.get(i, j) - profile.eval(grid.point(i, j))).abs();
            linf = linf.max(d);
            // Trapezoid weights.
            let wi = if i == 0 || i + 1 == grid.n[0] { 0.5 } else { 1.0 };
            let wj = if j == 0 || j + 1 == grid.n[1] { 0.5 } else { 1.0 };
            l1 += wi * wj * d;
        }
    }
    Ok(ProfileError { linf, l1: l1 * h[0] * h[1] })
}

/// Least-squares ellipse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseFit {
    pub center: [f64; 2],
    /// Semiaxes `a >= b`.
    pub semiaxes: [f64; 2],
    /// Direction of the major axis.
    pub angle: f64,
    /// RMS algebraic residual in normalised coordinates.
    pub rms: f64,
}

/// Algebraic least-squares conic `A x^2 + B xy + C y^2 + D x + E y + F = 0`
/// under `A + C = 1`, rejected unless it is an ellipse.
pub fn ellipse_fit(points: &[[f64; 2]]) -> Result<EllipseFit> {
    let n = points.len();
    if n < 6 {
        return Err(Error::Degenerate(format!("{n} points, need at least 6")));
    }
    let mean = points.iter().fold([0.0, 0.0], |a, p| [a[0] + p[0], a[1] + p[1]]);
    let mean = [mean[0] / n as f64, mean[1] / n as f64];
    let scale = (points
        .iter()
        .map(|p| (p[0] - mean[0]).powi(2) + (p[1] - mean[1]).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt();
    if !(scale > 0.0) {
        return Err(Error::Degenerate("coincident points".into()));
    }
    let mut a = DMatrix::zeros(n, 5);
    let mut rhs = DVector::zeros(n);
    for (r, p) in points.iter().enumerate() {
        let (x, y) = ((p[0] - mean[0]) / scale, (p[1] - mean[1]) / scale);
        a[(r, 0)] = x * x - y * y;
        a[(r, 1)] = x * y;
        a[(r, 2)] = x;
        a[(r, 3)] = y;
        a[(r, 4)] = 1.0;
        rhs[r] = -y * y;
    }
    let svd = a.clone().svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    if sv.min() <= 1e-10 * smax {
        return Err(Error::Degenerate("conic fit is rank deficient".into()));
    }
    let sol = svd.solve(&rhs, 0.0).map_err(|e| Error::Degenerate(e.to_string()))?;
    let rms = ((&a * &sol - &rhs).norm_squared() / n as f64).sqrt();
    let (ca, cb, cd, ce, cf) = (sol[0], sol[1], sol[2], sol[3], sol[4]);
    let cc = 1.0 - ca;
    let disc = cb * cb - 4.0 * ca * cc;
    if !(disc < 0.0) {
        return Err(Error::Degenerate("fitted conic is not an ellipse".into()));
    }
    // Centre: gradient of the quadratic form vanishes.
    let det = 4.0 * ca * cc - cb * cb;
    let x0 = (cb * ce - 2.0 * cc * cd) / det;
    let y0 = (cb * cd - 2.0 * ca * ce) / det;
    let f0 = cf + 0.5 * (cd * x0 + ce * y0);
    let form = Sym2::new(ca, 0.5 * cb, cc);
    let (ev, angle) = form.eigen();
    let (r0, r1) = (-f0 / ev[0], -f0 / ev[1]);
    if !(r0 > 0.0 && r1 > 0.0) {
        return Err(Error::Degenerate("fitted conic is imaginary".into()));
    }
    // Smaller eigenvalue belongs to the major axis.
    let angle = angle.rem_euclid(std::f64::consts::PI);
    Ok(EllipseFit {
        center: [mean[0] + scale * x0, mean[1] + scale * y0],
        semiaxes: [scale * r0.sqrt(), scale * r1.sqrt()],
        angle,
        rms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn empty_field_has_no_components() {
        let d = DomainSpec::centered_square(1.0, 16).unwrap();
        let u = Field::zeros(16, 16);
        assert!(active_components(&u, &d).unwrap().is_empty());
        assert!(extract_free_boundary(&u, &d).unwrap().is_empty());
    }

    #[test]
    fn component_across_seam_is_one() {
        let d = DomainSpec::centered_square(1.0, 16).unwrap();
        let mut u = Field::zeros(16, 16);
        for &i in &[15usize, 0, 1] {
            for &j in &[15usize, 0] {
                u.set(i, j, 1.0);
            }
        }
        let c = active_components(&u, &d).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].cells, 6);
        assert_eq!(c[0].boundary.len(), 1);
        assert!(c[0].boundary[0].closed);
    }

    #[test]
    fn diagonal_touch_stays_split() {
        let d = DomainSpec::centered_square(1.0, 8).unwrap();
        let mut u = Field::zeros(8, 8);
        u.set(3, 3, 1.0);
        u.set(4, 4, 2.0);
        let c = active_components(&u, &d).unwrap();
        assert_eq!(c.len(), 2);
        assert!(c[0].mass > c[1].mass);
        assert!(c.iter().all(|c| c.boundary.len() == 1 && c.boundary[0].points.len() == 4));
    }

    #[test]
    fn hausdorff_basics() {
        let circle = |r: f64| -> Vec<[f64; 2]> {
            (0..2000).map(|k| {
                let t = 2.0 * PI * k as f64 / 2000.0;
                [r * t.cos(), r * t.sin()]
            }).collect()
        };
        let (a, b) = (circle(2.0), circle(2.1));
        assert_eq!(hausdorff_distance(&a, &a).unwrap(), 0.0);
        let d = hausdorff_distance(&a, &b).unwrap();
        assert!((d - 0.1).abs() < 1e-3);
        assert_eq!(d, hausdorff_distance(&b, &a).unwrap());
        assert!(hausdorff_distance(&a, &[]).is_err());
    }

    #[test]
    fn ellipse_fit_exact_and_degenerate() {
        let (cx, cy, a, b, th) = (0.3, -1.2, 2.5, 1.1, 0.4f64);
        let pts: Vec<[f64; 2]> = (0..40)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / 40.0;
                let (u, v) = (a * t.cos(), b * t.sin());
                [cx + th.cos() * u - th.sin() * v, cy + th.sin() * u + th.cos() * v]
            })
            .collect();
        let e = ellipse_fit(&pts).unwrap();
        assert!((e.center[0] - cx).abs() < 1e-9 && (e.center[1] - cy).abs() < 1e-9);
        assert!((e.semiaxes[0] - a).abs() < 1e-9 && (e.semiaxes[1] - b).abs() < 1e-9);
        assert!((e.angle - th).abs() < 1e-9);
        let line: Vec<[f64; 2]> = (0..10).map(|k| [k as f64, 2.0 * k as f64]).collect();
        assert!(ellipse_fit(&line).is_err());
        assert!(ellipse_fit(&pts[..5]).is_err());
    }

    #[test]
    fn rescale_identity_and_window_check() {
        let d = DomainSpec::centered_square(2.0, 64).unwrap();
        let u = d.sample(|x| x[0] + 2.0 * x[1]);
        let id = ScalingExponents { spatial: [0.0, 0.0], amplitude: 0.0, alpha: 0.0 };
        let g = RefGrid { lo: [-1.0, -1.0], hi: [1.0, 1.0], n: [33, 33] };
        let r = rescale_solution(&u, &d, [0.0, 0.0], &id, 1.0, &g).unwrap();
        for j in 0..33 {
            for i in 0..33 {
                let y = g.point(i, j);
                assert!((r.get(i, j) - (y[0] + 2.0 * y[1])).abs() < 1e-12);
            }
        }
        let big = RefGrid { lo: [-3.0, -3.0], hi: [3.0, 3.0], n: [5, 5] };
        assert!(rescale_solution(&u, &d, [0.0, 0.0], &id, 1.0, &big).is_err());
    }
}
