//! Projected SOR for the discrete complementarity problem
//! `u >= 0, Lu - f >= 0, u (Lu - f) = 0`.
//!
//! Sweeps are restricted to a (periodically wrapped) working box that covers
//! every node where `f > 0` or `u > 0` plus a one-node ring of zeros. Nodes
//! outside the box keep `u = 0`, which is their exact projected update, so the
//! restriction does not change the iteration.

use serde::{Deserialize, Serialize};

use super::operator::Stencil;
use crate::error::{Error, Result};

/// Inner and outer solver controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// SOR relaxation factor in (0, 2).
    pub omega: f64,
    /// Bound on `max |min(u, Lu - f)|`.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Residual is evaluated every this many sweeps.
    pub check_every: usize,
    /// Relative tolerance on the mass constraint.
    pub mass_rtol: f64,
    /// Maximum multiplier iterations (bracketing plus root search).
    pub max_outer: usize,
    /// Minimum distance, in nodes, between the active set and the chart edge.
    pub boundary_margin: usize,
    /// Replace `omega` by the SOR optimum for the current working box.
    #[serde(default)]
    pub auto_omega: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            omega: 1.7,
            tol: 1e-9,
            max_sweeps: 400_000,
            check_every: 10,
            mass_rtol: 1e-6,
            max_outer: 60,
            boundary_margin: 5,
            auto_omega: false,
        }
    }
}

impl SolverOptions {
    /// Relaxation factor that is optimal for SOR on a Dirichlet square of
    /// `cells` nodes across.
    pub fn optimal_omega(cells: usize) -> f64 {
        let c = cells.max(2) as f64;
        2.0 / (1.0 + (std::f64::consts::PI / c).sin())
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    pub fn with_auto_omega(mut self) -> Self {
        self.auto_omega = true;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega < 2.0) {
            return Err(Error::Domain(format!("omega {} outside (0, 2)", self.omega)));
        }
        if !(self.tol > 0.0 && self.mass_rtol > 0.0) {
            return Err(Error::Domain("tolerances must be positive".into()));
        }
        if self.check_every == 0 || self.max_sweeps == 0 {
            return Err(Error::Domain("sweep counts must be positive".into()));
        }
        Ok(())
    }
}

/// Result of one complementarity solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LcpSolution {
    pub u: Vec<f64>,
    pub residual: f64,
    pub sweeps: usize,
}

/// Index interval on one axis, unwrapped (may exceed `[0, n)` on periodic axes).
#[derive(Debug, Clone, Copy, PartialEq)]
struct Span {
    lo: i64,
    hi: i64,
    n: i64,
    periodic: bool,
}

impl Span {
    fn full(self) -> bool {
        self.hi - self.lo + 1 >= self.n
    }

    fn len(self) -> i64 {
        self.hi - self.lo + 1
    }

    fn normalise(mut self) -> Self {
        if self.full() {
            self.lo = 0;
            self.hi = self.n - 1;
        } else if !self.periodic {
            self.lo = self.lo.max(0);
            self.hi = self.hi.min(self.n - 1);
        }
        self
    }

    /// Whether the low (high) end is an artificial edge that must stay zero.
    fn open_lo(self) -> bool {
        !self.full() && (self.periodic || self.lo > 0)
    }

    fn open_hi(self) -> bool {
        !self.full() && (self.periodic || self.hi < self.n - 1)
    }

    #[inline]
    fn wrap(self, x: i64) -> usize {
        x.rem_euclid(self.n) as usize
    }

    /// Smallest span covering the occupied indices (circularly when periodic).
    fn covering(occupied: &[bool], periodic: bool) -> Option<Self> {
        let n = occupied.len() as i64;
        let first = occupied.iter().position(|&o| o)? as i64;
        let last = occupied.iter().rposition(|&o| o).unwrap() as i64;
        if !periodic {
            return Some(Span { lo: first, hi: last, n, periodic });
        }
        // Largest circular run of empty slots; the span is its complement.
        let mut best_gap = (0i64, -1i64);
        let mut run_start: Option<i64> = None;
        for k in 0..2 * n {
            let occ = occupied[(k % n) as usize];
            match (occ, run_start) {
                (false, None) => run_start = Some(k),
                (true, Some(s)) => {
                    if k - s > best_gap.1 - best_gap.0 + 1 && k - s <= n {
                        best_gap = (s, k - 1);
                    }
                    run_start = None;
                }
                _ => {}
            }
        }
        if best_gap.1 < best_gap.0 {
            return Some(Span { lo: 0, hi: n - 1, n, periodic });
        }
        let lo = best_gap.1 + 1;
        let hi = best_gap.0 + n - 1;
        Some(Span { lo, hi, n, periodic }.normalise())
    }
}

/// Solve the complementarity problem for `-Delta_Gamma u >= rhs` by projected SOR.
pub fn solve_lcp(
    op: &Stencil,
    rhs: &[f64],
    init: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<LcpSolution> {
    opts.validate()?;
    let [n1, n2] = op.dims();
    let len = n1 * n2;
    if rhs.len() != len {
        return Err(Error::Shape { expected: len, got: rhs.len() });
    }
    let mut u = match init {
        Some(v) if v.len() != len => return Err(Error::Shape { expected: len, got: v.len() }),
        Some(v) => v.iter().map(|&x| x.max(0.0)).collect(),
        None => vec![0.0; len],
    };
    let scaled = Scaled::new(op, rhs);

    let mut cols_occ = vec![false; n1];
    let mut rows_occ = vec![false; n2];
    for j in 0..n2 {
        for i in 0..n1 {
            let k = j * n1 + i;
            if rhs[k] > 0.0 || u[k] > 0.0 {
                cols_occ[i] = true;
                rows_occ[j] = true;
            }
        }
    }
    let (Some(cols), Some(rows)) = (
        Span::covering(&cols_occ, true),
        Span::covering(&rows_occ, op.periodic2),
    ) else {
        // f <= 0 and u = 0 everywhere: zero is the solution.
        return Ok(LcpSolution { u, residual: 0.0, sweeps: 0 });
    };
    let mut cols = Span { lo: cols.lo - 1, hi: cols.hi + 1, ..cols }.normalise();
    let mut rows = Span { lo: rows.lo - 1, hi: rows.hi + 1, ..rows }.normalise();

    let pick = |cols: Span, rows: Span| {
        if opts.auto_omega { box_omega(op, &scaled, cols, rows) } else { opts.omega }
    };
    let mut omega = pick(cols, rows);
    // A residual that stops halving has hit the round-off floor above `tol`.
    let stall = 5000.max(20 * n1.max(n2));
    let mut best = (f64::INFINITY, 0);
    let mut sweep = 0;
    while sweep < opts.max_sweeps {
        let hits = sor_sweep(op, &scaled, &mut u, cols, rows, omega);
        sweep += 1;
        if hits[0] && cols.open_lo() {
            cols.lo -= 1;
        }
        if hits[1] && cols.open_hi() {
            cols.hi += 1;
        }
        if hits[2] && rows.open_lo() {
            rows.lo -= 1;
        }
        if hits[3] && rows.open_hi() {
            rows.hi += 1;
        }
        cols = cols.normalise();
        rows = rows.normalise();
        if hits.iter().any(|&h| h) {
            omega = pick(cols, rows);
        }

        if sweep % opts.check_every == 0 {
            let residual = box_residual(op, rhs, &u, cols, rows);
            if !residual.is_finite() {
                return Err(Error::NoConvergence { sweeps: sweep, residual });
            }
            if residual <= opts.tol {
                return Ok(LcpSolution { u, residual, sweeps: sweep });
            }
            if residual < 0.5 * best.0 {
                best = (residual, sweep);
            } else if sweep - best.1 > stall {
                return Err(Error::NoConvergence { sweeps: sweep, residual });
            }
        }
    }
    let residual = box_residual(op, rhs, &u, cols, rows);
    if residual <= opts.tol {
        return Ok(LcpSolution { u, residual, sweeps: sweep });
    }
    Err(Error::NoConvergence { sweeps: sweep, residual })
}

/// Optimal SOR factor from the Jacobi spectral radius of a constant-coefficient
/// Dirichlet box with the weights found at the box centre.
fn box_omega(op: &Stencil, w: &Scaled, cols: Span, rows: Span) -> f64 {
    let k = rows.wrap((rows.lo + rows.hi) / 2) * op.n1 + cols.wrap((cols.lo + cols.hi) / 2);
    let c = |n: i64| (std::f64::consts::PI / (n.max(1) + 1) as f64).cos();
    let rho = (w.west[k] + w.east[k]) * c(cols.len()) + (w.south[k] + w.north[k]) * c(rows.len());
    let rho = rho.clamp(0.0, 1.0 - 1e-12);
    (2.0 / (1.0 + (1.0 - rho * rho).sqrt())).min(1.995)
}

/// Stencil weights divided by the diagonal, and `mu f / diag`.
struct Scaled {
    west: Vec<f64>,
    east: Vec<f64>,
    south: Vec<f64>,
    north: Vec<f64>,
    b: Vec<f64>,
}

impl Scaled {
    fn new(op: &Stencil, rhs: &[f64]) -> Self {
        let inv: Vec<f64> = op.diag.iter().map(|d| 1.0 / d).collect();
        let scale = |w: &[f64]| w.iter().zip(&inv).map(|(w, i)| w * i).collect::<Vec<_>>();
        let b = rhs.iter().zip(&op.mu).zip(&inv).map(|((f, m), i)| f * m * i).collect();
        Scaled { west: scale(&op.west), east: scale(&op.east), south: scale(&op.south), north: scale(&op.north), b }
    }
}

/// One lexicographic projected SOR sweep over the box. Returns whether a
/// positive value was written on the west, east, south and north edges.
fn sor_sweep(op: &Stencil, w: &Scaled, u: &mut [f64], cols: Span, rows: Span, omega: f64) -> [bool; 4] {
    let n1 = op.n1;
    let keep = 1.0 - omega;
    let mut hits = [false; 4];
    // Columns that need no wrapping on either side.
    let straight = !cols.full() && cols.lo >= 1 && cols.hi <= n1 as i64 - 2;
    let (i_lo, i_hi) = (cols.wrap(cols.lo), cols.wrap(cols.hi));
    for jj in rows.lo..=rows.hi {
        let j = rows.wrap(jj);
        let js = if j == 0 { if op.periodic2 { op.n2 - 1 } else { 0 } } else { j - 1 };
        let jn = if j + 1 == op.n2 { if op.periodic2 { 0 } else { j } } else { j + 1 };
        let (row, rs, rn) = (j * n1, js * n1, jn * n1);
        if straight {
            for i in i_lo..=i_hi {
                let k = row + i;
                let s = w.b[k]
                    + w.west[k] * u[k - 1]
                    + w.east[k] * u[k + 1]
                    + w.south[k] * u[rs + i]
                    + w.north[k] * u[rn + i];
                let v = keep * u[k] + omega * s;
                u[k] = if v > 0.0 { v } else { 0.0 };
            }
        } else {
            let mut i = i_lo;
            for _ in cols.lo..=cols.hi {
                let iw = if i == 0 { n1 - 1 } else { i - 1 };
                let ie = if i + 1 == n1 { 0 } else { i + 1 };
                let k = row + i;
                let s = w.b[k]
                    + w.west[k] * u[row + iw]
                    + w.east[k] * u[row + ie]
                    + w.south[k] * u[rs + i]
                    + w.north[k] * u[rn + i];
                let v = keep * u[k] + omega * s;
                u[k] = if v > 0.0 { v } else { 0.0 };
                i = if i + 1 == n1 { 0 } else { i + 1 };
            }
        }
        hits[0] |= u[row + i_lo] > 0.0;
        hits[1] |= u[row + i_hi] > 0.0;
        if jj == rows.lo || jj == rows.hi {
            let mut i = i_lo;
            let mut any = false;
            for _ in cols.lo..=cols.hi {
                any |= u[row + i] > 0.0;
                i = if i + 1 == n1 { 0 } else { i + 1 };
            }
            if jj == rows.lo {
                hits[2] |= any;
            }
            if jj == rows.hi {
                hits[3] |= any;
            }
        }
    }
    hits
}

fn box_residual(op: &Stencil, rhs: &[f64], u: &[f64], cols: Span, rows: Span) -> f64 {
    let n1 = op.n1;
    let mut r: f64 = 0.0;
    for jj in rows.lo..=rows.hi {
        let j = rows.wrap(jj);
        for ii in cols.lo..=cols.hi {
            let i = cols.wrap(ii);
            let k = j * n1 + i;
            let lu = op.symmetric_row(u, i, j) / op.mu[k];
            let c = u[k].min(lu - rhs[k]);
            if !c.is_finite() {
                return f64::NAN;
            }
            r = r.max(c.abs());
        }
    }
    r
}

/// `max |min(u, Lu - f)|` over the whole grid.
pub fn complementarity_residual(op: &Stencil, rhs: &[f64], u: &[f64]) -> f64 {
    let lu = op.apply(u);
    u.iter()
        .zip(&lu)
        .zip(rhs)
        .map(|((&u, &lu), &f)| u.min(lu - f).abs())
        .fold(0.0, f64::max)
}
