//! Discrete surface operator, the projected SOR complementarity solver and the
//! outer search on the multiplier that enforces the mass constraint.

pub mod domain;
pub mod io;
pub mod operator;
pub mod psor;

use serde::{Deserialize, Serialize};

pub use domain::{DomainKind, DomainSpec, Field, Sym2};
pub use operator::{assemble_operator, Stencil};
pub use psor::{complementarity_residual, solve_lcp, LcpSolution, SolverOptions};

use crate::error::{Error, Result};
use crate::profiles::alpha0;
use crate::signals::SignalField;

/// Solution of the mass-constrained problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSolution {
    pub u: Field,
    pub alpha: f64,
    /// `alpha - alpha0`.
    pub beta: f64,
    pub mass: f64,
    pub active: Vec<bool>,
    pub xi: Field,
    /// Inactive nodes where the recovered `xi` exceeds 1.
    pub xi_violations: usize,
    pub comp_residual: f64,
    /// `|(1 + alpha) * mean_active(g) - 1|` with sub-cell boundary fractions.
    pub nonlocal_residual: f64,
    /// Same quantity with the plain nodal indicator of `{u > 0}`.
    pub nonlocal_residual_nodal: f64,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
}

/// Result of [`ObstacleSolver::solve_mass_shifted`].
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedSolution {
    pub u: Field,
    pub shift: f64,
    pub mass: f64,
    pub comp_residual: f64,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
}

/// Recovered `xi` and the number of nodes where it exceeds 1.
#[derive(Debug, Clone, PartialEq)]
pub struct XiField {
    pub xi: Field,
    pub violations: usize,
}

/// `xi = 1` on `{u > 0}` and `alpha g / (1 - g)` elsewhere.
pub fn recover_xi(u: &Field, g: &Field, alpha: f64) -> Result<XiField> {
    if u.len() != g.len() {
        return Err(Error::Shape { expected: u.len(), got: g.len() });
    }
    let mut violations = 0;
    let values = u
        .values
        .iter()
        .zip(&g.values)
        .map(|(&u, &g)| {
            if u > 0.0 {
                1.0
            } else {
                let x = alpha * g / (1.0 - g);
                if x > 1.0 + 1e-12 {
                    violations += 1;
                }
                x
            }
        })
        .collect();
    Ok(XiField { xi: Field { n1: u.n1, n2: u.n2, values }, violations })
}

/// `sum u mu h1 h2`.
pub fn mass_of(u: &Field, domain: &DomainSpec) -> Result<f64> {
    if !u.matches(domain) {
        return Err(Error::Shape { expected: domain.len(), got: u.len() });
    }
    let s: f64 = u.values.iter().zip(domain.area_weights()).map(|(u, w)| u * w).sum();
    Ok(s * domain.cell_area())
}

/// Residuals of the identity `integral over {u > 0} of rhs = 0`, normalised by
/// the active area: `(fractional, nodal)`.
///
/// The fractional version weights inactive nodes by `(Lu)/rhs in [0, 1]`,
/// the share of the node's cell covered by the positivity set as seen by the
/// discrete flux.
pub fn active_mean_residual(op: &Stencil, rhs: &[f64], u: &[f64]) -> (f64, f64) {
    let lu = op.apply(u);
    let mu = op.area_weights();
    let (mut num_f, mut den_f, mut num_n, mut den_n) = (0.0, 0.0, 0.0, 0.0);
    for k in 0..u.len() {
        if u[k] > 0.0 {
            num_f += rhs[k] * mu[k];
            den_f += mu[k];
            num_n += rhs[k] * mu[k];
            den_n += mu[k];
        } else if lu[k] < 0.0 && rhs[k] < 0.0 {
            let theta = (lu[k] / rhs[k]).clamp(0.0, 1.0);
            num_f += theta * rhs[k] * mu[k];
            den_f += theta * mu[k];
        }
    }
    if den_n == 0.0 {
        return (0.0, 0.0);
    }
    ((num_f / den_f).abs(), (num_n / den_n).abs())
}

/// Operator bound to a domain, reused across solves.
#[derive(Debug, Clone)]
pub struct ObstacleSolver {
    domain: DomainSpec,
    op: Stencil,
}

struct Trial {
    beta: f64,
    mass: f64,
    u: Vec<f64>,
    residual: f64,
}

impl ObstacleSolver {
    pub fn new(domain: &DomainSpec) -> Result<Self> {
        Ok(Self { domain: domain.clone(), op: assemble_operator(domain)? })
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn operator(&self) -> &Stencil {
        &self.op
    }

    /// Complementarity solve at a fixed multiplier, `rhs = (1 + alpha) g - 1`.
    pub fn solve_fixed_alpha(
        &self,
        g: &Field,
        alpha: f64,
        init: Option<&[f64]>,
        opts: &SolverOptions,
    ) -> Result<LcpSolution> {
        if !g.matches(&self.domain) {
            return Err(Error::Shape { expected: self.domain.len(), got: g.len() });
        }
        if !(alpha >= 0.0) {
            return Err(Error::Domain(format!("alpha {alpha} must be nonnegative")));
        }
        let rhs = rhs_for(g, alpha);
        solve_lcp(&self.op, &rhs, init, opts)
    }

    fn trial(
        &self,
        rhs: Vec<f64>,
        beta: f64,
        init: Option<&[f64]>,
        opts: &SolverOptions,
        sweeps: &mut usize,
    ) -> Result<Option<Trial>> {
        let positive: Vec<bool> = rhs.iter().map(|&f| f > 0.0).collect();
        if let Some(d) = self.domain.edge_distance(&positive) {
            if d < opts.boundary_margin {
                return Ok(None);
            }
        }
        // Both charts are closed (periodic or no-flux), so the weighted rows of
        // L sum to zero and a solution needs a negative weighted sum of rhs.
        if self.op.area_weights().iter().zip(&rhs).map(|(w, f)| w * f).sum::<f64>() >= 0.0 {
            return Ok(None);
        }
        let sol = solve_lcp(&self.op, &rhs, init, opts)?;
        *sweeps += sol.sweeps;
        let mass = self.op.area_weights().iter().zip(&sol.u).map(|(w, u)| w * u).sum::<f64>()
            * self.domain.cell_area();
        Ok(Some(Trial { beta, mass, u: sol.u, residual: sol.residual }))
    }

    /// Solve for the multiplier that makes the total mass equal `target`.
    ///
    /// `beta_hint` seeds the bracket search (for example with the multiplier
    /// of a nearby mass level).
    pub fn solve_mass(
        &self,
        g: &Field,
        gmax: f64,
        target: f64,
        beta_hint: Option<f64>,
        opts: &SolverOptions,
    ) -> Result<ObstacleSolution> {
        if !g.matches(&self.domain) {
            return Err(Error::Shape { expected: self.domain.len(), got: g.len() });
        }
        let a0 = alpha0(gmax)?;
        let (t, evals, sweeps) = self.search(&|beta| rhs_for(g, a0 + beta), target, beta_hint, opts)?;
        self.finish(g, a0, t, evals, sweeps, opts)
    }

    /// Mass-constrained solve with `rhs = lambda - q` on a fixed field `q`.
    ///
    /// `lambda` plays the role of `beta`; `q` must be positive away from a
    /// compact set for the search to terminate.
    pub fn solve_mass_shifted(
        &self,
        q: &Field,
        target: f64,
        hint: Option<f64>,
        opts: &SolverOptions,
    ) -> Result<ShiftedSolution> {
        if !q.matches(&self.domain) {
            return Err(Error::Shape { expected: self.domain.len(), got: q.len() });
        }
        let (t, evals, sweeps) =
            self.search(&|l| q.values.iter().map(|q| l - q).collect(), target, hint, opts)?;
        let active: Vec<bool> = t.u.iter().map(|&v| v > 0.0).collect();
        if let Some(d) = self.domain.edge_distance(&active) {
            if d < opts.boundary_margin {
                return Err(Error::BoundaryContact);
            }
        }
        let [n1, n2] = self.domain.dims();
        Ok(ShiftedSolution {
            u: Field { n1, n2, values: t.u },
            shift: t.beta,
            mass: t.mass,
            comp_residual: t.residual,
            inner_iterations: sweeps,
            outer_iterations: evals,
        })
    }

    /// Bracket and root search on `mass(rhs_of(beta)) = target`, returning
    /// the accepted trial with the outer and inner iteration counts.
    fn search(
        &self,
        rhs_of: &dyn Fn(f64) -> Vec<f64>,
        target: f64,
        beta_hint: Option<f64>,
        opts: &SolverOptions,
    ) -> Result<(Trial, usize, usize)> {
        opts.validate()?;
        if !(target > 0.0 && target.is_finite()) {
            return Err(Error::Domain(format!("mass {target} must be positive")));
        }
        let len = self.domain.len();
        let tol_mass = opts.mass_rtol * target;
        let mut evals = 0usize;
        let mut sweeps = 0usize;

        // Bracket: lo has mass < target, hi has mass > target or is infeasible.
        let mut lo = Trial { beta: 0.0, mass: 0.0, u: vec![0.0; len], residual: 0.0 };
        let mut hi: Option<Trial> = None;
        let mut hi_infeasible: Option<f64> = None;
        let mut beta = beta_hint.filter(|b| *b > 0.0).unwrap_or(1e-4);
        let mut best: Option<Trial> = None;

        let accept = |t: &Trial| (t.mass - target).abs() <= tol_mass;

        // Grow until the mass is exceeded.
        loop {
            if evals >= opts.max_outer {
                return Err(Error::Bracket { target, reason: "outer iteration limit while bracketing".into() });
            }
            evals += 1;
            let init = if lo.beta > 0.0 { Some(lo.u.as_slice()) } else { None };
            match self.trial(rhs_of(beta), beta, init, opts, &mut sweeps)? {
                None => {
                    hi_infeasible = Some(beta);
                    break;
                }
                Some(t) => {
                    if accept(&t) {
                        best = Some(t);
                        break;
                    }
                    if t.mass > target {
                        hi = Some(t);
                        break;
                    }
                    lo = t;
                    beta *= 2.0;
                }
            }
        }
        // With a hint, the first trial may already be above target; shrink.
        if best.is_none() && lo.beta == 0.0 && beta_hint.is_some() {
            let mut b = beta;
            while best.is_none() {
                if evals >= opts.max_outer {
                    return Err(Error::Bracket { target, reason: "outer iteration limit while bracketing".into() });
                }
                b *= 0.5;
                evals += 1;
                let init = hi.as_ref().map(|h| h.u.as_slice());
                match self.trial(rhs_of(b), b, init, opts, &mut sweeps)? {
                    None => {
                        hi_infeasible = Some(b);
                        hi = None;
                    }
                    Some(t) if accept(&t) => best = Some(t),
                    Some(t) if t.mass > target => {
                        hi_infeasible = None;
                        hi = Some(t);
                    }
                    Some(t) => {
                        lo = t;
                        break;
                    }
                }
            }
        }

        // Illinois iteration on cbrt(mass) - cbrt(target), bisecting whenever
        // the upper end is infeasible or the secant step stalls.
        let h = |m: f64| m.cbrt() - target.cbrt();
        let mut h_lo = h(lo.mass);
        let mut h_hi = hi.as_ref().map(|t| h(t.mass));
        let mut side = 0i8;
        while best.is_none() {
            if evals >= opts.max_outer {
                return Err(Error::Bracket { target, reason: "outer iteration limit".into() });
            }
            let b_hi = hi.as_ref().map(|t| t.beta).or(hi_infeasible).unwrap();
            let width = b_hi - lo.beta;
            if width <= 4.0 * f64::EPSILON * b_hi {
                if hi.is_none() {
                    return Err(Error::BoundaryContact);
                }
                break;
            }
            let mut b = match (hi.as_ref(), h_hi) {
                (Some(t), Some(hh)) if hi_infeasible.is_none() => {
                    (lo.beta * hh - t.beta * h_lo) / (hh - h_lo)
                }
                _ => lo.beta + 0.5 * width,
            };
            if !(b > lo.beta + 1e-3 * width && b < b_hi - 1e-3 * width) {
                b = lo.beta + 0.5 * width;
            }
            evals += 1;
            let init = if lo.beta > 0.0 { Some(lo.u.as_slice()) } else { None };
            match self.trial(rhs_of(b), b, init, opts, &mut sweeps)? {
                None => {
                    hi_infeasible = Some(b);
                    hi = None;
                    h_hi = None;
                }
                Some(t) if accept(&t) => best = Some(t),
                Some(t) if t.mass > target => {
                    hi_infeasible = None;
                    h_hi = Some(h(t.mass));
                    hi = Some(t);
                    if side == 1 {
                        h_lo *= 0.5;
                    }
                    side = 1;
                }
                Some(t) => {
                    h_lo = h(t.mass);
                    lo = t;
                    if side == -1 {
                        if let Some(hh) = h_hi.as_mut() {
                            *hh *= 0.5;
                        }
                    }
                    side = -1;
                }
            }
        }
        let t = match best {
            Some(t) => t,
            None => {
                // Bracket collapsed to machine precision: take the closer end.
                let hi = hi.unwrap();
                if (hi.mass - target).abs() < (target - lo.mass).abs() { hi } else { lo }
            }
        };
        Ok((t, evals, sweeps))
    }

    fn finish(&self, g: &Field, a0: f64, t: Trial, evals: usize, sweeps: usize, opts: &SolverOptions) -> Result<ObstacleSolution> {
        let alpha = a0 + t.beta;
        let active: Vec<bool> = t.u.iter().map(|&v| v > 0.0).collect();
        if let Some(d) = self.domain.edge_distance(&active) {
            if d < opts.boundary_margin {
                return Err(Error::BoundaryContact);
            }
        }
        let rhs = rhs_for(g, alpha);
        let (nonlocal, nodal) = active_mean_residual(&self.op, &rhs, &t.u);
        let [n1, n2] = self.domain.dims();
        let u = Field { n1, n2, values: t.u };
        let xi = recover_xi(&u, g, alpha)?;
        Ok(ObstacleSolution {
            u,
            alpha,
            beta: t.beta,
            mass: t.mass,
            active,
            xi: xi.xi,
            xi_violations: xi.violations,
            comp_residual: t.residual,
            nonlocal_residual: nonlocal,
            nonlocal_residual_nodal: nodal,
            inner_iterations: sweeps,
            outer_iterations: evals,
        })
    }
}

fn rhs_for(g: &Field, alpha: f64) -> Vec<f64> {
    g.values.iter().map(|&g| (1.0 + alpha) * g - 1.0).collect()
}

/// Complementarity solve at fixed `alpha` for a signal.
pub fn solve_fixed_alpha(domain: &DomainSpec, g: &SignalField, alpha: f64, opts: &SolverOptions) -> Result<Field> {
    let solver = ObstacleSolver::new(domain)?;
    let sol = solver.solve_fixed_alpha(&g.values, alpha, None, opts)?;
    let [n1, n2] = domain.dims();
    Ok(Field { n1, n2, values: sol.u })
}

/// Mass-constrained solve: find `alpha` with `integral u dS = mass`.
pub fn solve_mass_constrained(
    domain: &DomainSpec,
    g: &SignalField,
    mass: f64,
    opts: &SolverOptions,
) -> Result<ObstacleSolution> {
    ObstacleSolver::new(domain)?.solve_mass(&g.values, g.gmax, mass, None, opts)
}
