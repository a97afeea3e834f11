//! Mass sweeps toward `M -> 0`, log-log exponent fits and verification
//! reports for each structural case.

mod cases;
mod presets;

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    active_components, bilinear, hausdorff_distance, profile_error, rescale_solution, RefGrid,
};
use crate::error::{Error, Result};
use crate::profiles::{ProfileField, ScalingExponents};
use crate::signals::SignalField;
use crate::solver::{DomainSpec, ObstacleSolution, ObstacleSolver, SolverOptions};

pub use cases::{
    mass_ratio_separation, noncoercive_limit_profile, verify_anisotropic_case, verify_morse_case,
    verify_noncoercive_case, AnisoParams, CaseParams, CurveParams, HomBump, HomogeneousParams,
    MorseBump, MorseParams, NoncoerciveLimit, NoncoerciveLimitResult, NoncoerciveParams,
    SeparationParams, Tolerances,
};
pub use presets::{geometric_masses, preset, preset_names, DomainParams, RunSetup};

/// What the sweep should measure around one maximum.
#[derive(Debug, Clone)]
pub struct BumpSpec {
    pub center: [f64; 2],
    pub exponents: ScalingExponents,
    /// Semiaxes, in chart units, of the axis-aligned ellipse where `g` follows
    /// the local model; activity outside it invalidates the level.
    pub model_radius: [f64; 2],
    /// Unit-mass limit profile in blow-up coordinates.
    pub profile: Option<ProfileField>,
    /// Fixed comparison window in blow-up coordinates. Defaults to the
    /// profile support box scaled by the case window factor.
    pub ref_window: Option<([f64; 2], [f64; 2])>,
    /// `rho` values at which the first-axis width over `|y2| in (rho, 2 rho)`
    /// is recorded.
    pub width_probes: Vec<f64>,
}

impl BumpSpec {
    pub fn new(center: [f64; 2], exponents: ScalingExponents, model_radius: [f64; 2]) -> Self {
        Self { center, exponents, model_radius, profile: None, ref_window: None, width_probes: Vec::new() }
    }
}

/// Sweep-wide descriptor.
#[derive(Debug, Clone)]
pub struct SweepCase {
    pub name: String,
    pub gmax: f64,
    pub bumps: Vec<BumpSpec>,
    /// `(c, p)` with `beta ~ c M^p`; only seeds the multiplier search.
    pub beta_guess: Option<(f64, f64)>,
    /// Nodes per axis of the reference grid used for profile errors.
    pub ref_grid_n: usize,
    pub window_factor: f64,
}

impl SweepCase {
    pub fn new(name: &str, gmax: f64, bumps: Vec<BumpSpec>) -> Self {
        Self { name: name.into(), gmax, bumps, beta_guess: None, ref_grid_n: 161, window_factor: 1.5 }
    }
}

/// Measurements around one maximum at one mass level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpRecord {
    pub id: usize,
    pub center: [f64; 2],
    /// Mass of the active components attached to this maximum.
    pub mass: f64,
    pub cells: usize,
    /// Fewest nodes spanned by the active set along either axis.
    pub cells_across: usize,
    pub hausdorff: Option<f64>,
    pub linf: Option<f64>,
    pub l1: Option<f64>,
    /// Largest `|y_k|` over active nodes in blow-up coordinates.
    pub reach: [f64; 2],
    /// `[rho, width]` pairs for the requested probes.
    pub strip_widths: Vec<[f64; 2]>,
    /// `max |u(c + d) - u(c + (-d1, d2))| / max u` over the active set.
    pub mirror_asymmetry: f64,
    /// Free-boundary points in blow-up coordinates.
    #[serde(skip)]
    pub boundary: Vec<[f64; 2]>,
}

/// One mass level of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    /// Requested total mass.
    pub target: f64,
    /// Achieved total mass.
    pub mass: f64,
    pub alpha: f64,
    pub beta: f64,
    pub bumps: Vec<BumpRecord>,
    pub valid: bool,
    pub note: Option<String>,
    pub comp_residual: f64,
    pub nonlocal_residual: f64,
    pub nonlocal_residual_nodal: f64,
    pub xi_violations: usize,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
    #[serde(skip)]
    pub runtime: f64,
}

impl SweepRecord {
    fn failed(target: f64, note: String, runtime: f64) -> Self {
        Self {
            target,
            mass: f64::NAN,
            alpha: f64::NAN,
            beta: f64::NAN,
            bumps: Vec::new(),
            valid: false,
            note: Some(note),
            comp_residual: f64::NAN,
            nonlocal_residual: f64::NAN,
            nonlocal_residual_nodal: f64::NAN,
            xi_violations: 0,
            inner_iterations: 0,
            outer_iterations: 0,
            runtime,
        }
    }
}

fn check_masses(masses: &[f64], min_levels: usize) -> Result<()> {
    if masses.len() < min_levels {
        return Err(Error::Domain(format!("need at least {min_levels} mass levels, got {}", masses.len())));
    }
    if masses.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
        return Err(Error::Domain("mass levels must be positive".into()));
    }
    if masses.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Domain("mass levels must be strictly decreasing".into()));
    }
    Ok(())
}

/// Solve every mass level and measure each maximum. Levels run concurrently
/// on `workers` threads; solver failures and window contact are recorded as
/// invalid levels instead of aborting.
pub fn sweep_mass(
    domain: &DomainSpec,
    signal: &SignalField,
    masses: &[f64],
    case: &SweepCase,
    opts: &SolverOptions,
    workers: usize,
) -> Result<Vec<SweepRecord>> {
    check_masses(masses, 5)?;
    sweep_levels(domain, signal, masses, case, opts, workers)
}

pub(crate) fn sweep_levels(
    domain: &DomainSpec,
    signal: &SignalField,
    masses: &[f64],
    case: &SweepCase,
    opts: &SolverOptions,
    workers: usize,
) -> Result<Vec<SweepRecord>> {
    if !signal.values.matches(domain) {
        return Err(Error::Shape { expected: domain.len(), got: signal.values.len() });
    }
    let solver = ObstacleSolver::new(domain)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
    pool.install(|| {
        masses
            .par_iter()
            .map(|&m| run_level(&solver, signal, m, case, opts))
            .collect()
    })
}

fn run_level(
    solver: &ObstacleSolver,
    signal: &SignalField,
    target: f64,
    case: &SweepCase,
    opts: &SolverOptions,
) -> Result<SweepRecord> {
    let start = Instant::now();
    let hint = case.beta_guess.map(|(c, p)| c * target.powf(p));
    let sol = match solver.solve_mass(&signal.values, signal.gmax, target, hint, opts) {
        Ok(s) => s,
        Err(e) => return Ok(SweepRecord::failed(target, e.to_string(), start.elapsed().as_secs_f64())),
    };
    let (bumps, note) = measure(solver.domain(), &sol, case)?;
    Ok(SweepRecord {
        target,
        mass: sol.mass,
        alpha: sol.alpha,
        beta: sol.beta,
        bumps,
        valid: note.is_none(),
        note,
        comp_residual: sol.comp_residual,
        nonlocal_residual: sol.nonlocal_residual,
        nonlocal_residual_nodal: sol.nonlocal_residual_nodal,
        xi_violations: sol.xi_violations,
        inner_iterations: sol.inner_iterations,
        outer_iterations: sol.outer_iterations,
        runtime: start.elapsed().as_secs_f64(),
    })
}

/// First maximum, if any, with an active node outside its model window.
/// Nodes belong to the nearest centre.
pub fn window_exit(domain: &DomainSpec, u: &crate::solver::Field, case: &SweepCase) -> Option<usize> {
    let n1 = domain.dims()[0];
    for (node, &v) in u.values.iter().enumerate() {
        if v <= 0.0 {
            continue;
        }
        let x = domain.coords(node % n1, node / n1);
        let (id, spec) = case.bumps.iter().enumerate().min_by(|(_, a), (_, b)| {
            norm(domain.displacement(x, a.center)).total_cmp(&norm(domain.displacement(x, b.center)))
        })?;
        let d = domain.displacement(x, spec.center);
        if (d[0] / spec.model_radius[0]).powi(2) + (d[1] / spec.model_radius[1]).powi(2) > 1.0 {
            return Some(id);
        }
    }
    None
}

fn norm(d: [f64; 2]) -> f64 {
    d[0].hypot(d[1])
}

/// Per-maximum measurements and, if the level is unusable, the reason.
fn measure(domain: &DomainSpec, sol: &ObstacleSolution, case: &SweepCase) -> Result<(Vec<BumpRecord>, Option<String>)> {
    let comps = active_components(&sol.u, domain)?;
    let n1 = domain.dims()[0];
    let [h1, h2] = domain.spacing();
    let mut note = None;
    let mut owned: Vec<Vec<usize>> = vec![Vec::new(); case.bumps.len()];
    if !case.bumps.is_empty() {
        for (c, comp) in comps.iter().enumerate() {
            let nearest = (0..case.bumps.len())
                .min_by(|&a, &b| {
                    let da = norm(domain.displacement(comp.centroid, case.bumps[a].center));
                    let db = norm(domain.displacement(comp.centroid, case.bumps[b].center));
                    da.total_cmp(&db)
                })
                .unwrap();
            owned[nearest].push(c);
        }
    }
    let umax = sol.u.max();
    let mut out = Vec::with_capacity(case.bumps.len());
    for (id, spec) in case.bumps.iter().enumerate() {
        let mass: f64 = owned[id].iter().map(|&c| comps[c].mass).sum();
        let cells: usize = owned[id].iter().map(|&c| comps[c].cells).sum();
        let mut rec = BumpRecord {
            id,
            center: spec.center,
            mass,
            cells,
            cells_across: 0,
            hausdorff: None,
            linf: None,
            l1: None,
            reach: [0.0, 0.0],
            strip_widths: spec.width_probes.iter().map(|&r| [r, 0.0]).collect(),
            mirror_asymmetry: 0.0,
            boundary: Vec::new(),
        };
        if mass <= 0.0 {
            note.get_or_insert_with(|| format!("maximum {id} has no active cells"));
            out.push(rec);
            continue;
        }
        let k = [mass.powf(spec.exponents.spatial[0]), mass.powf(spec.exponents.spatial[1])];
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let mut asym: f64 = 0.0;
        for &c in &owned[id] {
            for &node in &comps[c].nodes {
                let x = domain.coords(node % n1, node / n1);
                let d = domain.displacement(x, spec.center);
                if (d[0] / spec.model_radius[0]).powi(2) + (d[1] / spec.model_radius[1]).powi(2) > 1.0 {
                    note.get_or_insert_with(|| format!("active set of maximum {id} leaves the model window"));
                }
                let y = [d[0] / k[0], d[1] / k[1]];
                for a in 0..2 {
                    lo[a] = lo[a].min(d[a]);
                    hi[a] = hi[a].max(d[a]);
                    rec.reach[a] = rec.reach[a].max(y[a].abs());
                }
                for w in rec.strip_widths.iter_mut() {
                    let rho = w[0];
                    if y[1].abs() > rho && y[1].abs() < 2.0 * rho {
                        w[1] = w[1].max(y[0].abs());
                    }
                }
                let mirrored = [spec.center[0] - d[0], spec.center[1] + d[1]];
                let um = bilinear(&sol.u, domain, mirrored)?;
                asym = asym.max((sol.u.values[node] - um).abs());
            }
            for line in &comps[c].boundary {
                rec.boundary.extend(line.points.iter().map(|&p| {
                    let d = domain.displacement(p, spec.center);
                    [d[0] / k[0], d[1] / k[1]]
                }));
            }
        }
        rec.mirror_asymmetry = if umax > 0.0 { asym / umax } else { 0.0 };
        rec.cells_across = (((hi[0] - lo[0]) / h1).round() as usize + 1).min(((hi[1] - lo[1]) / h2).round() as usize + 1);
        if let Some(profile) = &spec.profile {
            if let Some(pred) = profile.support().boundary_points(720) {
                if !rec.boundary.is_empty() {
                    rec.hausdorff = Some(hausdorff_distance(&rec.boundary, &pred)?);
                }
            }
            let (wlo, whi) = match spec.ref_window {
                Some(w) => w,
                None => {
                    let (blo, bhi) = profile.support().bounding_box();
                    let g = RefGrid::around(blo, bhi, case.window_factor, 2);
                    (g.lo, g.hi)
                }
            };
            let grid = RefGrid { lo: wlo, hi: whi, n: [case.ref_grid_n, case.ref_grid_n] };
            if let Ok(resc) = rescale_solution(&sol.u, domain, spec.center, &spec.exponents, mass, &grid) {
                let e = profile_error(&resc, &grid, profile)?;
                rec.linf = Some(e.linf);
                rec.l1 = Some(e.l1);
            }
        }
        out.push(rec);
    }
    Ok((out, note))
}

/// Ordinary least squares of `ln y` on `ln x` against a predicted slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub slope: f64,
    /// Intercept of the log-log line; `exp(intercept)` estimates the limit
    /// constant.
    pub intercept: f64,
    pub prefactor: f64,
    pub stderr: f64,
    pub residuals: Vec<f64>,
    pub points: usize,
    pub predicted: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Fit `y = C x^slope` through positive pairs `(x, y)`.
pub fn fit_exponent(pairs: &[(f64, f64)], predicted: f64, tol: f64) -> Result<ScalingReport> {
    if pairs.len() < 3 {
        return Err(Error::Domain(format!("need at least 3 pairs, got {}", pairs.len())));
    }
    if pairs.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::Domain("fit input must be positive and finite".into()));
    }
    let n = pairs.len() as f64;
    let lx: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all abscissae coincide".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = lx.iter().zip(&ly).map(|(x, y)| y - (intercept + slope * x)).collect();
    let ssr: f64 = residuals.iter().map(|r| r * r).sum();
    let stderr = (ssr / (n - 2.0) / sxx).sqrt();
    Ok(ScalingReport {
        slope,
        intercept,
        prefactor: intercept.exp(),
        stderr,
        residuals,
        points: pairs.len(),
        predicted,
        tol,
        pass: (slope - predicted).abs() <= tol,
    })
}

/// One pass/fail verification item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub tol: f64,
    /// `near` (`|value - target| <= tol`), `at_most` (`value <= target + tol`)
    /// or `holds` (value 1 for true).
    pub rule: String,
    pub pass: bool,
}

impl Check {
    pub fn near(name: &str, value: f64, target: f64, tol: f64) -> Self {
        Self { name: name.into(), value, target, tol, rule: "near".into(), pass: (value - target).abs() <= tol }
    }

    pub fn at_most(name: &str, value: f64, bound: f64, tol: f64) -> Self {
        Self { name: name.into(), value, target: bound, tol, rule: "at_most".into(), pass: value <= bound + tol }
    }

    pub fn holds(name: &str, ok: bool) -> Self {
        Self {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            target: 1.0,
            tol: 0.0,
            rule: "holds".into(),
            pass: ok,
        }
    }
}

/// A level left out of the fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub target: f64,
    pub reason: String,
}

/// Outcome of a sweep or verification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub case: String,
    pub fits: Vec<(String, ScalingReport)>,
    pub checks: Vec<Check>,
    /// Named scalar diagnostics that carry no pass/fail meaning.
    pub diagnostics: Vec<(String, f64)>,
    pub excluded: Vec<Exclusion>,
    pub records: Vec<SweepRecord>,
    pub pass: bool,
}

impl CaseReport {
    pub(crate) fn new(case: &str, records: Vec<SweepRecord>) -> Self {
        let excluded = records
            .iter()
            .filter(|r| !r.valid)
            .map(|r| Exclusion { target: r.target, reason: r.note.clone().unwrap_or_default() })
            .collect();
        Self {
            case: case.into(),
            fits: Vec::new(),
            checks: Vec::new(),
            diagnostics: Vec::new(),
            excluded,
            records,
            pass: false,
        }
    }

    pub(crate) fn fit(&mut self, name: &str, pairs: &[(f64, f64)], predicted: f64, tol: f64) -> Option<ScalingReport> {
        match fit_exponent(pairs, predicted, tol) {
            Ok(r) => {
                self.checks.push(Check::near(&format!("{name} slope"), r.slope, predicted, tol));
                self.fits.push((name.into(), r.clone()));
                Some(r)
            }
            Err(e) => {
                self.checks.push(Check::holds(&format!("{name} fit ({e})"), false));
                None
            }
        }
    }

    pub(crate) fn diag(&mut self, name: &str, value: f64) {
        self.diagnostics.push((name.into(), value));
    }

    pub(crate) fn finish(mut self) -> Self {
        self.pass = !self.checks.is_empty() && self.checks.iter().all(|c| c.pass);
        self
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn diagnostic(&self, name: &str) -> Option<f64> {
        self.diagnostics.iter().find(|d| d.0 == name).map(|d| d.1)
    }

    pub fn valid_records(&self) -> impl Iterator<Item = &SweepRecord> {
        self.records.iter().filter(|r| r.valid)
    }

    /// Plain-text summary.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "case {}: {}", self.case, if self.pass { "PASS" } else { "FAIL" });
        for r in &self.records {
            let _ = writeln!(
                s,
                "  M {:.16e}  beta {:.16e}  valid {}{}",
                r.target,
                r.beta,
                r.valid,
                r.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default()
            );
        }
        for (name, f) in &self.fits {
            let _ = writeln!(
                s,
                "  fit {name}: slope {:.16e} +- {:.16e} (predicted {:.16e}, tol {}) prefactor {:.16e}",
                f.slope, f.stderr, f.predicted, f.tol, f.prefactor
            );
        }
        for c in &self.checks {
            let _ = writeln!(
                s,
                "  [{}] {}: {:.16e} ({} {:.16e}, tol {})",
                if c.pass { "pass" } else { "FAIL" },
                c.name,
                c.value,
                c.rule,
                c.target,
                c.tol
            );
        }
        for (name, v) in &self.diagnostics {
            let _ = writeln!(s, "  {name} = {v:.16e}");
        }
        s
    }

    /// Write `sweep.csv`, `report.json` and `summary.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_sweep_csv(&dir.join("sweep.csv"), &self.records)?;
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(self)? + "\n")?;
        std::fs::write(dir.join("summary.txt"), self.summary())?;
        Ok(())
    }
}

/// Numbers with 17 significant digits; empty cells for missing values.
pub fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

/// Columns `M, alpha, beta, bump_id, m_i, hausdorff, linf, l1, valid`.
pub fn write_sweep_csv(path: &Path, records: &[SweepRecord]) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Io(e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["M", "alpha", "beta", "bump_id", "m_i", "hausdorff", "linf", "l1", "valid"])
        .map_err(csv_err)?;
    for r in records {
        let head = [fmt_num(r.target), fmt_num(r.alpha), fmt_num(r.beta)];
        let valid = r.valid.to_string();
        if r.bumps.is_empty() {
            let row = [&head[..], &[String::new(), String::new(), String::new(), String::new(), String::new(), valid.clone()]].concat();
            w.write_record(&row).map_err(csv_err)?;
        }
        for b in &r.bumps {
            let row = [
                &head[..],
                &[
                    b.id.to_string(),
                    fmt_num(b.mass),
                    fmt_opt(b.hausdorff),
                    fmt_opt(b.linf),
                    fmt_opt(b.l1),
                    valid.clone(),
                ],
            ]
            .concat();
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Valid records after dropping the `drop` largest masses.
pub(crate) fn fit_records(records: &[SweepRecord], drop: usize) -> Vec<&SweepRecord> {
    let mut v: Vec<&SweepRecord> = records.iter().filter(|r| r.valid).collect();
    v.sort_by(|a, b| b.target.total_cmp(&a.target));
    v.into_iter().skip(drop).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_fit() {
        let pairs: Vec<(f64, f64)> = (0..6).map(|k| {
            let m = 10f64.powi(-k);
            (m, 2.0 * m.cbrt())
        }).collect();
        let r = fit_exponent(&pairs, 1.0 / 3.0, 1e-12).unwrap();
        assert!((r.slope - 1.0 / 3.0).abs() < 1e-13);
        assert!((r.prefactor - 2.0).abs() < 1e-12);
        assert!(r.stderr < 1e-12 && r.pass);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(fit_exponent(&[(1.0, 1.0)], 0.0, 1.0).is_err());
        assert!(fit_exponent(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)], 0.0, 1.0).is_err());
        assert!(fit_exponent(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)], 0.0, 1.0).is_err());
    }

    #[test]
    fn mass_levels_validated() {
        assert!(check_masses(&[1.0, 0.5, 0.25, 0.1, 0.05], 5).is_ok());
        assert!(check_masses(&[1.0, 0.5, 0.5, 0.1, 0.05], 5).is_err());
        assert!(check_masses(&[1.0, 0.5], 5).is_err());
    }
}
