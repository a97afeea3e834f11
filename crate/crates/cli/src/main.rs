//! `obstacle-lab`: limit profiles, signals, solves, sweeps, fits and
//! verification runs for the mass-constrained obstacle problem.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use obstacle_core::experiments::{fit_exponent, fmt_num, window_exit, CaseReport};
use obstacle_core::profiles::{aniso_alpha_bar, aniso_limit_profile, deg_profile_eval, quad_params};
use obstacle_core::solver::io::{write_field, FieldFormat, FieldHeader};
use obstacle_core::solver::{DomainSpec, Field, ObstacleSolver};
use serde::Serialize;
use serde_json::{json, Value};

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(obstacle_core::Error),
    Input(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Input(m) => write!(f, "{m}"),
        }
    }
}

impl From<obstacle_core::Error> for CliError {
    fn from(e: obstacle_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    fn kind(&self) -> &'static str {
        use obstacle_core::Error as E;
        match self {
            CliError::Config(_) => "config",
            CliError::Input(_) => "input",
            CliError::Core(e) => match e {
                E::Domain(_) => "domain",
                E::NotSpd(_) => "not_spd",
                E::Range(_) => "range",
                E::NonElliptic { .. } => "non_elliptic",
                E::NoConvergence { .. } => "no_convergence",
                E::BoundaryContact => "boundary_contact",
                E::Bracket { .. } => "bracket",
                E::Degenerate(_) => "degenerate",
                E::Shape { .. } => "shape",
                E::Io(_) => "io",
                E::Format(_) => "format",
            },
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "obstacle-lab", version, about = "Mass-constrained obstacle problems and their small-mass limits")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory (created if missing).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Concurrent solves in a sweep.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Named case; overrides `case` in the config.
    #[arg(long, global = true)]
    case: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a closed-form limit profile.
    Profile {
        family: Family,
        /// Anisotropy ratio for `quad`.
        #[arg(long, default_value_t = 0.5)]
        s: f64,
        /// Scale for `deg`, multiplier for `aniso` (defaults to the unit-mass value).
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, default_value_t = 1.0)]
        b: f64,
        #[arg(long, default_value_t = 0.9)]
        gmax: f64,
        /// Grid nodes per axis (odd puts a node at the centre).
        #[arg(long, default_value_t = 129)]
        n: usize,
    },
    /// Build and dump the signal of a case.
    Signal,
    /// One mass-constrained solve.
    Solve {
        /// Target mass; defaults to the first configured level.
        #[arg(long)]
        mass: Option<f64>,
    },
    /// Mass sweep with a `beta` against `M` fit.
    Sweep,
    /// Power-law fit of two CSV columns.
    Fit {
        csv: PathBuf,
        #[arg(long, default_value = "M")]
        x: String,
        #[arg(long, default_value = "beta")]
        y: String,
        /// Expected slope; enables the pass flag.
        #[arg(long)]
        predicted: Option<f64>,
        #[arg(long, default_value_t = 0.05)]
        tol: f64,
    },
    /// Full verification of a case.
    Verify,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Family {
    Quad,
    Deg,
    Aniso,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Profile { .. } => "profile",
            Command::Signal => "signal",
            Command::Solve { .. } => "solve",
            Command::Sweep => "sweep",
            Command::Fit { .. } => "fit",
            Command::Verify => "verify",
        }
    }
}

#[derive(Serialize)]
struct Timing {
    stage: String,
    seconds: f64,
}

/// Run directory bookkeeping.
struct Run {
    dir: PathBuf,
    command: &'static str,
    started: Instant,
    started_unix: u64,
    timings: Vec<Timing>,
    files: Vec<String>,
}

impl Run {
    fn new(dir: PathBuf, command: &'static str) -> Self {
        let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Self { dir, command, started: Instant::now(), started_unix, timings: Vec::new(), files: Vec::new() }
    }

    fn create(&self) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.dir)?;
        Ok(())
    }

    fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T, CliError>) -> Result<T, CliError> {
        let t = Instant::now();
        let out = f();
        self.timings.push(Timing { stage: name.to_string(), seconds: t.elapsed().as_secs_f64() });
        out
    }

    fn write(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        std::fs::write(self.dir.join(name), text)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json(&mut self, name: &str, v: &impl Serialize) -> Result<(), CliError> {
        self.write(name, &(serde_json::to_string_pretty(v)? + "\n"))
    }

    fn field(&mut self, name: &str, domain: &DomainSpec, field: &Field, extra: impl FnOnce(&mut FieldHeader)) -> Result<(), CliError> {
        let mut header = FieldHeader::for_domain(name, domain, FieldFormat::Binary);
        extra(&mut header);
        write_field(&self.dir.join(name), &header, field)?;
        self.files.push(format!("{name}.json"));
        self.files.push(format!("{name}.bin"));
        Ok(())
    }

    fn finish(&mut self, status: &str, pass: Option<bool>, error: Option<&CliError>) -> Result<(), CliError> {
        let manifest = json!({
            "tool": "obstacle-lab",
            "version": env!("CARGO_PKG_VERSION"),
            "core_version": obstacle_core::VERSION,
            "command": self.command,
            "argv": std::env::args().collect::<Vec<_>>(),
            "started_unix": self.started_unix,
            "total_seconds": self.started.elapsed().as_secs_f64(),
            "timings": self.timings,
            "status": status,
            "pass": pass,
            "error": error.map(|e| json!({ "kind": e.kind(), "message": e.to_string() })),
            "files": self.files,
        });
        std::fs::write(self.dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(())
    }
}

fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match (&cli.config, &cli.case) {
        (Some(path), case) => RunConfig::load(path, case.as_deref())?,
        (None, Some(case)) => RunConfig::from_preset(case)?,
        (None, None) => return Err(CliError::Config("pass --config or --case".into())),
    };
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_dir(cli: &Cli, cfg: Option<&RunConfig>, default: String) -> PathBuf {
    cli.out.clone().or_else(|| cfg.and_then(|c| c.out.clone())).unwrap_or_else(|| PathBuf::from("runs").join(default))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    let cfg = match &cli.command {
        Command::Profile { .. } | Command::Fit { .. } => None,
        _ => match load_config(&cli) {
            Ok(c) => Some(c),
            Err(e) => return fail_early(&cli, name, e),
        },
    };
    let default = match (&cli.command, &cfg) {
        (Command::Profile { family, .. }, _) => format!("profile-{family:?}").to_lowercase(),
        (_, Some(c)) => format!("{name}-{}", sanitize(&c.case)),
        _ => name.to_string(),
    };
    let mut run = Run::new(run_dir(&cli, cfg.as_ref(), default), name);
    if let Err(e) = run.create() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let result = dispatch(&cli, cfg.as_ref(), &mut run);
    match result {
        Ok(pass) => {
            let status = if pass { "pass" } else { "fail" };
            if let Err(e) = run.finish(status, Some(pass), None) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            let record = json!({ "status": "error", "command": name, "kind": e.kind(), "message": e.to_string() });
            let _ = std::fs::write(run.dir.join("error.json"), record.to_string() + "\n");
            let _ = run.finish("error", None, Some(&e));
            ExitCode::from(2)
        }
    }
}

fn fail_early(cli: &Cli, name: &str, e: CliError) -> ExitCode {
    eprintln!("error: {e}");
    if let Some(dir) = &cli.out {
        let record = json!({ "status": "error", "command": name, "kind": e.kind(), "message": e.to_string() });
        if std::fs::create_dir_all(dir).is_ok() {
            let _ = std::fs::write(dir.join("error.json"), record.to_string() + "\n");
        }
    }
    ExitCode::from(2)
}

fn dispatch(cli: &Cli, cfg: Option<&RunConfig>, run: &mut Run) -> Result<bool, CliError> {
    if let Some(c) = cfg {
        run.write("config.toml", &c.to_toml()?)?;
    }
    match &cli.command {
        Command::Profile { family, s, alpha, a, b, gmax, n } => cmd_profile(run, *family, *s, *alpha, *a, *b, *gmax, *n),
        Command::Signal => cmd_signal(run, cfg.expect("config")),
        Command::Solve { mass } => cmd_solve(run, cfg.expect("config"), *mass),
        Command::Sweep => cmd_report(run, cfg.expect("config"), false),
        Command::Verify => cmd_report(run, cfg.expect("config"), true),
        Command::Fit { csv, x, y, predicted, tol } => cmd_fit(run, csv, x, y, *predicted, *tol),
    }
}

/// Square planar grid with `n` nodes per axis spanning `[-half, half]`
/// (a node sits at the centre when `n` is odd).
fn planar_grid(half: [f64; 2], n: usize) -> Result<DomainSpec, CliError> {
    if n < 3 {
        return Err(CliError::Input("need at least 3 grid nodes".into()));
    }
    let h = [2.0 * half[0] / (n - 1) as f64, 2.0 * half[1] / (n - 1) as f64];
    Ok(DomainSpec::periodic_rect([-half[0], -half[1]], [h[0] * n as f64, h[1] * n as f64], n, n)?)
}

fn print_pairs(pairs: &[(&str, f64)]) {
    for (k, v) in pairs {
        println!("{k} = {}", fmt_num(*v));
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_profile(run: &mut Run, family: Family, s: f64, alpha: Option<f64>, a: f64, b: f64, gmax: f64, n: usize) -> Result<bool, CliError> {
    let (params, domain, field) = match family {
        Family::Quad => {
            let p = quad_params(s)?;
            let ax = p.semiaxes();
            let r = 1.1 * ax[0].max(ax[1]);
            let domain = planar_grid([r, r], n)?;
            let field = domain.sample(|x| p.eval(x));
            let params = json!({
                "family": "quad", "s": s, "c0": p.c0, "beta2": p.beta2, "beta4": p.beta4,
                "k1": p.k1, "k2": p.k2, "mass": p.mass(), "semiaxes": ax, "residuals": p.residuals(),
            });
            (params, domain, field)
        }
        Family::Deg => {
            let al = alpha.unwrap_or(1.0);
            if !(al > 0.0) {
                return Err(CliError::Input("alpha must be positive".into()));
            }
            let half = [1.1 * al.powf(0.25), 1.1 * 3f64.sqrt() * al.sqrt()];
            let domain = planar_grid(half, n)?;
            let field = domain.sample(|x| deg_profile_eval(x, al));
            let params = json!({ "family": "deg", "alpha": al, "max": 0.75 * al * al, "semiaxes": [al.powf(0.25), 3f64.sqrt() * al.sqrt()] });
            (params, domain, field)
        }
        Family::Aniso => {
            let al = alpha.unwrap_or_else(|| aniso_alpha_bar(a, b, gmax));
            let prof = aniso_limit_profile(a, b, gmax, al)?;
            let (lo, hi) = prof.support().bounding_box();
            let half = [1.1 * lo[0].abs().max(hi[0]), 1.1 * lo[1].abs().max(hi[1])];
            let domain = planar_grid(half, n)?;
            let field = domain.sample(|x| prof.eval(x));
            let params = json!({ "family": "aniso", "a": a, "b": b, "gmax": gmax, "alpha": al, "mass": prof.mass(400), "semiaxes": hi });
            (params, domain, field)
        }
    };
    let mut params = params;
    let grid_max = field.max();
    let grid_mass = field.values.iter().sum::<f64>() * domain.cell_area();
    params["grid_max"] = json!(grid_max);
    params["grid_mass"] = json!(grid_mass);
    run.field("profile", &domain, &field, |_| {})?;
    run.json("profile_params.json", &params)?;
    if let Value::Object(map) = &params {
        for (k, v) in map {
            match v {
                Value::Number(x) => print_pairs(&[(k, x.as_f64().unwrap_or(f64::NAN))]),
                Value::Array(xs) => {
                    let s: Vec<String> = xs.iter().map(|x| fmt_num(x.as_f64().unwrap_or(f64::NAN))).collect();
                    println!("{k} = [{}]", s.join(", "));
                }
                other => println!("{k} = {other}"),
            }
        }
    }
    Ok(true)
}

fn cmd_signal(run: &mut Run, cfg: &RunConfig) -> Result<bool, CliError> {
    let domain = cfg.domain.build()?;
    let signal = run.stage("signal", || Ok(cfg.signal.signal(&domain)?))?;
    run.field("signal", &domain, &signal.values, |_| {})?;
    let meta = json!({ "gmax": signal.gmax, "min": signal.values.min(), "max": signal.values.max(), "maxima": signal.maxima });
    run.json("signal_meta.json", &meta)?;
    print_pairs(&[("gmax", signal.gmax), ("min", signal.values.min()), ("max", signal.values.max())]);
    println!("maxima = {}", signal.maxima.len());
    Ok(true)
}

fn cmd_solve(run: &mut Run, cfg: &RunConfig, mass: Option<f64>) -> Result<bool, CliError> {
    let target = match mass {
        Some(m) if m > 0.0 => m,
        Some(m) => return Err(CliError::Input(format!("mass {m} must be positive"))),
        None => cfg.masses.levels()?[0],
    };
    let domain = cfg.domain.build()?;
    let signal = cfg.signal.signal(&domain)?;
    let solver = ObstacleSolver::new(&domain)?;
    let sol = run.stage("solve", || Ok(solver.solve_mass(&signal.values, signal.gmax, target, None, &cfg.solver)?))?;
    let case = cfg.signal.sweep_case(&domain)?;
    if window_exit(&domain, &sol.u, &case).is_some() {
        return Err(obstacle_core::Error::BoundaryContact.into());
    }
    let (alpha, m) = (sol.alpha, sol.mass);
    run.field("u", &domain, &sol.u, |h| {
        h.alpha = Some(alpha);
        h.mass = Some(m);
    })?;
    run.field("xi", &domain, &sol.xi, |h| h.alpha = Some(alpha))?;
    let mass_ok = ((sol.mass - target) / target).abs() <= cfg.solver.mass_rtol;
    let residual_ok = sol.comp_residual <= cfg.solver.tol;
    let xi_ok = sol.xi_violations == 0;
    let pass = mass_ok && residual_ok && xi_ok;
    let summary = json!({
        "target": target, "mass": sol.mass, "alpha": sol.alpha, "beta": sol.beta,
        "comp_residual": sol.comp_residual, "nonlocal_residual": sol.nonlocal_residual,
        "nonlocal_residual_nodal": sol.nonlocal_residual_nodal, "xi_violations": sol.xi_violations,
        "active_nodes": sol.active.iter().filter(|a| **a).count(),
        "inner_iterations": sol.inner_iterations, "outer_iterations": sol.outer_iterations,
        "pass": { "mass": mass_ok, "residual": residual_ok, "xi": xi_ok },
    });
    run.json("solution.json", &summary)?;
    print_pairs(&[
        ("target", target),
        ("mass", sol.mass),
        ("alpha", sol.alpha),
        ("beta", sol.beta),
        ("comp_residual", sol.comp_residual),
        ("nonlocal_residual", sol.nonlocal_residual),
    ]);
    println!("xi_violations = {}", sol.xi_violations);
    println!("{}", if pass { "PASS" } else { "FAIL" });
    Ok(pass)
}

fn cmd_report(run: &mut Run, cfg: &RunConfig, verify: bool) -> Result<bool, CliError> {
    let domain = cfg.domain.build()?;
    let masses = cfg.masses.levels()?;
    let report: CaseReport = run.stage(if verify { "verify" } else { "sweep" }, || {
        Ok(if verify {
            cfg.signal.verify(&domain, &masses, &cfg.solver, &cfg.tolerances, cfg.workers)?
        } else {
            cfg.signal.sweep(&domain, &masses, &cfg.solver, &cfg.tolerances, cfg.workers)?
        })
    })?;
    report.write(&run.dir)?;
    run.files.extend(["sweep.csv", "report.json", "summary.txt"].map(String::from));
    print!("{}", report.summary());
    Ok(report.pass)
}

fn cmd_fit(run: &mut Run, path: &Path, x: &str, y: &str, predicted: Option<f64>, tol: f64) -> Result<bool, CliError> {
    let input = |e: csv::Error| CliError::Input(format!("{}: {e}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(input)?;
    let headers = rdr.headers().map_err(input)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::Input(format!("column '{name}' not found in {}", path.display())))
    };
    let (ix, iy) = (col(x)?, col(y)?);
    let iv = headers.iter().position(|h| h.trim() == "valid");
    let mut pairs = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(input)?;
        if iv.is_some_and(|i| rec.get(i).map(str::trim) == Some("false")) {
            continue;
        }
        let parse = |i: usize| rec.get(i).and_then(|s| s.trim().parse::<f64>().ok());
        if let (Some(a), Some(b)) = (parse(ix), parse(iy)) {
            pairs.push((a, b));
        }
    }
    let fit = fit_exponent(&pairs, predicted.unwrap_or(f64::NAN), tol)?;
    let pass = predicted.map(|_| fit.pass);
    run.json("fit.json", &json!({ "x": x, "y": y, "fit": fit, "pass": pass }))?;
    print_pairs(&[("slope", fit.slope), ("stderr", fit.stderr), ("prefactor", fit.prefactor)]);
    if let Some(p) = predicted {
        print_pairs(&[("predicted", p)]);
        println!("{}", if fit.pass { "PASS" } else { "FAIL" });
    }
    Ok(pass.unwrap_or(true))
}
