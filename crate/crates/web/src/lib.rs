//! Browser bindings: sample the quadratic limit profile, run one small
//! mass-constrained solve on a torus, and fit a power law.

use obstacle_core::experiments::fit_exponent;
use obstacle_core::profiles::quad_params;
use obstacle_core::signals::{morse_signal, BumpCutoff};
use obstacle_core::solver::{DomainSpec, ObstacleSolver, SolverOptions, Sym2};
use wasm_bindgen::prelude::*;

fn msg(e: obstacle_core::Error) -> String {
    e.to_string()
}

fn js(e: String) -> JsError {
    JsError::new(&e)
}

/// Square grid of samples, first axis fastest.
#[wasm_bindgen]
pub struct Grid {
    n: usize,
    half: f64,
    values: Vec<f64>,
}

#[wasm_bindgen]
impl Grid {
    #[wasm_bindgen(getter)]
    pub fn n(&self) -> usize {
        self.n
    }

    /// The grid spans `[-half, half)` on both axes.
    #[wasm_bindgen(getter)]
    pub fn half(&self) -> f64 {
        self.half
    }

    #[wasm_bindgen(getter)]
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

#[wasm_bindgen]
pub struct QuadProfile {
    c0: f64,
    semiaxes: [f64; 2],
    mass: f64,
    grid: Grid,
}

#[wasm_bindgen]
impl QuadProfile {
    #[wasm_bindgen(getter)]
    pub fn c0(&self) -> f64 {
        self.c0
    }

    #[wasm_bindgen(getter)]
    pub fn semiaxes(&self) -> Vec<f64> {
        self.semiaxes.to_vec()
    }

    #[wasm_bindgen(getter)]
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Moves the samples out; a second call returns an empty grid.
    pub fn take_grid(&mut self) -> Grid {
        std::mem::replace(&mut self.grid, Grid { n: 0, half: 0.0, values: Vec::new() })
    }
}

/// Limit profile for anisotropy ratio `s` in `(0, 1/2]`, sampled on `n x n` nodes.
#[wasm_bindgen]
pub fn quad_profile(s: f64, n: usize) -> Result<QuadProfile, JsError> {
    sample_quad(s, n).map_err(js)
}

pub fn sample_quad(s: f64, n: usize) -> Result<QuadProfile, String> {
    if !(8..=1024).contains(&n) {
        return Err("n must lie in [8, 1024]".into());
    }
    let p = quad_params(s).map_err(msg)?;
    let semiaxes = p.semiaxes();
    let half = 1.1 * semiaxes[0].max(semiaxes[1]);
    let h = 2.0 * half / n as f64;
    let mut values = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            values.push(p.eval([-half + i as f64 * h, -half + j as f64 * h]));
        }
    }
    Ok(QuadProfile { c0: p.c0, semiaxes, mass: p.mass(), grid: Grid { n, half, values } })
}

#[wasm_bindgen]
pub struct Solve {
    alpha: f64,
    beta: f64,
    mass: f64,
    residual: f64,
    active: usize,
    grid: Grid,
}

#[wasm_bindgen]
impl Solve {
    #[wasm_bindgen(getter)]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[wasm_bindgen(getter)]
    pub fn beta(&self) -> f64 {
        self.beta
    }

    #[wasm_bindgen(getter)]
    pub fn mass(&self) -> f64 {
        self.mass
    }

    #[wasm_bindgen(getter)]
    pub fn residual(&self) -> f64 {
        self.residual
    }

    #[wasm_bindgen(getter)]
    pub fn active(&self) -> usize {
        self.active
    }

    pub fn take_grid(&mut self) -> Grid {
        std::mem::replace(&mut self.grid, Grid { n: 0, half: 0.0, values: Vec::new() })
    }
}

/// One Gaussian maximum with Hessian `diag(h1, h2)` on a `[-2.4, 2.4)^2`
/// torus; solve for total mass `mass`.
#[wasm_bindgen]
pub fn solve_bump(h1: f64, h2: f64, gmax: f64, mass: f64, n: usize) -> Result<Solve, JsError> {
    run_bump(h1, h2, gmax, mass, n).map_err(js)
}

pub fn run_bump(h1: f64, h2: f64, gmax: f64, mass: f64, n: usize) -> Result<Solve, String> {
    if !(32..=256).contains(&n) {
        return Err("n must lie in [32, 256]".into());
    }
    let half = 2.4;
    let domain = DomainSpec::periodic_rect([-half, -half], [2.0 * half, 2.0 * half], n, n).map_err(msg)?;
    let hess = Sym2::diag(h1, h2);
    if !hess.is_spd() {
        return Err("Hessian entries must be positive".into());
    }
    let signal = morse_signal(&domain, &[([0.0, 0.0], hess)], gmax, 0.1, BumpCutoff { q_inner: 2.0, q_outer: 3.0 })
        .map_err(msg)?;
    let opts = SolverOptions { tol: 1e-9, ..SolverOptions::default() }.with_auto_omega();
    let sol = ObstacleSolver::new(&domain)
        .and_then(|s| s.solve_mass(&signal.values, gmax, mass, None, &opts))
        .map_err(msg)?;
    Ok(Solve {
        alpha: sol.alpha,
        beta: sol.beta,
        mass: sol.mass,
        residual: sol.comp_residual,
        active: sol.active.iter().filter(|a| **a).count(),
        grid: Grid { n, half, values: sol.u.values },
    })
}

/// Least-squares fit of `log y = log c + p log x`; returns `[p, c, stderr]`.
#[wasm_bindgen]
pub fn fit_power_law(x: Vec<f64>, y: Vec<f64>) -> Result<Vec<f64>, JsError> {
    power_fit(&x, &y).map_err(js)
}

pub fn power_fit(x: &[f64], y: &[f64]) -> Result<Vec<f64>, String> {
    if x.len() != y.len() {
        return Err("x and y differ in length".into());
    }
    let pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    let f = fit_exponent(&pairs, f64::NAN, 0.0).map_err(msg)?;
    Ok(vec![f.slope, f.prefactor, f.stderr])
}
