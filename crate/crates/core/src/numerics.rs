//! Small quadrature helpers shared by the profile formulas and their checks.

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Midpoint rule on an `n x n` grid over the box `[lo, hi]`.
pub fn midpoint_2d<F: Fn([f64; 2]) -> f64>(f: &F, lo: [f64; 2], hi: [f64; 2], n: usize) -> f64 {
    let h = [(hi[0] - lo[0]) / n as f64, (hi[1] - lo[1]) / n as f64];
    let mut total = 0.0;
    for j in 0..n {
        let y = lo[1] + (j as f64 + 0.5) * h[1];
        let mut row = 0.0;
        for i in 0..n {
            row += f([lo[0] + (i as f64 + 0.5) * h[0], y]);
        }
        total += row;
    }
    total * h[0] * h[1]
}

/// Periodic Catmull-Rom interpolation of equally spaced samples over one
/// period `[0, period)`.
pub fn periodic_cubic(samples: &[f64], period: f64, t: f64) -> f64 {
    let n = samples.len();
    if n == 1 {
        return samples[0];
    }
    let x = (t / period).rem_euclid(1.0) * n as f64;
    let k = x.floor() as usize % n;
    let u = x - x.floor();
    let p = |d: isize| samples[(k as isize + d).rem_euclid(n as isize) as usize];
    let (p0, p1, p2, p3) = (p(-1), p(0), p(1), p(2));
    0.5 * (2.0 * p1
        + (p2 - p0) * u
        + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * u * u
        + (3.0 * (p1 - p2) + p3 - p0) * u * u * u)
}
