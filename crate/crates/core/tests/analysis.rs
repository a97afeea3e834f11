use std::f64::consts::PI;

use obstacle_core::analysis::*;
use obstacle_core::profiles::{general_quadratic_profile, scaling_exponents, ScalingCase};
use obstacle_core::solver::{mass_of, DomainSpec, Field, Sym2};
use proptest::prelude::*;

fn indicator(d: &DomainSpec, inside: impl Fn([f64; 2]) -> bool) -> Field {
    d.sample(|x| if inside(x) { 1.0 } else { 0.0 })
}

fn points(d: &DomainSpec, u: &Field) -> Vec<[f64; 2]> {
    extract_free_boundary(u, d).unwrap().into_iter().flat_map(|b| b.points).collect()
}

#[test]
fn disk_and_ellipse_boundaries_within_a_cell() {
    let d = DomainSpec::centered_square(2.0, 200).unwrap();
    let h = d.spacing()[0];
    let disk = indicator(&d, |x| x[0].hypot(x[1]) < 1.3);
    let circle: Vec<[f64; 2]> = (0..2000).map(|k| 2.0 * PI * k as f64 / 2000.0).map(|t| [1.3 * t.cos(), 1.3 * t.sin()]).collect();
    assert!(hausdorff_distance(&points(&d, &disk), &circle).unwrap() <= h);

    let (a, b) = (1.6, 0.7);
    let ell = indicator(&d, |x| (x[0] / a).powi(2) + (x[1] / b).powi(2) < 1.0);
    let truth: Vec<[f64; 2]> = (0..4000).map(|k| 2.0 * PI * k as f64 / 4000.0).map(|t| [a * t.cos(), b * t.sin()]).collect();
    let pts = points(&d, &ell);
    assert!(hausdorff_distance(&pts, &truth).unwrap() <= h);
    let fit = ellipse_fit(&pts).unwrap();
    assert!((fit.semiaxes[0] - a).abs() <= h && (fit.semiaxes[1] - b).abs() <= h, "{fit:?}");

    assert!(extract_free_boundary(&Field::zeros(200, 200), &d).unwrap().is_empty());
}

#[test]
fn concentric_circles() {
    let c = |r: f64| -> Vec<[f64; 2]> { (0..720).map(|k| PI * k as f64 / 360.0).map(|t| [r * t.cos(), r * t.sin()]).collect() };
    let p = c(2.0);
    assert_eq!(hausdorff_distance(&p, &p).unwrap(), 0.0);
    let dist = hausdorff_distance(&p, &c(2.1)).unwrap();
    assert!((dist - 0.1).abs() <= 1e-3, "{dist}");
    assert!(hausdorff_distance(&p, &[]).is_err());
}

#[test]
fn components_split_mass() {
    let d = DomainSpec::centered_square(3.0, 120).unwrap();
    let u = d.sample(|x| {
        let a = 0.5 - (x[0] + 1.5).powi(2) - x[1] * x[1];
        let b = 0.3 - (x[0] - 1.5).powi(2) - 2.0 * x[1] * x[1];
        a.max(0.0) + b.max(0.0)
    });
    let comps = active_components(&u, &d).unwrap();
    assert_eq!(comps.len(), 2);
    let total: f64 = comps.iter().map(|c| c.mass).sum();
    assert!((total / mass_of(&u, &d).unwrap() - 1.0).abs() <= 1e-12);
    assert!(comps[0].centroid[0] < 0.0 && comps[1].centroid[0] > 0.0);
    assert!(active_components(&Field::zeros(120, 120), &d).unwrap().is_empty());
}

#[test]
fn profile_error_examples() {
    let v = general_quadratic_profile(&Sym2::diag(0.5, 0.5), 1.0, 1.0).unwrap();
    let grid = RefGrid::around([-2.0, -2.0], [2.0, 2.0], 1.5, 121);
    let exact = grid.sample(|y| v.eval(y));
    let e = profile_error(&exact, &grid, &v).unwrap();
    assert_eq!((e.linf, e.l1), (0.0, 0.0));
    let shifted = Field { values: exact.values.iter().map(|x| x + 0.01).collect(), ..exact };
    let e = profile_error(&shifted, &grid, &v).unwrap();
    assert!((e.linf - 0.01).abs() <= 1e-15);
    assert!((e.l1 - 0.01 * 36.0).abs() <= 1e-9);
}

#[test]
fn planted_profile_round_trips() {
    let v = general_quadratic_profile(&Sym2::diag(0.5, 0.5), 1.0, 1.0).unwrap();
    let ex = scaling_exponents(ScalingCase::Homogeneous { gamma: 2.0 }).unwrap();
    let grid = RefGrid::around([-2.0, -2.0], [2.0, 2.0], 1.5, 61);
    let mut errs = Vec::new();
    for n in [256, 512] {
        let d = DomainSpec::centered_square(1.5, n).unwrap();
        let m: f64 = 1e-3;
        let (k, amp) = (m.powf(ex.spatial[0]), m.powf(ex.amplitude));
        let u = d.sample(|x| amp * v.eval([(x[0] - 0.1) / k, (x[1] + 0.2) / k]));
        let back = rescale_solution(&u, &d, [0.1, -0.2], &ex, m, &grid).unwrap();
        errs.push(profile_error(&back, &grid, &v).unwrap().linf);
    }
    // Bilinear error is h^2 |D^2 v| / 8 with |D^2 v| <= 1 in rescaled units.
    let h = 3.0 / 256.0 / 1e-3f64.powf(1.0 / 6.0);
    assert!(errs[0] <= h * h / 8.0 * 1.01, "{errs:?}");
    assert!(errs[1] < errs[0] / 3.0, "{errs:?}");

    let d = DomainSpec::centered_square(1.5, 64).unwrap();
    let same = rescale_solution(&d.sample(|x| x[0] + 2.0 * x[1]), &d, [0.0, 0.0], &ex, 1.0, &RefGrid::around([-0.5, -0.5], [0.5, 0.5], 1.0, 11))
        .unwrap();
    let g = RefGrid::around([-0.5, -0.5], [0.5, 0.5], 1.0, 11);
    for j in 0..11 {
        for i in 0..11 {
            let y = g.point(i, j);
            assert!((same.get(i, j) - (y[0] + 2.0 * y[1])).abs() <= 1e-12);
        }
    }
}

fn ellipse_points(a: f64, b: f64, angle: f64, c: [f64; 2]) -> Vec<[f64; 2]> {
    let (s, co) = angle.sin_cos();
    (0..64)
        .map(|k| 2.0 * PI * k as f64 / 64.0)
        .map(|t| {
            let (x, y) = (a * t.cos(), b * t.sin());
            [c[0] + co * x - s * y, c[1] + s * x + co * y]
        })
        .collect()
}

proptest! {
    #[test]
    fn ellipse_fit_equivariant(
        a in 0.5f64..3.0,
        ratio in 0.2f64..0.9,
        angle in 0.0f64..PI,
        turn in 0.0f64..(2.0 * PI),
        shift in prop::array::uniform2(-5.0f64..5.0),
    ) {
        let pts = ellipse_points(a, a * ratio, angle, [0.3, -0.2]);
        let base = ellipse_fit(&pts).unwrap();
        let (s, c) = turn.sin_cos();
        let moved: Vec<[f64; 2]> = pts.iter().map(|p| [c * p[0] - s * p[1] + shift[0], s * p[0] + c * p[1] + shift[1]]).collect();
        let fit = ellipse_fit(&moved).unwrap();
        for k in 0..2 {
            prop_assert!((fit.semiaxes[k] - base.semiaxes[k]).abs() <= 1e-9 * a);
        }
        let want = [c * base.center[0] - s * base.center[1] + shift[0], s * base.center[0] + c * base.center[1] + shift[1]];
        prop_assert!((fit.center[0] - want[0]).abs() <= 1e-9 && (fit.center[1] - want[1]).abs() <= 1e-9);
        // Axis directions agree modulo pi.
        let d = (fit.angle - base.angle - turn).rem_euclid(PI);
        prop_assert!(d.min(PI - d) <= 1e-7);
    }
}
