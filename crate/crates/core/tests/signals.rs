use std::f64::consts::PI;

use obstacle_core::experiments::{preset, preset_names};
use obstacle_core::signals::*;
use obstacle_core::solver::{DomainSpec, Sym2};

#[test]
fn every_preset_signal_is_in_range() {
    for name in preset_names().iter().copied().chain(["hom(2)", "hom(4)", "hom(3)"]) {
        let s = preset(name).unwrap();
        let d = s.domain.build().unwrap();
        let g = s.case.signal(&d).unwrap();
        assert!(g.values.min() > 0.0 && g.values.max() < 1.0, "{name}");
        // Declared maxima are grid maxima.
        let top = g.values.max();
        for m in &g.maxima {
            if matches!(m.model, LocalModel::Curve { .. }) {
                continue;
            }
            let (i, j) = d.nearest_node(m.position);
            let v = g.values.get(i, j);
            assert!(v >= top - 1e-12 || (v - g.gmax).abs() <= 1e-12, "{name}: {v} vs {top}");
        }
    }
}

#[test]
fn fd_hessian_converges_at_second_order() {
    let h = Sym2::new(2.0, 0.5, 1.0);
    let mut errs = Vec::new();
    for n in [128, 256] {
        let d = DomainSpec::centered_square(3.0, n).unwrap();
        let g = morse_signal(&d, &[([0.0, 0.0], h)], 0.9, 0.1, BumpCutoff { q_inner: 2.0, q_outer: 3.0 }).unwrap();
        let (i, j) = d.nearest_node([0.0, 0.0]);
        assert_eq!(g.values.get(i, j), 0.9);
        let fd = fd_neg_hessian(&d, &g.values, i, j);
        errs.push((fd.a11 - h.a11).abs().max((fd.a12 - h.a12).abs()).max((fd.a22 - h.a22).abs()) / h.a11);
    }
    assert!(errs[0] < 1e-2, "{errs:?}");
    let rate = (errs[0] / errs[1]).log2();
    assert!(rate > 1.8, "{errs:?}");
}

#[test]
fn equal_bumps_swap_symmetrically() {
    let d = DomainSpec::centered_square(4.0, 128).unwrap();
    let h = Sym2::diag(3.0, 2.0);
    let g = morse_signal(&d, &[([-2.0, 0.0], h), ([2.0, 0.0], h)], 0.9, 0.1, BumpCutoff { q_inner: 2.0, q_outer: 3.0 })
        .unwrap();
    // x -> -x maps node i to 128 - i (mod 128) on this grid.
    for j in 0..128 {
        for i in 0..128 {
            let a = g.values.get(i, j);
            let b = g.values.get((128 - i) % 128, j);
            assert!((a - b).abs() <= 1e-15);
        }
    }
}

#[test]
fn quadratic_homogeneous_matches_bump_locally() {
    let d = DomainSpec::centered_square(2.0, 128).unwrap();
    let w = Window { radii: [0.5, 0.5], blend: 0.5 };
    // r^2 w(theta) with w = 1 is x^T H x / 2 for H = 2I.
    let hom = homogeneous_signal(&d, [0.0, 0.0], 2.0, &[1.0], 0.9, 0.1, Some(w)).unwrap();
    let bump = morse_signal(&d, &[([0.0, 0.0], Sym2::diag(2.0, 2.0))], 0.9, 0.1, BumpCutoff { q_inner: 2.0, q_outer: 3.0 })
        .unwrap();
    for j in 0..128 {
        for i in 0..128 {
            let x = d.coords(i, j);
            let r2 = x[0] * x[0] + x[1] * x[1];
            if r2 < 0.04 {
                let diff = (hom.values.get(i, j) - bump.values.get(i, j)).abs();
                // The Gaussian differs at fourth order: depth * q^2 / 2 with q = r^2 / 0.8.
                assert!(diff <= 0.8 * (r2 / 0.8).powi(2), "{x:?}: {diff}");
            }
        }
    }
}

#[test]
fn quartic_model_is_homogeneous() {
    let d = DomainSpec::centered_square(2.0, 256).unwrap();
    let w = Window { radii: [0.55, 0.55], blend: 0.5 };
    let g = homogeneous_signal(&d, [0.0, 0.0], 4.0, &[1.0, 0.2], 0.9, 0.1, Some(w)).unwrap();
    let (i, j) = d.nearest_node([0.0, 0.0]);
    let f = |k: usize| g.gmax - g.values.get(i + k, j);
    for k in [1, 3, 10] {
        let r = f(2 * k) / f(k);
        assert!((r - 16.0).abs() <= 1e-6, "{k}: {r}");
    }
}

#[test]
fn windowed_models_are_exact_inside() {
    let d = DomainSpec::periodic_rect([-1.0, -2.0], [2.0, 4.0], 128, 256).unwrap();
    let w = Window { radii: [0.6, 1.2], blend: 0.3 };
    let g = noncoercive_signal(&d, [0.0, 0.0], 1.0, 0.1, 1e-3, 0.9, 0.1, Some(w)).unwrap();
    let model = LocalModel::Noncoercive { a: 1.0, b: 0.1, c: 1e-3 };
    let mut seen = 0;
    for j in 0..256 {
        for i in 0..128 {
            let x = d.coords(i, j);
            if w.weight(x) == 1.0 {
                assert!((g.values.get(i, j) - (0.9 - model.deficit(x))).abs() <= 1e-12);
                seen += 1;
            } else if w.weight(x) == 0.0 {
                assert!((g.values.get(i, j) - 0.1).abs() <= 1e-15);
            }
        }
    }
    assert!(seen > 1000);
}

#[test]
fn curve_signal_transverse_curvature() {
    let d = DomainSpec::lat_lon_sphere(64, 256, 5f64.to_radians()).unwrap();
    let phi0 = 1.2;
    let a = [3.0, 4.0, 3.0, 2.0];
    let g = curve_signal(&d, phi0, &a, 0.9, 0.1, 0.28).unwrap();
    let (_, j) = d.nearest_node([0.0, phi0]);
    let h = d.spacing()[1];
    for i in 0..64 {
        let theta = d.coords(i, j)[0];
        let d2 = (g.values.get(i, j + 1) - 2.0 * g.values.get(i, j) + g.values.get(i, j - 1)) / (h * h);
        let want = 2.0 * obstacle_core::numerics::periodic_cubic(&a, 2.0 * PI, theta);
        assert!((-d2 / want - 1.0).abs() <= 1e-8, "theta {theta}: {} vs {want}", -d2);
    }
    // Constant a: no dependence on longitude.
    let g = curve_signal(&d, phi0, &[2.5], 0.9, 0.1, 0.3).unwrap();
    for j in 0..256 {
        let row: Vec<f64> = (0..64).map(|i| g.values.get(i, j)).collect();
        assert!(row.iter().all(|v| (v - row[0]).abs() <= 1e-15));
    }
}

#[test]
fn invalid_signals_rejected() {
    let d = DomainSpec::centered_square(2.0, 64).unwrap();
    assert!(morse_signal(&d, &[], 0.9, 0.1, BumpCutoff::default()).is_err());
    assert!(morse_signal(&d, &[([0.0, 0.0], Sym2::IDENTITY)], 0.9, 0.95, BumpCutoff::default()).is_err());
    assert!(morse_signal(&d, &[([0.0, 0.0], Sym2::diag(1.0, -1.0))], 0.9, 0.1, BumpCutoff::default()).is_err());
    // Deep model inside a wide window leaves the range (0, 1).
    let w = Window { radii: [1.5, 1.5], blend: 0.2 };
    assert!(anisotropic_signal(&d, [0.0, 0.0], 5.0, 5.0, 0.9, 0.1, Some(w)).is_err());
    assert!(curve_signal(&d, 1.0, &[1.0], 0.9, 0.1, 0.3).is_err());
}
