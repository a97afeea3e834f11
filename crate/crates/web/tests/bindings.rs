use obstacle_web::{power_fit, run_bump, sample_quad};

#[test]
fn isotropic_profile_values() {
    let mut p = sample_quad(0.5, 65).unwrap();
    assert_eq!(p.c0(), 0.5);
    let ax = p.semiaxes();
    assert!((ax[0] - 2.0).abs() < 1e-12 && (ax[1] - 2.0).abs() < 1e-12);
    assert!((p.mass() - 2.0 * std::f64::consts::PI / 3.0).abs() < 1e-12);
    let g = p.take_grid();
    assert_eq!(g.values().len(), 65 * 65);
    assert!(g.max() <= 0.5 && g.max() > 0.49);
    assert!(p.take_grid().values().is_empty());
}

#[test]
fn bad_inputs_rejected() {
    assert!(sample_quad(0.7, 64).is_err());
    assert!(sample_quad(0.5, 4).is_err());
    assert!(run_bump(1.0, -1.0, 0.9, 1e-3, 64).is_err());
    assert!(power_fit(&[1.0, 2.0], &[1.0]).is_err());
}

#[test]
fn small_solve_hits_mass() {
    let s = run_bump(1.0, 1.0, 0.9, 2e-3, 64).unwrap();
    assert!(((s.mass() - 2e-3) / 2e-3).abs() < 1e-5);
    assert!(s.beta() > 0.0 && s.residual() <= 1e-9);
    assert!(s.active() > 0);
}

#[test]
fn power_fit_recovers_exponent() {
    let x = [1e-3, 1e-4, 1e-5, 1e-6];
    let y: Vec<f64> = x.iter().map(|v: &f64| 2.0 * v.cbrt()).collect();
    let f = power_fit(&x, &y).unwrap();
    assert!((f[0] - 1.0 / 3.0).abs() < 1e-12);
    assert!((f[1] - 2.0).abs() < 1e-10);
}
