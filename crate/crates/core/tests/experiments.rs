use obstacle_core::experiments::*;

fn small_morse(masses: Vec<f64>) -> RunSetup {
    let mut s = preset("morse1").unwrap();
    s.domain = DomainParams::centered([4.8, 4.8], [128, 128]);
    s.masses = masses;
    s
}

#[test]
fn fit_recovers_cube_root() {
    let pairs: Vec<(f64, f64)> = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6].iter().map(|&m: &f64| (m, 2.0 * m.cbrt())).collect();
    let f = fit_exponent(&pairs, 1.0 / 3.0, 0.05).unwrap();
    assert!((f.slope - 1.0 / 3.0).abs() <= 1e-12);
    assert!((f.prefactor - 2.0).abs() <= 1e-10);
    assert!(f.stderr <= 1e-12 && f.pass && f.points == 5);

    let noisy: Vec<(f64, f64)> = pairs.iter().enumerate().map(|(k, &(m, b))| (m, b * (1.0 + 0.01 * (-1f64).powi(k as i32)))).collect();
    let f = fit_exponent(&noisy, 0.5, 0.05).unwrap();
    assert!(f.stderr > 0.0 && !f.pass);

    assert!(fit_exponent(&pairs[..2], 0.3, 0.1).is_err());
    assert!(fit_exponent(&[(1.0, 1.0), (0.0, 1.0), (2.0, 1.0)], 0.3, 0.1).is_err());
    assert!(fit_exponent(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)], 0.3, 0.1).is_err());
}

#[test]
fn geometric_ladder() {
    let m = geometric_masses(1e-2, 1e-4, 5).unwrap();
    assert_eq!(m.len(), 5);
    assert_eq!((m[0], m[4]), (1e-2, 1e-4));
    assert!((m[1] / m[0] - m[4] / m[3]).abs() <= 1e-12);
    assert!(geometric_masses(1e-4, 1e-2, 5).is_err());
}

#[test]
fn reports_are_deterministic() {
    let s = small_morse(geometric_masses(4e-3, 2.5e-4, 5).unwrap());
    let d = s.domain.build().unwrap();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for (dir, workers) in dirs.iter().zip([1, 2]) {
        let rep = s.case.sweep(&d, &s.masses, &s.solver, &Tolerances::default(), workers).unwrap();
        rep.write(dir.path()).unwrap();
    }
    for f in ["sweep.csv", "report.json", "summary.txt"] {
        let a = std::fs::read(dirs[0].path().join(f)).unwrap();
        let b = std::fs::read(dirs[1].path().join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
    let csv = std::fs::read_to_string(dirs[0].path().join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "M,alpha,beta,bump_id,m_i,hausdorff,linf,l1,valid");
    assert_eq!(lines.count(), 5);
}

#[test]
fn oversized_levels_are_excluded_and_listed() {
    let s = small_morse(vec![5.0, 4e-3, 2e-3, 1e-3, 5e-4, 2.5e-4]);
    let d = s.domain.build().unwrap();
    let rep = s.case.verify(&d, &s.masses, &s.solver, &Tolerances::default(), 1).unwrap();
    assert_eq!(rep.excluded.len(), 1);
    assert_eq!(rep.excluded[0].target, 5.0);
    assert!(!rep.excluded[0].reason.is_empty());
    assert!(!rep.records[0].valid);
    assert_eq!(rep.valid_records().count(), 5);
    let fit = &rep.fits[0].1;
    // Largest valid level dropped from the fit.
    assert_eq!(fit.points, 4);
    assert!(fit.stderr > 0.0);
    assert!(rep.summary().contains("valid false"));
}

#[test]
fn window_exit_reports_the_bump() {
    let s = preset("hom(4)").unwrap();
    let d = s.domain.build().unwrap();
    let case = s.case.sweep_case(&d).unwrap();
    let mut u = obstacle_core::solver::Field::zeros(d.dims()[0], d.dims()[1]);
    let (i, j) = d.nearest_node([0.0, 0.0]);
    u.set(i, j, 1.0);
    assert_eq!(window_exit(&d, &u, &case), None);
    u.set(0, 0, 1.0);
    assert_eq!(window_exit(&d, &u, &case), Some(0));
}

#[test]
fn unknown_presets_rejected() {
    assert!(preset("hom(0)").is_err());
    assert!(preset("hom(x)").is_err());
    assert!(preset("morse3").is_err());
    for name in preset_names() {
        assert!(preset(name).is_ok());
    }
}
