use fnls_core::ansatz::*;
use fnls_core::dynamics::{evolve, solve_kernel_on, TimeGrid, Trajectory};
use fnls_core::random::{sample_gaussian, SeedSpec};
use fnls_core::spectral::{project, project_to};
use fnls_core::stats::log_log_fit;
use fnls_core::{Dyadic, Error, ProjectionMode};
use num_complex::Complex64;

fn d(n: usize) -> Dyadic {
    Dyadic::new(n).unwrap()
}

fn sup_diff(a: &Trajectory, b: &Trajectory) -> f64 {
    a.fields
        .iter()
        .zip(&b.fields)
        .map(|(x, y)| x.l2_distance(y))
        .fold(0.0, f64::max)
}

#[test]
fn initial_data_are_projections() {
    let seed = SeedSpec::new(11, 0);
    let sol = dyadic_solutions(seed, d(16), 0.1, 0.01, 1.5).unwrap();
    let phi = sample_gaussian(16, 1.5, seed);
    assert_eq!(sol.galerkin, 32);
    for (&n, v) in &sol.v {
        let want = project_to(&phi, n.cutoff()).with_cutoff(32);
        assert_eq!(v.first(), &want, "N = {n}");
    }
    for n in [d(1), d(2), d(4), d(8), d(16)] {
        let step = sol.v[&n].first() - sol.v[&n.half()].first();
        let shell = project(&phi, n, ProjectionMode::Shell).with_cutoff(32);
        assert!(step.max_abs_diff(&shell) == 0.0, "N = {n}");
    }
}

#[test]
fn unit_scale_matches_direct_evolution() {
    let seed = SeedSpec::new(5, 0);
    let sol = dyadic_solutions(seed, d(1), 0.3, 0.01, 1.5).unwrap();
    let u0 = project_to(&sample_gaussian(1, 1.5, seed), 1).with_cutoff(2);
    let direct = evolve(&u0, 0.3, 0.01, fnls_core::dynamics::Variant::WickGauged).unwrap();
    assert!(sup_diff(&sol.v[&d(1)], &direct) < 1e-14);
}

#[test]
fn ladder_top_examples() {
    let tops: Vec<String> = [16, 32, 64, 128]
        .iter()
        .map(|&n| ladder_top(d(n), DEFAULT_DELTA).to_string())
        .collect();
    assert_eq!(tops, ["8", "16", "32", "64"]);
    assert!(ladder_top(d(1), DEFAULT_DELTA).is_half());
}

#[test]
fn telescoping_identity() {
    for master in [1, 2] {
        let sol = dyadic_solutions(SeedSpec::new(master, 0), d(32), 0.3, 0.01, 1.5).unwrap();
        for n in [d(1), d(4), d(16), d(32)] {
            let b = build_ansatz(n, &sol, AnsatzOptions::default()).unwrap();
            assert!(b.telescoping_residual() < 1e-10, "N = {n}");
            assert!(b.zeta[&Dyadic::HALF].fields.iter().all(|f| f.l2() == 0.0));
        }
    }
}

#[test]
fn missing_background_is_reported() {
    let grid = TimeGrid::over(0.0, 0.1, 0.01).unwrap();
    let sol = dyadic_solutions_on(SeedSpec::new(1, 0), 1.5, d(16), grid, &[d(8), d(16)]).unwrap();
    let err = build_ansatz(d(16), &sol, AnsatzOptions::default()).unwrap_err();
    assert!(matches!(err, Error::MissingTrajectory(_)), "{err}");
    assert!(build_ansatz(d(32), &sol, AnsatzOptions::default()).is_err());
}

#[test]
fn zero_background_reduces_to_free_flow() {
    let sol = dyadic_solutions(SeedSpec::new(4, 0), d(16), 0.2, 0.01, 1.5).unwrap();
    let opts = AnsatzOptions {
        zero_background: true,
        ..AnsatzOptions::default()
    };
    let b = build_ansatz(d(16), &sol, opts).unwrap();
    for psi in b.psi.values() {
        assert!(sup_diff(psi, &b.f_n) < 1e-12);
    }
    let direct = b.y_n.zip_with(&b.f_n, |a, f| a - f).unwrap();
    assert!(sup_diff(&b.w_n, &direct) < 1e-12);
}

#[test]
fn zero_background_residual_is_small() {
    let sol = dyadic_solutions(SeedSpec::new(3, 0), d(4), 0.5, 1e-3, 1.5).unwrap();
    let opts = AnsatzOptions {
        zero_background: true,
        ..AnsatzOptions::default()
    };
    let b = build_ansatz(d(4), &sol, opts).unwrap();
    assert!(residual_w(&b, &sol).unwrap() < 1e-8);
}

#[test]
fn degenerate_ladder() {
    let sol = dyadic_solutions(SeedSpec::new(9, 0), d(4), 0.3, 1e-3, 1.5).unwrap();
    let b = build_ansatz(d(1), &sol, AnsatzOptions::default()).unwrap();
    assert!(b.l_n.is_half());
    assert_eq!(b.zeta.len(), 1);
    let direct = b.y_n.zip_with(&b.f_n, |a, f| a - f).unwrap();
    assert!(sup_diff(&b.w_n, &direct) < 1e-14);
    assert!(residual_w(&b, &sol).unwrap() < 1e-9);
}

#[test]
fn residual_is_fourth_order() {
    let res = |dt: f64| {
        let sol = dyadic_solutions(SeedSpec::new(3, 0), d(16), 0.5, dt, 1.5).unwrap();
        let b = build_ansatz(d(16), &sol, AnsatzOptions::default()).unwrap();
        residual_w(&b, &sol).unwrap()
    };
    let (coarse, fine) = (res(0.005), res(0.0025));
    assert!(coarse / fine >= 8.0, "{coarse:e} -> {fine:e}");
}

#[test]
fn kernel_contraction_matches_applied_solve() {
    let sol = dyadic_solutions(SeedSpec::new(6, 0), d(16), 0.2, 0.01, 1.5).unwrap();
    let applied = build_ansatz(d(16), &sol, AnsatzOptions::default()).unwrap();
    let opts = AnsatzOptions {
        with_kernels: true,
        ..AnsatzOptions::default()
    };
    let contracted = build_ansatz(d(16), &sol, opts).unwrap();
    assert_eq!(contracted.kernels.len(), applied.psi.len() - 1);
    for (l, psi) in &applied.psi {
        assert!(sup_diff(psi, &contracted.psi[l]) < 1e-12, "L = {l}");
    }
}

#[test]
fn psi_is_linear_in_shell_data() {
    let seed = SeedSpec::new(8, 0);
    let sol = dyadic_solutions(seed, d(16), 0.2, 0.01, 1.5).unwrap();
    let bg = sol.v[&d(4)].map(|f| f.with_cutoff(4));
    let kernel = solve_kernel_on(d(16), d(4), &bg, &sol.grid).unwrap();
    let data = sol.shell_data(d(16));
    let doubled = &data * Complex64::new(2.0, 0.0);
    for i in 0..kernel.len() {
        let once = kernel.apply(i, &data);
        let twice = kernel.apply(i, &doubled);
        assert!(twice.max_abs_diff(&(&once * Complex64::new(2.0, 0.0))) < 1e-10);
    }
}

#[test]
fn kernel_columns_are_the_shell() {
    let sol = dyadic_solutions(SeedSpec::new(2, 0), d(8), 0.1, 0.01, 1.5).unwrap();
    let bg = sol.v[&d(2)].map(|f| f.with_cutoff(2));
    let h = solve_kernel_on(d(8), d(2), &bg, &sol.grid).unwrap();
    assert_eq!(h.shell, vec![-8, -7, -6, -5, 5, 6, 7, 8]);
    let i = h.len() - 1;
    for k_star in -8i64..=8 {
        let column_mass: f64 = (-8..=8).map(|k| h.entry(i, k, k_star).norm_sqr()).sum();
        assert_eq!(column_mass > 0.0, d(8).shell_contains(k_star), "k* = {k_star}");
    }
}

#[test]
fn zeta_decays_in_n() {
    let series = zeta_series(
        SeedSpec::new(0, 0),
        1.5,
        &[d(16), d(32), d(64), d(128)],
        d(2),
        1.0,
        0.01,
    )
    .unwrap();
    let (x, y): (Vec<f64>, Vec<f64>) = series.iter().map(|&(n, v)| (n as f64, v)).unzip();
    assert!(log_log_fit(&x, &y).unwrap().slope < 0.0);
    assert!(zeta_series(SeedSpec::new(0, 0), 1.5, &[d(2)], d(2), 0.1, 0.01).is_err());
}

#[test]
fn kernel_difference_is_nearly_local() {
    let grid = TimeGrid::over(0.0, 0.5, 0.01).unwrap();
    let sol = dyadic_solutions_on(SeedSpec::new(3, 0), 1.5, d(64), grid, &[d(1), d(2)]).unwrap();
    let width = 2.0 * 64f64.powf(0.1);
    assert!(kernel_locality(d(64), d(2), &sol, width).unwrap() < 0.2);
}

#[test]
fn scaling_study_tables() {
    let study = scaling_study(
        SeedSpec::new(1, 0),
        1.5,
        &[d(8), d(16)],
        0.2,
        0.0025,
        ScalingSpec::default(),
    )
    .unwrap();
    for r in study.rows.iter().filter(|r| r.l == "1/2") {
        assert_eq!(r.value, 0.0);
    }
    assert!(study.rows.iter().any(|r| r.norm_name == "w_x0b" && r.value > 0.0));
    assert!(study.fits.iter().any(|f| f.variable == "N"));
    let mut csv = Vec::new();
    write_scaling_csv(&mut csv, &study.rows).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("N,L,norm_name,value\n"));
    assert_eq!(text.lines().count(), study.rows.len() + 1);
}
