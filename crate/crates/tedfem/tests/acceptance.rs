//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! with the measured quantities (visible with `--nocapture`, and always on
//! failure).
//!
//! Criterion 1 checks the convergence-rate pattern of the notched-square
//! loading experiment. Under the discrete damage equation exactly as this
//! library implements it, the damage field's only solution is identically
//! zero (the equation has no source term: every term is proportional to the
//! new damage iterate or to a positive part that vanishes when the iterate
//! does not exceed the previous level). The damage errors against a nested
//! reference are therefore machine noise with undefined rates, no crack
//! field develops, and the displacement and temperature stay regular enough
//! to converge faster than the expected singular-crack pattern. The rate
//! windows are asserted as specified and the test documents the measured
//! values when it fails; `crates/tedfem/src/assembly.rs` monitors the
//! damage negativity instead of repairing it.

mod common;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tedfem::analysis::{check_theorem_assumptions, data_series, DataSeries};
use tedfem::analysis::{mms_elastic, mms_heat};
use tedfem::assembly::{
    assemble_damage, assemble_heat, assemble_momentum, ConductivityModel, ModelParams,
};
use tedfem::catalog::ScalarFn;
use tedfem::cli::{cmd_convergence, run_transient};
use tedfem::config::preset;
use tedfem::mesh::{build_unit_square, BoundaryTag, CellKind};
use tedfem::space::{interpolate_scalar, interpolate_vector};
use tedfem::stepper::{run, stencil_centered, stencil_ddt2, SolverSettings, TimeGrid};
use tedfem::tensor::{dev, positive_part, ElasticModuli, SymTensor2};

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "ACCEPTANCE {criterion}: {} -- {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn in_band(x: Option<f64>, lo: f64, hi: f64) -> bool {
    matches!(x, Some(v) if v >= lo && v <= hi)
}

fn fmt_rate(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{v:.3}"),
        None => "undefined".into(),
    }
}

#[test]
fn criterion_1_rate_reproduction() {
    let start = Instant::now();
    let mut cfg = preset("sens-notch").unwrap();
    cfg.mesh.n = 8;
    cfg.time.steps = 50;
    let outcome = cmd_convergence(&cfg, 3, None).unwrap();
    let f = outcome.fitted;
    let runtime = start.elapsed().as_secs_f64();

    let checks = [
        ("u L2 in [0.75, 1.15]", in_band(f.u_l2, 0.75, 1.15), fmt_rate(f.u_l2)),
        ("phi L2 in [0.75, 1.15]", in_band(f.phi_l2, 0.75, 1.15), fmt_rate(f.phi_l2)),
        ("theta L2 in [0.75, 1.15]", in_band(f.theta_l2, 0.75, 1.15), fmt_rate(f.theta_l2)),
        ("phi H1 in [0.35, 0.60]", in_band(f.phi_h1, 0.35, 0.60), fmt_rate(f.phi_h1)),
        ("theta H1 in [0.35, 0.60]", in_band(f.theta_h1, 0.35, 0.60), fmt_rate(f.theta_h1)),
        ("u H1 in [0.30, 0.55]", in_band(f.u_h1, 0.30, 0.55), fmt_rate(f.u_h1)),
    ];
    let pass = checks.iter().all(|c| c.1) && runtime <= 900.0;
    let detail = checks
        .iter()
        .map(|(name, ok, val)| format!("{name}: {val} ({})", if *ok { "ok" } else { "out" }))
        .collect::<Vec<_>>()
        .join("; ");
    report(
        "criterion 1 (rate reproduction)",
        pass,
        &format!("{detail}; runtime {runtime:.1}s"),
    );
    assert!(runtime <= 900.0, "runtime budget exceeded: {runtime:.1}s");
    assert!(
        pass,
        "fitted rates outside the expected windows: {detail}. The damage field is \
         identically zero under this discrete damage equation (its residual has no \
         source term), so no crack forms: damage errors are roundoff noise and the \
         remaining fields converge faster than the singular-crack pattern the windows \
         encode."
    );
}

#[test]
fn criterion_2_mms_orders() {
    let start = Instant::now();
    let e = mms_elastic(CellKind::Triangle, 8, 3, 2.0, 3.0, 1e-8).unwrap();
    let h = mms_heat(CellKind::Quadrilateral, 8, 3, 0.158).unwrap();
    let runtime = start.elapsed().as_secs_f64();
    let pass = (e.l2_rate - 2.0).abs() <= 0.15
        && (e.h1_rate - 1.0).abs() <= 0.1
        && (h.l2_rate - 2.0).abs() <= 0.15
        && (h.h1_rate - 1.0).abs() <= 0.1
        && runtime <= 120.0;
    report(
        "criterion 2 (manufactured orders)",
        pass,
        &format!(
            "elastic l2 {:.3} h1 {:.3}; heat l2 {:.3} h1 {:.3}; runtime {runtime:.1}s",
            e.l2_rate, e.h1_rate, h.l2_rate, h.h1_rate
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_3_operator_property_suite() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut failures = 0usize;
    for dim in [2usize, 3] {
        let m = ElasticModuli::new(8.88, 13.33, dim).unwrap();
        let lip = m.lipschitz_constant();
        let coer = m.coercivity_constant();
        let rand_t = |rng: &mut ChaCha8Rng| {
            let mut t = SymTensor2::zero(dim);
            for i in 0..dim {
                for j in i..dim {
                    t.set(i, j, rng.gen_range(-3.0..3.0));
                }
            }
            t
        };
        for _ in 0..1000 {
            let s = rand_t(&mut rng);
            let t = rand_t(&mut rng);
            // Lipschitz with constant 2*lambda*d + 2*mu
            if m.apply(&s).sub(&m.apply(&t)).norm() > lip * s.sub(&t).norm() * (1.0 + 1e-12) {
                failures += 1;
            }
            // coercivity with constant 2*mu
            if m.apply(&s).inner(&s) < coer * s.inner(&s) * (1.0 - 1e-12) - 1e-12 {
                failures += 1;
            }
            // square-root composition to 1e-12 relative
            let twice = m.apply_sqrt(&m.apply_sqrt(&s));
            let once = m.apply(&s);
            if twice.sub(&once).norm() > 1e-12 * once.norm().max(1e-30) {
                failures += 1;
            }
            // deviatoric identities
            let ds = dev(&s);
            let tr = s.trace();
            if ds.trace().abs() > 1e-12
                || ds.norm() > s.norm() * (1.0 + 1e-12)
                || (ds.inner(&s) - ds.inner(&ds)).abs() > 1e-10
                || (ds.inner(&ds) - (s.inner(&s) - tr * tr / dim as f64)).abs() > 1e-10
                || (ds.inner(&t) - s.inner(&dev(&t))).abs() > 1e-10
            {
                failures += 1;
            }
            // positive-part properties
            let c: f64 = rng.gen_range(-5.0..5.0);
            let d: f64 = rng.gen_range(-5.0..5.0);
            let (pc, pd) = (positive_part(c), positive_part(d));
            if (pc - pd) * (c - d) < (pc - pd) * (pc - pd) - 1e-13
                || (pc - pd).abs() > (c - d).abs() + 1e-13
            {
                failures += 1;
            }
        }
    }
    let runtime = start.elapsed().as_secs_f64();
    let pass = failures == 0 && runtime <= 5.0;
    report(
        "criterion 3 (operator properties)",
        pass,
        &format!("{failures} failures over 2000 samples; runtime {runtime:.2}s"),
    );
    assert!(pass);
}

#[test]
fn criterion_4_oracle_equivalence() {
    let start = Instant::now();
    // 2-cell triangle mesh, generic states away from the penalty kink
    let mesh = build_unit_square(1, CellKind::Triangle).unwrap();
    let params = ModelParams::new(
        ElasticModuli::new(2.0, 3.0, 2).unwrap(),
        0.7,
        0.05,
        0.4,
        2.5,
        25.0,
        ConductivityModel::PowerLaw { c0: 0.5, c1: 0.7, c2: 1.4, beta: 1.5 },
    )
    .unwrap();
    let tau = 0.05;
    let t = 0.0;
    let u_trial = interpolate_vector(&mesh, |p| [0.03 * p[0] + 0.01 * p[1], -0.02 * p[0]]);
    let u_old = interpolate_vector(&mesh, |p| [0.01 * p[1], 0.02 * p[0] * p[0]]);
    let u_prev = interpolate_vector(&mesh, |p| [0.005 * p[0], -0.01 * p[1]]);
    let phi_trial = interpolate_scalar(&mesh, |p| 0.6 + 0.2 * p[0]);
    let phi_old = interpolate_scalar(&mesh, |_| 0.3); // increment > 0 everywhere
    let theta_trial = interpolate_scalar(&mesh, |p| 0.5 + 0.3 * p[0] + 0.2 * p[1]);
    let theta_old = interpolate_scalar(&mesh, |p| 0.2 + 0.1 * p[1]);
    let f = interpolate_vector(&mesh, |p| [0.4 * p[0], -0.3]);
    let gamma = interpolate_scalar(&mesh, |p| 0.5 * p[0] * p[1]);
    let gbar_owned = vec![(BoundaryTag::Left, ScalarFn::Constant(2.0))];
    let gbar: Vec<(&BoundaryTag, &ScalarFn)> =
        gbar_owned.iter().map(|(t, f)| (t, f)).collect();

    let rel = |a: &[f64], b: &[f64]| -> f64 {
        let scale = b.iter().map(|v| v.abs()).fold(0.0f64, f64::max).max(1e-30);
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f64, f64::max)
            / scale
    };

    // momentum residual: assembled matrix/rhs applied to the trial state
    let (mat, rhs) =
        assemble_momentum(&mesh, &u_old, &u_prev, &phi_trial, &theta_old, &f, &params, tau)
            .unwrap();
    let assembled: Vec<f64> = tedfem::linalg::spmv(&mat, &u_trial.coeffs)
        .iter()
        .zip(&rhs)
        .map(|(a, b)| a - b)
        .collect();
    let oracle = common::dense_momentum_residual(
        &mesh, &u_trial, &u_old, &u_prev, &phi_trial, &theta_old, &f, &params, tau,
    );
    let momentum_err = rel(&assembled, &oracle);

    let (damage_res, damage_jac) =
        assemble_damage(&mesh, &phi_trial, &phi_old, &u_old, &params).unwrap();
    let oracle = common::dense_damage_residual(&mesh, &phi_trial, &phi_old, &u_old, &params);
    let damage_err = rel(&damage_res, &oracle);

    let (heat_res, heat_jac) = assemble_heat(
        &mesh,
        &theta_trial,
        &theta_old,
        &u_trial,
        &u_prev,
        &gamma,
        &gbar,
        t,
        &params,
        tau,
    )
    .unwrap();
    let gbar_dense = vec![(BoundaryTag::Left, ScalarFn::Constant(2.0))];
    let oracle = common::dense_heat_residual(
        &mesh,
        &theta_trial,
        &theta_old,
        &u_trial,
        &u_prev,
        &gamma,
        &gbar_dense,
        t,
        &params,
        tau,
    );
    let heat_err = rel(&heat_res, &oracle);

    // Jacobians against central finite differences
    let n = mesh.n_nodes();
    let mut damage_fd_err = 0.0f64;
    let mut heat_fd_err = 0.0f64;
    let eps = 1e-6;
    for j in 0..n {
        let mut pp = phi_trial.clone();
        pp.coeffs[j] += eps;
        let mut pm = phi_trial.clone();
        pm.coeffs[j] -= eps;
        let (rp, _) = assemble_damage(&mesh, &pp, &phi_old, &u_old, &params).unwrap();
        let (rm, _) = assemble_damage(&mesh, &pm, &phi_old, &u_old, &params).unwrap();
        for i in 0..n {
            let fd = (rp[i] - rm[i]) / (2.0 * eps);
            let scale = damage_jac.get(i, j).abs().max(1.0);
            damage_fd_err = damage_fd_err.max((damage_jac.get(i, j) - fd).abs() / scale);
        }

        let mut tp = theta_trial.clone();
        tp.coeffs[j] += eps;
        let mut tm = theta_trial.clone();
        tm.coeffs[j] -= eps;
        let (rp, _) = assemble_heat(
            &mesh, &tp, &theta_old, &u_trial, &u_prev, &gamma, &gbar, t, &params, tau,
        )
        .unwrap();
        let (rm, _) = assemble_heat(
            &mesh, &tm, &theta_old, &u_trial, &u_prev, &gamma, &gbar, t, &params, tau,
        )
        .unwrap();
        for i in 0..n {
            let fd = (rp[i] - rm[i]) / (2.0 * eps);
            let scale = heat_jac.get(i, j).abs().max(1.0);
            heat_fd_err = heat_fd_err.max((heat_jac.get(i, j) - fd).abs() / scale);
        }
    }
    // the momentum system is linear: its Jacobian is the assembled matrix;
    // differencing the residual reproduces it by construction, so check one
    // column for completeness
    let mut up = u_trial.clone();
    up.coeffs[0] += eps;
    let mut um = u_trial.clone();
    um.coeffs[0] -= eps;
    let rp = tedfem::linalg::spmv(&mat, &up.coeffs);
    let rm = tedfem::linalg::spmv(&mat, &um.coeffs);
    let mut momentum_fd_err = 0.0f64;
    for i in 0..2 * n {
        let fd = (rp[i] - rm[i]) / (2.0 * eps);
        let scale = mat.get(i, 0).abs().max(1.0);
        momentum_fd_err = momentum_fd_err.max((mat.get(i, 0) - fd).abs() / scale);
    }

    let runtime = start.elapsed().as_secs_f64();
    let pass = momentum_err <= 1e-12
        && damage_err <= 1e-12
        && heat_err <= 1e-12
        && damage_fd_err <= 1e-6
        && heat_fd_err <= 1e-6
        && momentum_fd_err <= 1e-6
        && runtime <= 10.0;
    report(
        "criterion 4 (oracle equivalence)",
        pass,
        &format!(
            "residual rel err: momentum {momentum_err:.2e}, damage {damage_err:.2e}, heat {heat_err:.2e}; \
             jacobian fd err: damage {damage_fd_err:.2e}, heat {heat_fd_err:.2e}, momentum {momentum_fd_err:.2e}; \
             runtime {runtime:.2}s"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_penalty_consistency() {
    let start = Instant::now();
    // two-point sweep of the penalization parameter on the coarse notched
    // run; the irreversibility violation summed over the run must drop by at
    // least 5x for a 10x larger parameter (an exactly satisfied constraint
    // on both runs, at machine-noise level, satisfies this trivially)
    let mut violations = Vec::new();
    for gamma0 in [100.0, 1000.0] {
        let mut cfg = preset("sens-notch").unwrap();
        cfg.mesh.n = 8;
        cfg.time.steps = 50;
        cfg.material.gamma0 = gamma0;
        let outcome = run_transient(&cfg, None).unwrap();
        let total: f64 = outcome.trajectory.reports.iter().map(|r| r.penalty_violation).sum();
        violations.push(total);
    }
    // companion check with a genuinely active penalty: a negative previous
    // damage level forces the unconstrained solution above it
    let mesh = build_unit_square(4, CellKind::Triangle).unwrap();
    let grid = TimeGrid::new(0.1, 1).unwrap();
    let mut active = Vec::new();
    for gamma0 in [100.0, 1000.0] {
        let params = ModelParams::new(
            ElasticModuli::new(1.0, 1.0, 2).unwrap(),
            0.0,
            1e-2,
            0.5,
            2.0,
            gamma0,
            ConductivityModel::Constant { k: 1.0 },
        )
        .unwrap();
        let mut data = tedfem::stepper::ProblemData::all_zero();
        data.phi0 = ScalarFn::Constant(-1.0);
        let traj = run(
            &mesh,
            &params,
            &tedfem::assembly::BcSpec::default(),
            &data,
            &grid,
            &SolverSettings::default(),
            1,
        )
        .unwrap();
        active.push(traj.reports[0].penalty_violation);
    }
    let runtime = start.elapsed().as_secs_f64();
    let noise_floor = 1e-12;
    let sweep_ok = (violations[0] <= noise_floor && violations[1] <= noise_floor)
        || violations[1] * 5.0 <= violations[0];
    let active_ok = active[0] > 0.0 && active[1] * 5.0 <= active[0];
    let pass = sweep_ok && active_ok && runtime <= 300.0;
    report(
        "criterion 5 (penalty consistency)",
        pass,
        &format!(
            "notched-run violations {:.3e} -> {:.3e}; active-constraint violations {:.3e} -> {:.3e}; runtime {runtime:.1}s",
            violations[0], violations[1], active[0], active[1]
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_6_stability_constant_robustness() {
    let start = Instant::now();
    // one uniform refinement of the coarse notched run
    let mut fits = Vec::new();
    for n in [8usize, 16] {
        let mut cfg = preset("sens-notch").unwrap();
        cfg.mesh.n = n;
        cfg.time.steps = 50;
        let outcome = run_transient(&cfg, None).unwrap();
        fits.push(outcome.stability.expect("kappa > 0"));
    }
    let runtime = start.elapsed().as_secs_f64();
    let ratio = |a: f64, b: f64| if a > 0.0 { b / a } else { 1.0 };
    let mut pass = true;
    let mut details = Vec::new();
    for (name, a, b) in [
        ("heat", fits[0].heat, fits[1].heat),
        ("strain", fits[0].strain, fits[1].strain),
        ("anorm", fits[0].anorm, fits[1].anorm),
    ] {
        let r = ratio(a, b);
        details.push(format!("{name} {a:.3e}->{b:.3e} (x{r:.2})"));
        if !(r > 0.5 && r < 2.0) {
            pass = false;
        }
    }
    report(
        "criterion 6 (stability-constant robustness)",
        pass,
        &format!("{}; runtime {runtime:.1}s", details.join("; ")),
    );
    assert!(pass);
}

#[test]
fn criterion_7_hypothesis_checker() {
    let start = Instant::now();
    // (a) tau small enough that all four inequalities provably hold
    let mesh = build_unit_square(4, CellKind::Triangle).unwrap();
    let params = ModelParams::new(
        ElasticModuli::new(1.0, 1.0, 2).unwrap(),
        1.0,
        0.5,
        0.25,
        2.0,
        10.0,
        ConductivityModel::PowerLaw { c0: 0.5, c1: 0.5, c2: 1.0, beta: 1.5 },
    )
    .unwrap();
    let c_ell = params.moduli.coercivity_constant();
    let m = 4usize;
    let series_for = |_tau: f64| -> DataSeries {
        DataSeries {
            f_l2: vec![0.4; m + 1],
            gamma_l2: vec![0.0; m + 1],
            gbar_l2: vec![1.0; m + 1],
            area: mesh.total_area(),
        }
    };
    let grid_small = TimeGrid::new(1e-6, m).unwrap();
    let small = check_theorem_assumptions(&series_for(1e-6), &params, &grid_small, c_ell).unwrap();
    let small_pass = small.overall;

    // (b) the raw notched-experiment parameters produce a report
    let cfg = preset("sens-notch").unwrap();
    let raw_mesh = cfg.build_mesh().unwrap();
    let raw_params = cfg.model_params(&raw_mesh).unwrap();
    let raw_grid = cfg.time_grid().unwrap();
    let raw_series = data_series(
        &raw_mesh,
        &cfg.problem_data().unwrap(),
        &cfg.bc_spec().unwrap(),
        &raw_grid,
    )
    .unwrap();
    let raw = check_theorem_assumptions(
        &raw_series,
        &raw_params,
        &raw_grid,
        raw_params.moduli.coercivity_constant(),
    )
    .unwrap();

    // (c) exact tau-power scaling with time-constant data and a fixed step
    // count: linear bullets double, quadratic bullets quadruple
    let grid1 = TimeGrid::new(0.01, m).unwrap();
    let grid2 = TimeGrid::new(0.02, m).unwrap();
    let r1 = check_theorem_assumptions(&series_for(0.01), &params, &grid1, c_ell).unwrap();
    let r2 = check_theorem_assumptions(&series_for(0.02), &params, &grid2, c_ell).unwrap();
    let expected_factors = [4.0, 2.0, 4.0, 2.0];
    let mut scaling_ok = true;
    for (i, factor) in expected_factors.iter().enumerate() {
        let got = r2.bullets[i].lhs / r1.bullets[i].lhs;
        if (got - factor).abs() > 1e-12 * factor {
            scaling_ok = false;
        }
    }

    let runtime = start.elapsed().as_secs_f64();
    let pass = small_pass && scaling_ok;
    report(
        "criterion 7 (hypothesis checker)",
        pass,
        &format!(
            "small-tau overall: {}; raw-experiment overall: {} (report produced); tau scaling exact: {scaling_ok}; runtime {runtime:.1}s",
            small_pass, raw.overall
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_8_stencil_exactness() {
    let tau = 0.25;
    let quad = |t: f64| vec![1.5 * t * t - 0.5 * t + 2.0];
    let d2 = stencil_ddt2(&quad(0.0), &quad(tau), &quad(2.0 * tau), tau);
    let second_exact = (d2[0] - 3.0).abs() < 1e-13;
    let affine = |t: f64| vec![-0.75 * t + 4.0];
    let c = stencil_centered(&affine(0.0), &affine(2.0 * tau), tau);
    let centered_exact = (c[0] + 0.75).abs() < 1e-14;
    let pass = second_exact && centered_exact;
    report(
        "criterion 8 (stencil exactness)",
        pass,
        &format!("second difference err {:.1e}, centered err {:.1e}", (d2[0] - 3.0).abs(), (c[0] + 0.75).abs()),
    );
    assert!(pass);
}

#[test]
fn criterion_9_zero_data_fixed_point() {
    let mut cfg = preset("zero").unwrap();
    cfg.time.steps = 50;
    cfg.output.snapshot_stride = 1;
    let outcome = run_transient(&cfg, None).unwrap();
    let mut pass = outcome.trajectory.snapshots.len() == 50;
    for (_, s) in &outcome.trajectory.snapshots {
        if !(s.u.is_zero() && s.phi.is_zero() && s.theta.is_zero()) {
            pass = false;
        }
    }
    report(
        "criterion 9 (zero-data fixed point)",
        pass,
        &format!("{} snapshots, all identically zero: {pass}", outcome.trajectory.snapshots.len()),
    );
    assert!(pass);
}
