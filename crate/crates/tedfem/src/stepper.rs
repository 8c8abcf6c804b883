//! The time loop: three-level difference stencils, initialization from the
//! initial data, and the per-step solve sequence.
//!
//! Each step solves, in order, (1) the damage equation for `phi_new` by
//! semismooth Newton given `(phi_old, u_old)`, (2) the momentum equation for
//! `u_new` by one symmetric direct solve given `(phi_new, theta_old)`, and
//! (3) the heat equation for `theta_new` by Newton given `theta_old` and the
//! centered displacement difference. Every cross coupling is lagged exactly
//! as the scheme writes it, so this triangular order solves the coupled step:
//! substituting the three new fields back into the residuals reproduces the
//! inner solver tolerances (see [`coupled_residual_norms`]).

use std::fmt::Write as _;
use std::path::Path;

use crate::assembly::{
    apply_dirichlet, apply_dirichlet_to_newton_system, assemble_damage, assemble_heat,
    assemble_momentum, penalty_violation, BcSpec, BcValue, ModelParams, WhichField,
};
use crate::catalog::{ScalarFn, VectorFn};
use crate::linalg::{solve_direct, spmv, LinearSolverKind};
use crate::mesh::{BoundaryTag, Mesh};
use crate::nonlinear::{newton_solve, NewtonConfig, NewtonReport};
use crate::space::{
    interpolate_scalar, interpolate_vector, norm, strain_l2_norm, Field, FieldKind, NormKind,
};
use crate::{invalid, Error, Result};

/// Uniform time grid with `tau * steps = t_final`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    tau: f64,
    t_final: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(tau: f64, steps: usize) -> Result<Self> {
        if !(tau > 0.0) {
            return invalid(format!("tau must be positive, got {tau}"));
        }
        if steps == 0 {
            return invalid("step count must be at least 1");
        }
        Ok(TimeGrid { tau, t_final: tau * steps as f64, steps })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn time(&self, k: usize) -> f64 {
        self.tau * k as f64
    }
}

/// Second difference `(v_prev - 2 v + v_next) / tau^2`; exact on quadratics.
pub fn stencil_ddt2(v_prev: &[f64], v: &[f64], v_next: &[f64], tau: f64) -> Vec<f64> {
    assert!(tau > 0.0);
    v_prev
        .iter()
        .zip(v)
        .zip(v_next)
        .map(|((a, b), c)| (a - 2.0 * b + c) / (tau * tau))
        .collect()
}

/// Centered difference `(v_next - v_prev) / (2 tau)`; exact on affine
/// sequences.
pub fn stencil_centered(v_prev: &[f64], v_next: &[f64], tau: f64) -> Vec<f64> {
    assert!(tau > 0.0);
    v_prev.iter().zip(v_next).map(|(a, c)| (c - a) / (2.0 * tau)).collect()
}

/// Forward difference `(v_next - v) / tau`.
pub fn stencil_forward(v: &[f64], v_next: &[f64], tau: f64) -> Vec<f64> {
    assert!(tau > 0.0);
    v.iter().zip(v_next).map(|(a, c)| (c - a) / tau).collect()
}

/// Time-dependent problem data (body force, heat source, initial data).
/// Boundary data lives in [`BcSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemData {
    pub f: VectorFn,
    pub gamma: ScalarFn,
    pub u0: VectorFn,
    pub v0: VectorFn,
    pub phi0: ScalarFn,
    pub theta0: ScalarFn,
}

impl ProblemData {
    pub fn all_zero() -> Self {
        ProblemData {
            f: VectorFn::Components(ScalarFn::Zero, ScalarFn::Zero),
            gamma: ScalarFn::Zero,
            u0: VectorFn::Components(ScalarFn::Zero, ScalarFn::Zero),
            v0: VectorFn::Components(ScalarFn::Zero, ScalarFn::Zero),
            phi0: ScalarFn::Zero,
            theta0: ScalarFn::Zero,
        }
    }
}

/// Solver settings shared by all steps.
#[derive(Debug, Clone, Copy)]
pub struct SolverSettings {
    pub newton: NewtonConfig,
    /// Clamp the damage field to `[0, 1]` after each solve. Off by default:
    /// the scheme runs as written and negativity is only monitored.
    pub clip_phi: bool,
    /// After the sequential sweep, evaluate the stacked residual of all
    /// three equations and re-sweep (at most twice) if it exceeds the
    /// tolerance.
    pub monolithic: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { newton: NewtonConfig::default(), clip_phi: false, monolithic: false }
    }
}

/// Fields of one time level (with the previous displacement needed by the
/// three-level stencils).
#[derive(Debug, Clone)]
pub struct FieldState {
    pub u: Field,
    pub u_prev: Field,
    pub phi: Field,
    pub theta: Field,
}

/// Rolling state of the time loop at step index `k`.
#[derive(Debug, Clone)]
pub struct StateHistory {
    pub u_prev: Field,
    pub u_curr: Field,
    pub phi_curr: Field,
    pub theta_curr: Field,
    pub k: usize,
}

impl StateHistory {
    pub fn snapshot(&self) -> FieldState {
        FieldState {
            u: self.u_curr.clone(),
            u_prev: self.u_prev.clone(),
            phi: self.phi_curr.clone(),
            theta: self.theta_curr.clone(),
        }
    }
}

/// Per-step diagnostics.
#[derive(Debug, Clone)]
pub struct StepReport {
    /// Step index of the produced state.
    pub k: usize,
    pub damage_iters: usize,
    pub heat_iters: usize,
    pub damage_residual: f64,
    pub momentum_residual: f64,
    pub heat_residual: f64,
    pub penalty_violation: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub theta_min: f64,
    pub theta_max: f64,
}

/// Norm monitors of the produced state, consumed by the stability analysis.
#[derive(Debug, Clone, Copy)]
pub struct StepMonitor {
    pub theta_l2: f64,
    pub grad_theta_l2: f64,
    pub strain_l2: f64,
    pub strain_anorm: f64,
    /// `||E((u_new - u_prev) / (2 tau))||_{L2}`.
    pub strain_dtau_l2: f64,
    /// `||(u_new - u_old) / tau||_{L2}`.
    pub velocity_l2: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// `(step index, state)` snapshots; always contains the final state.
    pub snapshots: Vec<(usize, FieldState)>,
    pub reports: Vec<StepReport>,
    pub monitors: Vec<StepMonitor>,
}

impl Trajectory {
    pub fn final_state(&self) -> &FieldState {
        &self.snapshots.last().expect("trajectory has at least the final state").1
    }
}

/// Interpolates the initial data: `u_prev = I_h u0 - tau * I_h v0`,
/// `u_curr = I_h u0`, `phi = I_h phi0`, `theta = I_h theta0`.
pub fn initialize(mesh: &Mesh, data: &ProblemData, grid: &TimeGrid) -> StateHistory {
    let tau = grid.tau();
    let u0 = interpolate_vector(mesh, |p| data.u0.eval(p, 0.0, tau));
    let v0 = interpolate_vector(mesh, |p| data.v0.eval(p, 0.0, tau));
    let u_prev = Field {
        kind: FieldKind::Vector,
        coeffs: u0.coeffs.iter().zip(&v0.coeffs).map(|(u, v)| u - tau * v).collect(),
    };
    StateHistory {
        u_prev,
        u_curr: u0,
        phi_curr: interpolate_scalar(mesh, |p| data.phi0.eval(p, 0.0, tau)),
        theta_curr: interpolate_scalar(mesh, |p| data.theta0.eval(p, 0.0, tau)),
        k: 0,
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn neumann_theta_entries(bc: &BcSpec) -> Vec<(&BoundaryTag, &ScalarFn)> {
    bc.neumann_entries(WhichField::Temperature)
        .into_iter()
        .filter_map(|e| match &e.value {
            BcValue::Scalar(f) => Some((&e.tag, f)),
            _ => None,
        })
        .collect()
}

struct SubSolves {
    phi_new: Field,
    u_new: Field,
    theta_new: Field,
    damage: NewtonReport,
    heat: NewtonReport,
    momentum_residual: f64,
}

#[allow(clippy::too_many_arguments)]
fn solve_sequence(
    mesh: &Mesh,
    state: &StateHistory,
    params: &ModelParams,
    bc: &BcSpec,
    data: &ProblemData,
    grid: &TimeGrid,
    settings: &SolverSettings,
    phi_guess: &Field,
    theta_guess: &Field,
) -> Result<SubSolves> {
    let tau = grid.tau();
    let t_k = grid.time(state.k);
    let t_next = grid.time(state.k + 1);

    // (1) damage
    let phi_constraints = bc.dirichlet_constraints(mesh, WhichField::Damage, t_next, tau);
    let phi_fixed: Vec<usize> = phi_constraints.iter().map(|c| c.0).collect();
    let mut phi_start = phi_guess.clone();
    for &(dof, g) in &phi_constraints {
        phi_start.coeffs[dof] = g;
    }
    let damage_cfg = NewtonConfig { linear: LinearSolverKind::Direct, ..settings.newton };
    let (phi_coeffs, damage_report) = newton_solve(
        |x| {
            let trial = Field { kind: FieldKind::Scalar, coeffs: x.to_vec() };
            let (res, jac) =
                assemble_damage(mesh, &trial, &state.phi_curr, &state.u_curr, params)?;
            let (jac, res) = apply_dirichlet_to_newton_system(jac, res, &phi_fixed)?;
            Ok((res, jac))
        },
        phi_start.coeffs,
        &damage_cfg,
    )?;
    if !damage_report.converged {
        return Err(Error::StepFailure {
            step: state.k,
            detail: format!(
                "damage Newton stalled ({} iterations, residual {:.3e})",
                damage_report.iterations,
                damage_report.final_residual()
            ),
        });
    }
    let mut phi_new = Field { kind: FieldKind::Scalar, coeffs: phi_coeffs };
    if settings.clip_phi {
        for v in &mut phi_new.coeffs {
            *v = v.clamp(0.0, 1.0);
        }
    }

    // (2) momentum: one symmetric direct solve
    let f_interp = interpolate_vector(mesh, |p| data.f.eval(p, t_k, tau));
    let (mat, rhs) = assemble_momentum(
        mesh,
        &state.u_curr,
        &state.u_prev,
        &phi_new,
        &state.theta_curr,
        &f_interp,
        params,
        tau,
    )?;
    let u_constraints = bc.dirichlet_constraints(mesh, WhichField::Displacement, t_next, tau);
    let (mat, rhs) = apply_dirichlet(mat, rhs, &u_constraints)?;
    let u_coeffs = solve_direct(&mat, &rhs).map_err(|e| Error::StepFailure {
        step: state.k,
        detail: format!("momentum solve failed: {e}"),
    })?;
    let resid: Vec<f64> = spmv(&mat, &u_coeffs).iter().zip(&rhs).map(|(a, b)| b - a).collect();
    let momentum_residual = norm2(&resid) / norm2(&rhs).max(1e-300);
    let u_new = Field { kind: FieldKind::Vector, coeffs: u_coeffs };

    // (3) heat
    let gamma_interp = interpolate_scalar(mesh, |p| data.gamma.eval(p, t_k, tau));
    let gbar = neumann_theta_entries(bc);
    let theta_constraints = bc.dirichlet_constraints(mesh, WhichField::Temperature, t_next, tau);
    let theta_fixed: Vec<usize> = theta_constraints.iter().map(|c| c.0).collect();
    let mut theta_start = theta_guess.clone();
    for &(dof, g) in &theta_constraints {
        theta_start.coeffs[dof] = g;
    }
    let heat_cfg = NewtonConfig {
        linear: if params.conductivity.is_linear() {
            LinearSolverKind::Direct
        } else {
            LinearSolverKind::DirectUnsymmetric
        },
        ..settings.newton
    };
    let (theta_coeffs, heat_report) = newton_solve(
        |x| {
            let trial = Field { kind: FieldKind::Scalar, coeffs: x.to_vec() };
            let (res, jac) = assemble_heat(
                mesh,
                &trial,
                &state.theta_curr,
                &u_new,
                &state.u_prev,
                &gamma_interp,
                &gbar,
                t_k,
                params,
                tau,
            )?;
            let (jac, res) = apply_dirichlet_to_newton_system(jac, res, &theta_fixed)?;
            Ok((res, jac))
        },
        theta_start.coeffs,
        &heat_cfg,
    )?;
    if !heat_report.converged {
        return Err(Error::StepFailure {
            step: state.k,
            detail: format!(
                "heat Newton stalled ({} iterations, residual {:.3e})",
                heat_report.iterations,
                heat_report.final_residual()
            ),
        });
    }
    let theta_new = Field { kind: FieldKind::Scalar, coeffs: theta_coeffs };

    Ok(SubSolves {
        phi_new,
        u_new,
        theta_new,
        damage: damage_report,
        heat: heat_report,
        momentum_residual,
    })
}

/// Residual norms of all three equations evaluated jointly at the produced
/// state (Dirichlet rows excluded).
pub fn coupled_residual_norms(
    mesh: &Mesh,
    old: &StateHistory,
    new: &StateHistory,
    params: &ModelParams,
    bc: &BcSpec,
    data: &ProblemData,
    grid: &TimeGrid,
) -> Result<[f64; 3]> {
    let tau = grid.tau();
    let t_k = grid.time(old.k);
    let t_next = grid.time(old.k + 1);
    let drop_fixed = |res: Vec<f64>, fixed: &[usize]| -> f64 {
        let mut res = res;
        for &d in fixed {
            res[d] = 0.0;
        }
        norm2(&res)
    };

    let (damage_res, _) = assemble_damage(mesh, &new.phi_curr, &old.phi_curr, &old.u_curr, params)?;
    let phi_fixed: Vec<usize> = bc
        .dirichlet_constraints(mesh, WhichField::Damage, t_next, tau)
        .iter()
        .map(|c| c.0)
        .collect();
    let damage_norm = drop_fixed(damage_res, &phi_fixed);

    let f_interp = interpolate_vector(mesh, |p| data.f.eval(p, t_k, tau));
    let (mat, rhs) = assemble_momentum(
        mesh,
        &old.u_curr,
        &old.u_prev,
        &new.phi_curr,
        &old.theta_curr,
        &f_interp,
        params,
        tau,
    )?;
    let u_constraints = bc.dirichlet_constraints(mesh, WhichField::Displacement, t_next, tau);
    let (mat, rhs) = apply_dirichlet(mat, rhs, &u_constraints)?;
    let momentum_res: Vec<f64> =
        spmv(&mat, &new.u_curr.coeffs).iter().zip(&rhs).map(|(a, b)| b - a).collect();

    let gamma_interp = interpolate_scalar(mesh, |p| data.gamma.eval(p, t_k, tau));
    let gbar = neumann_theta_entries(bc);
    let (heat_res, _) = assemble_heat(
        mesh,
        &new.theta_curr,
        &old.theta_curr,
        &new.u_curr,
        &old.u_prev,
        &gamma_interp,
        &gbar,
        t_k,
        params,
        tau,
    )?;
    let theta_fixed: Vec<usize> = bc
        .dirichlet_constraints(mesh, WhichField::Temperature, t_next, tau)
        .iter()
        .map(|c| c.0)
        .collect();
    let heat_norm = drop_fixed(heat_res, &theta_fixed);

    Ok([damage_norm, norm2(&momentum_res), heat_norm])
}

/// Advances the state by one step.
pub fn step(
    mesh: &Mesh,
    state: &StateHistory,
    params: &ModelParams,
    bc: &BcSpec,
    data: &ProblemData,
    grid: &TimeGrid,
    settings: &SolverSettings,
) -> Result<(StateHistory, StepReport)> {
    if state.k >= grid.steps() {
        return invalid(format!("step index {} beyond the time grid", state.k));
    }
    let mut solves = solve_sequence(
        mesh,
        state,
        params,
        bc,
        data,
        grid,
        settings,
        &state.phi_curr,
        &state.theta_curr,
    )?;

    if settings.monolithic {
        // the stacked system is block triangular in (phi, u, theta), so one
        // sweep with exact sub-solves already satisfies the joint residual;
        // re-sweep from the produced iterates only if it does not
        for _ in 0..2 {
            let candidate = StateHistory {
                u_prev: state.u_curr.clone(),
                u_curr: solves.u_new.clone(),
                phi_curr: solves.phi_new.clone(),
                theta_curr: solves.theta_new.clone(),
                k: state.k + 1,
            };
            let norms = coupled_residual_norms(mesh, state, &candidate, params, bc, data, grid)?;
            let tol = settings.newton.tol_rel.max(1e-10);
            let scale = 1.0 + norms.iter().fold(0.0f64, |a, &b| a.max(b));
            if norms.iter().all(|&r| r <= tol * scale) {
                break;
            }
            solves = solve_sequence(
                mesh,
                state,
                params,
                bc,
                data,
                grid,
                settings,
                &solves.phi_new,
                &solves.theta_new,
            )?;
        }
    }

    let violation = penalty_violation(mesh, &solves.phi_new, &state.phi_curr)?;
    let min_of = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let max_of = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let report = StepReport {
        k: state.k + 1,
        damage_iters: solves.damage.iterations,
        heat_iters: solves.heat.iterations,
        damage_residual: solves.damage.final_residual(),
        momentum_residual: solves.momentum_residual,
        heat_residual: solves.heat.final_residual(),
        penalty_violation: violation,
        phi_min: min_of(&solves.phi_new.coeffs),
        phi_max: max_of(&solves.phi_new.coeffs),
        theta_min: min_of(&solves.theta_new.coeffs),
        theta_max: max_of(&solves.theta_new.coeffs),
    };
    let next = StateHistory {
        u_prev: state.u_curr.clone(),
        u_curr: solves.u_new,
        phi_curr: solves.phi_new,
        theta_curr: solves.theta_new,
        k: state.k + 1,
    };
    Ok((next, report))
}

fn monitor(
    mesh: &Mesh,
    params: &ModelParams,
    new: &StateHistory,
    old: &StateHistory,
    tau: f64,
) -> Result<StepMonitor> {
    let dtau_u = Field {
        kind: FieldKind::Vector,
        coeffs: stencil_centered(&old.u_prev.coeffs, &new.u_curr.coeffs, tau),
    };
    let velocity = Field {
        kind: FieldKind::Vector,
        coeffs: stencil_forward(&old.u_curr.coeffs, &new.u_curr.coeffs, tau),
    };
    Ok(StepMonitor {
        theta_l2: norm(mesh, &new.theta_curr, NormKind::L2)?,
        grad_theta_l2: norm(mesh, &new.theta_curr, NormKind::H1Semi)?,
        strain_l2: strain_l2_norm(mesh, &new.u_curr)?,
        strain_anorm: norm(mesh, &new.u_curr, NormKind::ANorm(params.moduli))?,
        strain_dtau_l2: strain_l2_norm(mesh, &dtau_u)?,
        velocity_l2: norm(mesh, &velocity, NormKind::L2)?,
    })
}

/// Runs the full time loop, storing snapshots every `snapshot_stride` steps
/// (the final state is always stored).
pub fn run(
    mesh: &Mesh,
    params: &ModelParams,
    bc: &BcSpec,
    data: &ProblemData,
    grid: &TimeGrid,
    settings: &SolverSettings,
    snapshot_stride: usize,
) -> Result<Trajectory> {
    bc.validate()?;
    let stride = snapshot_stride.max(1);
    let mut state = initialize(mesh, data, grid);
    let mut snapshots = Vec::new();
    let mut reports = Vec::new();
    let mut monitors = Vec::new();
    for _ in 0..grid.steps() {
        let old = state;
        let (new_state, report) = step(mesh, &old, params, bc, data, grid, settings)?;
        monitors.push(monitor(mesh, params, &new_state, &old, grid.tau())?);
        reports.push(report);
        if new_state.k % stride == 0 && new_state.k != grid.steps() {
            snapshots.push((new_state.k, new_state.snapshot()));
        }
        state = new_state;
    }
    snapshots.push((grid.steps(), state.snapshot()));
    Ok(Trajectory { snapshots, reports, monitors })
}

/// Streams the per-step reports as CSV (comma separated, '.' decimal,
/// header row).
pub fn write_step_reports_csv(path: &Path, reports: &[StepReport]) -> Result<()> {
    let mut s = String::from(
        "k,damage_iters,heat_iters,damage_residual,momentum_residual,heat_residual,penalty_violation,phi_min,phi_max,theta_min,theta_max\n",
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.k,
            r.damage_iters,
            r.heat_iters,
            r.damage_residual,
            r.momentum_residual,
            r.heat_residual,
            r.penalty_violation,
            r.phi_min,
            r.phi_max,
            r.theta_min,
            r.theta_max
        );
    }
    std::fs::write(path, s)?;
    Ok(())
}
