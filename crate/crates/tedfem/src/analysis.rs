//! Error measurement against reference solutions, convergence-rate fitting,
//! the a priori data functionals, stability monitoring, and the hypothesis
//! checker for the convergence theorem.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::assembly::{
    apply_dirichlet, assemble_elastic_stiffness, assemble_scalar_load, assemble_scalar_mass,
    assemble_scalar_stiffness, assemble_vector_load, BcSpec, BcValue, ModelParams, WhichField,
};
use crate::catalog::{ScalarFn, VectorFn};
use crate::linalg::solve_direct;
use crate::mesh::{build_unit_square, CellKind, Mesh};
use crate::space::{
    cell_geometry, eval_scalar, eval_scalar_gradient, eval_vector, eval_vector_gradient,
    interpolate_scalar, interpolate_vector, norm, recover_gauss_to_nodes, Field, FieldKind,
    NormKind, QuadratureRule,
};
use crate::stepper::{ProblemData, StepMonitor, TimeGrid};
use crate::tensor::ElasticModuli;
use crate::{invalid, Result};

// ---------------------------------------------------------------------------
// error tables and rates

/// Errors of one refinement level at the final time step.
#[derive(Debug, Clone, Copy)]
pub struct ErrorRow {
    /// Nominal lattice spacing of the level.
    pub h: f64,
    pub tau: f64,
    pub u_l2: f64,
    pub phi_l2: f64,
    pub theta_l2: f64,
    pub u_h1: f64,
    pub phi_h1: f64,
    pub theta_h1: f64,
    /// Energy-norm error of the displacement strain.
    pub u_anorm: f64,
}

/// Rates between consecutive rows; `None` where a zero error makes the rate
/// undefined.
#[derive(Debug, Clone, Copy, Default)]
pub struct RateRow {
    pub u_l2: Option<f64>,
    pub phi_l2: Option<f64>,
    pub theta_l2: Option<f64>,
    pub u_h1: Option<f64>,
    pub phi_h1: Option<f64>,
    pub theta_h1: Option<f64>,
    pub u_anorm: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
    /// Rates per row (first row has no predecessor and stays default).
    pub rates: Vec<RateRow>,
}

fn pair_rate(coarse: f64, fine: f64) -> Option<f64> {
    if coarse > 0.0 && fine > 0.0 {
        Some((coarse / fine).log2())
    } else {
        None
    }
}

/// Fills the per-row rate columns: `rate_i = log2(e_{i-1} / e_i)` for
/// h-halving rows sorted from coarse to fine.
pub fn convergence_rates(table: &mut ErrorTable) -> Result<()> {
    if table.rows.len() < 2 {
        return invalid("rate fitting needs at least 2 rows");
    }
    for w in table.rows.windows(2) {
        let ratio = w[0].h / w[1].h;
        if (ratio - 2.0).abs() > 1e-9 {
            return invalid(format!("rows must halve h; got ratio {ratio}"));
        }
    }
    table.rates = vec![RateRow::default(); table.rows.len()];
    for i in 1..table.rows.len() {
        let (a, b) = (table.rows[i - 1], table.rows[i]);
        table.rates[i] = RateRow {
            u_l2: pair_rate(a.u_l2, b.u_l2),
            phi_l2: pair_rate(a.phi_l2, b.phi_l2),
            theta_l2: pair_rate(a.theta_l2, b.theta_l2),
            u_h1: pair_rate(a.u_h1, b.u_h1),
            phi_h1: pair_rate(a.phi_h1, b.phi_h1),
            theta_h1: pair_rate(a.theta_h1, b.theta_h1),
            u_anorm: pair_rate(a.u_anorm, b.u_anorm),
        };
    }
    Ok(())
}

/// Least-squares slope of `log e` against `log h`; `None` when any error
/// vanishes.
pub fn fitted_rate(rows: &[(f64, f64)]) -> Option<f64> {
    if rows.len() < 2 || rows.iter().any(|&(_, e)| e <= 0.0) {
        return None;
    }
    let n = rows.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(h, e) in rows {
        let x = h.ln();
        let y = e.ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    Some((n * sxy - sx * sy) / (n * sxx - sx * sx))
}

impl ErrorTable {
    pub fn fitted(&self, select: impl Fn(&ErrorRow) -> f64) -> Option<f64> {
        let rows: Vec<(f64, f64)> = self.rows.iter().map(|r| (r.h, select(r))).collect();
        fitted_rate(&rows)
    }

    /// CSV in the layout `h, <field> error, rate` per field for one norm.
    pub fn write_csv(&self, path: &Path, norm: &str) -> Result<()> {
        let pick = |r: &ErrorRow, what: &str| -> f64 {
            match (what, norm) {
                ("u", "l2") => r.u_l2,
                ("phi", "l2") => r.phi_l2,
                ("theta", "l2") => r.theta_l2,
                ("u", "h1semi") => r.u_h1,
                ("phi", "h1semi") => r.phi_h1,
                ("theta", "h1semi") => r.theta_h1,
                ("u", "anorm") => r.u_anorm,
                _ => f64::NAN,
            }
        };
        let pick_rate = |r: &RateRow, what: &str| -> Option<f64> {
            match (what, norm) {
                ("u", "l2") => r.u_l2,
                ("phi", "l2") => r.phi_l2,
                ("theta", "l2") => r.theta_l2,
                ("u", "h1semi") => r.u_h1,
                ("phi", "h1semi") => r.phi_h1,
                ("theta", "h1semi") => r.theta_h1,
                ("u", "anorm") => r.u_anorm,
                _ => None,
            }
        };
        let fields: &[&str] = if norm == "anorm" { &["u"] } else { &["u", "phi", "theta"] };
        let mut s = String::from("h");
        for f in fields {
            let _ = write!(s, ",{f}_error,{f}_rate");
        }
        s.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            let _ = write!(s, "{}", row.h);
            for f in fields {
                let _ = write!(s, ",{}", pick(row, f));
                match self.rates.get(i).and_then(|r| pick_rate(r, f)) {
                    Some(rate) => {
                        let _ = write!(s, ",{rate}");
                    }
                    None => s.push(','),
                }
            }
            s.push('\n');
        }
        std::fs::write(path, s)?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// reference-based errors on nested meshes

/// Maps each coarse node to the coinciding node of a nested refinement.
pub fn nested_restriction(coarse: &Mesh, reference: &Mesh) -> Result<Vec<usize>> {
    let quantize = |p: [f64; 2]| -> (i64, i64) {
        ((p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64)
    };
    let mut lookup: HashMap<(i64, i64), usize> = HashMap::with_capacity(reference.n_nodes());
    for (i, &p) in reference.nodes.iter().enumerate() {
        lookup.insert(quantize(p), i);
    }
    let mut map = Vec::with_capacity(coarse.n_nodes());
    for (i, &p) in coarse.nodes.iter().enumerate() {
        match lookup.get(&quantize(p)) {
            Some(&r) => map.push(r),
            None => {
                return invalid(format!(
                    "meshes are not nested: coarse node {i} at ({}, {}) has no reference node",
                    p[0], p[1]
                ))
            }
        }
    }
    Ok(map)
}

/// Restriction of a reference field to the coarse nodes.
pub fn restrict_field(field: &Field, map: &[usize]) -> Field {
    let comps = field.kind.components();
    let mut coeffs = Vec::with_capacity(map.len() * comps);
    for &r in map {
        for c in 0..comps {
            coeffs.push(field.coeffs[r * comps + c]);
        }
    }
    Field { kind: field.kind, coeffs }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrNorm {
    /// Nodal restriction of the reference, then the `L^2` norm of the
    /// difference on the coarse mesh.
    L2,
    /// Derivatives sampled at the integration points of each mesh, moved to
    /// the nodes by the 4-nearest-point recovery on both sides, then the
    /// `L^2` norm of the nodal difference.
    H1SemiRecovered,
    /// Energy norm of the strain of the nodal difference (vector fields).
    ANorm,
}

fn gradient_components(mesh: &Mesh, field: &Field) -> Vec<Vec<Vec<f64>>> {
    // outer: component, then cells, then quadrature points
    let rule = QuadratureRule::default_for(mesh.kind());
    let n_comp = match field.kind {
        FieldKind::Scalar => 2,
        FieldKind::Vector => 4,
    };
    let mut out = vec![Vec::with_capacity(mesh.n_cells()); n_comp];
    for cell in 0..mesh.n_cells() {
        let geo = cell_geometry(mesh, cell, &rule);
        let mut per_cell = vec![Vec::with_capacity(rule.len()); n_comp];
        for q in 0..rule.len() {
            match field.kind {
                FieldKind::Scalar => {
                    let g = eval_scalar_gradient(mesh, field, cell, &geo, q);
                    per_cell[0].push(g[0]);
                    per_cell[1].push(g[1]);
                }
                FieldKind::Vector => {
                    let g = eval_vector_gradient(mesh, field, cell, &geo, q);
                    for c in 0..4 {
                        per_cell[c].push(g[c]);
                    }
                }
            }
        }
        for (c, vals) in per_cell.into_iter().enumerate() {
            out[c].push(vals);
        }
    }
    out
}

/// Error of a coarse field against a reference field on a nested finer mesh,
/// measured at matching nodes.
pub fn error_vs_reference(
    coarse_mesh: &Mesh,
    coarse_field: &Field,
    ref_mesh: &Mesh,
    ref_field: &Field,
    map: &[usize],
    norm_kind: ErrNorm,
    moduli: Option<ElasticModuli>,
) -> Result<f64> {
    if coarse_field.kind != ref_field.kind {
        return invalid("field kinds differ");
    }
    if map.len() != coarse_mesh.n_nodes() {
        return invalid("restriction map does not match the coarse mesh");
    }
    match norm_kind {
        ErrNorm::L2 | ErrNorm::ANorm => {
            let restricted = restrict_field(ref_field, map);
            let diff = Field {
                kind: coarse_field.kind,
                coeffs: coarse_field
                    .coeffs
                    .iter()
                    .zip(&restricted.coeffs)
                    .map(|(a, b)| a - b)
                    .collect(),
            };
            let kind = match norm_kind {
                ErrNorm::L2 => NormKind::L2,
                ErrNorm::ANorm => NormKind::ANorm(moduli.ok_or_else(|| {
                    crate::Error::InvalidArgument("A-norm errors need elastic moduli".into())
                })?),
                _ => unreachable!(),
            };
            norm(coarse_mesh, &diff, kind)
        }
        ErrNorm::H1SemiRecovered => {
            let coarse_comp = gradient_components(coarse_mesh, coarse_field);
            let ref_comp = gradient_components(ref_mesh, ref_field);
            let mut acc = 0.0;
            for (cc, rc) in coarse_comp.iter().zip(&ref_comp) {
                let coarse_nodal = recover_gauss_to_nodes(coarse_mesh, cc)?;
                let ref_nodal = recover_gauss_to_nodes(ref_mesh, rc)?;
                let restricted = restrict_field(&ref_nodal, map);
                let diff = Field {
                    kind: FieldKind::Scalar,
                    coeffs: coarse_nodal
                        .coeffs
                        .iter()
                        .zip(&restricted.coeffs)
                        .map(|(a, b)| a - b)
                        .collect(),
                };
                let n = norm(coarse_mesh, &diff, NormKind::L2)?;
                acc += n * n;
            }
            Ok(acc.sqrt())
        }
    }
}

// ---------------------------------------------------------------------------
// a priori data functionals

/// Norms of the data series sampled at every grid time `t_0 .. t_M`.
#[derive(Debug, Clone)]
pub struct DataSeries {
    pub f_l2: Vec<f64>,
    pub gamma_l2: Vec<f64>,
    /// `L^2(Gamma)` norm of the heat flux datum over its tagged facets.
    pub gbar_l2: Vec<f64>,
    pub area: f64,
}

/// Samples the data at all grid times. Interpolated data norms use the
/// default cell rule; the boundary norm integrates over the temperature
/// Neumann facets.
pub fn data_series(
    mesh: &Mesh,
    data: &ProblemData,
    bc: &BcSpec,
    grid: &TimeGrid,
) -> Result<DataSeries> {
    let tau = grid.tau();
    let mut f_l2 = Vec::with_capacity(grid.steps() + 1);
    let mut gamma_l2 = Vec::with_capacity(grid.steps() + 1);
    let mut gbar_l2 = Vec::with_capacity(grid.steps() + 1);
    let gbar_entries: Vec<(&crate::mesh::BoundaryTag, &ScalarFn)> = bc
        .neumann_entries(WhichField::Temperature)
        .into_iter()
        .filter_map(|e| match &e.value {
            BcValue::Scalar(f) => Some((&e.tag, f)),
            _ => None,
        })
        .collect();
    let g = 1.0 / 3.0_f64.sqrt();
    for k in 0..=grid.steps() {
        let t = grid.time(k);
        let f_k = interpolate_vector(mesh, |p| data.f.eval(p, t, tau));
        f_l2.push(norm(mesh, &f_k, NormKind::L2)?);
        let gamma_k = interpolate_scalar(mesh, |p| data.gamma.eval(p, t, tau));
        gamma_l2.push(norm(mesh, &gamma_k, NormKind::L2)?);
        let mut acc = 0.0;
        for (tag, func) in &gbar_entries {
            for facet in mesh.facets_with_tag(**tag) {
                let a = mesh.nodes[facet.nodes[0]];
                let b = mesh.nodes[facet.nodes[1]];
                let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
                for s in [-g, g] {
                    let xi = 0.5 * (1.0 + s);
                    let p = [a[0] + xi * (b[0] - a[0]), a[1] + xi * (b[1] - a[1])];
                    let v = func.eval(p, t, tau);
                    acc += 0.5 * len * v * v;
                }
            }
        }
        gbar_l2.push(acc.sqrt());
    }
    Ok(DataSeries { f_l2, gamma_l2, gbar_l2, area: mesh.total_area() })
}

/// Data functionals of the a priori stability estimates.
#[derive(Debug, Clone, Copy)]
pub struct AprioriQuantities {
    /// `rho^4 / kappa`.
    pub gamma_kappa: f64,
    /// `kappa * C_ell`.
    pub alpha_kappa: f64,
    /// Weighted data sum up to the given level.
    pub l1: f64,
    /// Variant with `1/kappa` on the body-force sum and no other weights.
    pub l1_hat: f64,
    pub level: usize,
}

/// Evaluates the data functionals up to time level `L` (sums run over
/// `k = 0 .. L-1`):
/// `L_{1,L} = sum ||gbar^k||^2 + gamma_kappa * sum ||f^k||^p
///  + tau * sum ||gamma^k||^2 + (gamma_kappa + 1) |Omega|^2`
/// with exponent `p = (beta+2)^2/(beta+1)^2`.
pub fn compute_l1l(
    series: &DataSeries,
    params: &ModelParams,
    grid: &TimeGrid,
    c_ell: f64,
    level: usize,
) -> Result<AprioriQuantities> {
    if level > grid.steps() || level == 0 {
        return invalid(format!("level must be in 1..={}, got {level}", grid.steps()));
    }
    if series.f_l2.len() < level {
        return invalid("data series does not cover the requested level");
    }
    if !(params.kappa > 0.0) {
        return invalid("the data functionals require kappa > 0");
    }
    let beta = params.conductivity.beta_or_nominal();
    let exponent = (beta + 2.0) * (beta + 2.0) / ((beta + 1.0) * (beta + 1.0));
    let gamma_kappa = params.rho.powi(4) / params.kappa;
    let tau = grid.tau();
    let mut gbar_sum = 0.0;
    let mut f_sum = 0.0;
    let mut gamma_sum = 0.0;
    for k in 0..level {
        gbar_sum += series.gbar_l2[k] * series.gbar_l2[k];
        f_sum += series.f_l2[k].powf(exponent);
        gamma_sum += series.gamma_l2[k] * series.gamma_l2[k];
    }
    let area2 = series.area * series.area;
    let l1 = gbar_sum + gamma_kappa * f_sum + tau * gamma_sum + (gamma_kappa + 1.0) * area2;
    let l1_hat = gbar_sum + f_sum / params.kappa + tau * gamma_sum + area2;
    Ok(AprioriQuantities {
        gamma_kappa,
        alpha_kappa: params.kappa * c_ell,
        l1,
        l1_hat,
        level,
    })
}

// ---------------------------------------------------------------------------
// hypothesis checker

#[derive(Debug, Clone)]
pub struct AssumptionBullet {
    pub label: &'static str,
    pub lhs: f64,
    pub rhs: f64,
}

impl AssumptionBullet {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub bullets: Vec<AssumptionBullet>,
    pub overall: bool,
    pub quantities: AprioriQuantities,
}

impl AssumptionReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "hypothesis check (gamma_kappa = {:.6e}, alpha_kappa = {:.6e})",
            self.quantities.gamma_kappa, self.quantities.alpha_kappa);
        let _ = writeln!(s, "L1 = {:.6e}, L1_hat = {:.6e}", self.quantities.l1, self.quantities.l1_hat);
        for b in &self.bullets {
            let _ = writeln!(
                s,
                "  {}: lhs = {:.6e}, rhs = {:.6e} -> {}",
                b.label,
                b.lhs,
                b.rhs,
                if b.holds() { "PASS" } else { "FAIL" }
            );
        }
        let _ = writeln!(s, "overall: {}", if self.overall { "PASS" } else { "FAIL" });
        s
    }

    pub fn write_key_value(&self, path: &Path) -> Result<()> {
        let mut s = String::new();
        let _ = writeln!(s, "gamma_kappa={}", self.quantities.gamma_kappa);
        let _ = writeln!(s, "alpha_kappa={}", self.quantities.alpha_kappa);
        let _ = writeln!(s, "l1={}", self.quantities.l1);
        let _ = writeln!(s, "l1_hat={}", self.quantities.l1_hat);
        for (i, b) in self.bullets.iter().enumerate() {
            let _ = writeln!(s, "bullet{}_lhs={}", i + 1, b.lhs);
            let _ = writeln!(s, "bullet{}_rhs={}", i + 1, b.rhs);
            let _ = writeln!(s, "bullet{}_pass={}", i + 1, b.holds());
        }
        let _ = writeln!(s, "overall={}", self.overall);
        std::fs::write(path, s)?;
        Ok(())
    }
}

/// Evaluates the four smallness hypotheses of the convergence estimate with
/// data sums taken over the whole series (`m = 0 ..= M`). A failing
/// inequality is reported, not an error.
pub fn check_theorem_assumptions(
    series: &DataSeries,
    params: &ModelParams,
    grid: &TimeGrid,
    c_ell: f64,
) -> Result<AssumptionReport> {
    let q = compute_l1l(series, params, grid, c_ell, grid.steps())?;
    let tau = grid.tau();
    let ell = params.ell;
    let rho = params.rho;
    let kappa = params.kappa;
    let f2_sum: f64 = series.f_l2.iter().map(|f| f * f).sum();
    let f1_sum: f64 = series.f_l2.iter().sum();

    let bullets = vec![
        AssumptionBullet {
            label: "ell * (rho^2 tau^2 / kappa * L1_hat + tau^2 / kappa * sum ||f||^2) <= 1",
            lhs: ell * (rho * rho * tau * tau / kappa * q.l1_hat + tau * tau / kappa * f2_sum),
            rhs: 1.0,
        },
        AssumptionBullet {
            label: "ell * (rho tau / alpha * sqrt(L1) + tau / sqrt(2 alpha) * sum ||f||^2) <= 1",
            lhs: ell
                * (rho * tau / q.alpha_kappa * q.l1.sqrt()
                    + tau / (2.0 * q.alpha_kappa).sqrt() * f2_sum),
            rhs: 1.0,
        },
        AssumptionBullet {
            label: "2 tau^2 L1 <= kappa * C_ell",
            lhs: 2.0 * tau * tau * q.l1,
            rhs: kappa * c_ell,
        },
        AssumptionBullet {
            label: "rho tau / sqrt(alpha) * sqrt(L1) + tau / sqrt(alpha) * sum ||f|| <= 1",
            lhs: rho * tau / q.alpha_kappa.sqrt() * q.l1.sqrt()
                + tau / q.alpha_kappa.sqrt() * f1_sum,
            rhs: 1.0,
        },
    ];
    let overall = bullets.iter().all(|b| b.holds());
    Ok(AssumptionReport { bullets, overall, quantities: q })
}

// ---------------------------------------------------------------------------
// stability monitoring

/// Fitted stability constants: for each level the ratio of the computed
/// left-hand sides to the data functional bounds, maximized over levels.
#[derive(Debug, Clone)]
pub struct StabilityFit {
    /// `(||theta^L||^2 + tau ||grad theta^L||^2) / (tau L_{1,L})`.
    pub heat: f64,
    /// `(tau^2/2 ||E(du)||^2 + ||E(u^L)||^2) /
    ///  (rho^2 tau^2 / alpha * L_{1,L} + tau^2/(2 alpha) sum ||f||^2)`.
    pub strain: f64,
    /// `||E(u^L)||_A^2 / (rho^2 tau^2 / kappa * L1_hat + tau^2/kappa sum ||f||^2)`.
    pub anorm: f64,
    /// Per-level `[heat, strain, anorm]` ratios.
    pub per_level: Vec<[f64; 3]>,
}

pub fn stability_monitor(
    monitors: &[StepMonitor],
    series: &DataSeries,
    params: &ModelParams,
    grid: &TimeGrid,
    c_ell: f64,
) -> Result<StabilityFit> {
    if monitors.is_empty() {
        return invalid("stability monitor needs at least one step");
    }
    let tau = grid.tau();
    let rho2 = params.rho * params.rho;
    let mut per_level = Vec::with_capacity(monitors.len());
    let ratio = |num: f64, den: f64| -> f64 {
        if den > 0.0 {
            num / den
        } else if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    };
    let mut f2_partial = 0.0;
    for (idx, m) in monitors.iter().enumerate() {
        let level = idx + 1;
        let q = compute_l1l(series, params, grid, c_ell, level)?;
        f2_partial += series.f_l2[level - 1] * series.f_l2[level - 1];
        let heat_lhs = m.theta_l2 * m.theta_l2 + tau * m.grad_theta_l2 * m.grad_theta_l2;
        let heat = ratio(heat_lhs, tau * q.l1);
        let strain_lhs = 0.5 * tau * tau * m.strain_dtau_l2 * m.strain_dtau_l2
            + m.strain_l2 * m.strain_l2;
        let strain_rhs = rho2 * tau * tau / q.alpha_kappa * q.l1
            + 0.5 * tau * tau / q.alpha_kappa * f2_partial;
        let strain = ratio(strain_lhs, strain_rhs);
        let anorm_lhs = m.strain_anorm * m.strain_anorm;
        let anorm_rhs =
            rho2 * tau * tau / params.kappa * q.l1_hat + tau * tau / params.kappa * f2_partial;
        let anorm = ratio(anorm_lhs, anorm_rhs);
        per_level.push([heat, strain, anorm]);
    }
    let max_of = |i: usize| per_level.iter().map(|r| r[i]).fold(0.0f64, f64::max);
    Ok(StabilityFit { heat: max_of(0), strain: max_of(1), anorm: max_of(2), per_level })
}

// ---------------------------------------------------------------------------
// manufactured-solution studies (static spatial order checks)

#[derive(Debug, Clone)]
pub struct MmsReport {
    /// `(h, L2 error, H1 error)` per level.
    pub rows: Vec<(f64, f64, f64)>,
    pub l2_rate: f64,
    pub h1_rate: f64,
}

impl MmsReport {
    pub fn to_text(&self, title: &str) -> String {
        let mut s = format!("{title}\nh,l2_error,h1_error\n");
        for (h, l2, h1) in &self.rows {
            let _ = writeln!(s, "{h},{l2},{h1}");
        }
        let _ = writeln!(s, "l2_rate={:.4}", self.l2_rate);
        let _ = writeln!(s, "h1_rate={:.4}", self.h1_rate);
        s
    }
}

/// Static elasticity order check: coefficient fixed to `1 + kappa`, smooth
/// manufactured displacement, homogeneous Dirichlet boundary. Expected
/// second order in `L^2`, first order in `H^1`.
pub fn mms_elastic(
    kind: CellKind,
    base_n: usize,
    levels: usize,
    lambda: f64,
    mu: f64,
    kappa: f64,
) -> Result<MmsReport> {
    let moduli = ElasticModuli::new(lambda, mu, 2)?;
    let coeff = 1.0 + kappa;
    let exact = VectorFn::MmsElasticSolution { c: 1.0 };
    let force = VectorFn::MmsElasticForce { lambda, mu, coeff, c: 1.0 };
    let pi = std::f64::consts::PI;
    let exact_grad = |p: [f64; 2]| -> [f64; 4] {
        let wx = pi * (pi * p[0]).cos() * (pi * p[1]).sin();
        let wy = pi * (pi * p[0]).sin() * (pi * p[1]).cos();
        [wx, wy, wx, wy]
    };

    let mut rows = Vec::new();
    for level in 0..levels {
        let n = base_n << level;
        let mesh = build_unit_square(n, kind)?;
        let stiff = assemble_elastic_stiffness(&mesh, &moduli, |_, _, _, _| coeff);
        let f_interp = interpolate_vector(&mesh, |p| force.eval(p, 0.0, 1.0));
        let rhs = assemble_vector_load(&mesh, &f_interp)?;
        let mut constraints = Vec::new();
        for facet in &mesh.boundary {
            for &node in &facet.nodes {
                constraints.push((2 * node, 0.0));
                constraints.push((2 * node + 1, 0.0));
            }
        }
        constraints.sort_by_key(|c| c.0);
        constraints.dedup_by_key(|c| c.0);
        let (mat, rhs) = apply_dirichlet(stiff, rhs, &constraints)?;
        let u = Field { kind: FieldKind::Vector, coeffs: solve_direct(&mat, &rhs)? };

        // errors against the analytic solution with the higher-order rule
        let rule = QuadratureRule::error_rule_for(kind);
        let mut l2 = 0.0;
        let mut h1 = 0.0;
        for cell in 0..mesh.n_cells() {
            let geo = cell_geometry(&mesh, cell, &rule);
            for q in 0..rule.len() {
                let w = geo.weights[q];
                let uh = eval_vector(&mesh, &u, cell, &geo, q);
                let ue = exact.eval(geo.positions[q], 0.0, 1.0);
                l2 += w * ((uh[0] - ue[0]).powi(2) + (uh[1] - ue[1]).powi(2));
                let gh = eval_vector_gradient(&mesh, &u, cell, &geo, q);
                let ge = exact_grad(geo.positions[q]);
                for c in 0..4 {
                    h1 += w * (gh[c] - ge[c]).powi(2);
                }
            }
        }
        rows.push((mesh.spacing(), l2.sqrt(), h1.sqrt()));
    }
    let l2_rate = fitted_rate(&rows.iter().map(|r| (r.0, r.1)).collect::<Vec<_>>())
        .ok_or_else(|| crate::Error::InvalidArgument("degenerate error sequence".into()))?;
    let h1_rate = fitted_rate(&rows.iter().map(|r| (r.0, r.2)).collect::<Vec<_>>())
        .ok_or_else(|| crate::Error::InvalidArgument("degenerate error sequence".into()))?;
    Ok(MmsReport { rows, l2_rate, h1_rate })
}

/// Static heat order check with constant conductivity: reaction-diffusion
/// `theta - div(k grad theta) = source` with a Neumann-compatible
/// manufactured solution. Expected second order in `L^2`, first order in
/// `H^1`.
pub fn mms_heat(kind: CellKind, base_n: usize, levels: usize, k_const: f64) -> Result<MmsReport> {
    let pi = std::f64::consts::PI;
    let exact = |p: [f64; 2]| (pi * p[0]).cos() * (pi * p[1]).cos();
    let exact_grad = |p: [f64; 2]| -> [f64; 2] {
        [
            -pi * (pi * p[0]).sin() * (pi * p[1]).cos(),
            -pi * (pi * p[0]).cos() * (pi * p[1]).sin(),
        ]
    };
    let source = ScalarFn::MmsHeatSource { k_const };

    let mut rows = Vec::new();
    for level in 0..levels {
        let n = base_n << level;
        let mesh = build_unit_square(n, kind)?;
        let mass = assemble_scalar_mass(&mesh);
        let stiff = assemble_scalar_stiffness(&mesh, |_, _, _, _| k_const);
        let mut triplets = Vec::new();
        for i in 0..mesh.n_nodes() {
            for (j, v) in mass.row(i) {
                triplets.push((i, j, v));
            }
            for (j, v) in stiff.row(i) {
                triplets.push((i, j, v));
            }
        }
        let mat = crate::linalg::SystemMatrix::from_triplets(mesh.n_nodes(), &triplets)?;
        let src_interp = interpolate_scalar(&mesh, |p| source.eval(p, 0.0, 1.0));
        let rhs = assemble_scalar_load(&mesh, &src_interp)?;
        let theta = Field { kind: FieldKind::Scalar, coeffs: solve_direct(&mat, &rhs)? };

        let rule = QuadratureRule::error_rule_for(kind);
        let mut l2 = 0.0;
        let mut h1 = 0.0;
        for cell in 0..mesh.n_cells() {
            let geo = cell_geometry(&mesh, cell, &rule);
            for q in 0..rule.len() {
                let w = geo.weights[q];
                let th = eval_scalar(&mesh, &theta, cell, &geo, q);
                l2 += w * (th - exact(geo.positions[q])).powi(2);
                let gh = eval_scalar_gradient(&mesh, &theta, cell, &geo, q);
                let ge = exact_grad(geo.positions[q]);
                h1 += w * ((gh[0] - ge[0]).powi(2) + (gh[1] - ge[1]).powi(2));
            }
        }
        rows.push((mesh.spacing(), l2.sqrt(), h1.sqrt()));
    }
    let l2_rate = fitted_rate(&rows.iter().map(|r| (r.0, r.1)).collect::<Vec<_>>())
        .ok_or_else(|| crate::Error::InvalidArgument("degenerate error sequence".into()))?;
    let h1_rate = fitted_rate(&rows.iter().map(|r| (r.0, r.2)).collect::<Vec<_>>())
        .ok_or_else(|| crate::Error::InvalidArgument("degenerate error sequence".into()))?;
    Ok(MmsReport { rows, l2_rate, h1_rate })
}
