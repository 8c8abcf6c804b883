//! Element-level weak forms and global sparse assembly for the three coupled
//! equations, plus Dirichlet constraint handling.
//!
//! Per time step the scheme solves, in order,
//! - damage: `ell (grad phi, grad w) + (1/ell)(phi, w)
//!   + gamma0 ([phi - phi_old]_+, w) + (1/Gc)(phi B(E(u_old)), w) = 0`,
//! - momentum: `(1/tau^2)(u_prev - 2 u_old + u, v)
//!   + ((g(phi) + kappa) A(E(u)), E(v)) - rho (theta_old, div v) = (f, v)`
//!   with `g(phi) = phi^2`,
//! - heat: `((theta - theta_old)/tau, z) + (K(theta) grad theta, grad z)
//!   + rho (theta_old div du, z) + <gbar, z>_Gamma = (g, z)`
//!   with `du` the centered difference of the displacement.
//!
//! Coefficients (`g(phi) + kappa`, the strain energy weight, the penalty
//! active set) are evaluated pointwise at the quadrature points of the
//! default cell rule. The boundary datum `gbar` enters the residual with the
//! sign above; in strong form it corresponds to `(K grad theta) . n = gbar`
//! on the tagged facets.

use crate::catalog::{ScalarFn, VectorFn};
use crate::linalg::SystemMatrix;
use crate::mesh::{BoundaryTag, Mesh};
use crate::space::{
    cell_geometry, eval_divergence, eval_scalar, eval_scalar_gradient, eval_strain, eval_vector,
    CellGeometry, Field, FieldKind, QuadratureRule,
};
use crate::tensor::{positive_part, positive_part_subgradient, ElasticModuli, SymTensor2};
use crate::{invalid, Result};

/// Heat conductivity: constant or power-law growth in the temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConductivityModel {
    Constant { k: f64 },
    /// `K(theta) = c1 (|theta|^beta + 1)`, which satisfies
    /// `c1 (|theta|^beta + 1) <= |K(theta)| <= c2 (|theta|^beta + 1)` and the
    /// lower ellipticity bound with constant `c0`.
    PowerLaw { c0: f64, c1: f64, c2: f64, beta: f64 },
}

impl ConductivityModel {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match *self {
            ConductivityModel::Constant { k } => {
                if !(k > 0.0) {
                    return invalid(format!("constant conductivity must be positive, got {k}"));
                }
            }
            ConductivityModel::PowerLaw { c0, c1, c2, beta } => {
                let beta_d = if dim == 2 { 2.0 } else { 5.0 / 3.0 };
                if !(beta > 1.0 && beta < beta_d) {
                    return invalid(format!(
                        "power-law exponent must satisfy 1 < beta < {beta_d}, got {beta}"
                    ));
                }
                if !(c0 > 0.0 && c1 > 0.0 && c2 > 0.0) {
                    return invalid("power-law constants c0, c1, c2 must be positive".to_string());
                }
                if c1 > c2 {
                    return invalid(format!("power-law needs c1 <= c2, got c1={c1}, c2={c2}"));
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, theta: f64) -> f64 {
        match *self {
            ConductivityModel::Constant { k } => k,
            ConductivityModel::PowerLaw { c1, beta, .. } => c1 * (theta.abs().powf(beta) + 1.0),
        }
    }

    pub fn derivative(&self, theta: f64) -> f64 {
        match *self {
            ConductivityModel::Constant { .. } => 0.0,
            ConductivityModel::PowerLaw { c1, beta, .. } => {
                if theta == 0.0 {
                    0.0
                } else {
                    c1 * beta * theta.abs().powf(beta - 1.0) * theta.signum()
                }
            }
        }
    }

    /// True when the diffusion term is linear in the temperature.
    pub fn is_linear(&self) -> bool {
        matches!(self, ConductivityModel::Constant { .. })
    }

    /// Growth exponent used by the a priori data functionals. The constant
    /// model carries no exponent; the midpoint 3/2 of the admissible 2D
    /// range is used as its nominal value.
    pub fn beta_or_nominal(&self) -> f64 {
        match *self {
            ConductivityModel::Constant { .. } => 1.5,
            ConductivityModel::PowerLaw { beta, .. } => beta,
        }
    }
}

/// Model parameters of the coupled system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub moduli: ElasticModuli,
    /// Thermal expansion constant.
    pub rho: f64,
    /// Bulk regularization (stiffness floor when the damage field vanishes).
    pub kappa: f64,
    /// Damage length scale.
    pub ell: f64,
    /// Damage energy constant.
    pub gc: f64,
    /// Irreversibility penalization parameter.
    pub gamma0: f64,
    pub conductivity: ConductivityModel,
}

/// Advisory checks on the parameter regime. The analysis assumes all
/// parameters strictly positive with `kappa = O(ell)` and `h = O(ell)`;
/// degenerate values (`kappa = 0`, `rho = 0`) are accepted by the assembly
/// for decoupled verification problems and surface here instead.
#[derive(Debug, Clone, Copy)]
pub struct ParamFlags {
    pub strictly_positive: bool,
    pub kappa_over_ell: f64,
    pub h_over_ell: f64,
    /// `kappa <= ell` and `h <= ell`.
    pub scales_ordered: bool,
}

impl ModelParams {
    pub fn new(
        moduli: ElasticModuli,
        rho: f64,
        kappa: f64,
        ell: f64,
        gc: f64,
        gamma0: f64,
        conductivity: ConductivityModel,
    ) -> Result<Self> {
        for (name, v) in [("rho", rho), ("kappa", kappa), ("ell", ell), ("gc", gc), ("gamma0", gamma0)]
        {
            if !v.is_finite() || v < 0.0 {
                return invalid(format!("{name} must be finite and nonnegative, got {v}"));
            }
        }
        if ell <= 0.0 {
            return invalid("ell must be positive");
        }
        if gc <= 0.0 {
            return invalid("gc must be positive");
        }
        conductivity.validate(moduli.dim())?;
        Ok(ModelParams { moduli, rho, kappa, ell, gc, gamma0, conductivity })
    }

    pub fn assumption_flags(&self, h: f64) -> ParamFlags {
        ParamFlags {
            strictly_positive: self.rho > 0.0 && self.kappa > 0.0 && self.gamma0 > 0.0,
            kappa_over_ell: self.kappa / self.ell,
            h_over_ell: h / self.ell,
            scales_ordered: self.kappa <= self.ell && h <= self.ell,
        }
    }
}

/// Which PDE field a boundary condition applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WhichField {
    Displacement,
    Damage,
    Temperature,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BcValue {
    Scalar(ScalarFn),
    Vector(VectorFn),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcKind {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BcEntry {
    pub tag: BoundaryTag,
    pub kind: BcKind,
    pub value: BcValue,
}

/// Per-field boundary conditions. Untagged boundary parts get the natural
/// condition (zero Neumann).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BcSpec {
    pub u: Vec<BcEntry>,
    pub phi: Vec<BcEntry>,
    pub theta: Vec<BcEntry>,
}

impl BcSpec {
    pub fn validate(&self) -> Result<()> {
        for (field, entries, want_vector) in [
            ("u", &self.u, true),
            ("phi", &self.phi, false),
            ("theta", &self.theta, false),
        ] {
            let mut seen = Vec::new();
            for e in entries {
                if seen.contains(&e.tag) {
                    return invalid(format!("tag '{}' appears twice for field {field}", e.tag));
                }
                seen.push(e.tag);
                match (&e.value, want_vector) {
                    (BcValue::Vector(_), true) | (BcValue::Scalar(_), false) => {}
                    _ => {
                        return invalid(format!(
                            "field {field} boundary value on '{}' has the wrong kind",
                            e.tag
                        ))
                    }
                }
            }
        }
        Ok(())
    }

    fn entries(&self, field: WhichField) -> &[BcEntry] {
        match field {
            WhichField::Displacement => &self.u,
            WhichField::Damage => &self.phi,
            WhichField::Temperature => &self.theta,
        }
    }

    /// Dirichlet constraints `(dof, value)` for one field at time `t`,
    /// sorted and deduplicated (entries later in the list win at shared
    /// corner nodes).
    pub fn dirichlet_constraints(
        &self,
        mesh: &Mesh,
        field: WhichField,
        t: f64,
        tau: f64,
    ) -> Vec<(usize, f64)> {
        let comps = match field {
            WhichField::Displacement => 2,
            _ => 1,
        };
        let mut values: std::collections::HashMap<usize, f64> = std::collections::HashMap::new();
        for e in self.entries(field) {
            if e.kind != BcKind::Dirichlet {
                continue;
            }
            for facet in mesh.facets_with_tag(e.tag) {
                for &node in &facet.nodes {
                    let p = mesh.nodes[node];
                    match (&e.value, comps) {
                        (BcValue::Vector(vf), 2) => {
                            let v = vf.eval(p, t, tau);
                            values.insert(2 * node, v[0]);
                            values.insert(2 * node + 1, v[1]);
                        }
                        (BcValue::Scalar(sf), 1) => {
                            values.insert(node, sf.eval(p, t, tau));
                        }
                        _ => unreachable!("validated"),
                    }
                }
            }
        }
        let mut out: Vec<(usize, f64)> = values.into_iter().collect();
        out.sort_by_key(|e| e.0);
        out
    }

    /// Neumann entries for one field.
    pub fn neumann_entries(&self, field: WhichField) -> Vec<&BcEntry> {
        self.entries(field).iter().filter(|e| e.kind == BcKind::Neumann).collect()
    }
}

fn check_scalar_field(mesh: &Mesh, f: &Field, name: &str) -> Result<()> {
    if f.kind != FieldKind::Scalar || f.n_nodes() != mesh.n_nodes() {
        return invalid(format!("{name} must be a scalar field on the given mesh"));
    }
    Ok(())
}

fn check_vector_field(mesh: &Mesh, f: &Field, name: &str) -> Result<()> {
    if f.kind != FieldKind::Vector || f.n_nodes() != mesh.n_nodes() {
        return invalid(format!("{name} must be a vector field on the given mesh"));
    }
    Ok(())
}

/// Strain tensor of the vector basis function `N_i e_comp`.
fn basis_strain(grad: [f64; 2], comp: usize) -> SymTensor2 {
    match comp {
        0 => SymTensor2::new_2d(grad[0], 0.0, 0.5 * grad[1]),
        _ => SymTensor2::new_2d(0.0, grad[1], 0.5 * grad[0]),
    }
}

/// Scalar mass matrix `(N_j, N_i)`.
pub fn assemble_scalar_mass(mesh: &Mesh) -> SystemMatrix {
    assemble_scalar_weighted_mass(mesh, |_, _, _, _| 1.0)
}

/// Scalar mass matrix with a pointwise weight at quadrature points.
pub fn assemble_scalar_weighted_mass(
    mesh: &Mesh,
    weight: impl Fn(&Mesh, usize, &CellGeometry, usize) -> f64,
) -> SystemMatrix {
    let rule = QuadratureRule::default_for(mesh.kind());
    let mut triplets = Vec::new();
    for cell in 0..mesh.n_cells() {
        let geo = cell_geometry(mesh, cell, &rule);
        let nodes = mesh.cell_nodes(cell);
        for q in 0..rule.len() {
            let wq = geo.weights[q] * weight(mesh, cell, &geo, q);
            if wq == 0.0 {
                continue;
            }
            for (i, &ni) in nodes.iter().enumerate() {
                for (j, &nj) in nodes.iter().enumerate().skip(i) {
                    let v = wq * geo.shapes[q][i] * geo.shapes[q][j];
                    triplets.push((ni, nj, v));
                    if j != i {
                        triplets.push((nj, ni, v));
                    }
                }
            }
        }
    }
    SystemMatrix::from_triplets(mesh.n_nodes(), &triplets).expect("valid assembly")
}

/// Scalar stiffness `(c grad N_j, grad N_i)` with a pointwise coefficient.
pub fn assemble_scalar_stiffness(
    mesh: &Mesh,
    coeff: impl Fn(&Mesh, usize, &CellGeometry, usize) -> f64,
) -> SystemMatrix {
    let rule = QuadratureRule::default_for(mesh.kind());
    let mut triplets = Vec::new();
    for cell in 0..mesh.n_cells() {
        let geo = cell_geometry(mesh, cell, &rule);
        let nodes = mesh.cell_nodes(cell);
        for q in 0..rule.len() {
            let wq = geo.weights[q] * coeff(mesh, cell, &geo, q);
            for (i, &ni) in nodes.iter().enumerate() {
                for (j, &nj) in nodes.iter().enumerate().skip(i) {
                    let gi = geo.gradients[q][i];
                    let gj = geo.gradients[q][j];
                    let v = wq * (gi[0] * gj[0] + gi[1] * gj[1]);
                    triplets.push((ni, nj, v));
                    if j != i {
                        triplets.push((nj, ni, v));
                    }
                }
            }
        }
    }
    SystemMatrix::from_triplets(mesh.n_nodes(), &triplets).expect("valid assembly")
}

/// Vector (block) mass matrix.
pub fn assemble_vector_mass(mesh: &Mesh) -> SystemMatrix {
    let rule = QuadratureRule::default_for(mesh.kind());
    let mut triplets = Vec::new();
    for cell in 0..mesh.n_cells() {
        let geo = cell_geometry(mesh, cell, &rule);
        let nodes = mesh.cell_nodes(cell);
        for q in 0..rule.len() {
            let wq = geo.weights[q];
            for (i, &ni) in nodes.iter().enumerate() {
                for (j, &nj) in nodes.iter().enumerate().skip(i) {
                    let v = wq * geo.shapes[q][i] * geo.shapes[q][j];
                    for comp in 0..2 {
                        triplets.push((2 * ni + comp, 2 * nj + comp, v));
                        if j != i {
                            triplets.push((2 * nj + comp, 2 * ni + comp, v));
                        }
                    }
                }
            }
        }
    }
    SystemMatrix::from_triplets(2 * mesh.n_nodes(), &triplets).expect("valid assembly")
}

/// Elastic stiffness `(c A(E(N_j e_b)), E(N_i e_a))` with a pointwise
/// coefficient.
pub fn assemble_elastic_stiffness(
    mesh: &Mesh,
    moduli: &ElasticModuli,
    coeff: impl Fn(&Mesh, usize, &CellGeometry, usize) -> f64,
) -> SystemMatrix {
    let rule = QuadratureRule::default_for(mesh.kind());
    let mut triplets = Vec::new();
    for cell in 0..mesh.n_cells() {
        let geo = cell_geometry(mesh, cell, &rule);
        let nodes = mesh.cell_nodes(cell);
        let nn = nodes.len();
        for q in 0..rule.len() {
            let wq = geo.weights[q] * coeff(mesh, cell, &geo, q);
            // basis strains and their images under A
            let mut strains = Vec::with_capacity(2 * nn);
            for i in 0..nn {
                for comp in 0..2 {
                    strains.push(basis_strain(geo.gradients[q][i], comp));
                }
            }
            let images: Vec<SymTensor2> = strains.iter().map(|s| moduli.apply(s)).collect();
            // one evaluation per unordered pair keeps the matrix bitwise
            // symmetric
            for p in 0..2 * nn {
                let row = 2 * nodes[p / 2] + p % 2;
                for r in p..2 * nn {
                    let col = 2 * nodes[r / 2] + r % 2;
                    let v = wq * images[r].inner(&strains[p]);
                    triplets.push((row, col, v));
                    if r != p {
                        triplets.push((col, row, v));
                    }
                }
            }
        }
    }
    SystemMatrix::from_triplets(2 * mesh.n_nodes(), &triplets).expect("valid assembly")
}

/// Load vector `(f_h, N_i)` for a scalar nodal field.
pub fn assemble_scalar_load(mesh: &Mesh, f: &Field) -> Result<Vec<f64>> {
    check_scalar_field(mesh, f, "load")?;
    let rule = QuadratureRule::default_for(mesh.kind());
    let mut rhs = vec![0.0; mesh.n_nodes()];
    for cell in 0..mesh.n_cells() {
        let geo = cell_geometry(mesh, cell, &rule);
        let nodes = mesh.cell_nodes(cell);
        for q in 0..rule.len() {
            let fv = eval_scalar(mesh, f, cell, &geo, q);
            for (i, &ni) in nodes.iter().enumerate() {
                rhs[ni] += geo.weights[q] * fv * geo.shapes[q][i];
            }
        }
    }
    Ok(rhs)
}

/// Load vector `(f_h, N_i e_a)` for a vector nodal field.
pub fn assemble_vector_load(mesh: &Mesh, f: &Field) -> Result<Vec<f64>> {
    check_vector_field(mesh, f, "load")?;
    let rule = QuadratureRule::default_for(mesh.kind());
    let mut rhs = vec![0.0; 2 * mesh.n_nodes()];
    for cell in 0..mesh.n_cells() {
        let geo = cell_geometry(mesh, cell, &rule);
        let nodes = mesh.cell_nodes(cell);
        for q in 0..rule.len() {
            let fv = eval_vector(mesh, f, cell, &geo, q);
            for (i, &ni) in nodes.iter().enumerate() {
                rhs[2 * ni] += geo.weights[q] * fv[0] * geo.shapes[q][i];
                rhs[2 * ni + 1] += geo.weights[q] * fv[1] * geo.shapes[q][i];
            }
        }
    }
    Ok(rhs)
}

/// Boundary flux contribution `integral_gamma gbar N_i ds` over tagged
/// facets (2-point Gauss per edge).
pub fn assemble_boundary_flux(
    mesh: &Mesh,
    entries: &[(&BoundaryTag, &ScalarFn)],
    t: f64,
    tau: f64,
) -> Vec<f64> {
    let mut rhs = vec![0.0; mesh.n_nodes()];
    let g = 1.0 / 3.0_f64.sqrt();
    for (tag, func) in entries {
        for facet in mesh.facets_with_tag(**tag) {
            let a = mesh.nodes[facet.nodes[0]];
            let b = mesh.nodes[facet.nodes[1]];
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            for s in [-g, g] {
                // parameter in [0,1]
                let xi = 0.5 * (1.0 + s);
                let p = [a[0] + xi * (b[0] - a[0]), a[1] + xi * (b[1] - a[1])];
                let w = 0.5 * len;
                let v = func.eval(p, t, tau);
                rhs[facet.nodes[0]] += w * v * (1.0 - xi);
                rhs[facet.nodes[1]] += w * v * xi;
            }
        }
    }
    rhs
}

/// `integral [phi_new - phi_old]_+ dx`: the irreversibility violation.
pub fn penalty_violation(mesh: &Mesh, phi_new: &Field, phi_old: &Field) -> Result<f64> {
    check_scalar_field(mesh, phi_new, "phi_new")?;
    check_scalar_field(mesh, phi_old, "phi_old")?;
    let rule = QuadratureRule::default_for(mesh.kind());
    let mut acc = 0.0;
    for cell in 0..mesh.n_cells() {
        let geo = cell_geometry(mesh, cell, &rule);
        for q in 0..rule.len() {
            let s = eval_scalar(mesh, phi_new, cell, &geo, q)
                - eval_scalar(mesh, phi_old, cell, &geo, q);
            acc += geo.weights[q] * positive_part(s);
        }
    }
    Ok(acc)
}

/// Assembles the displacement system for one implicit step:
/// `[(1/tau^2) M + K_phi] u = (f_h, v) + rho (theta_old, div v)
///  + (1/tau^2) M (2 u_old - u_prev)`.
///
/// Returns the raw (unconstrained) matrix and right-hand side; apply
/// [`apply_dirichlet`] afterwards. The matrix is symmetric and positive
/// definite once the boundary conditions pin the rigid motions.
pub fn assemble_momentum(
    mesh: &Mesh,
    u_old: &Field,
    u_prev: &Field,
    phi_new: &Field,
    theta_old: &Field,
    f_interp: &Field,
    params: &ModelParams,
    tau: f64,
) -> Result<(SystemMatrix, Vec<f64>)> {
    if tau <= 0.0 {
        return invalid(format!("tau must be positive, got {tau}"));
    }
    check_vector_field(mesh, u_old, "u_old")?;
    check_vector_field(mesh, u_prev, "u_prev")?;
    check_scalar_field(mesh, phi_new, "phi_new")?;
    check_scalar_field(mesh, theta_old, "theta_old")?;
    check_vector_field(mesh, f_interp, "f")?;

    let rule = QuadratureRule::default_for(mesh.kind());
    let n_dofs = 2 * mesh.n_nodes();
    let inv_tau2 = 1.0 / (tau * tau);
    let mut triplets = Vec::new();
    let mut rhs = vec![0.0; n_dofs];

    for cell in 0..mesh.n_cells() {
        let geo = cell_geometry(mesh, cell, &rule);
        let nodes = mesh.cell_nodes(cell);
        let nn = nodes.len();
        for q in 0..rule.len() {
            let wq = geo.weights[q];
            let phi = eval_scalar(mesh, phi_new, cell, &geo, q);
            let stiff_coeff = phi * phi + params.kappa;
            let theta = eval_scalar(mesh, theta_old, cell, &geo, q);
            let fv = eval_vector(mesh, f_interp, cell, &geo, q);
            // history term (2 u_old - u_prev) at the quadrature point
            let uo = eval_vector(mesh, u_old, cell, &geo, q);
            let up = eval_vector(mesh, u_prev, cell, &geo, q);
            let hist = [2.0 * uo[0] - up[0], 2.0 * uo[1] - up[1]];

            let mut strains = Vec::with_capacity(2 * nn);
            for i in 0..nn {
                for comp in 0..2 {
                    strains.push(basis_strain(geo.gradients[q][i], comp));
                }
            }
            let images: Vec<SymTensor2> =
                strains.iter().map(|s| params.moduli.apply(s)).collect();

            for i in 0..nn {
                for a in 0..2 {
                    let row = 2 * nodes[i] + a;
                    let shape_i = geo.shapes[q][i];
                    // load + thermal coupling + history
                    rhs[row] += wq * fv[a] * shape_i;
                    rhs[row] += wq * params.rho * theta * geo.gradients[q][i][a];
                    rhs[row] += wq * inv_tau2 * hist[a] * shape_i;
                }
            }
            for i in 0..nn {
                for j in i..nn {
                    let mass = wq * inv_tau2 * geo.shapes[q][i] * geo.shapes[q][j];
                    for a in 0..2 {
                        triplets.push((2 * nodes[i] + a, 2 * nodes[j] + a, mass));
                        if j != i {
                            triplets.push((2 * nodes[j] + a, 2 * nodes[i] + a, mass));
                        }
                    }
                }
            }
            for p in 0..2 * nn {
                let row = 2 * nodes[p / 2] + p % 2;
                for r in p..2 * nn {
                    let col = 2 * nodes[r / 2] + r % 2;
                    let k = wq * stiff_coeff * images[r].inner(&strains[p]);
                    triplets.push((row, col, k));
                    if r != p {
                        triplets.push((col, row, k));
                    }
                }
            }
        }
    }
    let mat = SystemMatrix::from_triplets(n_dofs, &triplets).expect("valid assembly");
    Ok((mat, rhs))
}

/// Residual and Jacobian of the damage equation at `phi_trial`:
/// `R_i = ell (grad phi, grad N_i) + (1/ell)(phi, N_i)
///  + gamma0 ([phi - phi_old]_+, N_i) + (1/Gc)(phi B(E(u_old)), N_i)`.
///
/// The Jacobian is symmetric positive definite; the penalty block only
/// contains quadrature points with a strictly positive increment.
pub fn assemble_damage(
    mesh: &Mesh,
    phi_trial: &Field,
    phi_old: &Field,
    u_old: &Field,
    params: &ModelParams,
) -> Result<(Vec<f64>, SystemMatrix)> {
    check_scalar_field(mesh, phi_trial, "phi_trial")?;
    check_scalar_field(mesh, phi_old, "phi_old")?;
    check_vector_field(mesh, u_old, "u_old")?;

    let rule = QuadratureRule::default_for(mesh.kind());
    let n = mesh.n_nodes();
    let mut res = vec![0.0; n];
    let mut triplets = Vec::new();
    let inv_ell = 1.0 / params.ell;
    let inv_gc = 1.0 / params.gc;

    for cell in 0..mesh.n_cells() {
        let geo = cell_geometry(mesh, cell, &rule);
        let nodes = mesh.cell_nodes(cell);
        for q in 0..rule.len() {
            let wq = geo.weights[q];
            let phi = eval_scalar(mesh, phi_trial, cell, &geo, q);
            let grad_phi = eval_scalar_gradient(mesh, phi_trial, cell, &geo, q);
            let increment = phi - eval_scalar(mesh, phi_old, cell, &geo, q);
            let strain = eval_strain(mesh, u_old, cell, &geo, q)?;
            let energy = params.moduli.energy_density(&strain);
            let active = positive_part_subgradient(increment);
            let reaction = inv_ell + inv_gc * energy;

            for (i, &ni) in nodes.iter().enumerate() {
                let gi = geo.gradients[q][i];
                res[ni] += wq
                    * (params.ell * (grad_phi[0] * gi[0] + grad_phi[1] * gi[1])
                        + reaction * phi * geo.shapes[q][i]
                        + params.gamma0 * positive_part(increment) * geo.shapes[q][i]);
                for (j, &nj) in nodes.iter().enumerate().skip(i) {
                    let gj = geo.gradients[q][j];
                    let k = wq
                        * (params.ell * (gi[0] * gj[0] + gi[1] * gj[1])
                            + (reaction + params.gamma0 * active)
                                * geo.shapes[q][i]
                                * geo.shapes[q][j]);
                    triplets.push((ni, nj, k));
                    if j != i {
                        triplets.push((nj, ni, k));
                    }
                }
            }
        }
    }
    let jac = SystemMatrix::from_triplets(n, &triplets).expect("valid assembly");
    Ok((res, jac))
}

/// Residual and Jacobian of the heat equation at `theta_trial`:
/// `R_i = ((theta - theta_old)/tau, N_i) + (K(theta) grad theta, grad N_i)
///  + rho (theta_old div du, N_i) + <gbar, N_i>_Gamma - (g_h, N_i)`
/// with `du = (u_new - u_prev) / (2 tau)`.
///
/// Full Newton linearization: with temperature-dependent conductivity the
/// Jacobian gains the unsymmetric `K'(theta) N_j grad theta . grad N_i`
/// block.
#[allow(clippy::too_many_arguments)]
pub fn assemble_heat(
    mesh: &Mesh,
    theta_trial: &Field,
    theta_old: &Field,
    u_new: &Field,
    u_prev: &Field,
    gamma_interp: &Field,
    gbar: &[(&BoundaryTag, &ScalarFn)],
    t: f64,
    params: &ModelParams,
    tau: f64,
) -> Result<(Vec<f64>, SystemMatrix)> {
    if tau <= 0.0 {
        return invalid(format!("tau must be positive, got {tau}"));
    }
    check_scalar_field(mesh, theta_trial, "theta_trial")?;
    check_scalar_field(mesh, theta_old, "theta_old")?;
    check_vector_field(mesh, u_new, "u_new")?;
    check_vector_field(mesh, u_prev, "u_prev")?;
    check_scalar_field(mesh, gamma_interp, "gamma")?;

    let rule = QuadratureRule::default_for(mesh.kind());
    let n = mesh.n_nodes();
    let inv_tau = 1.0 / tau;
    let inv_2tau = 0.5 / tau;
    let mut res = assemble_boundary_flux(mesh, gbar, t, tau);
    let mut triplets = Vec::new();

    for cell in 0..mesh.n_cells() {
        let geo = cell_geometry(mesh, cell, &rule);
        let nodes = mesh.cell_nodes(cell);
        for q in 0..rule.len() {
            let wq = geo.weights[q];
            let theta = eval_scalar(mesh, theta_trial, cell, &geo, q);
            let grad_theta = eval_scalar_gradient(mesh, theta_trial, cell, &geo, q);
            let theta_old_q = eval_scalar(mesh, theta_old, cell, &geo, q);
            let div_new = eval_divergence(mesh, u_new, cell, &geo, q)?;
            let div_prev = eval_divergence(mesh, u_prev, cell, &geo, q)?;
            let div_centered = inv_2tau * (div_new - div_prev);
            let gamma_q = eval_scalar(mesh, gamma_interp, cell, &geo, q);
            let k_val = params.conductivity.value(theta);
            let k_der = params.conductivity.derivative(theta);

            for (i, &ni) in nodes.iter().enumerate() {
                let gi = geo.gradients[q][i];
                let grad_dot = grad_theta[0] * gi[0] + grad_theta[1] * gi[1];
                res[ni] += wq
                    * ((theta - theta_old_q) * inv_tau * geo.shapes[q][i]
                        + k_val * grad_dot
                        + params.rho * theta_old_q * div_centered * geo.shapes[q][i]
                        - gamma_q * geo.shapes[q][i]);
                for (j, &nj) in nodes.iter().enumerate() {
                    let gj = geo.gradients[q][j];
                    let jac = wq
                        * (inv_tau * geo.shapes[q][i] * geo.shapes[q][j]
                            + k_val * (gi[0] * gj[0] + gi[1] * gj[1])
                            + k_der * geo.shapes[q][j] * grad_dot);
                    triplets.push((ni, nj, jac));
                }
            }
        }
    }
    let jac = SystemMatrix::from_triplets(n, &triplets).expect("valid assembly");
    Ok((res, jac))
}

/// Symmetric Dirichlet elimination for a linear system `A x = b` with
/// `x_j = g_j` on the constrained dofs: constrained columns are moved to the
/// right-hand side, constrained rows become identity rows carrying `g_j`.
pub fn apply_dirichlet(
    mat: SystemMatrix,
    rhs: Vec<f64>,
    constraints: &[(usize, f64)],
) -> Result<(SystemMatrix, Vec<f64>)> {
    let n = mat.n();
    for &(dof, _) in constraints {
        if dof >= n {
            return invalid(format!("constrained dof {dof} out of range (n = {n})"));
        }
    }
    let mut fixed = vec![false; n];
    let mut value = vec![0.0; n];
    for &(dof, g) in constraints {
        fixed[dof] = true;
        value[dof] = g;
    }
    let mut rhs = rhs;
    let mut triplets = Vec::with_capacity(mat.nnz());
    for i in 0..n {
        if fixed[i] {
            continue;
        }
        for (j, v) in mat.row(i) {
            if fixed[j] {
                rhs[i] -= v * value[j];
                // keep the (zeroed) entry so the pattern stays symmetric
                triplets.push((i, j, 0.0));
            } else {
                triplets.push((i, j, v));
            }
        }
    }
    for i in 0..n {
        if fixed[i] {
            rhs[i] = value[i];
            for (j, _) in mat.row(i) {
                triplets.push((i, j, if i == j { 1.0 } else { 0.0 }));
            }
        }
    }
    let out = SystemMatrix::from_triplets(n, &triplets).expect("valid elimination");
    Ok((out, rhs))
}

/// Elimination for Newton systems `J d = -R` when the iterate already
/// satisfies the constraints: constrained corrections are pinned to zero.
pub fn apply_dirichlet_to_newton_system(
    jac: SystemMatrix,
    mut res: Vec<f64>,
    constrained_dofs: &[usize],
) -> Result<(SystemMatrix, Vec<f64>)> {
    for &d in constrained_dofs {
        if d >= res.len() {
            return invalid(format!("constrained dof {d} out of range"));
        }
        res[d] = 0.0;
    }
    let constraints: Vec<(usize, f64)> = constrained_dofs.iter().map(|&d| (d, 0.0)).collect();
    let (jac, res) = apply_dirichlet(jac, res, &constraints)?;
    Ok((jac, res))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{solve_direct, spmv, LdltFactor};
    use crate::mesh::{build_unit_square, CellKind};
    use crate::space::{interpolate_scalar, interpolate_vector};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_params() -> ModelParams {
        ModelParams::new(
            ElasticModuli::new(1.0, 1.0, 2).unwrap(),
            0.5,
            1e-2,
            0.5,
            2.0,
            10.0,
            ConductivityModel::Constant { k: 1.0 },
        )
        .unwrap()
    }

    #[test]
    fn p1_mass_matrix_closed_form() {
        // single reference triangle: M = |T|/12 * [[2,1,1],[1,2,1],[1,1,2]]
        let m = build_unit_square(1, CellKind::Triangle).unwrap();
        let mass = assemble_scalar_mass(&m);
        // area of each triangle is 1/2; shared nodes accumulate both cells
        let area = 0.5;
        // check a single cell contribution on a fresh 1-cell assembly:
        // nodes of cell 0
        let nodes = m.cell_nodes(0).to_vec();
        // off-diagonal within one cell that is not shared with cell 1:
        // compare total row sums instead: sum_j M_ij = |support of N_i| / 3
        let mut row_sum = vec![0.0; m.n_nodes()];
        for i in 0..m.n_nodes() {
            for (_, v) in mass.row(i) {
                row_sum[i] += v;
            }
        }
        // total mass equals the domain area
        assert_relative_eq!(row_sum.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        // the diagonal entry of a node belonging to exactly one cell is
        // 2*|T|/12
        let exclusive: Vec<usize> = (0..m.n_nodes())
            .filter(|&n| {
                (0..m.n_cells()).filter(|&c| m.cell_nodes(c).contains(&n)).count() == 1
            })
            .collect();
        for n in exclusive {
            assert_relative_eq!(mass.get(n, n), 2.0 * area / 12.0, epsilon = 1e-14);
        }
        // within cell 0, every pair of distinct nodes has entry |T|/12
        // contributed per incident cell; nodes 1 and 2 of the diagonal are
        // shared by both cells
        let pair = (nodes[0], nodes[1]);
        let shared_cells = (0..m.n_cells())
            .filter(|&c| {
                m.cell_nodes(c).contains(&pair.0) && m.cell_nodes(c).contains(&pair.1)
            })
            .count() as f64;
        assert_relative_eq!(mass.get(pair.0, pair.1), shared_cells * area / 12.0, epsilon = 1e-14);
    }

    #[test]
    fn momentum_zero_data_zero_rhs() {
        let m = build_unit_square(2, CellKind::Triangle).unwrap();
        let p = unit_params();
        let zero_v = Field::zeros(FieldKind::Vector, m.n_nodes());
        let zero_s = Field::zeros(FieldKind::Scalar, m.n_nodes());
        let (_, rhs) = assemble_momentum(&m, &zero_v, &zero_v, &zero_s, &zero_s, &zero_v, &p, 0.1)
            .unwrap();
        assert!(rhs.iter().all(|&v| v == 0.0));
        assert!(assemble_momentum(&m, &zero_v, &zero_v, &zero_s, &zero_s, &zero_v, &p, 0.0)
            .is_err());
    }

    #[test]
    fn momentum_matrix_spd_after_elimination() {
        let m = build_unit_square(3, CellKind::Quadrilateral).unwrap();
        let p = unit_params();
        let zero_v = Field::zeros(FieldKind::Vector, m.n_nodes());
        let one_s = interpolate_scalar(&m, |_| 1.0);
        let zero_s = Field::zeros(FieldKind::Scalar, m.n_nodes());
        let (mat, rhs) =
            assemble_momentum(&m, &zero_v, &zero_v, &one_s, &zero_s, &zero_v, &p, 0.1).unwrap();
        assert!(mat.value_asymmetry() < 1e-12);
        // pin the bottom edge
        let mut constraints = Vec::new();
        for (i, pnt) in m.nodes.iter().enumerate() {
            if pnt[1].abs() < 1e-12 {
                constraints.push((2 * i, 0.0));
                constraints.push((2 * i + 1, 0.0));
            }
        }
        let (mat, _) = apply_dirichlet(mat, rhs, &constraints).unwrap();
        assert!(mat.value_asymmetry() == 0.0);
        let f = LdltFactor::new(&mat).unwrap();
        assert!(f.min_pivot() > 0.0);

        // random quadratic-form sampling
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x: Vec<f64> = (0..mat.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let ax = spmv(&mat, &x);
            let q: f64 = x.iter().zip(&ax).map(|(a, b)| a * b).sum();
            assert!(q > 0.0);
        }
    }

    #[test]
    fn momentum_reproduces_linear_solution() {
        // static limit via huge tau: with phi = 1, rho = 0, f = 0, a linear
        // displacement prescribed on the whole boundary is reproduced exactly
        let m = build_unit_square(3, CellKind::Triangle).unwrap();
        let p = ModelParams::new(
            ElasticModuli::new(2.0, 3.0, 2).unwrap(),
            0.0,
            0.0,
            0.5,
            2.0,
            10.0,
            ConductivityModel::Constant { k: 1.0 },
        )
        .unwrap();
        let exact = |pnt: [f64; 2]| [0.3 * pnt[0] + 0.1 * pnt[1], -0.2 * pnt[0] + 0.5 * pnt[1]];
        let one_s = interpolate_scalar(&m, |_| 1.0);
        let zero_s = Field::zeros(FieldKind::Scalar, m.n_nodes());
        let zero_v = Field::zeros(FieldKind::Vector, m.n_nodes());
        let tau = 1e6;
        let (mat, rhs) =
            assemble_momentum(&m, &zero_v, &zero_v, &one_s, &zero_s, &zero_v, &p, tau).unwrap();
        let mut constraints = Vec::new();
        for f in &m.boundary {
            for &n in &f.nodes {
                let v = exact(m.nodes[n]);
                constraints.push((2 * n, v[0]));
                constraints.push((2 * n + 1, v[1]));
            }
        }
        constraints.sort_by_key(|c| c.0);
        constraints.dedup();
        let (mat, rhs) = apply_dirichlet(mat, rhs, &constraints).unwrap();
        let u = solve_direct(&mat, &rhs).unwrap();
        for (i, pnt) in m.nodes.iter().enumerate() {
            let v = exact(*pnt);
            // the (1/tau^2) mass perturbation is ~1e-12 relative
            assert_relative_eq!(u[2 * i], v[0], epsilon = 1e-9);
            assert_relative_eq!(u[2 * i + 1], v[1], epsilon = 1e-9);
        }
    }

    #[test]
    fn damage_zero_state_solves() {
        let m = build_unit_square(2, CellKind::Triangle).unwrap();
        let p = unit_params();
        let zero_s = Field::zeros(FieldKind::Scalar, m.n_nodes());
        let zero_v = Field::zeros(FieldKind::Vector, m.n_nodes());
        let (res, _) = assemble_damage(&m, &zero_s, &zero_s, &zero_v, &p).unwrap();
        assert!(res.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn damage_screened_term_only() {
        // u_old = 0, phi_old = 1, phi_trial = 1: residual = (1/ell) * M * 1
        let m = build_unit_square(2, CellKind::Quadrilateral).unwrap();
        let p = unit_params();
        let one = interpolate_scalar(&m, |_| 1.0);
        let zero_v = Field::zeros(FieldKind::Vector, m.n_nodes());
        let (res, _) = assemble_damage(&m, &one, &one, &zero_v, &p).unwrap();
        let mass = assemble_scalar_mass(&m);
        let want = spmv(&mass, &one.coeffs);
        for (r, w) in res.iter().zip(&want) {
            assert_relative_eq!(r, &(w / p.ell), epsilon = 1e-13);
        }
    }

    #[test]
    fn damage_jacobian_gains_penalty_when_active() {
        let m = build_unit_square(1, CellKind::Triangle).unwrap();
        let p = unit_params();
        let zero_v = Field::zeros(FieldKind::Vector, m.n_nodes());
        let zero_s = Field::zeros(FieldKind::Scalar, m.n_nodes());
        let above = interpolate_scalar(&m, |_| 0.5); // increment +0.5 > 0
        let (_, jac_active) = assemble_damage(&m, &above, &zero_s, &zero_v, &p).unwrap();
        let below = interpolate_scalar(&m, |_| -0.5);
        let (_, jac_inactive) = assemble_damage(&m, &below, &zero_s, &zero_v, &p).unwrap();
        let mass = assemble_scalar_mass(&m);
        for i in 0..m.n_nodes() {
            for (j, v_active) in jac_active.row(i) {
                let diff = v_active - jac_inactive.get(i, j);
                assert_relative_eq!(diff, p.gamma0 * mass.get(i, j), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn damage_jacobian_matches_finite_differences() {
        let m = build_unit_square(1, CellKind::Triangle).unwrap();
        let p = unit_params();
        let u = interpolate_vector(&m, |pnt| [0.1 * pnt[0], -0.05 * pnt[1]]);
        let phi_old = interpolate_scalar(&m, |_| 0.2);
        // increments strictly positive: away from the kink
        let phi = interpolate_scalar(&m, |pnt| 0.5 + 0.1 * pnt[0]);
        let (_, jac) = assemble_damage(&m, &phi, &phi_old, &u, &p).unwrap();
        let n = m.n_nodes();
        let h = 1e-7;
        for j in 0..n {
            let mut plus = phi.clone();
            plus.coeffs[j] += h;
            let mut minus = phi.clone();
            minus.coeffs[j] -= h;
            let (rp, _) = assemble_damage(&m, &plus, &phi_old, &u, &p).unwrap();
            let (rm, _) = assemble_damage(&m, &minus, &phi_old, &u, &p).unwrap();
            for i in 0..n {
                let fd = (rp[i] - rm[i]) / (2.0 * h);
                assert_relative_eq!(jac.get(i, j), fd, epsilon = 1e-6, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn penalty_operator_monotone() {
        let m = build_unit_square(2, CellKind::Triangle).unwrap();
        let p = unit_params();
        let zero_v = Field::zeros(FieldKind::Vector, m.n_nodes());
        let phi_old = interpolate_scalar(&m, |pnt| 0.3 * pnt[0]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // pen(phi) = residual with only the penalty term isolated:
        // difference of residuals with gamma0 and with gamma0 = 0
        let pen = |phi: &Field| -> Vec<f64> {
            let (with, _) = assemble_damage(&m, phi, &phi_old, &zero_v, &p).unwrap();
            let mut p0 = p;
            p0.gamma0 = 0.0;
            let (without, _) = assemble_damage(&m, phi, &phi_old, &zero_v, &p0).unwrap();
            with.iter().zip(&without).map(|(a, b)| a - b).collect()
        };
        for _ in 0..30 {
            let mut a = Field::zeros(FieldKind::Scalar, m.n_nodes());
            let mut b = Field::zeros(FieldKind::Scalar, m.n_nodes());
            for c in a.coeffs.iter_mut().chain(b.coeffs.iter_mut()) {
                *c = rng.gen_range(-1.0..1.0);
            }
            let pa = pen(&a);
            let pb = pen(&b);
            let dot: f64 = pa
                .iter()
                .zip(&pb)
                .zip(a.coeffs.iter().zip(&b.coeffs))
                .map(|((x, y), (va, vb))| (x - y) * (va - vb))
                .sum();
            assert!(dot >= -1e-12, "penalty monotonicity violated: {dot}");
        }
    }

    #[test]
    fn heat_zero_state_solves() {
        let m = build_unit_square(2, CellKind::Triangle).unwrap();
        let p = unit_params();
        let zero_s = Field::zeros(FieldKind::Scalar, m.n_nodes());
        let zero_v = Field::zeros(FieldKind::Vector, m.n_nodes());
        let (res, _) = assemble_heat(
            &m, &zero_s, &zero_s, &zero_v, &zero_v, &zero_s, &[], 0.0, &p, 0.1,
        )
        .unwrap();
        assert!(res.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn heat_diffusion_matches_laplace_stiffness() {
        // constant K = 1 and theta = x: the diffusion part of the residual
        // equals the Laplace stiffness times the coefficients
        let m = build_unit_square(3, CellKind::Triangle).unwrap();
        let p = unit_params();
        let theta = interpolate_scalar(&m, |pnt| pnt[0]);
        let zero_v = Field::zeros(FieldKind::Vector, m.n_nodes());
        let zero_s = Field::zeros(FieldKind::Scalar, m.n_nodes());
        let tau = 1.0;
        // residual with theta_old = theta removes the time term
        let (res, _) =
            assemble_heat(&m, &theta, &theta, &zero_v, &zero_v, &zero_s, &[], 0.0, &p, tau)
                .unwrap();
        let stiff = assemble_scalar_stiffness(&m, |_, _, _, _| 1.0);
        let want = spmv(&stiff, &theta.coeffs);
        for (r, w) in res.iter().zip(&want) {
            assert_relative_eq!(r, w, epsilon = 1e-12);
        }
    }

    #[test]
    fn heat_jacobian_matches_finite_differences_power_law() {
        let m = build_unit_square(1, CellKind::Triangle).unwrap();
        let mut p = unit_params();
        p.conductivity = ConductivityModel::PowerLaw { c0: 0.5, c1: 0.7, c2: 1.4, beta: 1.5 };
        let theta_old = interpolate_scalar(&m, |_| 0.1);
        let theta = interpolate_scalar(&m, |pnt| 0.5 + 0.3 * pnt[0] + 0.2 * pnt[1]);
        let u_new = interpolate_vector(&m, |pnt| [0.01 * pnt[0], 0.0]);
        let u_prev = Field::zeros(FieldKind::Vector, m.n_nodes());
        let zero_s = Field::zeros(FieldKind::Scalar, m.n_nodes());
        let tau = 0.05;
        let (_, jac) = assemble_heat(
            &m, &theta, &theta_old, &u_new, &u_prev, &zero_s, &[], 0.0, &p, tau,
        )
        .unwrap();
        assert!(jac.value_asymmetry() > 1e-6, "power-law Jacobian should be unsymmetric");
        let n = m.n_nodes();
        let h = 1e-6;
        for j in 0..n {
            let mut plus = theta.clone();
            plus.coeffs[j] += h;
            let mut minus = theta.clone();
            minus.coeffs[j] -= h;
            let (rp, _) = assemble_heat(
                &m, &plus, &theta_old, &u_new, &u_prev, &zero_s, &[], 0.0, &p, tau,
            )
            .unwrap();
            let (rm, _) = assemble_heat(
                &m, &minus, &theta_old, &u_new, &u_prev, &zero_s, &[], 0.0, &p, tau,
            )
            .unwrap();
            for i in 0..n {
                let fd = (rp[i] - rm[i]) / (2.0 * h);
                let scale = jac.get(i, j).abs().max(1.0);
                assert!(
                    (jac.get(i, j) - fd).abs() <= 1e-6 * scale,
                    "J[{i}][{j}] = {} vs fd {}",
                    jac.get(i, j),
                    fd
                );
            }
        }
    }

    #[test]
    fn dirichlet_elimination_hand_solve() {
        // 3-node chain Laplacian with ends fixed to 0 and 1: middle = 0.5
        let a = SystemMatrix::from_triplets(
            3,
            &[
                (0, 0, 1.0),
                (0, 1, -1.0),
                (1, 0, -1.0),
                (1, 1, 2.0),
                (1, 2, -1.0),
                (2, 1, -1.0),
                (2, 2, 1.0),
            ],
        )
        .unwrap();
        let rhs = vec![0.0; 3];
        let (a, rhs) = apply_dirichlet(a, rhs, &[(0, 0.0), (2, 1.0)]).unwrap();
        assert_eq!(a.value_asymmetry(), 0.0);
        let x = solve_direct(&a, &rhs).unwrap();
        assert_relative_eq!(x[0], 0.0, epsilon = 1e-14);
        assert_relative_eq!(x[1], 0.5, epsilon = 1e-13);
        assert_relative_eq!(x[2], 1.0, epsilon = 1e-14);

        // constrain everything to zero
        let a = assemble_scalar_mass(&build_unit_square(2, CellKind::Triangle).unwrap());
        let n = a.n();
        let constraints: Vec<(usize, f64)> = (0..n).map(|i| (i, 0.0)).collect();
        let (a, rhs) = apply_dirichlet(a, vec![1.0; n], &constraints).unwrap();
        let x = solve_direct(&a, &rhs).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));

        // out-of-range dof
        let a = SystemMatrix::from_triplets(2, &[(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        assert!(apply_dirichlet(a, vec![0.0; 2], &[(5, 0.0)]).is_err());
    }

    #[test]
    fn conductivity_validation() {
        assert!(ConductivityModel::Constant { k: 0.158 }.validate(2).is_ok());
        assert!(ConductivityModel::Constant { k: 0.0 }.validate(2).is_err());
        assert!(ConductivityModel::PowerLaw { c0: 1.0, c1: 1.0, c2: 2.0, beta: 1.5 }
            .validate(2)
            .is_ok());
        assert!(ConductivityModel::PowerLaw { c0: 1.0, c1: 1.0, c2: 2.0, beta: 2.5 }
            .validate(2)
            .is_err());
        assert!(ConductivityModel::PowerLaw { c0: 1.0, c1: 1.0, c2: 2.0, beta: 1.8 }
            .validate(3)
            .is_err());
    }

    #[test]
    fn param_flags() {
        let p = unit_params();
        let f = p.assumption_flags(0.25);
        assert!(f.strictly_positive);
        assert!(f.scales_ordered);
        let mut p2 = p;
        p2.rho = 0.0;
        assert!(!p2.assumption_flags(0.25).strictly_positive);
    }

    #[test]
    fn bc_spec_validation() {
        let mut bc = BcSpec::default();
        bc.u.push(BcEntry {
            tag: BoundaryTag::Bottom,
            kind: BcKind::Dirichlet,
            value: BcValue::Vector(VectorFn::parse_str("vector zero zero").unwrap()),
        });
        bc.theta.push(BcEntry {
            tag: BoundaryTag::NotchFront,
            kind: BcKind::Neumann,
            value: BcValue::Scalar(ScalarFn::Constant(300.0)),
        });
        assert!(bc.validate().is_ok());
        bc.u.push(BcEntry {
            tag: BoundaryTag::Bottom,
            kind: BcKind::Neumann,
            value: BcValue::Vector(VectorFn::parse_str("vector zero zero").unwrap()),
        });
        assert!(bc.validate().is_err());
    }
}
