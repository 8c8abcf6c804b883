//! Shared helpers for the integration suites: an independent dense
//! brute-force evaluator for the three weak-form residuals on triangle
//! meshes.
//!
//! The evaluator shares nothing with the library's assembly path: shape
//! functions are barycentric area-coordinate ratios computed from vertex
//! coordinates, gradients come from the edge-normal formula, and quadrature
//! points are physical edge midpoints. Only the quadrature positions agree
//! with the scheme's rule, since the rule is part of the discretization.

use tedfem::assembly::ModelParams;
use tedfem::catalog::ScalarFn;
use tedfem::mesh::{BoundaryTag, CellKind, Mesh};
use tedfem::space::Field;

pub struct TriCell {
    pub nodes: [usize; 3],
    pub verts: [[f64; 2]; 3],
}

impl TriCell {
    pub fn of(mesh: &Mesh, cell: usize) -> Self {
        assert_eq!(mesh.kind(), CellKind::Triangle);
        let nodes: [usize; 3] = mesh.cell_nodes(cell).try_into().unwrap();
        TriCell { nodes, verts: [mesh.nodes[nodes[0]], mesh.nodes[nodes[1]], mesh.nodes[nodes[2]]] }
    }

    pub fn area(&self) -> f64 {
        let [a, b, c] = self.verts;
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    /// Barycentric coordinates by signed sub-triangle areas.
    pub fn bary(&self, x: [f64; 2]) -> [f64; 3] {
        let area2 = 2.0 * self.area();
        let [a, b, c] = self.verts;
        let sub = |p: [f64; 2], q: [f64; 2]| -> f64 {
            (q[0] - p[0]) * (x[1] - p[1]) - (x[0] - p[0]) * (q[1] - p[1])
        };
        [sub(b, c) / area2, sub(c, a) / area2, sub(a, b) / area2]
    }

    /// Physical positions of the midpoint quadrature rule with the common
    /// weight |T|/3.
    pub fn qpoints(&self) -> [[f64; 2]; 3] {
        let [a, b, c] = self.verts;
        [
            [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])],
            [0.5 * (b[0] + c[0]), 0.5 * (b[1] + c[1])],
            [0.5 * (c[0] + a[0]), 0.5 * (c[1] + a[1])],
        ]
    }
}

/// Correct edge-normal gradients for all three barycentric functions.
pub fn tri_gradients(cell: &TriCell) -> [[f64; 2]; 3] {
    let area2 = 2.0 * cell.area();
    let [a, b, c] = cell.verts;
    let rot = |p: [f64; 2], q: [f64; 2]| -> [f64; 2] {
        // gradient of the coordinate that is 1 at the vertex opposite the
        // directed edge p -> q
        [(p[1] - q[1]) / area2, (q[0] - p[0]) / area2]
    };
    [rot(b, c), rot(c, a), rot(a, b)]
}

pub fn scalar_at(f: &Field, cell: &TriCell, x: [f64; 2]) -> f64 {
    let lam = cell.bary(x);
    (0..3).map(|i| lam[i] * f.coeffs[cell.nodes[i]]).sum()
}

pub fn vector_at(f: &Field, cell: &TriCell, x: [f64; 2]) -> [f64; 2] {
    let lam = cell.bary(x);
    let mut v = [0.0, 0.0];
    for i in 0..3 {
        v[0] += lam[i] * f.coeffs[2 * cell.nodes[i]];
        v[1] += lam[i] * f.coeffs[2 * cell.nodes[i] + 1];
    }
    v
}

pub fn scalar_grad(f: &Field, cell: &TriCell) -> [f64; 2] {
    let g = tri_gradients(cell);
    let mut out = [0.0, 0.0];
    for i in 0..3 {
        out[0] += f.coeffs[cell.nodes[i]] * g[i][0];
        out[1] += f.coeffs[cell.nodes[i]] * g[i][1];
    }
    out
}

/// Full displacement gradient `[du1/dx, du1/dy, du2/dx, du2/dy]`.
pub fn vector_grad(f: &Field, cell: &TriCell) -> [f64; 4] {
    let g = tri_gradients(cell);
    let mut out = [0.0; 4];
    for i in 0..3 {
        out[0] += f.coeffs[2 * cell.nodes[i]] * g[i][0];
        out[1] += f.coeffs[2 * cell.nodes[i]] * g[i][1];
        out[2] += f.coeffs[2 * cell.nodes[i] + 1] * g[i][0];
        out[3] += f.coeffs[2 * cell.nodes[i] + 1] * g[i][1];
    }
    out
}

fn strain_of(g: [f64; 4]) -> [[f64; 2]; 2] {
    [[g[0], 0.5 * (g[1] + g[2])], [0.5 * (g[1] + g[2]), g[3]]]
}

fn apply_a(lambda: f64, mu: f64, e: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let tr = e[0][0] + e[1][1];
    [
        [lambda * tr + 2.0 * mu * e[0][0], 2.0 * mu * e[0][1]],
        [2.0 * mu * e[1][0], lambda * tr + 2.0 * mu * e[1][1]],
    ]
}

fn contract(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> f64 {
    let mut s = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            s += a[i][j] * b[i][j];
        }
    }
    s
}

/// Dense momentum residual
/// `R = (1/tau^2)(u_prev - 2 u_old + u, v) + ((phi^2 + kappa) A(E(u)), E(v))
///  - rho (theta, div v) - (f, v)` at the trial displacement.
#[allow(clippy::too_many_arguments)]
pub fn dense_momentum_residual(
    mesh: &Mesh,
    u_trial: &Field,
    u_old: &Field,
    u_prev: &Field,
    phi: &Field,
    theta: &Field,
    f: &Field,
    params: &ModelParams,
    tau: f64,
) -> Vec<f64> {
    let n = 2 * mesh.n_nodes();
    let mut res = vec![0.0; n];
    let (lambda, mu) = (params.moduli.lambda(), params.moduli.mu());
    for c in 0..mesh.n_cells() {
        let cell = TriCell::of(mesh, c);
        let w = cell.area() / 3.0;
        let grads = tri_gradients(&cell);
        let e_trial = strain_of(vector_grad(u_trial, &cell));
        for x in cell.qpoints() {
            let lam = cell.bary(x);
            let phi_q = scalar_at(phi, &cell, x);
            let coeff = phi_q * phi_q + params.kappa;
            let theta_q = scalar_at(theta, &cell, x);
            let f_q = vector_at(f, &cell, x);
            let ut = vector_at(u_trial, &cell, x);
            let uo = vector_at(u_old, &cell, x);
            let up = vector_at(u_prev, &cell, x);
            let accel = [
                (up[0] - 2.0 * uo[0] + ut[0]) / (tau * tau),
                (up[1] - 2.0 * uo[1] + ut[1]) / (tau * tau),
            ];
            let sigma = apply_a(lambda, mu, e_trial);
            for i in 0..3 {
                for comp in 0..2 {
                    let row = 2 * cell.nodes[i] + comp;
                    // strain of the basis function N_i e_comp
                    let mut e_basis = [[0.0; 2]; 2];
                    e_basis[comp][0] += 0.5 * grads[i][0];
                    e_basis[0][comp] += 0.5 * grads[i][0];
                    e_basis[comp][1] += 0.5 * grads[i][1];
                    e_basis[1][comp] += 0.5 * grads[i][1];
                    let div_basis = grads[i][comp];
                    res[row] += w
                        * (accel[comp] * lam[i] + coeff * contract(sigma, e_basis)
                            - params.rho * theta_q * div_basis
                            - f_q[comp] * lam[i]);
                }
            }
        }
    }
    res
}

/// Dense damage residual
/// `R = ell (grad phi, grad w) + (1/ell)(phi, w) + gamma0 ([phi - phi_old]_+, w)
///  + (1/Gc)(phi A(E(u_old)):E(u_old), w)`.
pub fn dense_damage_residual(
    mesh: &Mesh,
    phi_trial: &Field,
    phi_old: &Field,
    u_old: &Field,
    params: &ModelParams,
) -> Vec<f64> {
    let mut res = vec![0.0; mesh.n_nodes()];
    let (lambda, mu) = (params.moduli.lambda(), params.moduli.mu());
    for c in 0..mesh.n_cells() {
        let cell = TriCell::of(mesh, c);
        let w = cell.area() / 3.0;
        let grads = tri_gradients(&cell);
        let grad_phi = scalar_grad(phi_trial, &cell);
        let e = strain_of(vector_grad(u_old, &cell));
        let energy = contract(apply_a(lambda, mu, e), e);
        for x in cell.qpoints() {
            let lam = cell.bary(x);
            let phi_q = scalar_at(phi_trial, &cell, x);
            let inc = phi_q - scalar_at(phi_old, &cell, x);
            let pen = if inc > 0.0 { inc } else { 0.0 };
            for i in 0..3 {
                res[cell.nodes[i]] += w
                    * (params.ell * (grad_phi[0] * grads[i][0] + grad_phi[1] * grads[i][1])
                        + (phi_q / params.ell) * lam[i]
                        + params.gamma0 * pen * lam[i]
                        + (phi_q * energy / params.gc) * lam[i]);
            }
        }
    }
    res
}

/// Dense heat residual
/// `R = ((theta - theta_old)/tau, z) + (K(theta) grad theta, grad z)
///  + rho (theta_old div du, z) + <gbar, z>_Gamma - (g, z)`.
#[allow(clippy::too_many_arguments)]
pub fn dense_heat_residual(
    mesh: &Mesh,
    theta_trial: &Field,
    theta_old: &Field,
    u_new: &Field,
    u_prev: &Field,
    gamma: &Field,
    gbar: &[(BoundaryTag, ScalarFn)],
    t: f64,
    params: &ModelParams,
    tau: f64,
) -> Vec<f64> {
    let mut res = vec![0.0; mesh.n_nodes()];
    for c in 0..mesh.n_cells() {
        let cell = TriCell::of(mesh, c);
        let w = cell.area() / 3.0;
        let grads = tri_gradients(&cell);
        let grad_theta = scalar_grad(theta_trial, &cell);
        let gu_new = vector_grad(u_new, &cell);
        let gu_prev = vector_grad(u_prev, &cell);
        let div_du = ((gu_new[0] + gu_new[3]) - (gu_prev[0] + gu_prev[3])) / (2.0 * tau);
        for x in cell.qpoints() {
            let lam = cell.bary(x);
            let theta_q = scalar_at(theta_trial, &cell, x);
            let theta_old_q = scalar_at(theta_old, &cell, x);
            let gamma_q = scalar_at(gamma, &cell, x);
            let k = params.conductivity.value(theta_q);
            for i in 0..3 {
                res[cell.nodes[i]] += w
                    * ((theta_q - theta_old_q) / tau * lam[i]
                        + k * (grad_theta[0] * grads[i][0] + grad_theta[1] * grads[i][1])
                        + params.rho * theta_old_q * div_du * lam[i]
                        - gamma_q * lam[i]);
            }
        }
    }
    // boundary term with 2-point Gauss on each tagged facet
    let g = 1.0 / 3.0_f64.sqrt();
    for (tag, func) in gbar {
        for facet in mesh.facets_with_tag(*tag) {
            let a = mesh.nodes[facet.nodes[0]];
            let b = mesh.nodes[facet.nodes[1]];
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            for s in [-g, g] {
                let xi = 0.5 * (1.0 + s);
                let p = [a[0] + xi * (b[0] - a[0]), a[1] + xi * (b[1] - a[1])];
                let v = func.eval(p, t, tau);
                res[facet.nodes[0]] += 0.5 * len * v * (1.0 - xi);
                res[facet.nodes[1]] += 0.5 * len * v * xi;
            }
        }
    }
    res
}
