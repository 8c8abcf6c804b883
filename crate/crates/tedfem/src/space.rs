//! Lowest-order Lagrange spaces on triangles and quadrilaterals: shape
//! functions, quadrature, field evaluation, nodal interpolation, norms, and
//! Gauss-point-to-node derivative recovery.

use crate::mesh::{CellKind, Mesh};
use crate::tensor::{ElasticModuli, SymTensor2};
use crate::{invalid, Result};

/// Scalar or vector nodal field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Scalar,
    Vector,
}

impl FieldKind {
    pub fn components(&self) -> usize {
        match self {
            FieldKind::Scalar => 1,
            FieldKind::Vector => 2,
        }
    }
}

/// Nodal coefficient vector over a mesh. Dof numbering is node-major:
/// `dof(node, comp) = node * components + comp`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub kind: FieldKind,
    pub coeffs: Vec<f64>,
}

impl Field {
    pub fn zeros(kind: FieldKind, n_nodes: usize) -> Self {
        Field { kind, coeffs: vec![0.0; n_nodes * kind.components()] }
    }

    pub fn n_nodes(&self) -> usize {
        self.coeffs.len() / self.kind.components()
    }

    pub fn node_value(&self, node: usize, comp: usize) -> f64 {
        self.coeffs[node * self.kind.components() + comp]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }
}

/// Dof bookkeeping for one field on one mesh, including Dirichlet data.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub kind: FieldKind,
    pub n_nodes: usize,
    /// `(dof index, prescribed value)`, sorted by dof, unique.
    pub constrained: Vec<(usize, f64)>,
}

impl DofMap {
    pub fn unconstrained(kind: FieldKind, n_nodes: usize) -> Self {
        DofMap { kind, n_nodes, constrained: Vec::new() }
    }

    pub fn n_dofs(&self) -> usize {
        self.n_nodes * self.kind.components()
    }

    pub fn dof(&self, node: usize, comp: usize) -> usize {
        node * self.kind.components() + comp
    }
}

/// Quadrature rule in reference coordinates. Triangle reference:
/// `{(x,y): x,y >= 0, x+y <= 1}`; quadrilateral reference: `[-1,1]^2`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Edge-midpoint rule on the reference triangle, exact for degree 2.
    pub fn triangle_midpoint() -> Self {
        QuadratureRule {
            points: vec![[0.5, 0.0], [0.5, 0.5], [0.0, 0.5]],
            weights: vec![1.0 / 6.0; 3],
        }
    }

    /// 2x2 Gauss rule on the reference square, exact for degree 3 per
    /// direction.
    pub fn quad_gauss_2x2() -> Self {
        let g = 1.0 / 3.0_f64.sqrt();
        QuadratureRule {
            points: vec![[-g, -g], [g, -g], [g, g], [-g, g]],
            weights: vec![1.0; 4],
        }
    }

    /// 6-point degree-4 rule on the reference triangle; used for measuring
    /// errors against analytic solutions.
    pub fn triangle_degree4() -> Self {
        let a = 0.445948490915965;
        let b = 0.091576213509771;
        let wa = 0.223381589678011 / 2.0;
        let wb = 0.109951743655322 / 2.0;
        QuadratureRule {
            points: vec![
                [a, a],
                [1.0 - 2.0 * a, a],
                [a, 1.0 - 2.0 * a],
                [b, b],
                [1.0 - 2.0 * b, b],
                [b, 1.0 - 2.0 * b],
            ],
            weights: vec![wa, wa, wa, wb, wb, wb],
        }
    }

    /// 3x3 Gauss rule on the reference square, exact for degree 5 per
    /// direction; used for error measurement.
    pub fn quad_gauss_3x3() -> Self {
        let g = (3.0_f64 / 5.0).sqrt();
        let pts_1d = [-g, 0.0, g];
        let w_1d = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (j, &y) in pts_1d.iter().enumerate() {
            for (i, &x) in pts_1d.iter().enumerate() {
                points.push([x, y]);
                weights.push(w_1d[i] * w_1d[j]);
            }
        }
        QuadratureRule { points, weights }
    }

    /// Default rule for a cell kind (the rule that defines the scheme).
    pub fn default_for(kind: CellKind) -> Self {
        match kind {
            CellKind::Triangle => Self::triangle_midpoint(),
            CellKind::Quadrilateral => Self::quad_gauss_2x2(),
        }
    }

    /// Higher-order rule for error integration.
    pub fn error_rule_for(kind: CellKind) -> Self {
        match kind {
            CellKind::Triangle => Self::triangle_degree4(),
            CellKind::Quadrilateral => Self::quad_gauss_3x3(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Shape function values on the reference cell.
pub fn shape_values(kind: CellKind, p: [f64; 2]) -> Vec<f64> {
    match kind {
        CellKind::Triangle => vec![1.0 - p[0] - p[1], p[0], p[1]],
        CellKind::Quadrilateral => {
            let (x, y) = (p[0], p[1]);
            vec![
                0.25 * (1.0 - x) * (1.0 - y),
                0.25 * (1.0 + x) * (1.0 - y),
                0.25 * (1.0 + x) * (1.0 + y),
                0.25 * (1.0 - x) * (1.0 + y),
            ]
        }
    }
}

/// Shape function gradients on the reference cell.
pub fn shape_gradients(kind: CellKind, p: [f64; 2]) -> Vec<[f64; 2]> {
    match kind {
        CellKind::Triangle => vec![[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]],
        CellKind::Quadrilateral => {
            let (x, y) = (p[0], p[1]);
            vec![
                [-0.25 * (1.0 - y), -0.25 * (1.0 - x)],
                [0.25 * (1.0 - y), -0.25 * (1.0 + x)],
                [0.25 * (1.0 + y), 0.25 * (1.0 + x)],
                [-0.25 * (1.0 + y), 0.25 * (1.0 - x)],
            ]
        }
    }
}

/// Geometry of one cell evaluated at the points of a quadrature rule:
/// physical positions, physical weights (reference weight times |det J|),
/// shape values and physical shape gradients.
#[derive(Debug, Clone)]
pub struct CellGeometry {
    pub positions: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub shapes: Vec<Vec<f64>>,
    pub gradients: Vec<Vec<[f64; 2]>>,
}

pub fn cell_geometry(mesh: &Mesh, cell: usize, rule: &QuadratureRule) -> CellGeometry {
    let coords = mesh.cell_coords(cell);
    let kind = mesh.kind();
    let nq = rule.len();
    let mut positions = Vec::with_capacity(nq);
    let mut weights = Vec::with_capacity(nq);
    let mut shapes = Vec::with_capacity(nq);
    let mut gradients = Vec::with_capacity(nq);
    for (q, &p) in rule.points.iter().enumerate() {
        let n = shape_values(kind, p);
        let dn = shape_gradients(kind, p);
        // isoparametric Jacobian J = sum_i coord_i (x) grad N_i
        let mut j = [[0.0f64; 2]; 2];
        for (i, c) in coords.iter().enumerate() {
            for a in 0..2 {
                for b in 0..2 {
                    j[a][b] += c[a] * dn[i][b];
                }
            }
        }
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        debug_assert!(det > 0.0, "non-positive Jacobian in cell {cell}");
        let inv = [
            [j[1][1] / det, -j[0][1] / det],
            [-j[1][0] / det, j[0][0] / det],
        ];
        // physical gradient: J^{-T} * grad_ref
        let grads: Vec<[f64; 2]> = dn
            .iter()
            .map(|g| {
                [
                    inv[0][0] * g[0] + inv[1][0] * g[1],
                    inv[0][1] * g[0] + inv[1][1] * g[1],
                ]
            })
            .collect();
        let mut pos = [0.0, 0.0];
        for (i, c) in coords.iter().enumerate() {
            pos[0] += n[i] * c[0];
            pos[1] += n[i] * c[1];
        }
        positions.push(pos);
        weights.push(rule.weights[q] * det);
        shapes.push(n);
        gradients.push(grads);
    }
    CellGeometry { positions, weights, shapes, gradients }
}

/// Nodal interpolant of a scalar function (realizes the quasi-interpolation
/// operators of the scheme for continuous data).
pub fn interpolate_scalar(mesh: &Mesh, f: impl Fn([f64; 2]) -> f64) -> Field {
    Field { kind: FieldKind::Scalar, coeffs: mesh.nodes.iter().map(|&p| f(p)).collect() }
}

/// Nodal interpolant of a vector function.
pub fn interpolate_vector(mesh: &Mesh, f: impl Fn([f64; 2]) -> [f64; 2]) -> Field {
    let mut coeffs = Vec::with_capacity(2 * mesh.n_nodes());
    for &p in &mesh.nodes {
        let v = f(p);
        coeffs.push(v[0]);
        coeffs.push(v[1]);
    }
    Field { kind: FieldKind::Vector, coeffs }
}

/// Value of a scalar field at one quadrature point given precomputed cell
/// geometry.
pub fn eval_scalar(mesh: &Mesh, field: &Field, cell: usize, geo: &CellGeometry, q: usize) -> f64 {
    debug_assert_eq!(field.kind, FieldKind::Scalar);
    mesh.cell_nodes(cell)
        .iter()
        .enumerate()
        .map(|(i, &n)| field.coeffs[n] * geo.shapes[q][i])
        .sum()
}

/// Gradient of a scalar field at one quadrature point.
pub fn eval_scalar_gradient(
    mesh: &Mesh,
    field: &Field,
    cell: usize,
    geo: &CellGeometry,
    q: usize,
) -> [f64; 2] {
    debug_assert_eq!(field.kind, FieldKind::Scalar);
    let mut g = [0.0, 0.0];
    for (i, &n) in mesh.cell_nodes(cell).iter().enumerate() {
        g[0] += field.coeffs[n] * geo.gradients[q][i][0];
        g[1] += field.coeffs[n] * geo.gradients[q][i][1];
    }
    g
}

/// Value of a vector field at one quadrature point.
pub fn eval_vector(
    mesh: &Mesh,
    field: &Field,
    cell: usize,
    geo: &CellGeometry,
    q: usize,
) -> [f64; 2] {
    debug_assert_eq!(field.kind, FieldKind::Vector);
    let mut v = [0.0, 0.0];
    for (i, &n) in mesh.cell_nodes(cell).iter().enumerate() {
        v[0] += field.coeffs[2 * n] * geo.shapes[q][i];
        v[1] += field.coeffs[2 * n + 1] * geo.shapes[q][i];
    }
    v
}

/// Full gradient (row-major 2x2: `[du1/dx, du1/dy, du2/dx, du2/dy]`) of a
/// vector field at one quadrature point.
pub fn eval_vector_gradient(
    mesh: &Mesh,
    field: &Field,
    cell: usize,
    geo: &CellGeometry,
    q: usize,
) -> [f64; 4] {
    debug_assert_eq!(field.kind, FieldKind::Vector);
    let mut g = [0.0; 4];
    for (i, &n) in mesh.cell_nodes(cell).iter().enumerate() {
        let gq = geo.gradients[q][i];
        g[0] += field.coeffs[2 * n] * gq[0];
        g[1] += field.coeffs[2 * n] * gq[1];
        g[2] += field.coeffs[2 * n + 1] * gq[0];
        g[3] += field.coeffs[2 * n + 1] * gq[1];
    }
    g
}

/// Symmetric gradient of a vector field at a quadrature point.
pub fn eval_strain(
    mesh: &Mesh,
    u: &Field,
    cell: usize,
    geo: &CellGeometry,
    q: usize,
) -> Result<SymTensor2> {
    if u.kind != FieldKind::Vector {
        return invalid("strain is defined for vector fields only");
    }
    let g = eval_vector_gradient(mesh, u, cell, geo, q);
    Ok(SymTensor2::new_2d(g[0], g[3], 0.5 * (g[1] + g[2])))
}

/// Divergence of a vector field at a quadrature point; equals the trace of
/// the strain.
pub fn eval_divergence(
    mesh: &Mesh,
    u: &Field,
    cell: usize,
    geo: &CellGeometry,
    q: usize,
) -> Result<f64> {
    if u.kind != FieldKind::Vector {
        return invalid("divergence is defined for vector fields only");
    }
    let g = eval_vector_gradient(mesh, u, cell, geo, q);
    Ok(g[0] + g[3])
}

/// Norm kinds for [`norm`].
#[derive(Debug, Clone, Copy)]
pub enum NormKind {
    L2,
    H1Semi,
    /// Energy norm of the strain of a vector field:
    /// `||E(u)||_A^2 = integral A(E(u)):E(u)`.
    ANorm(ElasticModuli),
}

/// Norm of a field over the mesh, integrated with the default cell rule.
pub fn norm(mesh: &Mesh, field: &Field, kind: NormKind) -> Result<f64> {
    if let NormKind::ANorm(_) = kind {
        if field.kind != FieldKind::Vector {
            return invalid("the A-norm applies to the strain of a vector field");
        }
    }
    let rule = QuadratureRule::default_for(mesh.kind());
    let mut acc = 0.0;
    for cell in 0..mesh.n_cells() {
        let geo = cell_geometry(mesh, cell, &rule);
        for q in 0..rule.len() {
            let w = geo.weights[q];
            match kind {
                NormKind::L2 => match field.kind {
                    FieldKind::Scalar => {
                        let v = eval_scalar(mesh, field, cell, &geo, q);
                        acc += w * v * v;
                    }
                    FieldKind::Vector => {
                        let v = eval_vector(mesh, field, cell, &geo, q);
                        acc += w * (v[0] * v[0] + v[1] * v[1]);
                    }
                },
                NormKind::H1Semi => match field.kind {
                    FieldKind::Scalar => {
                        let g = eval_scalar_gradient(mesh, field, cell, &geo, q);
                        acc += w * (g[0] * g[0] + g[1] * g[1]);
                    }
                    FieldKind::Vector => {
                        let g = eval_vector_gradient(mesh, field, cell, &geo, q);
                        acc += w * g.iter().map(|x| x * x).sum::<f64>();
                    }
                },
                NormKind::ANorm(m) => {
                    let e = eval_strain(mesh, field, cell, &geo, q)?;
                    acc += w * m.energy_density(&e);
                }
            }
        }
    }
    Ok(acc.sqrt())
}

/// `L^2` norm of the symmetric gradient of a vector field:
/// `sqrt(integral E(u):E(u))`.
pub fn strain_l2_norm(mesh: &Mesh, u: &Field) -> Result<f64> {
    if u.kind != FieldKind::Vector {
        return invalid("strain norm applies to vector fields");
    }
    let rule = QuadratureRule::default_for(mesh.kind());
    let mut acc = 0.0;
    for cell in 0..mesh.n_cells() {
        let geo = cell_geometry(mesh, cell, &rule);
        for q in 0..rule.len() {
            let e = eval_strain(mesh, u, cell, &geo, q)?;
            acc += geo.weights[q] * e.inner(&e);
        }
    }
    Ok(acc.sqrt())
}

/// Values attached to the integration points of every cell (outer index:
/// cell, inner index: quadrature point of the default rule).
pub type GaussPointValues = Vec<Vec<f64>>;

/// Physical positions of the default-rule integration points of every cell.
pub fn gauss_point_positions(mesh: &Mesh) -> Vec<Vec<[f64; 2]>> {
    let rule = QuadratureRule::default_for(mesh.kind());
    (0..mesh.n_cells())
        .map(|c| cell_geometry(mesh, c, &rule).positions)
        .collect()
}

/// Moves integration-point data to the nodes: each nodal value is the
/// inverse-distance weighted average of the 4 nearest integration points
/// (ties broken by point index; a node coinciding with an integration point
/// takes that value exactly). Exact for globally constant data.
pub fn recover_gauss_to_nodes(mesh: &Mesh, values: &GaussPointValues) -> Result<Field> {
    let positions = gauss_point_positions(mesh);
    let n_points: usize = positions.iter().map(|p| p.len()).sum();
    if n_points < 4 {
        return invalid("recovery needs at least 4 integration points");
    }
    if values.len() != positions.len()
        || values.iter().zip(&positions).any(|(v, p)| v.len() != p.len())
    {
        return invalid("integration point values do not match the mesh layout");
    }

    // flatten with stable indices
    let mut flat_pos = Vec::with_capacity(n_points);
    let mut flat_val = Vec::with_capacity(n_points);
    for (c, pts) in positions.iter().enumerate() {
        for (q, &p) in pts.iter().enumerate() {
            flat_pos.push(p);
            flat_val.push(values[c][q]);
        }
    }

    let grid = BucketGrid::build(&flat_pos);
    let mut coeffs = Vec::with_capacity(mesh.n_nodes());
    for &node in &mesh.nodes {
        let four = grid.nearest_k(&flat_pos, node, 4);
        debug_assert_eq!(four.len(), 4);
        if four[0].0 == 0.0 {
            coeffs.push(flat_val[four[0].1]);
            continue;
        }
        let mut wsum = 0.0;
        let mut vsum = 0.0;
        for &(d, i) in &four {
            let w = 1.0 / d;
            wsum += w;
            vsum += w * flat_val[i];
        }
        coeffs.push(vsum / wsum);
    }
    Ok(Field { kind: FieldKind::Scalar, coeffs })
}

/// Uniform bucket grid for k-nearest queries over a fixed point set.
struct BucketGrid {
    min: [f64; 2],
    inv_h: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl BucketGrid {
    fn build(points: &[[f64; 2]]) -> Self {
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for p in points {
            for a in 0..2 {
                min[a] = min[a].min(p[a]);
                max[a] = max[a].max(p[a]);
            }
        }
        let extent = (max[0] - min[0]).max(max[1] - min[1]).max(1e-300);
        // aim for a few points per bucket
        let target = (points.len() as f64 / 4.0).sqrt().ceil().max(1.0) as usize;
        let h = extent / target as f64;
        let inv_h = 1.0 / h;
        let nx = ((max[0] - min[0]) * inv_h).floor() as usize + 1;
        let ny = ((max[1] - min[1]) * inv_h).floor() as usize + 1;
        let mut buckets = vec![Vec::new(); nx * ny];
        for (i, p) in points.iter().enumerate() {
            let bx = (((p[0] - min[0]) * inv_h) as usize).min(nx - 1);
            let by = (((p[1] - min[1]) * inv_h) as usize).min(ny - 1);
            buckets[by * nx + bx].push(i);
        }
        BucketGrid { min, inv_h, nx, ny, buckets }
    }

    /// k nearest points to `p`, as `(distance, index)` sorted ascending with
    /// index tie-break.
    fn nearest_k(&self, points: &[[f64; 2]], p: [f64; 2], k: usize) -> Vec<(f64, usize)> {
        let bx = (((p[0] - self.min[0]) * self.inv_h).max(0.0) as usize).min(self.nx - 1);
        let by = (((p[1] - self.min[1]) * self.inv_h).max(0.0) as usize).min(self.ny - 1);
        let mut best: Vec<(f64, usize)> = Vec::new();
        let mut ring = 0usize;
        loop {
            // collect candidates in the square ring at Chebyshev distance `ring`
            let x0 = bx.saturating_sub(ring);
            let x1 = (bx + ring).min(self.nx - 1);
            let y0 = by.saturating_sub(ring);
            let y1 = (by + ring).min(self.ny - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let on_ring = x == x0 || x == x1 || y == y0 || y == y1;
                    if ring > 0 && !on_ring {
                        continue;
                    }
                    for &i in &self.buckets[y * self.nx + x] {
                        let dx = points[i][0] - p[0];
                        let dy = points[i][1] - p[1];
                        best.push(((dx * dx + dy * dy).sqrt(), i));
                    }
                }
            }
            best.sort_by(|a, b| a.partial_cmp(b).unwrap());
            best.dedup_by_key(|e| e.1);
            if best.len() >= k {
                // safe to stop once the k-th distance is covered by the
                // scanned rings
                let covered = ring as f64 / self.inv_h;
                if best[k - 1].0 <= covered || (x0 == 0 && y0 == 0 && x1 == self.nx - 1 && y1 == self.ny - 1)
                {
                    best.truncate(k);
                    return best;
                }
            } else if x0 == 0 && y0 == 0 && x1 == self.nx - 1 && y1 == self.ny - 1 {
                best.truncate(k);
                return best;
            }
            ring += 1;
        }
    }
}
