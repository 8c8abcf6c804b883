//! Structured 2D meshes: the unit square and the notched square, with
//! boundary tagging, uniform refinement, and shape-regularity diagnostics.

use std::collections::HashMap;
use std::fmt;

use crate::{invalid, Error, Result};

/// Cell family of a mesh. Generators produce one kind per mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Triangle,
    Quadrilateral,
}

impl CellKind {
    pub fn nodes_per_cell(&self) -> usize {
        match self {
            CellKind::Triangle => 3,
            CellKind::Quadrilateral => 4,
        }
    }
}

/// Boundary facet tags. Outer box sides plus the three faces of the slit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    Left,
    Right,
    Top,
    Bottom,
    NotchUpper,
    NotchLower,
    NotchFront,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 7] = [
        BoundaryTag::Left,
        BoundaryTag::Right,
        BoundaryTag::Top,
        BoundaryTag::Bottom,
        BoundaryTag::NotchUpper,
        BoundaryTag::NotchLower,
        BoundaryTag::NotchFront,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "left" => BoundaryTag::Left,
            "right" => BoundaryTag::Right,
            "top" => BoundaryTag::Top,
            "bottom" => BoundaryTag::Bottom,
            "notch_upper" => BoundaryTag::NotchUpper,
            "notch_lower" => BoundaryTag::NotchLower,
            "notch_front" => BoundaryTag::NotchFront,
            other => return invalid(format!("unknown boundary tag '{other}'")),
        })
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BoundaryTag::Left => "left",
            BoundaryTag::Right => "right",
            BoundaryTag::Top => "top",
            BoundaryTag::Bottom => "bottom",
            BoundaryTag::NotchUpper => "notch_upper",
            BoundaryTag::NotchLower => "notch_lower",
            BoundaryTag::NotchFront => "notch_front",
        };
        f.write_str(s)
    }
}

/// A tagged boundary edge (two node indices, order along the owning cell).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryFacet {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
    /// Owning cell (each boundary facet belongs to exactly one cell).
    pub cell: usize,
}

/// Conforming structured mesh. Immutable once built.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    kind: CellKind,
    /// Connectivity, `nodes_per_cell` entries per cell, counterclockwise.
    conn: Vec<usize>,
    pub boundary: Vec<BoundaryFacet>,
    /// Nominal lattice spacing of the generating grid (1/n).
    spacing: f64,
}

/// Shape-regularity diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct ShapeReport {
    /// Mesh width: max cell diameter.
    pub h_max: f64,
    /// Smallest cell diameter.
    pub h_min: f64,
    /// max over cells of diam(T) / |T|^(1/d).
    pub gamma: f64,
    /// h_max / h_min.
    pub quasi_uniformity: f64,
}

impl Mesh {
    pub fn kind(&self) -> CellKind {
        self.kind
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_cells(&self) -> usize {
        self.conn.len() / self.kind.nodes_per_cell()
    }

    pub fn cell_nodes(&self, cell: usize) -> &[usize] {
        let k = self.kind.nodes_per_cell();
        &self.conn[cell * k..(cell + 1) * k]
    }

    /// Nominal lattice spacing of the generating grid (halves on refinement).
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn cell_coords(&self, cell: usize) -> Vec<[f64; 2]> {
        self.cell_nodes(cell).iter().map(|&n| self.nodes[n]).collect()
    }

    /// Signed area (shoelace). Positive for counterclockwise cells.
    pub fn cell_area(&self, cell: usize) -> f64 {
        let p = self.cell_coords(cell);
        let mut a = 0.0;
        for i in 0..p.len() {
            let q = p[(i + 1) % p.len()];
            a += p[i][0] * q[1] - q[0] * p[i][1];
        }
        0.5 * a
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_cells()).map(|c| self.cell_area(c)).sum()
    }

    pub fn cell_diameter(&self, cell: usize) -> f64 {
        let p = self.cell_coords(cell);
        let mut d: f64 = 0.0;
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                let dx = p[i][0] - p[j][0];
                let dy = p[i][1] - p[j][1];
                d = d.max((dx * dx + dy * dy).sqrt());
            }
        }
        d
    }

    /// Facets tagged `tag`.
    pub fn facets_with_tag(&self, tag: BoundaryTag) -> Vec<&BoundaryFacet> {
        self.boundary.iter().filter(|f| f.tag == tag).collect()
    }

    /// Cells incident to each node.
    pub fn node_to_cells(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_nodes()];
        for c in 0..self.n_cells() {
            for &n in self.cell_nodes(c) {
                adj[n].push(c);
            }
        }
        adj
    }

    /// Checks positive cell areas and that every boundary facet is an edge of
    /// its owning cell with no second owner.
    pub fn validate(&self) -> Result<()> {
        for c in 0..self.n_cells() {
            if self.cell_area(c) <= 0.0 {
                return Err(Error::InvalidMesh(format!(
                    "cell {c} has non-positive area {}",
                    self.cell_area(c)
                )));
            }
        }
        let edge_owners = self.edge_owner_map();
        for f in &self.boundary {
            let key = edge_key(f.nodes[0], f.nodes[1]);
            match edge_owners.get(&key) {
                Some(owners) if owners.len() == 1 && owners[0] == f.cell => {}
                Some(owners) if owners.len() == 1 => {
                    return Err(Error::InvalidMesh(format!(
                        "boundary facet {:?} owned by cell {} but tagged with cell {}",
                        f.nodes, owners[0], f.cell
                    )));
                }
                _ => {
                    return Err(Error::InvalidMesh(format!(
                        "boundary facet {:?} is not a boundary edge",
                        f.nodes
                    )));
                }
            }
        }
        Ok(())
    }

    fn edge_owner_map(&self) -> HashMap<(usize, usize), Vec<usize>> {
        let mut map: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for c in 0..self.n_cells() {
            let nodes = self.cell_nodes(c);
            for i in 0..nodes.len() {
                let a = nodes[i];
                let b = nodes[(i + 1) % nodes.len()];
                map.entry(edge_key(a, b)).or_default().push(c);
            }
        }
        map
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Uniform mesh of the unit square with `n` cells per side.
///
/// Boundary facets are tagged left/right/top/bottom. Triangles split each
/// lattice square along the diagonal from its lower-left corner.
pub fn build_unit_square(n: usize, kind: CellKind) -> Result<Mesh> {
    if n == 0 {
        return invalid("n must be at least 1");
    }
    let x_lines: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let y_lines = x_lines.clone();
    build_lattice(&x_lines, &y_lines, kind, 1.0 / n as f64, |_, _| true, |_| None)
}

/// Mesh of the unit square minus a thin horizontal slit that enters from the
/// left boundary.
///
/// The lattice line at `notch_y` is split into the two slit faces at
/// `notch_y -/+ thickness/2`; lattice cells between those faces are removed
/// for `x < notch_length` (the open slit) and kept as a thin material row
/// ahead of the slit. Slit faces are tagged `notch_lower`, `notch_upper`, and
/// the vertical face at `x = notch_length` is `notch_front`.
pub fn build_notched_square(
    n: usize,
    notch_length: f64,
    notch_thickness: f64,
    notch_y: f64,
) -> Result<Mesh> {
    build_notched_square_kind(n, notch_length, notch_thickness, notch_y, CellKind::Quadrilateral)
}

pub fn build_notched_square_kind(
    n: usize,
    notch_length: f64,
    notch_thickness: f64,
    notch_y: f64,
    kind: CellKind,
) -> Result<Mesh> {
    if n < 2 {
        return invalid("notched square needs n >= 2");
    }
    if !(notch_length > 0.0 && notch_length < 1.0) {
        return invalid(format!("notch_length must be in (0,1), got {notch_length}"));
    }
    let h = 1.0 / n as f64;
    if !(notch_thickness > 0.0 && notch_thickness < h) {
        return invalid(format!(
            "notch_thickness must be in (0, 1/n) = (0, {h}), got {notch_thickness}"
        ));
    }
    let fit = |v: f64, what: &str| -> Result<usize> {
        let k = (v * n as f64).round();
        if ((v * n as f64) - k).abs() > 1e-9 {
            return invalid(format!("{what} = {v} is not aligned with the n = {n} lattice"));
        }
        Ok(k as usize)
    };
    let tip_col = fit(notch_length, "notch_length")?;
    let row = fit(notch_y, "notch_y")?;
    if row == 0 || row == n {
        return invalid("notch_y must be interior");
    }

    let x_lines: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
    let mut y_lines: Vec<f64> = Vec::with_capacity(n + 2);
    for j in 0..=n {
        if j == row {
            y_lines.push(notch_y - 0.5 * notch_thickness);
            y_lines.push(notch_y + 0.5 * notch_thickness);
        } else {
            y_lines.push(j as f64 * h);
        }
    }

    // The thin lattice row has index `row`; cells in it are void left of the
    // notch tip.
    let keep = |col: usize, lat_row: usize| !(lat_row == row && col < tip_col);
    let x_front = notch_length;
    let y_lo = notch_y - 0.5 * notch_thickness;
    let y_hi = notch_y + 0.5 * notch_thickness;
    let tag_override = move |mid: [f64; 2]| -> Option<BoundaryTag> {
        let eps = 1e-12;
        if (mid[1] - y_lo).abs() < eps && mid[0] < x_front + eps {
            return Some(BoundaryTag::NotchLower);
        }
        if (mid[1] - y_hi).abs() < eps && mid[0] < x_front + eps {
            return Some(BoundaryTag::NotchUpper);
        }
        if (mid[0] - x_front).abs() < eps && mid[1] > y_lo - eps && mid[1] < y_hi + eps {
            return Some(BoundaryTag::NotchFront);
        }
        None
    };
    build_lattice(&x_lines, &y_lines, kind, h, keep, tag_override)
}

/// Builds a conforming mesh on the tensor lattice `x_lines` x `y_lines`,
/// keeping the lattice cells selected by `keep(col, row)`. Boundary facets
/// are found combinatorially and tagged geometrically, with `tag_override`
/// taking precedence over the outer box tags.
fn build_lattice(
    x_lines: &[f64],
    y_lines: &[f64],
    kind: CellKind,
    spacing: f64,
    keep: impl Fn(usize, usize) -> bool,
    tag_override: impl Fn([f64; 2]) -> Option<BoundaryTag>,
) -> Result<Mesh> {
    let nx = x_lines.len();
    let ny = y_lines.len();
    let node = |i: usize, j: usize| j * nx + i;
    let mut nodes = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            nodes.push([x_lines[i], y_lines[j]]);
        }
    }

    let mut conn = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            if !keep(i, j) {
                continue;
            }
            let (a, b, c, d) = (node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1));
            match kind {
                CellKind::Quadrilateral => conn.extend_from_slice(&[a, b, c, d]),
                CellKind::Triangle => {
                    conn.extend_from_slice(&[a, b, c]);
                    conn.extend_from_slice(&[a, c, d]);
                }
            }
        }
    }

    let mut mesh = Mesh { nodes, kind, conn, boundary: Vec::new(), spacing };
    drop_unused_nodes(&mut mesh);
    tag_boundary(&mut mesh, tag_override)?;
    mesh.validate()?;
    Ok(mesh)
}

/// Compacts the node list to the nodes referenced by at least one cell.
fn drop_unused_nodes(mesh: &mut Mesh) {
    let mut used = vec![false; mesh.nodes.len()];
    for &n in &mesh.conn {
        used[n] = true;
    }
    if used.iter().all(|&u| u) {
        return;
    }
    let mut remap = vec![usize::MAX; mesh.nodes.len()];
    let mut new_nodes = Vec::new();
    for (i, &u) in used.iter().enumerate() {
        if u {
            remap[i] = new_nodes.len();
            new_nodes.push(mesh.nodes[i]);
        }
    }
    for n in &mut mesh.conn {
        *n = remap[*n];
    }
    mesh.nodes = new_nodes;
}

/// Finds edges with a single owning cell and assigns tags geometrically.
fn tag_boundary(mesh: &mut Mesh, tag_override: impl Fn([f64; 2]) -> Option<BoundaryTag>) -> Result<()> {
    let mut owners: HashMap<(usize, usize), (usize, [usize; 2])> = HashMap::new();
    let mut shared: HashMap<(usize, usize), usize> = HashMap::new();
    for c in 0..mesh.n_cells() {
        let nodes = mesh.cell_nodes(c);
        for i in 0..nodes.len() {
            let a = nodes[i];
            let b = nodes[(i + 1) % nodes.len()];
            let key = edge_key(a, b);
            *shared.entry(key).or_insert(0) += 1;
            owners.entry(key).or_insert((c, [a, b]));
        }
    }
    let mut boundary = Vec::new();
    for (key, count) in &shared {
        if *count != 1 {
            continue;
        }
        let (cell, nodes) = owners[key];
        let p = mesh.nodes[nodes[0]];
        let q = mesh.nodes[nodes[1]];
        let mid = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
        let tag = if let Some(t) = tag_override(mid) {
            t
        } else {
            let eps = 1e-12;
            if mid[0].abs() < eps {
                BoundaryTag::Left
            } else if (mid[0] - 1.0).abs() < eps {
                BoundaryTag::Right
            } else if mid[1].abs() < eps {
                BoundaryTag::Bottom
            } else if (mid[1] - 1.0).abs() < eps {
                BoundaryTag::Top
            } else {
                return Err(Error::InvalidMesh(format!(
                    "boundary facet at ({}, {}) matches no tag",
                    mid[0], mid[1]
                )));
            }
        };
        boundary.push(BoundaryFacet { nodes, tag, cell });
    }
    // deterministic order: by sorted node pair
    boundary.sort_by_key(|f| edge_key(f.nodes[0], f.nodes[1]));
    mesh.boundary = boundary;
    Ok(())
}

/// Splits every cell into 4 children through edge midpoints (quadrilaterals
/// also use the cell centroid). Parent nodes keep their indices and
/// coordinates, so refinements are nested. Boundary tags are inherited.
pub fn refine_uniform(mesh: &Mesh) -> Mesh {
    let mut nodes = mesh.nodes.clone();
    let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
    let mut midpoint = |a: usize, b: usize, nodes: &mut Vec<[f64; 2]>| -> usize {
        let key = edge_key(a, b);
        if let Some(&m) = midpoints.get(&key) {
            return m;
        }
        let p = nodes[a];
        let q = nodes[b];
        let m = nodes.len();
        nodes.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
        midpoints.insert(key, m);
        m
    };

    let mut conn = Vec::with_capacity(mesh.conn.len() * 4);
    // children of cell c occupy ids 4c..4c+4
    for c in 0..mesh.n_cells() {
        match mesh.kind {
            CellKind::Triangle => {
                let [a, b, cc]: [usize; 3] = mesh.cell_nodes(c).try_into().unwrap();
                let ab = midpoint(a, b, &mut nodes);
                let bc = midpoint(b, cc, &mut nodes);
                let ca = midpoint(cc, a, &mut nodes);
                conn.extend_from_slice(&[a, ab, ca]);
                conn.extend_from_slice(&[ab, b, bc]);
                conn.extend_from_slice(&[ca, bc, cc]);
                conn.extend_from_slice(&[ab, bc, ca]);
            }
            CellKind::Quadrilateral => {
                let [a, b, cc, d]: [usize; 4] = mesh.cell_nodes(c).try_into().unwrap();
                let ab = midpoint(a, b, &mut nodes);
                let bc = midpoint(b, cc, &mut nodes);
                let cd = midpoint(cc, d, &mut nodes);
                let da = midpoint(d, a, &mut nodes);
                let center = {
                    let m = nodes.len();
                    let p: Vec<[f64; 2]> = [a, b, cc, d].iter().map(|&n| nodes[n]).collect();
                    nodes.push([
                        0.25 * (p[0][0] + p[1][0] + p[2][0] + p[3][0]),
                        0.25 * (p[0][1] + p[1][1] + p[2][1] + p[3][1]),
                    ]);
                    m
                };
                conn.extend_from_slice(&[a, ab, center, da]);
                conn.extend_from_slice(&[ab, b, bc, center]);
                conn.extend_from_slice(&[center, bc, cc, cd]);
                conn.extend_from_slice(&[da, center, cd, d]);
            }
        }
    }

    let mut out = Mesh {
        nodes,
        kind: mesh.kind,
        conn,
        boundary: Vec::new(),
        spacing: mesh.spacing * 0.5,
    };

    // Children of a tagged facet (a,b): (a,m) and (m,b) with the same tag.
    // The owning child cell is recovered from the edge-owner map.
    let owner_map = out.edge_owner_map();
    let mut boundary = Vec::new();
    for f in &mesh.boundary {
        let m = midpoints[&edge_key(f.nodes[0], f.nodes[1])];
        for half in [[f.nodes[0], m], [m, f.nodes[1]]] {
            let owners = &owner_map[&edge_key(half[0], half[1])];
            debug_assert_eq!(owners.len(), 1);
            boundary.push(BoundaryFacet { nodes: half, tag: f.tag, cell: owners[0] });
        }
    }
    boundary.sort_by_key(|f| edge_key(f.nodes[0], f.nodes[1]));
    out.boundary = boundary;
    out
}

/// Mesh width, gamma-shape constant, and quasi-uniformity ratio.
pub fn shape_report(mesh: &Mesh) -> Result<ShapeReport> {
    let mut h_max: f64 = 0.0;
    let mut h_min = f64::INFINITY;
    let mut gamma: f64 = 0.0;
    for c in 0..mesh.n_cells() {
        let area = mesh.cell_area(c);
        if area <= 0.0 {
            return Err(Error::InvalidMesh(format!("cell {c} is degenerate (area {area})")));
        }
        let d = mesh.cell_diameter(c);
        h_max = h_max.max(d);
        h_min = h_min.min(d);
        gamma = gamma.max(d / area.sqrt());
    }
    Ok(ShapeReport { h_max, h_min, gamma, quasi_uniformity: h_max / h_min })
}
