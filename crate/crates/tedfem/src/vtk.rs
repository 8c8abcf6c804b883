//! Legacy ASCII VTK export of meshes and nodal fields.

use std::fmt::Write as _;
use std::path::Path;

use crate::mesh::{CellKind, Mesh};
use crate::space::{Field, FieldKind};
use crate::{invalid, Result};

/// Writes an unstructured-grid VTK file with optional nodal point data.
/// Scalar fields become `SCALARS`, vector fields `VECTORS` (padded with a
/// zero z-component).
pub fn write_vtk(path: &Path, mesh: &Mesh, fields: &[(&str, &Field)]) -> Result<()> {
    for (name, f) in fields {
        if f.n_nodes() != mesh.n_nodes() {
            return invalid(format!("field '{name}' does not match the mesh"));
        }
    }
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "tedfem output");
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", mesh.n_nodes());
    for p in &mesh.nodes {
        let _ = writeln!(s, "{} {} 0.0", p[0], p[1]);
    }
    let k = mesh.kind().nodes_per_cell();
    let _ = writeln!(s, "CELLS {} {}", mesh.n_cells(), mesh.n_cells() * (k + 1));
    for c in 0..mesh.n_cells() {
        let _ = write!(s, "{k}");
        for &n in mesh.cell_nodes(c) {
            let _ = write!(s, " {n}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "CELL_TYPES {}", mesh.n_cells());
    let vtk_type = match mesh.kind() {
        CellKind::Triangle => 5,
        CellKind::Quadrilateral => 9,
    };
    for _ in 0..mesh.n_cells() {
        let _ = writeln!(s, "{vtk_type}");
    }
    if !fields.is_empty() {
        let _ = writeln!(s, "POINT_DATA {}", mesh.n_nodes());
        for (name, f) in fields {
            match f.kind {
                FieldKind::Scalar => {
                    let _ = writeln!(s, "SCALARS {name} double 1");
                    let _ = writeln!(s, "LOOKUP_TABLE default");
                    for v in &f.coeffs {
                        let _ = writeln!(s, "{v}");
                    }
                }
                FieldKind::Vector => {
                    let _ = writeln!(s, "VECTORS {name} double");
                    for i in 0..f.n_nodes() {
                        let _ = writeln!(s, "{} {} 0.0", f.coeffs[2 * i], f.coeffs[2 * i + 1]);
                    }
                }
            }
        }
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Dumps nodal values as CSV: `x,y,<field>...` with one row per node.
pub fn write_nodal_csv(path: &Path, mesh: &Mesh, fields: &[(&str, &Field)]) -> Result<()> {
    let mut s = String::from("x,y");
    for (name, f) in fields {
        if f.n_nodes() != mesh.n_nodes() {
            return invalid(format!("field '{name}' does not match the mesh"));
        }
        match f.kind {
            FieldKind::Scalar => {
                let _ = write!(s, ",{name}");
            }
            FieldKind::Vector => {
                let _ = write!(s, ",{name}_x,{name}_y");
            }
        }
    }
    s.push('\n');
    for (i, p) in mesh.nodes.iter().enumerate() {
        let _ = write!(s, "{},{}", p[0], p[1]);
        for (_, f) in fields {
            match f.kind {
                FieldKind::Scalar => {
                    let _ = write!(s, ",{}", f.coeffs[i]);
                }
                FieldKind::Vector => {
                    let _ = write!(s, ",{},{}", f.coeffs[2 * i], f.coeffs[2 * i + 1]);
                }
            }
        }
        s.push('\n');
    }
    std::fs::write(path, s)?;
    Ok(())
}
