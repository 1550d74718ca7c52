//! Legacy ASCII VTK export of the reconstructed bulk fields: one triangle
//! per mesh cell with the cellwise polynomial sampled at the cell vertices
//! (points are duplicated across cells, so discontinuities survive).

use std::fmt::Write as _;

use hdg_multigrid::hdg::BulkField;
use hdg_multigrid::mesh::{cell_geometry, MeshLevel};

pub fn bulk_field_vtk(level: &MeshLevel, field: &BulkField, title: &str) -> String {
    let ncells = level.cells.len();
    let npoints = 3 * ncells;
    let mut s = String::new();
    writeln!(s, "# vtk DataFile Version 3.0").unwrap();
    writeln!(s, "{title}").unwrap();
    writeln!(s, "ASCII").unwrap();
    writeln!(s, "DATASET UNSTRUCTURED_GRID").unwrap();
    writeln!(s, "POINTS {npoints} double").unwrap();
    let mut u_vals = Vec::with_capacity(npoints);
    let mut q_vals = Vec::with_capacity(npoints);
    for c in 0..ncells {
        let geom = cell_geometry(level, c).expect("valid cell");
        for v in geom.verts {
            writeln!(s, "{} {} 0", v[0], v[1]).unwrap();
            u_vals.push(field.eval_u(level, c, v[0], v[1]));
            q_vals.push(field.eval_q(level, c, v[0], v[1]));
        }
    }
    writeln!(s, "CELLS {ncells} {}", 4 * ncells).unwrap();
    for c in 0..ncells {
        writeln!(s, "3 {} {} {}", 3 * c, 3 * c + 1, 3 * c + 2).unwrap();
    }
    writeln!(s, "CELL_TYPES {ncells}").unwrap();
    for _ in 0..ncells {
        writeln!(s, "5").unwrap();
    }
    writeln!(s, "POINT_DATA {npoints}").unwrap();
    writeln!(s, "SCALARS u double 1").unwrap();
    writeln!(s, "LOOKUP_TABLE default").unwrap();
    for u in &u_vals {
        writeln!(s, "{u}").unwrap();
    }
    writeln!(s, "VECTORS q double").unwrap();
    for q in &q_vals {
        writeln!(s, "{} {} 0", q[0], q[1]).unwrap();
    }
    s
}
