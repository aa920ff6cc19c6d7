//! Legacy ASCII VTK 4.2 unstructured grids with cell data.

use std::fmt::Write as _;

use brinkman_vem::analysis::CellAverage;
use brinkman_vem::mesh::PolygonalMesh;

const VTK_POLYGON: u8 = 7;

/// Polygons of `mesh` with the fields `velocity`, `speed`, `divergence` and
/// `pressure`, one value per cell.
pub fn to_vtk(mesh: &PolygonalMesh, cells: &[CellAverage], title: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 4.2");
    let _ = writeln!(out, "{}", title.lines().next().unwrap_or(""));
    let _ = writeln!(out, "ASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(out, "POINTS {} double", mesh.num_vertices());
    for p in mesh.vertices() {
        let _ = writeln!(out, "{:e} {:e} 0", p[0], p[1]);
    }
    let size: usize = mesh.cells().iter().map(|c| c.len() + 1).sum();
    let _ = writeln!(out, "CELLS {} {size}", mesh.num_cells());
    for cell in mesh.cells() {
        let ids: Vec<String> = cell.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(out, "{} {}", cell.len(), ids.join(" "));
    }
    let _ = writeln!(out, "CELL_TYPES {}", mesh.num_cells());
    for _ in 0..mesh.num_cells() {
        let _ = writeln!(out, "{VTK_POLYGON}");
    }
    let _ = writeln!(out, "CELL_DATA {}", mesh.num_cells());
    let _ = writeln!(out, "VECTORS velocity double");
    for c in cells {
        let _ = writeln!(out, "{:e} {:e} 0", c.velocity[0], c.velocity[1]);
    }
    for (name, get) in [
        ("speed", (|c: &CellAverage| c.speed) as fn(&CellAverage) -> f64),
        ("divergence", |c| c.divergence),
        ("pressure", |c| c.pressure),
    ] {
        let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for c in cells {
            let _ = writeln!(out, "{:e}", get(c));
        }
    }
    out
}
