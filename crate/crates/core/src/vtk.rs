//! Legacy ASCII VTK output of cell fields.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::vec3::Vec3;

/// Writes an unstructured grid of triangles (cell type 5) with the scalar
/// cell data `u`.
pub fn write_vtk(mesh: &TriMesh, positions: &[Vec3], field: &[f64], mut w: impl Write) -> Result<()> {
    if field.is_empty() {
        return Err(Error::Parameter("empty field".into()));
    }
    if field.len() != mesh.num_cells() || positions.len() != mesh.num_vertices() {
        return Err(Error::Parameter(format!(
            "{} values and {} positions for a mesh with {} cells and {} vertices",
            field.len(),
            positions.len(),
            mesh.num_cells(),
            mesh.num_vertices()
        )));
    }
    let nc = mesh.num_cells();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "surffv cell field")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", positions.len())?;
    for p in positions {
        writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
    }
    writeln!(w, "CELLS {} {}", nc, 4 * nc)?;
    for t in mesh.triangles() {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(w, "CELL_TYPES {nc}")?;
    for _ in 0..nc {
        writeln!(w, "5")?;
    }
    writeln!(w, "CELL_DATA {nc}")?;
    writeln!(w, "SCALARS u double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for v in field {
        writeln!(w, "{v}")?;
    }
    Ok(())
}

pub fn write_vtk_frame(mesh: &TriMesh, positions: &[Vec3], field: &[f64], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_vtk(mesh, positions, field, &mut w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_icosphere;

    #[test]
    fn twenty_cells() {
        let m = build_icosphere(0).unwrap();
        let vals: Vec<f64> = (0..20).map(|k| k as f64 * 0.5).collect();
        let mut a = Vec::new();
        write_vtk(&m, m.vertices(), &vals, &mut a).unwrap();
        let s = String::from_utf8(a.clone()).unwrap();
        assert!(s.contains("CELL_DATA 20\nSCALARS u double 1\nLOOKUP_TABLE default\n"));
        let tail = s.split("LOOKUP_TABLE default\n").nth(1).unwrap();
        assert_eq!(tail.lines().count(), 20);
        let mut b = Vec::new();
        write_vtk(&m, m.vertices(), &vals, &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_field_rejected() {
        let m = build_icosphere(0).unwrap();
        assert!(write_vtk(&m, m.vertices(), &[], Vec::new()).is_err());
        assert!(write_vtk(&m, m.vertices(), &[1.0], Vec::new()).is_err());
    }
}
