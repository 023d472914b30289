//! Legacy ASCII VTK (3.0) unstructured-grid export.

use std::fmt::Write as _;
use std::path::Path;

use beltrami::{evaluate_cochain, Cochain, Result, SimplicialComplex};

/// Tetrahedral cell type in the legacy format.
const VTK_TETRA: u8 = 10;

/// Writes the mesh with each cochain evaluated at the vertices as a named
/// point vector field.
pub fn write_fields(
    path: &Path,
    complex: &SimplicialComplex,
    title: &str,
    fields: &[(&str, &Cochain)],
) -> Result<()> {
    let mut s = String::new();
    let nv = complex.n_vertices();
    let nt = complex.n_tets();
    // Writing into a String cannot fail.
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "{}", title.lines().next().unwrap_or("beltrami"));
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {nv} double");
    for v in complex.vertices() {
        let _ = writeln!(s, "{:.16e} {:.16e} {:.16e}", v[0], v[1], v[2]);
    }
    let _ = writeln!(s, "CELLS {nt} {}", 5 * nt);
    for t in complex.tets() {
        let _ = writeln!(s, "4 {} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        let _ = writeln!(s, "{VTK_TETRA}");
    }
    if !fields.is_empty() {
        let _ = writeln!(s, "POINT_DATA {nv}");
    }
    for (name, cochain) in fields {
        let _ = writeln!(s, "VECTORS {name} double");
        for &x in complex.vertices() {
            let v = evaluate_cochain(complex, cochain, x)?;
            let _ = writeln!(s, "{:.16e} {:.16e} {:.16e}", v[0], v[1], v[2]);
        }
    }
    std::fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use beltrami::{generate_mesh, interpolate_to_cochain, Domain};

    #[test]
    fn header_and_sections() {
        let c = generate_mesh(&Domain::Box { sides: [1.0; 3] }, 1).unwrap();
        let f = interpolate_to_cochain(&c, &|_x: [f64; 3]| [0.0, 0.0, 1.0], 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.vtk");
        write_fields(&path, &c, "test", &[("B", &f)]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# vtk DataFile Version 3.0");
        assert_eq!(lines[2], "ASCII");
        assert_eq!(lines[3], "DATASET UNSTRUCTURED_GRID");
        assert!(text.contains("CELLS 6 30"));
        assert!(text.contains("CELL_TYPES 6\n10\n"));
        assert!(text.contains("POINT_DATA 8\nVECTORS B double\n"));
        let last = lines.last().unwrap();
        let v: Vec<f64> = last.split_whitespace().map(|x| x.parse().unwrap()).collect();
        assert!((v[2] - 1.0).abs() < 1e-12 && v[0].abs() < 1e-12);
    }
}
