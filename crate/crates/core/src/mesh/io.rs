//! `TETMESH v1` ASCII format.
//!
//! ```text
//! TETMESH v1
//! <nv> <nt>
//! x y z        (nv lines)
//! i j k l      (nt lines, 0-based vertex ids)
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use super::SimplicialComplex;
use crate::error::{Error, Result};

const HEADER: &str = "TETMESH v1";

/// Serialises the complex. Coordinates carry 17 significant digits, so a
/// save/load round trip reproduces them bitwise.
pub fn write_mesh<W: Write>(complex: &SimplicialComplex, mut out: W) -> Result<()> {
    writeln!(out, "{HEADER}")?;
    writeln!(out, "{} {}", complex.n_vertices(), complex.n_tets())?;
    for v in complex.vertices() {
        writeln!(out, "{:.16e} {:.16e} {:.16e}", v[0], v[1], v[2])?;
    }
    for t in complex.tets() {
        writeln!(out, "{} {} {} {}", t[0], t[1], t[2], t[3])?;
    }
    Ok(())
}

pub fn save_mesh(complex: &SimplicialComplex, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_mesh(complex, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<SimplicialComplex> {
    let text = fs::read_to_string(path)?;
    parse_mesh(&text)
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

pub(crate) fn parse_mesh(text: &str) -> Result<SimplicialComplex> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    if header.trim_end() != HEADER {
        return Err(parse_err(1, format!("expected header `{HEADER}`, found `{header}`")));
    }
    let (ln, counts) = lines.next().ok_or_else(|| parse_err(2, "missing counts line"))?;
    let counts: Vec<usize> = counts
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| parse_err(ln, format!("bad count `{s}`"))))
        .collect::<Result<_>>()?;
    let [nv, nt] = counts[..] else {
        return Err(parse_err(ln, "counts line must hold `<nv> <nt>`"));
    };

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, line) = lines.next().ok_or_else(|| parse_err(0, "unexpected end of vertices"))?;
        let xyz: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| parse_err(ln, format!("bad coordinate `{s}`"))))
            .collect::<Result<_>>()?;
        let [x, y, z] = xyz[..] else {
            return Err(parse_err(ln, "vertex line must hold three coordinates"));
        };
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(parse_err(ln, "non-finite coordinate"));
        }
        vertices.push([x, y, z]);
    }
    let mut tets = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, line) = lines.next().ok_or_else(|| parse_err(0, "unexpected end of tets"))?;
        let ids: Vec<usize> = line
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| parse_err(ln, format!("bad vertex index `{s}`"))))
            .collect::<Result<_>>()?;
        let [a, b, c, d] = ids[..] else {
            return Err(parse_err(ln, "tet line must hold four vertex indices"));
        };
        if [a, b, c, d].iter().any(|&v| v >= nv) {
            return Err(parse_err(ln, format!("vertex index out of range (nv = {nv})")));
        }
        tets.push([a, b, c, d]);
    }
    if let Some((ln, extra)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(parse_err(ln, format!("trailing content `{extra}`")));
    }
    SimplicialComplex::from_tets(vertices, tets)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_version() {
        let r = parse_mesh("TETMESH v2\n0 0\n");
        assert!(matches!(r, Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn rejects_out_of_range_index() {
        let text = "TETMESH v1\n4 1\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n0 1 2 4\n";
        assert!(matches!(parse_mesh(text), Err(Error::Parse { line: 7, .. })));
    }

    #[test]
    fn rejects_truncated_file() {
        let text = "TETMESH v1\n4 1\n0 0 0\n1 0 0\n";
        assert!(matches!(parse_mesh(text), Err(Error::Parse { .. })));
    }

    #[test]
    fn repairs_negative_tet() {
        let text = "TETMESH v1\n4 1\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n0 2 1 3\n";
        let c = parse_mesh(text).unwrap();
        assert_eq!(c.tets()[0], [0, 2, 3, 1]);
        assert!(c.volumes()[0] > 0.0);
    }

    #[test]
    fn empty_path_is_io_error() {
        let c = parse_mesh("TETMESH v1\n4 1\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n0 1 2 3\n").unwrap();
        assert!(matches!(save_mesh(&c, ""), Err(Error::Io(_))));
    }
}
