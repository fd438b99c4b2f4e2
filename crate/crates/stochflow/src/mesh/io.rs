use std::fmt::Write as _;
use std::path::Path;

use super::{build_simplicial, MeshError, MeshGeometry, Vec3};

/// Raw contents of a `dmeshv1` file.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshFile {
    pub dim: usize,
    pub nodes: Vec<Vec3>,
    pub cells: Vec<Vec<usize>>,
}

impl MeshFile {
    pub fn build(&self) -> Result<MeshGeometry, MeshError> {
        build_simplicial(&self.nodes, &self.cells, self.dim)
    }
}

/// Parses the text format: `dmeshv1 <dim>`, `<node_count> <cell_count>`,
/// node coordinates, then 0-based vertex tuples. Blank lines and `#` comments are skipped.
pub fn parse_mesh_file(text: &str) -> Result<MeshFile, MeshError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let err = |line: usize, msg: String| MeshError::Parse { line, msg };

    let (ln, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let mut h = header.split_whitespace();
    if h.next() != Some("dmeshv1") {
        return Err(err(ln, "expected header `dmeshv1 <dim>`".into()));
    }
    let dim: usize = h
        .next()
        .and_then(|d| d.parse().ok())
        .filter(|d| *d == 2 || *d == 3)
        .ok_or_else(|| err(ln, "dimension must be 2 or 3".into()))?;
    if h.next().is_some() {
        return Err(err(ln, "trailing tokens after dimension".into()));
    }

    let (ln, counts) = lines.next().ok_or_else(|| err(ln + 1, "missing counts line".into()))?;
    let nums: Vec<usize> = counts
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| err(ln, format!("bad count `{t}`"))))
        .collect::<Result<_, _>>()?;
    let [nn, nc] = nums[..] else {
        return Err(err(ln, "expected `<node_count> <cell_count>`".into()));
    };

    let mut nodes = Vec::with_capacity(nn);
    let mut last = ln;
    for _ in 0..nn {
        let (ln, l) = lines.next().ok_or_else(|| err(last + 1, "missing node line".into()))?;
        last = ln;
        let xs: Vec<f64> = l
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| err(ln, format!("bad coordinate `{t}`"))))
            .collect::<Result<_, _>>()?;
        if xs.len() != dim || xs.iter().any(|x| !x.is_finite()) {
            return Err(err(ln, format!("expected {dim} finite coordinates")));
        }
        nodes.push(Vec3::new(xs[0], xs[1], if dim == 3 { xs[2] } else { 0.0 }));
    }
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (ln, l) = lines.next().ok_or_else(|| err(last + 1, "missing cell line".into()))?;
        last = ln;
        let ids: Vec<usize> = l
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| err(ln, format!("bad vertex index `{t}`"))))
            .collect::<Result<_, _>>()?;
        if ids.len() != dim + 1 {
            return Err(err(ln, format!("expected {} vertex indices", dim + 1)));
        }
        if let Some(bad) = ids.iter().find(|&&k| k >= nn) {
            return Err(err(ln, format!("vertex index {bad} out of range")));
        }
        cells.push(ids);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(err(ln, "unexpected content after the last cell".into()));
    }
    Ok(MeshFile { dim, nodes, cells })
}

pub fn read_mesh_file(path: &Path) -> Result<MeshFile, MeshError> {
    let text = std::fs::read_to_string(path).map_err(|e| MeshError::Io(format!("{}: {e}", path.display())))?;
    parse_mesh_file(&text)
}

pub fn write_mesh_file(file: &MeshFile) -> String {
    let mut s = format!("dmeshv1 {}\n{} {}\n", file.dim, file.nodes.len(), file.cells.len());
    for p in &file.nodes {
        if file.dim == 2 {
            let _ = writeln!(s, "{:.17e} {:.17e}", p.x, p.y);
        } else {
            let _ = writeln!(s, "{:.17e} {:.17e} {:.17e}", p.x, p.y, p.z);
        }
    }
    for c in &file.cells {
        let ids: Vec<String> = c.iter().map(|k| k.to_string()).collect();
        let _ = writeln!(s, "{}", ids.join(" "));
    }
    s
}
