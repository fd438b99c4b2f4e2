//! Cell complexes with their circumcentric duals.
//!
//! A [`MeshGeometry`] is built once and then only read. It carries every
//! metric quantity the operators need: cell volumes, face measures, dual edge
//! lengths, the ring of cells around each hinge (a primal vertex in 2D, a
//! primal edge in 3D) and the corner-triple table used by the flat operator.

use std::collections::HashMap;

use nalgebra::Vector3;
use thiserror::Error;

mod io;
mod regular;
mod simplicial;

pub use io::{parse_mesh_file, read_mesh_file, write_mesh_file, MeshFile};
pub use regular::build_regular_grid;
pub use simplicial::{build_simplicial, build_simplicial_with, triangle_lattice, DualPolicy};

pub type Vec3 = Vector3<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    Wall,
}

impl Boundary {
    pub fn as_str(self) -> &'static str {
        match self {
            Boundary::Periodic => "periodic",
            Boundary::Wall => "wall",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("inverted or degenerate cells (non-positive volume): {0:?}")]
    InvertedCell(Vec<usize>),
    #[error("inconsistent orientation between cells: {0:?}")]
    InconsistentOrientation(Vec<(usize, usize)>),
    #[error("non-manifold complex: {0}")]
    NonManifold(String),
    #[error("non-Delaunay dual: cell pairs with dual edge length at or below threshold {threshold:e}: {pairs:?}")]
    NonDelaunay {
        threshold: f64,
        pairs: Vec<(usize, usize, f64)>,
    },
    #[error("mesh file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(String),
}

/// Interior face `S_ij` shared by `cells[0] = i` and `cells[1] = j`.
///
/// Quantities oriented by the pair use the direction i → j.
#[derive(Clone, Debug)]
pub struct Face {
    pub cells: [usize; 2],
    /// `|S_ij|`: edge length in 2D, triangle area in 3D.
    pub area: f64,
    /// `|e_ij|`: signed distance between circumcenters along the normal.
    pub dual_length: f64,
    pub normal: Vec3,
    pub barycenter: Vec3,
    /// Primal vertices of the face. In 2D `[start, end]` with cell i on the left.
    pub nodes: Vec<usize>,
    /// 2D only: end minus start of the primal edge, unwrapped across seams.
    pub edge: Vec3,
}

impl Face {
    /// Diagonal Hodge factor `|e_ij| / |S_ij|`.
    #[inline]
    pub fn hodge(&self) -> f64 {
        self.dual_length / self.area
    }
}

#[derive(Clone, Debug)]
pub struct BoundaryFace {
    pub cell: usize,
    pub area: f64,
    /// Outward unit normal.
    pub normal: Vec3,
    pub barycenter: Vec3,
}

/// Adjacency record stored per cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Link {
    pub cell: usize,
    pub face: usize,
    /// +1 when the face is stored as (owner → `cell`), −1 otherwise.
    pub sign: f64,
}

/// Cells incident to a primal hinge, ordered in the positive sense about it.
#[derive(Clone, Debug)]
pub struct Hinge {
    pub nodes: Vec<usize>,
    pub point: Vec3,
    /// Primal edge length in 3D, 1 in 2D.
    pub length: f64,
    pub ring: Vec<usize>,
    /// `(face, s)` for each consecutive pair `ring[t] → ring[t+1]`;
    /// `s = +1` when the face is stored in that direction.
    pub links: Vec<(usize, f64)>,
    pub closed: bool,
    /// `|S_e ∩ C_i|` for every ring cell.
    pub corners: Vec<f64>,
    /// `|S_e|`.
    pub dual_area: f64,
}

/// Cell `i` adjacent to `j` and `k` around one hinge; `j` follows `i` in the
/// positive sense and `k` precedes it, so `coeff` is `K_ijk` with `s_ijk = +1`.
#[derive(Clone, Copy, Debug)]
pub struct CornerTriple {
    pub hinge: usize,
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub coeff: f64,
    pub face_ij: usize,
    pub sign_ij: f64,
    pub face_ik: usize,
    pub sign_ik: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegularGrid {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub boundary: Boundary,
}

impl RegularGrid {
    #[inline]
    pub fn cell(&self, x: usize, y: usize) -> usize {
        x + self.nx * y
    }

    #[inline]
    pub fn coords(&self, c: usize) -> (usize, usize) {
        (c % self.nx, c / self.nx)
    }
}

#[derive(Clone, Debug)]
pub struct MeshGeometry {
    pub(crate) dim: usize,
    pub(crate) nodes: Vec<Vec3>,
    pub(crate) cells: Vec<Vec<usize>>,
    pub(crate) volumes: Vec<f64>,
    pub(crate) centers: Vec<Vec3>,
    pub(crate) faces: Vec<Face>,
    pub(crate) boundary_faces: Vec<BoundaryFace>,
    pub(crate) links: Vec<Vec<Link>>,
    pub(crate) hinges: Vec<Hinge>,
    pub(crate) triples: Vec<CornerTriple>,
    pub(crate) triple_index: HashMap<(usize, usize, usize), usize>,
    pub(crate) regular: Option<RegularGrid>,
    pub(crate) period: Option<Vec3>,
    pub(crate) eps_geom: f64,
    pub(crate) diameter: f64,
}

/// Summary numbers for mesh inspection.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshQuality {
    pub min_volume: f64,
    pub max_volume: f64,
    pub min_dual_length: f64,
    pub min_hodge: f64,
    pub max_hodge: f64,
    pub min_corner: f64,
    pub total_volume: f64,
}

impl MeshGeometry {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cell_count(&self) -> usize {
        self.volumes.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Vec3] {
        &self.nodes
    }

    /// Vertex indices of every cell (four corners counterclockwise for grids).
    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    #[inline]
    pub fn volume(&self, i: usize) -> f64 {
        self.volumes[i]
    }

    pub fn centers(&self) -> &[Vec3] {
        &self.centers
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    #[inline]
    pub fn face(&self, f: usize) -> &Face {
        &self.faces[f]
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.boundary_faces
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[Link] {
        &self.links[i]
    }

    pub fn link(&self, i: usize, j: usize) -> Option<Link> {
        self.links[i].iter().copied().find(|l| l.cell == j)
    }

    #[inline]
    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.link(i, j).is_some()
    }

    pub fn hinges(&self) -> &[Hinge] {
        &self.hinges
    }

    pub fn triples(&self) -> &[CornerTriple] {
        &self.triples
    }

    /// `K_ijk` for any ordering of a stored corner triple with middle cell `i`.
    pub fn k_coeff(&self, i: usize, j: usize, k: usize) -> Option<f64> {
        if let Some(&t) = self.triple_index.get(&(i, j, k)) {
            return Some(self.triples[t].coeff);
        }
        self.triple_index
            .get(&(i, k, j))
            .map(|&t| -self.triples[t].coeff)
    }

    /// Adds `delta` to one stored `K` coefficient. Test hook for checking that
    /// cross-checks notice a wrong coefficient; never needed otherwise.
    #[doc(hidden)]
    pub fn perturb_triple_coeff(&mut self, triple: usize, delta: f64) {
        self.triples[triple].coeff += delta;
    }

    pub fn triple_position(&self, i: usize, j: usize, k: usize) -> Option<(usize, f64)> {
        if let Some(&t) = self.triple_index.get(&(i, j, k)) {
            return Some((t, 1.0));
        }
        self.triple_index.get(&(i, k, j)).map(|&t| (t, -1.0))
    }

    pub fn regular(&self) -> Option<&RegularGrid> {
        self.regular.as_ref()
    }

    /// Periodic extents when the domain wraps.
    pub fn period(&self) -> Option<Vec3> {
        self.period
    }

    pub fn eps_geom(&self) -> f64 {
        self.eps_geom
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }

    /// Displacement from `a` to `b`, using the minimal image on periodic domains.
    pub fn displacement(&self, a: &Vec3, b: &Vec3) -> Vec3 {
        let mut d = b - a;
        if let Some(p) = self.period {
            for c in 0..3 {
                if p[c] > 0.0 {
                    d[c] -= p[c] * (d[c] / p[c]).round();
                }
            }
        }
        d
    }

    pub fn quality(&self) -> MeshQuality {
        let fold = |it: &mut dyn Iterator<Item = f64>, init: f64, f: fn(f64, f64) -> f64| {
            it.fold(init, f)
        };
        MeshQuality {
            min_volume: fold(&mut self.volumes.iter().copied(), f64::INFINITY, f64::min),
            max_volume: fold(&mut self.volumes.iter().copied(), 0.0, f64::max),
            min_dual_length: fold(
                &mut self.faces.iter().map(|f| f.dual_length),
                f64::INFINITY,
                f64::min,
            ),
            min_hodge: fold(&mut self.faces.iter().map(Face::hodge), f64::INFINITY, f64::min),
            max_hodge: fold(&mut self.faces.iter().map(Face::hodge), 0.0, f64::max),
            min_corner: fold(
                &mut self.hinges.iter().flat_map(|h| h.corners.iter().copied()),
                f64::INFINITY,
                f64::min,
            ),
            total_volume: self.total_volume(),
        }
    }

    /// Builds adjacency, hinge links and the corner-triple table from faces and rings.
    pub(crate) fn finish(&mut self) {
        let n = self.volumes.len();
        let mut links = vec![Vec::new(); n];
        for (f, face) in self.faces.iter().enumerate() {
            let [i, j] = face.cells;
            links[i].push(Link { cell: j, face: f, sign: 1.0 });
            links[j].push(Link { cell: i, face: f, sign: -1.0 });
        }
        for l in &mut links {
            l.sort_by_key(|l| l.cell);
        }
        self.links = links;

        for h in &mut self.hinges {
            let m = h.ring.len();
            let pairs = if h.closed { m } else { m.saturating_sub(1) };
            h.links = (0..pairs)
                .map(|t| {
                    let a = h.ring[t];
                    let b = h.ring[(t + 1) % m];
                    let l = self.links[a]
                        .iter()
                        .find(|l| l.cell == b)
                        .expect("ring neighbours share a face");
                    (l.face, l.sign)
                })
                .collect();
            h.dual_area = h.corners.iter().sum();
        }

        let scale = if self.dim == 2 { 2.0 } else { 8.0 / 3.0 };
        let mut triples = Vec::new();
        for (e, h) in self.hinges.iter().enumerate() {
            let m = h.ring.len();
            if m < 3 {
                continue;
            }
            let middles: Vec<usize> = if h.closed { (0..m).collect() } else { (1..m - 1).collect() };
            for t in middles {
                let i = h.ring[t];
                let j = h.ring[(t + 1) % m];
                let k = h.ring[(t + m - 1) % m];
                let lj = self.links[i].iter().find(|l| l.cell == j).unwrap();
                let lk = self.links[i].iter().find(|l| l.cell == k).unwrap();
                triples.push(CornerTriple {
                    hinge: e,
                    i,
                    j,
                    k,
                    coeff: scale * h.corners[t] / h.dual_area,
                    face_ij: lj.face,
                    sign_ij: lj.sign,
                    face_ik: lk.face,
                    sign_ik: lk.sign,
                });
            }
        }
        self.triple_index = triples
            .iter()
            .enumerate()
            .map(|(t, c)| ((c.i, c.j, c.k), t))
            .collect();
        self.triples = triples;
    }
}

/// The corner-triple table `(e; i, j, k, K_ijk)` of a mesh.
pub fn corner_triples(mesh: &MeshGeometry) -> &[CornerTriple] {
    mesh.triples()
}
