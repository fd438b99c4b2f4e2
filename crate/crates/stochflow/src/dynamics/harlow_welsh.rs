//! Stand-alone stencil for `[A, A♭]_ij` on periodic square grids, written
//! from grid coordinates only (no hinge rings, no corner triples).
//!
//! ```text
//! [A, A♭]_ij = ½ Σ_{k∈N(j)} A_kj ω_ik s_ijk − ½ Σ_{l∈N(i)} A_il ω_lj s_lij + Q_j − Q_i
//! Q_i = 2h² Σ_l A_il²
//! ```
//!
//! `ω_ab` is the circulation around the grid node shared by diagonal
//! neighbours `a`, `b` (zero for any other pair) and `s` the turning sign of
//! the three cell centres.

use crate::fields::VelocityField;
use crate::mesh::{Boundary, MeshGeometry};

use super::DynamicsError;

const DIRS: [(isize, isize); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

struct Grid<'a> {
    mesh: &'a MeshGeometry,
    a: &'a VelocityField,
    nx: isize,
    ny: isize,
    h: f64,
}

impl Grid<'_> {
    fn cell(&self, x: isize, y: isize) -> usize {
        (x.rem_euclid(self.nx) + self.nx * y.rem_euclid(self.ny)) as usize
    }

    fn a(&self, (x0, y0): (isize, isize), (x1, y1): (isize, isize)) -> f64 {
        self.a.a(self.mesh, self.cell(x0, y0), self.cell(x1, y1))
    }

    /// Circulation `2h² Σ A` counterclockwise around the node at the
    /// lower-left corner of cell `(x, y)`.
    fn node_vorticity(&self, x: isize, y: isize) -> f64 {
        let ur = (x, y);
        let ul = (x - 1, y);
        let ll = (x - 1, y - 1);
        let lr = (x, y - 1);
        2.0 * self.h * self.h * (self.a(ur, ul) + self.a(ul, ll) + self.a(ll, lr) + self.a(lr, ur))
    }

    /// `ω` for cells at `p` and `p + d`.
    fn pair_vorticity(&self, p: (isize, isize), d: (isize, isize)) -> f64 {
        if d.0.abs() != 1 || d.1.abs() != 1 {
            return 0.0;
        }
        self.node_vorticity(p.0 + (d.0 + 1) / 2, p.1 + (d.1 + 1) / 2)
    }

    fn q(&self, p: (isize, isize)) -> f64 {
        let s: f64 = DIRS.iter().map(|d| self.a(p, (p.0 + d.0, p.1 + d.1)).powi(2)).sum();
        2.0 * self.h * self.h * s
    }
}

fn turn(a: (isize, isize), b: (isize, isize), c: (isize, isize)) -> f64 {
    let cross = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
    (cross.signum()) as f64
}

/// `[A, A♭]` on every face of a periodic regular grid, oriented as stored.
pub fn harlow_welsh_term(mesh: &MeshGeometry, a: &VelocityField) -> Result<Vec<f64>, DynamicsError> {
    let g = match mesh.regular() {
        Some(g) if g.boundary == Boundary::Periodic => *g,
        _ => return Err(DynamicsError::InvalidConfig("stencil needs a periodic regular grid".into())),
    };
    let grid = Grid { mesh, a, nx: g.nx as isize, ny: g.ny as isize, h: g.h };
    let mut out = Vec::with_capacity(mesh.face_count());
    for face in mesh.faces() {
        let (xi, yi) = g.coords(face.cells[0]);
        let i = (xi as isize, yi as isize);
        let dj = DIRS
            .iter()
            .copied()
            .find(|d| grid.cell(i.0 + d.0, i.1 + d.1) == face.cells[1])
            .expect("face joins grid neighbours");
        let j = (i.0 + dj.0, i.1 + dj.1);
        let mut v = grid.q(j) - grid.q(i);
        for e in DIRS {
            if e != (-dj.0, -dj.1) {
                let k = (j.0 + e.0, j.1 + e.1);
                let w = grid.pair_vorticity(i, (k.0 - i.0, k.1 - i.1));
                v += 0.5 * grid.a(k, j) * w * turn(i, j, k);
            }
            if e != dj {
                let l = (i.0 + e.0, i.1 + e.1);
                let w = grid.pair_vorticity(l, (j.0 - l.0, j.1 - l.1));
                v -= 0.5 * grid.a(i, l) * w * turn(l, i, j);
            }
        }
        out.push(v);
    }
    Ok(out)
}
