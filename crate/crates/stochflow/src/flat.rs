//! The flat operator: adjacent values `A♭_ij = 2Ω_i A_ij |e_ij|/|S_ij|` and
//! the per-triple derivative `(dA♭)_ijk = K_ijk ω(e)`.

use thiserror::Error;

use crate::calculus::{dec_vorticity, Form1, Form2};
use crate::fields::{within_two, VelocityField};
use crate::mesh::MeshGeometry;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlatError {
    #[error("the full flat with two-away entries is defined on regular grids only")]
    NotRegular,
}

/// `A♭` on faces (oriented as stored), hinge vorticities and `dA♭` per corner triple.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatAssembly {
    pub adjacent: Vec<f64>,
    pub vorticity: Vec<f64>,
    /// Indexed like `mesh.triples()`.
    pub triple_values: Vec<f64>,
}

impl FlatAssembly {
    pub fn new(mesh: &MeshGeometry, a: &VelocityField) -> Self {
        let vorticity = dec_vorticity(mesh, a);
        let triple_values = mesh.triples().iter().map(|t| t.coeff * vorticity[t.hinge]).collect();
        FlatAssembly { adjacent: flat_adjacent(mesh, a), vorticity, triple_values }
    }

    pub fn adjacent_form(&self, mesh: &MeshGeometry) -> Form1 {
        Form1::from_faces(mesh, &self.adjacent)
    }

    pub fn triple_form(&self, mesh: &MeshGeometry) -> Form2 {
        let mut f = Form2::new();
        for (t, v) in mesh.triples().iter().zip(&self.triple_values) {
            f.add(t.i, t.j, t.k, *v);
        }
        f
    }
}

pub fn flat_adjacent(mesh: &MeshGeometry, a: &VelocityField) -> Vec<f64> {
    a.flux.iter().zip(mesh.faces()).map(|(f, face)| f * face.hodge()).collect()
}

pub fn d_flat_triples(mesh: &MeshGeometry, a: &VelocityField) -> Form2 {
    FlatAssembly::new(mesh, a).triple_form(mesh)
}

/// Coefficients `(face, c)` with `Z♭_ij = Σ c·F^Z_face` for a two-away pair
/// on a regular grid: `2h²` times the mean of `Z_ik + Z_kj` over common neighbours `k`.
pub(crate) fn full_flat_basis_row(mesh: &MeshGeometry, i: usize, j: usize) -> Vec<(usize, f64)> {
    let common: Vec<_> = mesh
        .neighbors(i)
        .iter()
        .filter_map(|lik| mesh.link(lik.cell, j).map(|lkj| (*lik, lkj)))
        .collect();
    let c = 1.0 / common.len() as f64;
    common
        .iter()
        .flat_map(|(lik, lkj)| [(lik.face, lik.sign * c), (lkj.face, lkj.sign * c)])
        .collect()
}

/// Full regular-grid flat: `2h²A_ij` on neighbours and, for two-away pairs,
/// `2h²` times the mean of `A_ik + A_kj` over common neighbours.
///
/// With two common neighbours this is `h² Σ_k (A_ik + A_kj)`; pairs two
/// apart along a grid line get `2h²(A_ik + A_kj)`.
pub fn flat_regular_full(mesh: &MeshGeometry, a: &VelocityField) -> Result<Form1, FlatError> {
    if mesh.regular().is_none() {
        return Err(FlatError::NotRegular);
    }
    let mut out = Form1::from_faces(mesh, &flat_adjacent(mesh, a));
    for i in 0..mesh.cell_count() {
        for j in within_two(mesh, i) {
            if j <= i || mesh.adjacent(i, j) {
                continue;
            }
            let v = full_flat_basis_row(mesh, i, j).iter().map(|&(f, c)| c * a.flux[f]).sum();
            out.set(i, j, v);
        }
    }
    Ok(out)
}

/// `⟨⟨A♭, B⟩⟩ = Σ_f F^A_f F^B_f |e_f|/|S_f|`.
pub fn pair_flat(mesh: &MeshGeometry, a: &VelocityField, b: &VelocityField) -> f64 {
    mesh.faces()
        .iter()
        .enumerate()
        .map(|(f, face)| a.flux[f] * b.flux[f] * face.hodge())
        .sum()
}

/// `⟨⟨dA♭, B, C⟩⟩`, summed directly over the corner triples.
pub fn pair_dflat(mesh: &MeshGeometry, a: &VelocityField, b: &VelocityField, c: &VelocityField) -> f64 {
    pair_dflat_with(mesh, &FlatAssembly::new(mesh, a), b, c)
}

pub fn pair_dflat_with(mesh: &MeshGeometry, fa: &FlatAssembly, b: &VelocityField, c: &VelocityField) -> f64 {
    mesh.triples()
        .iter()
        .zip(&fa.triple_values)
        .map(|(t, v)| {
            let (bj, bk) = (t.sign_ij * b.flux[t.face_ij], t.sign_ik * b.flux[t.face_ik]);
            let (cj, ck) = (t.sign_ij * c.flux[t.face_ij], t.sign_ik * c.flux[t.face_ik]);
            v * (bj * ck - bk * cj) / (2.0 * mesh.volume(t.i))
        })
        .sum()
}
