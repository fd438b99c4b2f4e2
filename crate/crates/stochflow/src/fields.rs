//! Velocity fields in the constrained space `S` and general sparse matrices.
//!
//! A [`VelocityField`] stores one flux `F_ij = 2 Ω_i A_ij` per interior face,
//! oriented as the face is stored. Reading `A_ji` negates the same scalar, so
//! `Ω_i A_ij + Ω_j A_ji = 0` holds bit for bit.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::calculus::Form0;
use crate::flat;
use crate::linalg::{LinAlgError, SparseLu, Triplets};
use crate::mesh::{MeshGeometry, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("operation needs a two-dimensional mesh")]
    NotTwoDimensional,
    #[error("field does not belong to this mesh: {0}")]
    MeshMismatch(String),
    #[error("entry ({0}, {1}) lies more than two cells apart")]
    SupportExceeded(usize, usize),
    #[error("projection needs two-away flat values, defined here only on regular grids")]
    UnsupportedProjection,
    #[error("degenerate dual edge on face {0}: the flat-weighted Gram matrix is singular")]
    DegenerateDual(usize),
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    LinAlg(#[from] LinAlgError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField {
    pub flux: Vec<f64>,
}

impl VelocityField {
    pub fn zeros(mesh: &MeshGeometry) -> Self {
        VelocityField { flux: vec![0.0; mesh.face_count()] }
    }

    pub fn from_flux(flux: Vec<f64>) -> Self {
        VelocityField { flux }
    }

    pub fn check(&self, mesh: &MeshGeometry) -> Result<(), FieldError> {
        if self.flux.len() != mesh.face_count() {
            return Err(FieldError::MeshMismatch(format!(
                "{} fluxes for {} faces",
                self.flux.len(),
                mesh.face_count()
            )));
        }
        Ok(())
    }

    /// `A_ij`, zero unless `i` and `j` share a face.
    pub fn a(&self, mesh: &MeshGeometry, i: usize, j: usize) -> f64 {
        match mesh.link(i, j) {
            Some(l) => l.sign * self.flux[l.face] / (2.0 * mesh.volume(i)),
            None => 0.0,
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        VelocityField { flux: self.flux.iter().map(|f| f * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        VelocityField { flux: self.flux.iter().zip(&other.flux).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        VelocityField { flux: self.flux.iter().zip(&other.flux).map(|(a, b)| a - b).collect() }
    }

    pub fn support_size(&self) -> usize {
        self.flux.iter().filter(|f| **f != 0.0).count()
    }

    pub fn max_abs(&self) -> f64 {
        self.flux.iter().fold(0.0, |m, f| m.max(f.abs()))
    }

    pub fn to_matrix(&self, mesh: &MeshGeometry) -> GeneralMatrixField {
        let mut rows = vec![BTreeMap::new(); mesh.cell_count()];
        for (f, face) in mesh.faces().iter().enumerate() {
            let [i, j] = face.cells;
            if self.flux[f] != 0.0 {
                rows[i].insert(j, self.flux[f] / (2.0 * mesh.volume(i)));
                rows[j].insert(i, -self.flux[f] / (2.0 * mesh.volume(j)));
            }
        }
        GeneralMatrixField { rows, omega_antisymmetric: true }
    }
}

/// Anything that can enumerate its nonzero entries `(i, j, X_ij)`.
pub trait MatrixEntries {
    fn for_each_entry(&self, mesh: &MeshGeometry, f: &mut dyn FnMut(usize, usize, f64));
}

impl MatrixEntries for VelocityField {
    fn for_each_entry(&self, mesh: &MeshGeometry, f: &mut dyn FnMut(usize, usize, f64)) {
        for (k, face) in mesh.faces().iter().enumerate() {
            let [i, j] = face.cells;
            f(i, j, self.flux[k] / (2.0 * mesh.volume(i)));
            f(j, i, -self.flux[k] / (2.0 * mesh.volume(j)));
        }
    }
}

impl MatrixEntries for GeneralMatrixField {
    fn for_each_entry(&self, _mesh: &MeshGeometry, f: &mut dyn FnMut(usize, usize, f64)) {
        for (i, row) in self.rows.iter().enumerate() {
            for (&j, &v) in row {
                f(i, j, v);
            }
        }
    }
}

/// Sparse matrix supported on cell pairs at most two faces apart.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralMatrixField {
    pub rows: Vec<BTreeMap<usize, f64>>,
    pub omega_antisymmetric: bool,
}

impl GeneralMatrixField {
    pub fn zeros(n: usize) -> Self {
        GeneralMatrixField { rows: vec![BTreeMap::new(); n], omega_antisymmetric: true }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i].get(&j).copied().unwrap_or(0.0)
    }

    pub fn cell_count(&self) -> usize {
        self.rows.len()
    }

    /// Largest violation of `Ω_i X_ij = −Ω_j X_ji`.
    pub fn omega_asymmetry(&self, mesh: &MeshGeometry) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, row) in self.rows.iter().enumerate() {
            for (&j, &v) in row {
                let r = mesh.volume(i) * v + mesh.volume(j) * self.get(j, i);
                worst = worst.max(r.abs());
            }
        }
        worst
    }

    /// Rejects entries between cells more than two faces apart.
    pub fn check_support(&self, mesh: &MeshGeometry) -> Result<(), FieldError> {
        for (i, row) in self.rows.iter().enumerate() {
            let reach = within_two(mesh, i);
            if let Some(&j) = row.keys().find(|j| !reach.contains(j)) {
                return Err(FieldError::SupportExceeded(i, j));
            }
        }
        Ok(())
    }
}

pub(crate) fn within_two(mesh: &MeshGeometry, i: usize) -> BTreeSet<usize> {
    let mut s = BTreeSet::from([i]);
    for l in mesh.neighbors(i) {
        s.insert(l.cell);
        for m in mesh.neighbors(l.cell) {
            s.insert(m.cell);
        }
    }
    s
}

/// Samples the streamfunction at primal vertices.
pub fn sample_streamfunction(mesh: &MeshGeometry, psi: impl Fn(&Vec3) -> f64) -> Vec<f64> {
    mesh.nodes().iter().map(psi).collect()
}

/// Fluxes `F_ij = ψ(end) − ψ(start)` along each primal edge, plus the flux of a
/// uniform background velocity (whose streamfunction is not periodic).
///
/// Values are rounded to a common dyadic grid first, so every cell's flux sum
/// telescopes to exactly zero in floating point.
pub fn discretize_from_streamfunction(
    mesh: &MeshGeometry,
    psi: &[f64],
    mean_velocity: Vec3,
) -> Result<VelocityField, FieldError> {
    if mesh.dim() != 2 {
        return Err(FieldError::NotTwoDimensional);
    }
    if psi.len() != mesh.node_count() {
        return Err(FieldError::MeshMismatch(format!(
            "{} streamfunction values for {} nodes",
            psi.len(),
            mesh.node_count()
        )));
    }
    let periodic = mesh.period().is_some();
    let u = mean_velocity;
    let node_value = |k: usize| {
        if periodic {
            psi[k]
        } else {
            let p = mesh.nodes()[k];
            psi[k] + u.x * p.y - u.y * p.x
        }
    };
    let values: Vec<f64> = (0..mesh.node_count()).map(node_value).collect();
    let mean: Vec<f64> = mesh
        .faces()
        .iter()
        .map(|f| if periodic { u.x * f.edge.y - u.y * f.edge.x } else { 0.0 })
        .collect();
    let big = values.iter().chain(&mean).fold(0.0f64, |m, v| m.max(v.abs()));
    let q = quantum(big);
    let round = |v: f64| (v / q).round() * q;
    let values: Vec<f64> = values.into_iter().map(round).collect();
    let flux = mesh
        .faces()
        .iter()
        .zip(&mean)
        .map(|(f, &m)| (values[f.nodes[1]] - values[f.nodes[0]]) + round(m))
        .collect();
    Ok(VelocityField { flux })
}

/// Power of two such that every value of magnitude ≤ `big` is a multiple of it
/// with at most 48 significant bits, leaving headroom for exact sums of a few terms.
fn quantum(big: f64) -> f64 {
    if big == 0.0 {
        return 1.0;
    }
    let e = big.log2().ceil() as i32;
    2f64.powi(e - 48)
}

/// `A_ij = (v(x_ij)·n_ij)|S_ij| / (2Ω_i)` sampled at face barycentres.
pub fn discretize_from_face_samples(mesh: &MeshGeometry, v: impl Fn(&Vec3) -> Vec3) -> VelocityField {
    VelocityField {
        flux: mesh.faces().iter().map(|f| v(&f.barycenter).dot(&f.normal) * f.area).collect(),
    }
}

/// `(div A)_i = Σ_j A_ij`.
pub fn divergence(mesh: &MeshGeometry, a: &VelocityField) -> Form0 {
    (0..mesh.cell_count())
        .map(|i| {
            let s: f64 = mesh.neighbors(i).iter().map(|l| l.sign * a.flux[l.face]).sum();
            s / (2.0 * mesh.volume(i))
        })
        .collect()
}

pub fn max_divergence(mesh: &MeshGeometry, a: &VelocityField) -> f64 {
    divergence(mesh, a).iter().fold(0.0, |m, d| m.max(d.abs()))
}

fn product(x: &GeneralMatrixField, y: &GeneralMatrixField) -> Vec<BTreeMap<usize, f64>> {
    x.rows
        .iter()
        .map(|row| {
            let mut out = BTreeMap::new();
            for (&k, &xv) in row {
                for (&j, &yv) in &y.rows[k] {
                    *out.entry(j).or_insert(0.0) += xv * yv;
                }
            }
            out
        })
        .collect()
}

/// `[A, B] = AB − BA`.
pub fn commutator(
    mesh: &MeshGeometry,
    a: &GeneralMatrixField,
    b: &GeneralMatrixField,
) -> Result<GeneralMatrixField, FieldError> {
    let n = mesh.cell_count();
    if a.cell_count() != n || b.cell_count() != n {
        return Err(FieldError::MeshMismatch("commutator operands".into()));
    }
    let ab = product(a, b);
    let ba = product(b, a);
    let rows = ab
        .into_iter()
        .zip(ba)
        .map(|(mut r, s)| {
            for (j, v) in s {
                *r.entry(j).or_insert(0.0) -= v;
            }
            r.retain(|_, v| *v != 0.0);
            r
        })
        .collect();
    let out = GeneralMatrixField {
        rows,
        omega_antisymmetric: a.omega_antisymmetric && b.omega_antisymmetric,
    };
    out.check_support(mesh)?;
    Ok(out)
}

pub fn commutator_s(mesh: &MeshGeometry, a: &VelocityField, b: &VelocityField) -> GeneralMatrixField {
    commutator(mesh, &a.to_matrix(mesh), &b.to_matrix(mesh)).expect("S fields commute within two cells")
}

/// Inner product used by the projection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProjectionMetric {
    /// `⟨⟨Z♭, ·⟩⟩`, the metric of the weak advection equation.
    Flat,
    /// Plain `Σ Ω_i X_ij Z_ij` on adjacent entries; for experiments only.
    Frobenius,
}

/// Solves `min ½ Σ w_f (F_f)² − Σ b_f F_f` over divergence-free fluxes.
///
/// `weights` is the diagonal Gram matrix in flux coordinates and `rhs` holds the
/// pairings `b_f` of each face basis field against the target.
pub fn constrained_gram_solve(
    mesh: &MeshGeometry,
    weights: &[f64],
    rhs: &[f64],
) -> Result<VelocityField, FieldError> {
    let n = mesh.cell_count();
    if let Some(f) = weights.iter().position(|w| *w <= 0.0) {
        return Err(FieldError::DegenerateDual(f));
    }
    // F = W⁻¹(b + Dᵀλ) with D W⁻¹ Dᵀ λ = −D W⁻¹ b; λ_0 fixes the constant mode.
    let mut t = Triplets::new(n);
    let mut r = vec![0.0; n];
    for (f, face) in mesh.faces().iter().enumerate() {
        let [i, j] = face.cells;
        let c = 1.0 / weights[f];
        // (D)_{i f} = +1, (D)_{j f} = −1
        for (row, s) in [(i, 1.0), (j, -1.0)] {
            if row == 0 {
                continue;
            }
            t.push(row, i, s * c);
            t.push(row, j, -s * c);
            r[row] -= s * c * rhs[f];
        }
    }
    t.push(0, 0, 1.0);
    r[0] = 0.0;
    let lambda = SparseLu::factor(&t)?.solve(&r)?;
    let flux = mesh
        .faces()
        .iter()
        .enumerate()
        .map(|(f, face)| (rhs[f] + lambda[face.cells[0]] - lambda[face.cells[1]]) / weights[f])
        .collect();
    Ok(VelocityField { flux })
}

/// Projection onto `S`: the divergence-free `Y` with `⟨⟨Z♭, Y − X⟩⟩ = 0` for all `Z ∈ S`.
///
/// Pairing `Z♭` against two-away entries of `X` uses the full regular-grid flat,
/// so non-adjacent support is accepted only on regular grids.
pub fn project_to_s(
    mesh: &MeshGeometry,
    x: &GeneralMatrixField,
    metric: ProjectionMetric,
) -> Result<VelocityField, FieldError> {
    let nf = mesh.face_count();
    let mut rhs = vec![0.0; nf];
    let weights: Vec<f64> = match metric {
        ProjectionMetric::Flat => mesh.faces().iter().map(|f| f.hodge()).collect(),
        ProjectionMetric::Frobenius => mesh
            .faces()
            .iter()
            .map(|f| 0.25 * (1.0 / mesh.volume(f.cells[0]) + 1.0 / mesh.volume(f.cells[1])))
            .collect(),
    };
    for (i, row) in x.rows.iter().enumerate() {
        for (&j, &v) in row {
            let vol = mesh.volume(i) * v;
            if let Some(l) = mesh.link(i, j) {
                // Z_ij = s/(2Ω_i) for the face basis field; Z♭_ij = s·hodge
                let coef = match metric {
                    ProjectionMetric::Flat => l.sign * mesh.face(l.face).hodge(),
                    ProjectionMetric::Frobenius => l.sign / (2.0 * mesh.volume(i)),
                };
                rhs[l.face] += vol * coef;
            } else if metric == ProjectionMetric::Flat {
                if mesh.regular().is_none() {
                    return Err(FieldError::UnsupportedProjection);
                }
                for (face, coef) in flat::full_flat_basis_row(mesh, i, j) {
                    rhs[face] += vol * coef;
                }
            }
        }
    }
    constrained_gram_solve(mesh, &weights, &rhs)
}
