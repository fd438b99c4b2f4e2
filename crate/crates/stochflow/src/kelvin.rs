//! Closed discrete curves (dual 1-chains), their weak advection by a flow and
//! the circulation `⟨⟨A♭, Γ⟩⟩`.
//!
//! A curve is stored like a velocity: one value per face, where a step from
//! cell `i` to its neighbour `j` contributes `Ω_i Γ_ij = ½`, i.e. a flux of 1
//! in the direction of travel.
//!
//! Advection is the trapezoidal rule applied to `Γ̇ + [A, Γ] = 0` tested
//! against every `X ∈ S`, using `⟨⟨X♭, [A, Γ]⟩⟩ = −⟨⟨dX♭, A, Γ⟩⟩`:
//!
//! ```text
//! ⟨⟨X♭, Γ' − Γ⟩⟩/τ = ½ ⟨⟨dX♭, A_k, Γ⟩⟩ + ½ ⟨⟨dX♭, A_{k+1}, Γ'⟩⟩   for all X ∈ S
//! ```
//!
//! together with `Γ' ∈ S`. This is a linear saddle system in `(Γ', λ)` whose
//! matrix depends only on `A_{k+1}`, so one factorisation serves every curve.

use std::collections::HashSet;

use thiserror::Error;

use crate::fields::VelocityField;
use crate::flat::pair_flat;
use crate::linalg::{SparseLu, Triplets};
use crate::mesh::MeshGeometry;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KelvinError {
    #[error("cells {from} and {to} are not adjacent")]
    NonAdjacentStep { from: usize, to: usize },
    #[error("loop does not close: last cell {last} is not adjacent to first cell {first}")]
    OpenLoop { first: usize, last: usize },
    #[error("directed step {from} -> {to} appears twice")]
    RepeatedDirectedPair { from: usize, to: usize },
    #[error("cell {0} is out of range")]
    CellOutOfRange(usize),
    #[error("field does not belong to this mesh: {0}")]
    MeshMismatch(String),
    #[error("curve advection solve failed: {0}")]
    LinearSolve(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteCurve {
    pub chain: VelocityField,
    /// The cell loop the curve was built from (empty for general chains).
    pub cells: Vec<usize>,
}

impl DiscreteCurve {
    pub fn from_chain(chain: VelocityField) -> Self {
        DiscreteCurve { chain, cells: Vec::new() }
    }

    pub fn support_size(&self) -> usize {
        self.chain.support_size()
    }

    pub fn reversed(&self) -> Self {
        let mut cells = self.cells.clone();
        cells.reverse();
        DiscreteCurve { chain: self.chain.scaled(-1.0), cells }
    }
}

/// Chain for the closed path `cells[0] → cells[1] → … → cells[n-1] → cells[0]`.
/// A trailing copy of the first cell is accepted and ignored.
pub fn curve_from_cell_loop(mesh: &MeshGeometry, cells: &[usize]) -> Result<DiscreteCurve, KelvinError> {
    if let Some(&c) = cells.iter().find(|&&c| c >= mesh.cell_count()) {
        return Err(KelvinError::CellOutOfRange(c));
    }
    let mut path = cells.to_vec();
    if path.len() > 1 && path.first() == path.last() {
        path.pop();
    }
    let n = path.len();
    if n < 2 {
        let c = path.first().copied().unwrap_or(0);
        return Err(KelvinError::OpenLoop { first: c, last: c });
    }
    let mut flux = vec![0.0; mesh.face_count()];
    let mut seen = HashSet::new();
    for s in 0..n {
        let (from, to) = (path[s], path[(s + 1) % n]);
        let link = mesh.link(from, to).ok_or(if s + 1 == n {
            KelvinError::OpenLoop { first: path[0], last: from }
        } else {
            KelvinError::NonAdjacentStep { from, to }
        })?;
        if !seen.insert((from, to)) {
            return Err(KelvinError::RepeatedDirectedPair { from, to });
        }
        flux[link.face] += link.sign;
    }
    Ok(DiscreteCurve { chain: VelocityField::from_flux(flux), cells: path })
}

fn check(mesh: &MeshGeometry, a: &VelocityField, what: &str) -> Result<(), KelvinError> {
    if a.flux.len() != mesh.face_count() {
        return Err(KelvinError::MeshMismatch(format!(
            "{what} has {} entries for {} faces",
            a.flux.len(),
            mesh.face_count()
        )));
    }
    Ok(())
}

/// `C_Γ A = ⟨⟨A♭, Γ⟩⟩`.
pub fn circulation(mesh: &MeshGeometry, a: &VelocityField, curve: &DiscreteCurve) -> Result<f64, KelvinError> {
    check(mesh, a, "velocity")?;
    check(mesh, &curve.chain, "curve")?;
    Ok(pair_flat(mesh, a, &curve.chain))
}

/// Matrix `D(A)` with `(D(A) Γ)_g = ∂/∂X_g ⟨⟨dX♭, A, Γ⟩⟩`.
fn transport_matrix(mesh: &MeshGeometry, a: &VelocityField, scale: f64, out: &mut Triplets) {
    for t in mesh.triples() {
        let h = &mesh.hinges()[t.hinge];
        let aj = t.sign_ij * a.flux[t.face_ij];
        let ak = t.sign_ik * a.flux[t.face_ik];
        if aj == 0.0 && ak == 0.0 {
            continue;
        }
        for &(g, s) in &h.links {
            let c = scale * t.coeff * s * mesh.face(g).hodge() / (2.0 * mesh.volume(t.i));
            out.push(g, t.face_ik, c * t.sign_ik * aj);
            out.push(g, t.face_ij, -c * t.sign_ij * ak);
        }
    }
}

/// One factorised curve-advection step `A_k → A_{k+1}` of length `τ`.
pub struct CurveAdvector<'m> {
    mesh: &'m MeshGeometry,
    explicit: Triplets,
    lu: SparseLu,
    tau: f64,
}

impl<'m> CurveAdvector<'m> {
    pub fn new(
        mesh: &'m MeshGeometry,
        a_k: &VelocityField,
        a_next: &VelocityField,
        tau: f64,
    ) -> Result<Self, KelvinError> {
        check(mesh, a_k, "A_k")?;
        check(mesh, a_next, "A_next")?;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(KelvinError::LinearSolve(format!("time step must be positive, got {tau}")));
        }
        let nf = mesh.face_count();
        let n = nf + mesh.cell_count();
        let mut explicit = Triplets::new(nf);
        transport_matrix(mesh, a_k, 0.5, &mut explicit);
        let mut m = Triplets::new(n);
        for (f, face) in mesh.faces().iter().enumerate() {
            m.push_structural(f, f, face.hodge() / tau);
            let [i, j] = face.cells;
            m.push(f, nf + j, 1.0);
            m.push(f, nf + i, -1.0);
        }
        transport_matrix(mesh, a_next, -0.5, &mut m);
        m.push(nf, nf, 1.0);
        for i in 1..mesh.cell_count() {
            for l in mesh.neighbors(i) {
                m.push(nf + i, l.face, l.sign);
            }
        }
        let lu = SparseLu::factor(&m).map_err(|e| KelvinError::LinearSolve(e.to_string()))?;
        Ok(CurveAdvector { mesh, explicit, lu, tau })
    }

    pub fn advect(&self, curve: &DiscreteCurve) -> Result<DiscreteCurve, KelvinError> {
        let mesh = self.mesh;
        check(mesh, &curve.chain, "curve")?;
        let nf = mesh.face_count();
        let mut rhs = self.explicit.mul(&curve.chain.flux);
        for (r, (g, face)) in rhs.iter_mut().zip(curve.chain.flux.iter().zip(mesh.faces())) {
            *r += face.hodge() * g / self.tau;
        }
        rhs.resize(nf + mesh.cell_count(), 0.0);
        let x = self.lu.solve(&rhs).map_err(|e| KelvinError::LinearSolve(e.to_string()))?;
        Ok(DiscreteCurve { chain: VelocityField::from_flux(x[..nf].to_vec()), cells: curve.cells.clone() })
    }
}

/// Advect a single curve; use [`CurveAdvector`] to share the factorisation.
pub fn advect_curve(
    mesh: &MeshGeometry,
    curve: &DiscreteCurve,
    a_k: &VelocityField,
    a_next: &VelocityField,
    tau: f64,
) -> Result<DiscreteCurve, KelvinError> {
    CurveAdvector::new(mesh, a_k, a_next, tau)?.advect(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{advection_term, Integrator, SimConfig};
    use crate::fields::{discretize_from_streamfunction, max_divergence, sample_streamfunction};
    use crate::flat::pair_dflat;
    use crate::mesh::{build_regular_grid, Boundary, Vec3};

    fn grid(n: usize, h: f64) -> MeshGeometry {
        build_regular_grid(n, n, h, Boundary::Periodic).unwrap()
    }

    fn swirl(m: &MeshGeometry, s: f64) -> VelocityField {
        let l = m.period().unwrap();
        let psi = sample_streamfunction(m, |p| {
            s * (2.0 * std::f64::consts::PI * p.x / l.x).sin() * (2.0 * std::f64::consts::PI * p.y / l.y).cos()
                + 0.3 * (4.0 * std::f64::consts::PI * p.y / l.y + 0.4).sin()
        });
        discretize_from_streamfunction(m, &psi, Vec3::new(0.1, 0.05, 0.0)).unwrap()
    }

    #[test]
    fn horizontal_loop_entries() {
        let m = grid(3, 1.0);
        let g = m.regular().unwrap();
        let c = curve_from_cell_loop(&m, &[g.cell(0, 0), g.cell(1, 0), g.cell(2, 0)]).unwrap();
        assert_eq!(c.support_size(), 3);
        for (a, b) in [(0, 1), (1, 2), (2, 0)] {
            assert_eq!(c.chain.a(&m, g.cell(a, 0), g.cell(b, 0)), 0.5);
            assert_eq!(c.chain.a(&m, g.cell(b, 0), g.cell(a, 0)), -0.5);
        }
        assert_eq!(max_divergence(&m, &c.chain), 0.0);
    }

    #[test]
    fn hairpin_and_errors() {
        let m = grid(3, 1.0);
        let hairpin = curve_from_cell_loop(&m, &[1, 2]).unwrap();
        assert_eq!(hairpin.support_size(), 0);
        assert_eq!(max_divergence(&m, &hairpin.chain), 0.0);
        assert_eq!(curve_from_cell_loop(&m, &[0, 4, 1]), Err(KelvinError::NonAdjacentStep { from: 0, to: 4 }));
        assert_eq!(curve_from_cell_loop(&m, &[0, 1, 4]), Err(KelvinError::OpenLoop { first: 0, last: 4 }));
        assert_eq!(curve_from_cell_loop(&m, &[0]), Err(KelvinError::OpenLoop { first: 0, last: 0 }));
        assert_eq!(
            curve_from_cell_loop(&m, &[0, 1, 0, 1]),
            Err(KelvinError::RepeatedDirectedPair { from: 0, to: 1 })
        );
        assert_eq!(curve_from_cell_loop(&m, &[0, 99]), Err(KelvinError::CellOutOfRange(99)));
        let closed = curve_from_cell_loop(&m, &[0, 1, 2, 0]).unwrap();
        assert_eq!(closed, curve_from_cell_loop(&m, &[0, 1, 2]).unwrap());
    }

    #[test]
    fn circulation_examples() {
        let m = grid(3, 1.0);
        let u = discretize_from_streamfunction(&m, &vec![0.0; m.node_count()], Vec3::x()).unwrap();
        let c = curve_from_cell_loop(&m, &[0, 1, 2]).unwrap();
        assert_eq!(circulation(&m, &u, &c).unwrap(), 3.0);
        assert_eq!(circulation(&m, &u, &c.reversed()).unwrap(), -3.0);
        assert_eq!(circulation(&m, &VelocityField::zeros(&m), &c).unwrap(), 0.0);
        let bad = VelocityField::from_flux(vec![0.0; 3]);
        assert!(matches!(circulation(&m, &bad, &c), Err(KelvinError::MeshMismatch(_))));
    }

    #[test]
    fn transport_matrix_is_the_gradient_of_the_pairing() {
        let m = grid(5, 0.3);
        let (a, gam) = (swirl(&m, 1.0), swirl(&m, -0.4));
        let mut d = Triplets::new(m.face_count());
        transport_matrix(&m, &a, 1.0, &mut d);
        let grad = d.mul(&gam.flux);
        for g in [0, 3, 11, 27] {
            let mut e = vec![0.0; m.face_count()];
            e[g] = 1.0;
            let want = pair_dflat(&m, &VelocityField::from_flux(e), &a, &gam);
            assert!((grad[g] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn advection_pairs_with_the_momentum_term() {
        // ⟨⟨A♭, [A, Γ]⟩⟩ computed two ways for divergence-free Γ
        let m = grid(6, 0.25);
        let (a, gam) = (swirl(&m, 1.0), swirl(&m, 0.7));
        let t: f64 = advection_term(&m, &a).iter().zip(&gam.flux).map(|(x, y)| x * y).sum();
        assert!((t - pair_dflat(&m, &a, &a, &gam)).abs() < 1e-12);
    }

    #[test]
    fn trivial_advections() {
        let m = grid(4, 0.5);
        let c = curve_from_cell_loop(&m, &[0, 1, 2, 3]).unwrap();
        let z = VelocityField::zeros(&m);
        let same = advect_curve(&m, &c, &z, &z, 0.1).unwrap();
        assert!(same.chain.sub(&c.chain).max_abs() < 1e-15);
        let a = swirl(&m, 1.0);
        let zero = advect_curve(&m, &DiscreteCurve::from_chain(z), &a, &a, 0.1).unwrap();
        assert_eq!(zero.chain.max_abs(), 0.0);
    }

    #[test]
    fn steady_uniform_flow_keeps_circulation() {
        let m = grid(8, 0.25);
        let u = discretize_from_streamfunction(&m, &vec![0.0; m.node_count()], Vec3::new(1.0, 0.5, 0.0)).unwrap();
        let g = m.regular().unwrap();
        let loop_cells: Vec<usize> = (0..8).map(|x| g.cell(x, 2)).collect();
        let mut c = curve_from_cell_loop(&m, &loop_cells).unwrap();
        let c0 = circulation(&m, &u, &c).unwrap();
        let adv = CurveAdvector::new(&m, &u, &u, 0.05).unwrap();
        for _ in 0..100 {
            c = adv.advect(&c).unwrap();
        }
        assert!((circulation(&m, &u, &c).unwrap() - c0).abs() <= 1e-10 * c0.abs());
        assert!(max_divergence(&m, &c.chain) < 1e-12);
    }

    #[test]
    fn drift_shrinks_with_the_step() {
        let m = grid(8, 0.5);
        let a0 = swirl(&m, 1.0);
        let g = m.regular().unwrap();
        let cells = [g.cell(1, 1), g.cell(2, 1), g.cell(3, 1), g.cell(3, 2), g.cell(2, 2), g.cell(1, 2)];
        let drift = |tau: f64, steps: usize| {
            let cfg = SimConfig { dt: tau, newton_tol: 1e-13, ..SimConfig::default() };
            let mut it = Integrator::new(&m, cfg).unwrap();
            let mut c = curve_from_cell_loop(&m, &cells).unwrap();
            let c0 = circulation(&m, &a0, &c).unwrap();
            let (mut a, mut p) = (a0.clone(), vec![0.0; m.cell_count()]);
            for _ in 0..steps {
                let (next, pn, _) = it.solve_step(&a, &p).unwrap();
                c = advect_curve(&m, &c, &a, &next, tau).unwrap();
                assert!(max_divergence(&m, &c.chain) < 1e-12);
                a = next;
                p = pn;
            }
            (circulation(&m, &a, &c).unwrap() - c0).abs()
        };
        let (e1, e2) = (drift(0.1, 5), drift(0.05, 10));
        assert!(e1 / e2 > 3.0, "{e1} {e2}");
    }
}
