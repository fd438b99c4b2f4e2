//! Time integration of the discrete Euler equations.
//!
//! One step solves, for the unknown fluxes `F'` and pressure `p`,
//!
//! ```text
//! w_f (F'_f − F_f)/τ + ½(T(F) + T(F'))_f + p_j − p_i − ν L(½(F + F'))_f = 0
//! Σ_j F'_ij = 0 for every cell
//! ```
//!
//! where `w_f = |e_f|/|S_f|`, `T(A) = ι_A dA♭ + d ι_A A♭` and `L` is the dual
//! 1-form Laplacian. Newton's method runs on the joint flux/pressure system.

use thiserror::Error;

use crate::calculus::{dec_vorticity, Form0};
use crate::fields::{max_divergence, VelocityField};
use crate::flat::pair_flat;
use crate::linalg::{LinAlgError, PatternCache, SparseLu, Triplets};
use crate::mesh::MeshGeometry;

pub mod harlow_welsh;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid simulation parameter: {0}")]
    InvalidConfig(String),
    #[error("field does not belong to this mesh: {0}")]
    MeshMismatch(String),
    #[error("degenerate dual edge on face {0}")]
    DegenerateDual(usize),
    #[error("Newton did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("singular Jacobian: {0}")]
    SingularJacobian(String),
    #[error("linear solve failed: {0}")]
    LinearSolve(String),
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<DynamicsError>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JacobianMode {
    Full,
    /// Diagonal momentum block; the pressure block is still solved exactly.
    Diagonal,
}

impl JacobianMode {
    pub fn as_str(self) -> &'static str {
        match self {
            JacobianMode::Full => "full",
            JacobianMode::Diagonal => "diagonal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "full" => Some(JacobianMode::Full),
            "diagonal" => Some(JacobianMode::Diagonal),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PressureGauge {
    FixOneCell,
    ZeroMean,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub jacobian: JacobianMode,
    pub viscosity: f64,
    pub gauge: PressureGauge,
    pub steps: usize,
    pub output_every: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.01,
            newton_tol: 1e-10,
            max_newton_iters: 20,
            jacobian: JacobianMode::Full,
            viscosity: 0.0,
            gauge: PressureGauge::FixOneCell,
            steps: 100,
            output_every: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |m: &str| Err(DynamicsError::InvalidConfig(m.into()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.newton_tol > 0.0) {
            return bad("newton_tol must be positive");
        }
        if self.max_newton_iters == 0 {
            return bad("max_newton_iters must be at least 1");
        }
        if !(self.viscosity >= 0.0 && self.viscosity.is_finite()) {
            return bad("viscosity must be non-negative");
        }
        if self.output_every == 0 {
            return bad("output_every must be at least 1");
        }
        Ok(())
    }
}

/// Which terms of `T(A)` are assembled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdvectionForm {
    Full,
    /// Drops the gradient `d ι_A A♭`, which only shifts the pressure.
    WithoutGradient,
}

pub fn kinetic_energy(mesh: &MeshGeometry, a: &VelocityField) -> f64 {
    0.5 * pair_flat(mesh, a, a)
}

/// `(ι_A A♭)_i = Σ_j A_ij A♭_ij`.
pub fn contraction_potential(mesh: &MeshGeometry, a: &VelocityField) -> Form0 {
    let mut p = vec![0.0; mesh.cell_count()];
    for (f, face) in mesh.faces().iter().enumerate() {
        let e = a.flux[f] * a.flux[f] * face.hodge();
        p[face.cells[0]] += e;
        p[face.cells[1]] += e;
    }
    for (i, v) in p.iter_mut().enumerate() {
        *v /= 2.0 * mesh.volume(i);
    }
    p
}

/// `T(A)_ij = (ι_A dA♭)_ij + (d ι_A A♭)_ij` on every face, oriented as stored.
pub fn advection_term(mesh: &MeshGeometry, a: &VelocityField) -> Vec<f64> {
    advection_term_with(mesh, a, AdvectionForm::Full)
}

pub fn advection_term_with(mesh: &MeshGeometry, a: &VelocityField, form: AdvectionForm) -> Vec<f64> {
    let mut out = vec![0.0; mesh.face_count()];
    let omega = dec_vorticity(mesh, a);
    for t in mesh.triples() {
        let v = t.coeff * omega[t.hinge];
        if v == 0.0 {
            continue;
        }
        let c = t.sign_ij * t.sign_ik * v / (2.0 * mesh.volume(t.i));
        out[t.face_ik] += c * a.flux[t.face_ij];
        out[t.face_ij] -= c * a.flux[t.face_ik];
    }
    if form == AdvectionForm::Full {
        let p = contraction_potential(mesh, a);
        for (f, face) in mesh.faces().iter().enumerate() {
            out[f] += p[face.cells[1]] - p[face.cells[0]];
        }
    }
    out
}

/// Derivative of `scale · T(F)` with respect to `F`, pushed as structural entries.
pub fn advection_jacobian(
    mesh: &MeshGeometry,
    a: &VelocityField,
    form: AdvectionForm,
    scale: f64,
    out: &mut Triplets,
) {
    let omega = dec_vorticity(mesh, a);
    for t in mesh.triples() {
        let h = &mesh.hinges()[t.hinge];
        let v = t.coeff * omega[t.hinge];
        let c = scale * t.sign_ij * t.sign_ik / (2.0 * mesh.volume(t.i));
        let (fj, fk) = (a.flux[t.face_ij], a.flux[t.face_ik]);
        for &(g, s) in &h.links {
            let dv = t.coeff * s * mesh.face(g).hodge();
            out.push_structural(t.face_ik, g, c * dv * fj);
            out.push_structural(t.face_ij, g, -c * dv * fk);
        }
        out.push_structural(t.face_ik, t.face_ij, c * v);
        out.push_structural(t.face_ij, t.face_ik, -c * v);
    }
    if form == AdvectionForm::Full {
        for (f, face) in mesh.faces().iter().enumerate() {
            let [i, j] = face.cells;
            for (cell, sgn) in [(j, scale), (i, -scale)] {
                for l in mesh.neighbors(cell) {
                    let d = a.flux[l.face] * mesh.face(l.face).hodge() / mesh.volume(cell);
                    out.push_structural(f, l.face, sgn * d);
                }
            }
        }
    }
}

/// Closest divergence-free field in the energy norm: `F' = F − (p_j − p_i)/w`
/// with `p` from a cell Poisson problem. Used after sampling face fluxes of
/// an analytic velocity, whose cell sums are only approximately zero.
pub fn pressure_project(mesh: &MeshGeometry, a: &VelocityField) -> Result<VelocityField, DynamicsError> {
    if a.flux.len() != mesh.face_count() {
        return Err(DynamicsError::MeshMismatch(format!("{} fluxes for {} faces", a.flux.len(), mesh.face_count())));
    }
    if let Some(f) = mesh.faces().iter().position(|f| !(f.hodge() > 0.0)) {
        return Err(DynamicsError::DegenerateDual(f));
    }
    let n = mesh.cell_count();
    let mut t = Triplets::new(n);
    let mut rhs = vec![0.0; n];
    t.push(0, 0, 1.0);
    for i in 1..n {
        for l in mesh.neighbors(i) {
            let c = 1.0 / mesh.face(l.face).hodge();
            t.push(i, l.cell, c);
            t.push(i, i, -c);
            rhs[i] += l.sign * a.flux[l.face];
        }
    }
    let p = SparseLu::factor(&t)
        .and_then(|lu| lu.solve(&rhs))
        .map_err(|e| DynamicsError::LinearSolve(e.to_string()))?;
    let flux = mesh
        .faces()
        .iter()
        .zip(&a.flux)
        .map(|(face, f)| f - (p[face.cells[1]] - p[face.cells[0]]) / face.hodge())
        .collect();
    Ok(VelocityField { flux })
}

/// Dual 1-form Laplacian `−(dδ + δd)` acting on fluxes, returned as a face × face
/// matrix whose output is in flat (1-form) units.
pub fn dual_laplacian(mesh: &MeshGeometry) -> Triplets {
    let mut t = Triplets::new(mesh.face_count());
    for h in mesh.hinges() {
        if h.links.is_empty() || h.dual_area <= 0.0 {
            continue;
        }
        for &(f, sf) in &h.links {
            for &(g, sg) in &h.links {
                let v = -mesh.face(f).hodge() * sf * h.length * sg * mesh.face(g).hodge() / h.dual_area;
                t.push(f, g, v);
            }
        }
    }
    for (f, face) in mesh.faces().iter().enumerate() {
        let [i, j] = face.cells;
        for l in mesh.neighbors(j) {
            t.push(f, l.face, l.sign / mesh.volume(j));
        }
        for l in mesh.neighbors(i) {
            t.push(f, l.face, -l.sign / mesh.volume(i));
        }
    }
    t
}

/// `ν (Δ A♭)_ij` on every face.
pub fn viscosity_term(mesh: &MeshGeometry, a: &VelocityField, nu: f64) -> Vec<f64> {
    if nu == 0.0 {
        return vec![0.0; mesh.face_count()];
    }
    dual_laplacian(mesh).mul(&a.flux).into_iter().map(|v| nu * v).collect()
}

/// Momentum rows per face and constraint rows per cell; constraint row 0
/// holds the pressure gauge instead of the (redundant) divergence of cell 0.
#[derive(Clone, Debug, PartialEq)]
pub struct Residual {
    pub momentum: Vec<f64>,
    pub constraint: Vec<f64>,
}

impl Residual {
    pub fn norm_inf(&self) -> f64 {
        self.momentum.iter().chain(&self.constraint).fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn check_field(mesh: &MeshGeometry, a: &VelocityField) -> Result<(), DynamicsError> {
    if a.flux.len() != mesh.face_count() {
        return Err(DynamicsError::MeshMismatch(format!(
            "{} fluxes for {} faces",
            a.flux.len(),
            mesh.face_count()
        )));
    }
    Ok(())
}

fn gauge_value(mesh: &MeshGeometry, p: &[f64], gauge: PressureGauge) -> f64 {
    match gauge {
        PressureGauge::FixOneCell => p[0],
        PressureGauge::ZeroMean => {
            p.iter().zip(mesh.volumes()).map(|(a, b)| a * b).sum::<f64>() / mesh.total_volume()
        }
    }
}

/// Residual of one trapezoidal step.
pub fn residual(
    mesh: &MeshGeometry,
    a_k: &VelocityField,
    a_next: &VelocityField,
    p: &[f64],
    cfg: &SimConfig,
) -> Result<Residual, DynamicsError> {
    check_field(mesh, a_k)?;
    check_field(mesh, a_next)?;
    if p.len() != mesh.cell_count() {
        return Err(DynamicsError::MeshMismatch("pressure length".into()));
    }
    let lap = (cfg.viscosity > 0.0).then(|| dual_laplacian(mesh));
    let t_k = advection_term(mesh, a_k);
    let mut r = assemble_residual(mesh, a_k, &t_k, a_next, &advection_term(mesh, a_next), p, cfg, lap.as_ref());
    r.constraint[0] = gauge_value(mesh, p, cfg.gauge);
    Ok(r)
}

#[allow(clippy::too_many_arguments)]
fn assemble_residual(
    mesh: &MeshGeometry,
    a_k: &VelocityField,
    t_k: &[f64],
    a_next: &VelocityField,
    t_next: &[f64],
    p: &[f64],
    cfg: &SimConfig,
    lap: Option<&Triplets>,
) -> Residual {
    let visc = match lap {
        Some(l) if cfg.viscosity > 0.0 => {
            let mid: Vec<f64> = a_k.flux.iter().zip(&a_next.flux).map(|(x, y)| 0.5 * (x + y)).collect();
            l.mul(&mid)
        }
        _ => vec![0.0; mesh.face_count()],
    };
    let momentum = mesh
        .faces()
        .iter()
        .enumerate()
        .map(|(f, face)| {
            let [i, j] = face.cells;
            face.hodge() * (a_next.flux[f] - a_k.flux[f]) / cfg.dt
                + 0.5 * (t_k[f] + t_next[f])
                + (p[j] - p[i])
                - cfg.viscosity * visc[f]
        })
        .collect();
    let mut constraint: Vec<f64> = (0..mesh.cell_count())
        .map(|i| {
            let s: f64 = mesh.neighbors(i).iter().map(|l| l.sign * a_next.flux[l.face]).sum();
            s / (2.0 * mesh.volume(i))
        })
        .collect();
    constraint[0] = p[0];
    Residual { momentum, constraint }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    /// Newton iterations, counting the one that found the residual small enough.
    pub newton_iters: usize,
    pub residual: f64,
    pub max_divergence: f64,
    pub energy: f64,
}

/// Dense configuration matrix `q`, advanced by explicit Euler for diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticQ {
    pub n: usize,
    /// Row-major `n × n`.
    pub q: Vec<f64>,
}

impl DiagnosticQ {
    pub fn identity(n: usize) -> Self {
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            q[i * n + i] = 1.0;
        }
        DiagnosticQ { n, q }
    }

    pub fn row_sum_deviation(&self) -> f64 {
        (0..self.n)
            .map(|i| (self.q[i * self.n..(i + 1) * self.n].iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Frobenius norm of `qᵀΩq − Ω`.
    pub fn orthogonality_drift(&self, mesh: &MeshGeometry) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                let mut v: f64 = (0..n).map(|i| self.q[i * n + a] * mesh.volume(i) * self.q[i * n + b]).sum();
                if a == b {
                    v -= mesh.volume(a);
                }
                s += v * v;
            }
        }
        s.sqrt()
    }
}

/// `q_{k+1} = q_k − τ A_k q_k`.
pub fn advance_configuration(mesh: &MeshGeometry, q: &DiagnosticQ, a: &VelocityField, tau: f64) -> DiagnosticQ {
    let n = q.n;
    let mut out = q.q.clone();
    for i in 0..n {
        for l in mesh.neighbors(i) {
            let aij = l.sign * a.flux[l.face] / (2.0 * mesh.volume(i));
            let j = l.cell;
            for c in 0..n {
                out[i * n + c] -= tau * aij * q.q[j * n + c];
            }
        }
    }
    DiagnosticQ { n, q: out }
}

/// Trapezoidal transport `(I + τ/2 A)φ' = (I − τ/2 A)φ` of several scalars.
///
/// The diagonal is taken as `−Σ_j A_ij`, which is zero for null-row `A` and
/// makes constants exact fixed points in floating point.
pub fn advect_scalars(
    mesh: &MeshGeometry,
    a_mid: &VelocityField,
    phis: &[Form0],
    tau: f64,
) -> Result<Vec<Form0>, DynamicsError> {
    if phis.is_empty() {
        return Ok(Vec::new());
    }
    let n = mesh.cell_count();
    let mut t = Triplets::new(n);
    for i in 0..n {
        t.push_structural(i, i, 1.0);
        for l in mesh.neighbors(i) {
            let aij = l.sign * a_mid.flux[l.face] / (2.0 * mesh.volume(i));
            t.push(i, l.cell, 0.5 * tau * aij);
            t.push(i, i, -0.5 * tau * aij);
        }
    }
    let lu = SparseLu::factor(&t).map_err(|e| DynamicsError::LinearSolve(e.to_string()))?;
    // solve for the increment so that a zero right-hand side stays exactly zero
    phis.iter()
        .map(|phi| {
            let rhs: Vec<f64> = (0..n)
                .map(|i| {
                    let s: f64 = mesh
                        .neighbors(i)
                        .iter()
                        .map(|l| l.sign * a_mid.flux[l.face] / (2.0 * mesh.volume(i)) * (phi[l.cell] - phi[i]))
                        .sum();
                    -tau * s
                })
                .collect();
            let d = lu.solve(&rhs).map_err(|e| DynamicsError::LinearSolve(e.to_string()))?;
            Ok(phi.iter().zip(d).map(|(x, y)| x + y).collect())
        })
        .collect()
}

pub fn advect_scalar(mesh: &MeshGeometry, a_mid: &VelocityField, phi: &[f64], tau: f64) -> Result<Form0, DynamicsError> {
    Ok(advect_scalars(mesh, a_mid, &[phi.to_vec()], tau)?.remove(0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub step: usize,
    pub time: f64,
    pub velocity: VelocityField,
    pub pressure: Form0,
    pub scalars: Vec<Form0>,
    pub q: Option<DiagnosticQ>,
}

impl SimState {
    pub fn new(mesh: &MeshGeometry, velocity: VelocityField) -> Self {
        SimState {
            step: 0,
            time: 0.0,
            velocity,
            pressure: vec![0.0; mesh.cell_count()],
            scalars: Vec::new(),
            q: None,
        }
    }
}

type AdvectionFn<'m> = Box<dyn Fn(&MeshGeometry, &VelocityField) -> Vec<f64> + 'm>;

/// Newton solver for the trapezoidal update on one mesh.
pub struct Integrator<'m> {
    mesh: &'m MeshGeometry,
    cfg: SimConfig,
    form: AdvectionForm,
    custom: Option<AdvectionFn<'m>>,
    laplacian: Option<Triplets>,
    full_cache: PatternCache,
    schur_cache: PatternCache,
}

impl<'m> Integrator<'m> {
    pub fn new(mesh: &'m MeshGeometry, cfg: SimConfig) -> Result<Self, DynamicsError> {
        cfg.validate()?;
        if let Some(f) = mesh.faces().iter().position(|f| !(f.dual_length > 0.0)) {
            return Err(DynamicsError::DegenerateDual(f));
        }
        let laplacian = (cfg.viscosity > 0.0).then(|| dual_laplacian(mesh));
        Ok(Integrator {
            mesh,
            cfg,
            form: AdvectionForm::Full,
            custom: None,
            laplacian,
            full_cache: PatternCache::default(),
            schur_cache: PatternCache::default(),
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn mesh(&self) -> &'m MeshGeometry {
        self.mesh
    }

    pub fn with_advection_form(mut self, form: AdvectionForm) -> Self {
        self.form = form;
        self
    }

    /// Replaces `T` in the residual; the Jacobian still uses the built-in assembly.
    pub fn with_custom_advection(mut self, f: impl Fn(&MeshGeometry, &VelocityField) -> Vec<f64> + 'm) -> Self {
        self.custom = Some(Box::new(f));
        self
    }

    fn advection(&self, a: &VelocityField) -> Vec<f64> {
        match &self.custom {
            Some(f) => f(self.mesh, a),
            None => advection_term_with(self.mesh, a, self.form),
        }
    }

    /// Solves for `(A_next, p)` starting from `A_next = A_k`.
    pub fn solve_step(
        &mut self,
        a_k: &VelocityField,
        p_guess: &[f64],
    ) -> Result<(VelocityField, Form0, StepReport), DynamicsError> {
        let mesh = self.mesh;
        check_field(mesh, a_k)?;
        let t_k = self.advection(a_k);
        let mut f = a_k.clone();
        let mut p: Vec<f64> = p_guess.iter().map(|v| v - p_guess[0]).collect();
        let eval = |s: &Self, f: &VelocityField, p: &[f64]| {
            assemble_residual(mesh, a_k, &t_k, f, &s.advection(f), p, &s.cfg, s.laplacian.as_ref())
        };
        let mut r = eval(self, &f, &p);
        let mut norm = r.norm_inf();
        let mut iters = 0;
        loop {
            iters += 1;
            if norm <= self.cfg.newton_tol {
                break;
            }
            if iters >= self.cfg.max_newton_iters {
                return Err(DynamicsError::NonConvergence { iterations: iters, residual: norm });
            }
            let (df, dp) = self.newton_direction(&f, &r)?;
            let mut lambda = 1.0;
            for attempt in 0..=8 {
                let tf = VelocityField::from_flux(f.flux.iter().zip(&df).map(|(x, d)| x + lambda * d).collect());
                let tp: Vec<f64> = p.iter().zip(&dp).map(|(x, d)| x + lambda * d).collect();
                let tr = eval(self, &tf, &tp);
                let tn = tr.norm_inf();
                if tn <= norm || attempt == 8 {
                    f = tf;
                    p = tp;
                    r = tr;
                    norm = tn;
                    break;
                }
                lambda *= 0.5;
            }
        }
        if self.cfg.gauge == PressureGauge::ZeroMean {
            let m = gauge_value(mesh, &p, PressureGauge::ZeroMean);
            p.iter_mut().for_each(|v| *v -= m);
        }
        let report = StepReport {
            newton_iters: iters,
            residual: norm,
            max_divergence: max_divergence(mesh, &f),
            energy: kinetic_energy(mesh, &f),
        };
        Ok((f, p, report))
    }

    fn newton_direction(&mut self, f: &VelocityField, r: &Residual) -> Result<(Vec<f64>, Vec<f64>), DynamicsError> {
        let mesh = self.mesh;
        let (nf, n) = (mesh.face_count(), mesh.cell_count());
        let mut jt = Triplets::new(nf);
        advection_jacobian(mesh, f, self.form, 0.5, &mut jt);
        let singular = |e: LinAlgError| DynamicsError::SingularJacobian(e.to_string());
        match self.cfg.jacobian {
            JacobianMode::Full => {
                let mut t = Triplets::new(nf + n);
                for (k, face) in mesh.faces().iter().enumerate() {
                    t.push_structural(k, k, face.hodge() / self.cfg.dt);
                    t.push_structural(k, nf + face.cells[1], 1.0);
                    t.push_structural(k, nf + face.cells[0], -1.0);
                }
                for (a, b, v) in jt.iter() {
                    t.push_structural(a, b, v);
                }
                if let Some(l) = &self.laplacian {
                    for (a, b, v) in l.iter() {
                        t.push_structural(a, b, -0.5 * self.cfg.viscosity * v);
                    }
                }
                t.push_structural(nf, nf, 1.0);
                for i in 1..n {
                    for l in mesh.neighbors(i) {
                        t.push_structural(nf + i, l.face, l.sign / (2.0 * mesh.volume(i)));
                    }
                }
                let rhs: Vec<f64> = r.momentum.iter().chain(&r.constraint).map(|v| -v).collect();
                let x = self.full_cache.factor(&t).map_err(singular)?.solve(&rhs).map_err(singular)?;
                Ok((x[..nf].to_vec(), x[nf..].to_vec()))
            }
            JacobianMode::Diagonal => {
                let mut d: Vec<f64> = mesh.faces().iter().map(|fc| fc.hodge() / self.cfg.dt).collect();
                for (a, b, v) in jt.iter() {
                    if a == b {
                        d[a] += v;
                    }
                }
                if let Some(l) = &self.laplacian {
                    for (a, b, v) in l.iter() {
                        if a == b {
                            d[a] -= 0.5 * self.cfg.viscosity * v;
                        }
                    }
                }
                // δF = −(r_m + G δp)/d,  (D d⁻¹ G) δp = r_c − D d⁻¹ r_m
                let mut s = Triplets::new(n);
                let mut rhs = vec![0.0; n];
                s.push_structural(0, 0, 1.0);
                rhs[0] = -r.constraint[0];
                for i in 1..n {
                    rhs[i] = r.constraint[i];
                    for l in mesh.neighbors(i) {
                        let c = l.sign / (2.0 * mesh.volume(i)) / d[l.face];
                        let [a, b] = mesh.face(l.face).cells;
                        s.push_structural(i, b, c);
                        s.push_structural(i, a, -c);
                        rhs[i] -= c * r.momentum[l.face];
                    }
                }
                let dp = self.schur_cache.factor(&s).map_err(singular)?.solve(&rhs).map_err(singular)?;
                let df = mesh
                    .faces()
                    .iter()
                    .enumerate()
                    .map(|(k, face)| -(r.momentum[k] + dp[face.cells[1]] - dp[face.cells[0]]) / d[k])
                    .collect();
                Ok((df, dp))
            }
        }
    }

    /// Advances velocity, pressure, scalars (midpoint velocity) and the
    /// diagnostic configuration (explicit Euler with `A_k`).
    pub fn step(&mut self, state: &SimState) -> Result<(SimState, StepReport), DynamicsError> {
        let mesh = self.mesh;
        let tau = self.cfg.dt;
        let (a_next, p, report) = self.solve_step(&state.velocity, &state.pressure)?;
        let mid = state.velocity.add(&a_next).scaled(0.5);
        let scalars = advect_scalars(mesh, &mid, &state.scalars, tau)?;
        let q = state.q.as_ref().map(|q| advance_configuration(mesh, q, &state.velocity, tau));
        let next = SimState {
            step: state.step + 1,
            time: (state.step + 1) as f64 * tau,
            velocity: a_next,
            pressure: p,
            scalars,
            q,
        };
        Ok((next, report))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub min_energy: f64,
    pub max_energy: f64,
    pub max_divergence: f64,
    pub total_newton_iters: usize,
    pub max_newton_iters: usize,
}

/// Runs `steps` steps, calling `observe` on the initial state (without a
/// report) and after every step.
pub fn run<E>(
    integrator: &mut Integrator<'_>,
    initial: SimState,
    steps: usize,
    mut observe: impl FnMut(&SimState, Option<&StepReport>) -> Result<(), E>,
) -> Result<(SimState, RunSummary), E>
where
    E: From<DynamicsError>,
{
    let mesh = integrator.mesh();
    let e0 = kinetic_energy(mesh, &initial.velocity);
    let mut summary = RunSummary {
        steps: 0,
        min_energy: e0,
        max_energy: e0,
        max_divergence: max_divergence(mesh, &initial.velocity),
        total_newton_iters: 0,
        max_newton_iters: 0,
    };
    observe(&initial, None)?;
    let mut state = initial;
    for _ in 0..steps {
        let (next, rep) = integrator.step(&state).map_err(|e| {
            E::from(DynamicsError::AtStep { step: state.step + 1, source: Box::new(e) })
        })?;
        summary.steps += 1;
        summary.min_energy = summary.min_energy.min(rep.energy);
        summary.max_energy = summary.max_energy.max(rep.energy);
        summary.max_divergence = summary.max_divergence.max(rep.max_divergence);
        summary.total_newton_iters += rep.newton_iters;
        summary.max_newton_iters = summary.max_newton_iters.max(rep.newton_iters);
        observe(&next, Some(&rep))?;
        state = next;
    }
    Ok((state, summary))
}

#[cfg(test)]
mod tests;
