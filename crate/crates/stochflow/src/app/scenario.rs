//! Initial conditions and vortex tracking.

use std::f64::consts::PI;

use crate::calculus::dec_vorticity;
use crate::fields::{discretize_from_streamfunction, sample_streamfunction, FieldError, VelocityField};
use crate::mesh::{MeshGeometry, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioKind {
    UniformFlow,
    SingleTaylorVortex,
    TaylorVortexPair,
    /// A single domain-filling swirl (one periodic cell of swirls on periodic
    /// meshes), for meshes read from a file.
    FromFile,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [
        ScenarioKind::UniformFlow,
        ScenarioKind::SingleTaylorVortex,
        ScenarioKind::TaylorVortexPair,
        ScenarioKind::FromFile,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::UniformFlow => "uniform_flow",
            ScenarioKind::SingleTaylorVortex => "single_taylor_vortex",
            ScenarioKind::TaylorVortexPair => "taylor_vortex_pair",
            ScenarioKind::FromFile => "from_file",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    /// Core radius.
    pub a: f64,
    /// Velocity scale: peak vortex speed, or the speed of the uniform flow along x.
    pub u: f64,
    /// Centre separation of the pair.
    pub d: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario { kind: ScenarioKind::TaylorVortexPair, a: 0.3, u: 1.0, d: DEFAULT_SEPARATION }
    }
}

/// Separation used for the pair when none is given.
pub const DEFAULT_SEPARATION: f64 = 0.8;

/// Axis-aligned box `(min, max)` of the domain: the period cell on periodic
/// meshes, the node bounding box otherwise.
pub fn domain_box(mesh: &MeshGeometry) -> (Vec3, Vec3) {
    if let Some(p) = mesh.period() {
        return (Vec3::zeros(), p);
    }
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for n in mesh.nodes() {
        lo = lo.inf(n);
        hi = hi.sup(n);
    }
    (lo, hi)
}

/// `ψ(r) = U a exp((1 − r²/a²)/2)`; the azimuthal speed peaks at `U` for `r = a`.
pub fn taylor_psi(u: f64, a: f64, r2: f64) -> f64 {
    u * a * (0.5 * (1.0 - r2 / (a * a))).exp()
}

/// Sum of Taylor profiles centred at `centers`, with the 3 × 3 nearest images on
/// periodic meshes.
pub fn taylor_streamfunction(mesh: &MeshGeometry, centers: &[Vec3], u: f64, a: f64) -> Vec<f64> {
    let images: Vec<Vec3> = match mesh.period() {
        Some(p) => (-1..=1)
            .flat_map(|x| (-1..=1).map(move |y| Vec3::new(x as f64 * p.x, y as f64 * p.y, 0.0)))
            .collect(),
        None => vec![Vec3::zeros()],
    };
    sample_streamfunction(mesh, |x| {
        let mut s = 0.0;
        for c in centers {
            let d = mesh.displacement(c, x);
            for im in &images {
                s += taylor_psi(u, a, (d + im).xy().norm_squared());
            }
        }
        s
    })
}

/// Vortex centres used by the scenario (empty for the others).
pub fn vortex_centers(mesh: &MeshGeometry, s: &Scenario) -> Vec<Vec3> {
    let (lo, hi) = domain_box(mesh);
    let mid = 0.5 * (lo + hi);
    match s.kind {
        ScenarioKind::SingleTaylorVortex => vec![mid],
        ScenarioKind::TaylorVortexPair => {
            let off = Vec3::new(0.5 * s.d, 0.0, 0.0);
            vec![mid - off, mid + off]
        }
        _ => Vec::new(),
    }
}

/// Exactly divergence-free initial velocity for the scenario.
pub fn build_scenario(mesh: &MeshGeometry, s: &Scenario) -> Result<VelocityField, FieldError> {
    if mesh.dim() != 2 {
        return Err(FieldError::NotTwoDimensional);
    }
    match s.kind {
        ScenarioKind::UniformFlow => {
            if mesh.period().is_none() {
                return Err(FieldError::Unsupported("uniform_flow needs a periodic mesh".into()));
            }
            discretize_from_streamfunction(mesh, &vec![0.0; mesh.node_count()], Vec3::new(s.u, 0.0, 0.0))
        }
        ScenarioKind::SingleTaylorVortex | ScenarioKind::TaylorVortexPair => {
            let mut psi = taylor_streamfunction(mesh, &vortex_centers(mesh, s), s.u, s.a);
            pin_boundary(mesh, &mut psi);
            discretize_from_streamfunction(mesh, &psi, Vec3::zeros())
        }
        ScenarioKind::FromFile => {
            let (lo, hi) = domain_box(mesh);
            let l = hi - lo;
            let k = Vec3::new(2.0 * PI / l.x, 2.0 * PI / l.y, 0.0);
            let mut psi = if mesh.period().is_some() {
                sample_streamfunction(mesh, |x| s.u / k.x * (k.x * x.x).sin() * (k.y * x.y).sin())
            } else {
                // one swirl filling the box, turning like a rigid rotation near the centre
                sample_streamfunction(mesh, |x| {
                    let y = x - lo;
                    -s.u * (0.5 * k.x * y.x).sin() * (0.5 * k.y * y.y).sin() / (0.25 * (k.x * k.x + k.y * k.y))
                })
            };
            pin_boundary(mesh, &mut psi);
            discretize_from_streamfunction(mesh, &psi, Vec3::zeros())
        }
    }
}

/// Walls carry no flux only if ψ is constant along the boundary.
fn pin_boundary(mesh: &MeshGeometry, psi: &mut [f64]) {
    for h in mesh.hinges().iter().filter(|h| !h.closed) {
        for &n in &h.nodes {
            psi[n] = 0.0;
        }
    }
}

/// Centroids of the vorticity of sign `sign` in the two halves separated by
/// the perpendicular bisector of `previous`, measured from the previous
/// centres (so a co-rotating pair can be followed through full turns).
pub fn track_pair(mesh: &MeshGeometry, a: &VelocityField, previous: [Vec3; 2], sign: f64) -> [Vec3; 2] {
    let omega = dec_vorticity(mesh, a);
    let mut acc = [(Vec3::zeros(), 0.0); 2];
    for (h, w) in mesh.hinges().iter().zip(omega) {
        let w = (sign * w).max(0.0);
        if w == 0.0 {
            continue;
        }
        let d0 = mesh.displacement(&previous[0], &h.point);
        let d1 = mesh.displacement(&previous[1], &h.point);
        let side = usize::from(d1.norm_squared() < d0.norm_squared());
        let d = if side == 0 { d0 } else { d1 };
        acc[side].0 += w * d;
        acc[side].1 += w;
    }
    let mut out = previous;
    for s in 0..2 {
        if acc[s].1 > 0.0 {
            out[s] = previous[s] + acc[s].0 / acc[s].1;
        }
    }
    out
}

/// Distance between two points, using the nearest periodic image.
pub fn separation(mesh: &MeshGeometry, c: [Vec3; 2]) -> f64 {
    mesh.displacement(&c[0], &c[1]).norm()
}

/// Sign of the strongest hinge vorticity.
pub fn dominant_sign(mesh: &MeshGeometry, a: &VelocityField) -> f64 {
    let w = dec_vorticity(mesh, a).into_iter().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
    if w < 0.0 {
        -1.0
    } else {
        1.0
    }
}
