//! Built-in invariant checks on small meshes, run by `stochflow selftest`.

use std::f64::consts::PI;

use crate::calculus::{contract2, d0, d1, lie1, pair1, pair2, Form1};
use crate::dynamics::harlow_welsh::harlow_welsh_term;
use crate::dynamics::{
    advance_configuration, advect_scalar, advection_term, kinetic_energy, DiagnosticQ, Integrator, JacobianMode,
    SimConfig, SimState,
};
use crate::fields::{discretize_from_streamfunction, max_divergence, sample_streamfunction, MatrixEntries, VelocityField};
use crate::flat::{d_flat_triples, flat_regular_full, pair_flat};
use crate::kelvin::{circulation, curve_from_cell_loop, CurveAdvector};
use crate::mesh::{build_regular_grid, triangle_lattice, Boundary, MeshGeometry, Vec3};

use super::scenario::{build_scenario, Scenario, ScenarioKind};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SelfTestOptions {
    /// Run only checks whose name contains this text.
    pub filter: Option<String>,
    /// Add this to the first corner-triple coefficient of every mesh.
    pub perturb_k: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = fn(&SelfTestOptions) -> Result<String, String>;

const CHECKS: [(&str, Check); 12] = [
    ("calculus.dd_zero", dd_zero),
    ("calculus.contraction_pairing", contraction_pairing),
    ("calculus.lie_dense", lie_dense),
    ("flat.pair_symmetry", pair_symmetry),
    ("flat.trace_commutator", trace_commutator),
    ("flat.triples_vs_full_flat", triples_vs_full_flat),
    ("dynamics.harlow_welsh", harlow_welsh),
    ("dynamics.full_vs_diagonal", full_vs_diagonal),
    ("conservation.energy_divergence", energy_divergence),
    ("conservation.scalar_mass", scalar_mass),
    ("kelvin.uniform_flow", kelvin_uniform),
    ("configuration.row_sums", row_sums),
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.0).collect()
}

/// Runs the selected checks in a fixed order. Errors if the filter selects nothing.
pub fn run_selftest(opts: &SelfTestOptions) -> Result<Vec<CheckResult>, String> {
    let selected: Vec<_> = CHECKS
        .iter()
        .filter(|(name, _)| opts.filter.as_deref().is_none_or(|f| name.contains(f)))
        .collect();
    if selected.is_empty() {
        return Err(format!(
            "no check matches `{}`; available: {}",
            opts.filter.as_deref().unwrap_or(""),
            check_names().join(", ")
        ));
    }
    Ok(selected
        .into_iter()
        .map(|(name, f)| {
            let (passed, detail) = match f(opts) {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckResult { name, passed, detail }
        })
        .collect())
}

fn prepare(mut m: MeshGeometry, opts: &SelfTestOptions) -> MeshGeometry {
    if let Some(dk) = opts.perturb_k {
        if !m.triples().is_empty() {
            m.perturb_triple_coeff(0, dk);
        }
    }
    m
}

fn grid(n: usize, h: f64, opts: &SelfTestOptions) -> MeshGeometry {
    prepare(build_regular_grid(n, n, h, Boundary::Periodic).expect("built-in grid"), opts)
}

fn lattice(opts: &SelfTestOptions) -> MeshGeometry {
    prepare(triangle_lattice(5, 5, 0.05).expect("built-in lattice"), opts)
}

/// Smooth divergence-free field, with no flux through walls; `seed` changes
/// phases and amplitudes.
fn field(m: &MeshGeometry, seed: f64) -> VelocityField {
    let mut psi = sample_streamfunction(m, |p| {
        (p.x * (1.1 + 0.3 * seed) + seed).sin() * (p.y * (0.7 + 0.2 * seed.cos()) - 2.0 * seed).cos()
            + 0.4 * (p.x * 2.3 - p.y * 1.9 + 5.0 * seed).sin()
    });
    for h in m.hinges().iter().filter(|h| !h.closed) {
        psi[h.nodes[0]] = 0.0;
    }
    let mean = if m.period().is_some() { Vec3::new(0.2 * seed.sin(), 0.1, 0.0) } else { Vec3::zeros() };
    discretize_from_streamfunction(m, &psi, mean).expect("2D mesh")
}

fn within(name: &str, err: f64, tol: f64) -> Result<String, String> {
    if err <= tol {
        Ok(format!("{name} {err:.3e} <= {tol:.0e}"))
    } else {
        Err(format!("{name} {err:.3e} > {tol:.0e}"))
    }
}

fn dense(m: &MeshGeometry, x: &impl MatrixEntries) -> Vec<Vec<f64>> {
    let n = m.cell_count();
    let mut d = vec![vec![0.0; n]; n];
    x.for_each_entry(m, &mut |i, j, v| d[i][j] += v);
    d
}

fn dd_zero(o: &SelfTestOptions) -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for m in [grid(5, 0.3, o), lattice(o)] {
        let g: Vec<f64> = (0..m.cell_count()).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
        worst = worst.max(d1(&m, &d0(&m, &g)).max_abs() / 3.0);
    }
    within("max |ddf|/|f|", worst, 1e-14)
}

fn contraction_pairing(o: &SelfTestOptions) -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for m in [grid(5, 0.4, o), lattice(o)] {
        let (a, b, c) = (field(&m, 0.3), field(&m, 1.7), field(&m, -0.8));
        let f2 = d_flat_triples(&m, &c);
        let lhs = pair1(&m, &contract2(&m, &a, &f2), &b);
        worst = worst.max((lhs - pair2(&m, &f2, &a, &b)).abs());
    }
    within("|<<i_A F, B>> - <<F, A, B>>|", worst, 1e-12)
}

fn lie_dense(o: &SelfTestOptions) -> Result<String, String> {
    let m = grid(4, 0.5, o);
    let a = field(&m, 0.9);
    let f = flat_regular_full(&m, &field(&m, -1.3)).map_err(|e| e.to_string())?;
    let got = lie1(&m, &a, &f).map_err(|e| e.to_string())?;
    let ad = dense(&m, &a);
    let n = m.cell_count();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let af = |r: usize, c: usize| (0..n).map(|k| ad[r][k] * f.get(k, c)).sum::<f64>();
            worst = worst.max((got.get(i, j) - (af(i, j) - af(j, i))).abs());
        }
    }
    within("max |lie - (AF - (AF)^T)|", worst, 1e-12)
}

fn pair_symmetry(o: &SelfTestOptions) -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for m in [grid(6, 0.2, o), lattice(o)] {
        let (a, b) = (field(&m, 0.1), field(&m, 2.2));
        worst = worst.max((pair_flat(&m, &a, &b) - pair_flat(&m, &b, &a)).abs());
        if pair_flat(&m, &a, &a) <= 0.0 {
            return Err("non-positive energy".into());
        }
    }
    within("|<<A,B>> - <<B,A>>|", worst, 1e-12)
}

fn trace_commutator(o: &SelfTestOptions) -> Result<String, String> {
    let m = grid(5, 0.5, o);
    let (a, b, c) = (dense(&m, &field(&m, 0.4)), dense(&m, &field(&m, 1.1)), dense(&m, &field(&m, -2.0)));
    let n = m.cell_count();
    let mul = |x: &Vec<Vec<f64>>, y: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| x[i][k] * y[k][j]).sum()).collect()).collect()
    };
    let (bc, cb) = (mul(&b, &c), mul(&c, &b));
    let tr: f64 = (0..n).map(|i| (0..n).map(|k| a[i][k] * (bc[k][i] - cb[k][i])).sum::<f64>()).sum();
    within("|Tr(A[B,C])|", tr.abs(), 1e-12)
}

fn triples_vs_full_flat(o: &SelfTestOptions) -> Result<String, String> {
    let m = grid(6, 0.7, o);
    let a = field(&m, 0.6);
    let lhs = d_flat_triples(&m, &a);
    let full: Form1 = flat_regular_full(&m, &a).map_err(|e| e.to_string())?;
    let rhs = d1(&m, &full);
    let worst = lhs.iter().fold(0.0f64, |w, (i, j, k, v)| w.max((v - rhs.get(i, j, k)).abs()));
    within("max |K w - d(full flat)|", worst, 1e-12)
}

fn harlow_welsh(o: &SelfTestOptions) -> Result<String, String> {
    let m = grid(8, 0.4, o);
    let mut worst: f64 = 0.0;
    for s in 0..5 {
        let a = field(&m, s as f64 * 0.77 - 1.0);
        let t = advection_term(&m, &a);
        let hw = harlow_welsh_term(&m, &a).map_err(|e| e.to_string())?;
        worst = t.iter().zip(&hw).fold(worst, |w, (x, y)| w.max((x - y).abs()));
    }
    within("max |Cartan - stencil|", worst, 1e-12)
}

fn full_vs_diagonal(o: &SelfTestOptions) -> Result<String, String> {
    let m = grid(8, 2.0 * PI / 8.0, o);
    let a = build_scenario(&m, &Scenario { kind: ScenarioKind::SingleTaylorVortex, a: 0.8, ..Scenario::default() })
        .map_err(|e| e.to_string())?;
    let tol = 1e-11;
    let solve = |mode| {
        let cfg = SimConfig { jacobian: mode, newton_tol: tol, max_newton_iters: 60, ..SimConfig::default() };
        let mut it = Integrator::new(&m, cfg).map_err(|e| e.to_string())?;
        it.solve_step(&a, &vec![0.0; m.cell_count()]).map(|r| r.0).map_err(|e| e.to_string())
    };
    let (f, d) = (solve(JacobianMode::Full)?, solve(JacobianMode::Diagonal)?);
    within("max |A_full - A_diag|", f.sub(&d).max_abs(), 10.0 * tol)
}

fn energy_divergence(o: &SelfTestOptions) -> Result<String, String> {
    let m = grid(16, 2.0 * PI / 16.0, o);
    let a = build_scenario(&m, &Scenario { a: 0.6, d: 1.6, ..Scenario::default() }).map_err(|e| e.to_string())?;
    let cfg = SimConfig::default();
    let tol = cfg.newton_tol;
    let mut it = Integrator::new(&m, cfg).map_err(|e| e.to_string())?;
    let e0 = kinetic_energy(&m, &a);
    let mut st = SimState::new(&m, a);
    let (mut de, mut div): (f64, f64) = (0.0, 0.0);
    for _ in 0..20 {
        let (next, rep) = it.step(&st).map_err(|e| e.to_string())?;
        de = de.max((rep.energy - e0).abs() / e0);
        div = div.max(rep.max_divergence);
        st = next;
    }
    if div > tol {
        return Err(format!("max divergence {div:.3e} > {tol:.0e}"));
    }
    within("max relative energy change", de, 1e-3)
}

fn scalar_mass(o: &SelfTestOptions) -> Result<String, String> {
    let m = lattice(o);
    let a = field(&m, 0.5);
    let mut phi: Vec<f64> = m.centers().iter().map(|c| 1.0 + (3.0 * c.x).sin() * c.y).collect();
    let mass = |p: &[f64]| p.iter().zip(m.volumes()).map(|(x, v)| x * v).sum::<f64>();
    let m0 = mass(&phi);
    for _ in 0..50 {
        phi = advect_scalar(&m, &a, &phi, 0.05).map_err(|e| e.to_string())?;
    }
    let ones = advect_scalar(&m, &a, &vec![2.5; m.cell_count()], 0.05).map_err(|e| e.to_string())?;
    if ones.iter().any(|v| *v != 2.5) {
        return Err("constant not preserved exactly".into());
    }
    within("relative mass change", (mass(&phi) - m0).abs() / m0.abs(), 1e-10)
}

fn kelvin_uniform(o: &SelfTestOptions) -> Result<String, String> {
    let m = grid(6, 0.5, o);
    let u = discretize_from_streamfunction(&m, &vec![0.0; m.node_count()], Vec3::new(0.7, -0.4, 0.0))
        .map_err(|e| e.to_string())?;
    let g = m.regular().ok_or("not a grid")?;
    let cells = [g.cell(1, 1), g.cell(2, 1), g.cell(3, 1), g.cell(3, 2), g.cell(2, 2), g.cell(1, 2)];
    let mut c = curve_from_cell_loop(&m, &cells).map_err(|e| e.to_string())?;
    let c0 = circulation(&m, &u, &c).map_err(|e| e.to_string())?;
    let adv = CurveAdvector::new(&m, &u, &u, 0.05).map_err(|e| e.to_string())?;
    for _ in 0..100 {
        c = adv.advect(&c).map_err(|e| e.to_string())?;
    }
    let c1 = circulation(&m, &u, &c).map_err(|e| e.to_string())?;
    within("circulation drift", (c1 - c0).abs(), 1e-10)
}

fn row_sums(o: &SelfTestOptions) -> Result<String, String> {
    let m = grid(4, 0.5, o);
    let a = field(&m, 1.3);
    let mut q = DiagnosticQ::identity(m.cell_count());
    for _ in 0..100 {
        q = advance_configuration(&m, &q, &a, 0.01);
    }
    if max_divergence(&m, &a) > 1e-14 {
        return Err("test field is not divergence-free".into());
    }
    within("max |row sum - 1|", q.row_sum_deviation(), 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pristine_build_passes() {
        let r = run_selftest(&SelfTestOptions::default()).unwrap();
        assert_eq!(r.len(), CHECKS.len());
        for c in &r {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn perturbed_k_breaks_harlow_welsh() {
        let opts = SelfTestOptions { filter: Some("harlow".into()), perturb_k: Some(1e-3) };
        let r = run_selftest(&opts).unwrap();
        assert_eq!(r.len(), 1);
        assert!(!r[0].passed, "{}", r[0].detail);
    }

    #[test]
    fn empty_selection_is_an_error() {
        let opts = SelfTestOptions { filter: Some("no-such-check".into()), perturb_k: None };
        assert!(run_selftest(&opts).unwrap_err().contains("no check matches"));
    }
}
