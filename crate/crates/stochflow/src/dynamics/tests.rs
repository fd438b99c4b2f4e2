use super::harlow_welsh::harlow_welsh_term;
use super::*;
use crate::calculus::{contract1, contract2, d0};
use crate::fields::{discretize_from_streamfunction, sample_streamfunction};
use crate::flat::{d_flat_triples, FlatAssembly};
use crate::mesh::{build_regular_grid, triangle_lattice, Boundary, Vec3};

fn vortex(m: &MeshGeometry, strength: f64) -> VelocityField {
    let l = m.period().unwrap();
    let c = Vec3::new(0.45 * l.x, 0.55 * l.y, 0.0);
    let a = 0.2 * l.x;
    let psi = sample_streamfunction(m, |p| {
        let d = m.displacement(&c, p);
        strength * a * (0.5 * (1.0 - d.norm_squared() / (a * a))).exp()
    });
    discretize_from_streamfunction(m, &psi, Vec3::new(0.3, 0.1, 0.0)).unwrap()
}

fn noisy(m: &MeshGeometry, seed: u64) -> VelocityField {
    let psi: Vec<f64> = (0..m.node_count())
        .map(|k| ((k as u64 * 2654435761 + seed * 97) % 1000) as f64 / 1000.0 - 0.5)
        .collect();
    discretize_from_streamfunction(m, &psi, Vec3::new(0.2, -0.4, 0.0)).unwrap()
}

#[test]
fn energy_examples() {
    let m = build_regular_grid(3, 3, 1.0, Boundary::Periodic).unwrap();
    assert_eq!(kinetic_energy(&m, &VelocityField::zeros(&m)), 0.0);
    let u = discretize_from_streamfunction(&m, &vec![0.0; 9], Vec3::x()).unwrap();
    assert_eq!(kinetic_energy(&m, &u), 4.5);
    let a = noisy(&m, 3);
    assert!((kinetic_energy(&m, &a.scaled(2.0)) - 4.0 * kinetic_energy(&m, &a)).abs() < 1e-12);
}

#[test]
fn advection_matches_generic_calculus() {
    let grid = build_regular_grid(5, 4, 0.3, Boundary::Periodic).unwrap();
    let tri = triangle_lattice(4, 4, 0.05).unwrap();
    for m in [&grid, &tri] {
        let a = noisy(m, 7);
        let fa = FlatAssembly::new(m, &a);
        let generic = contract2(m, &a, &d_flat_triples(m, &a));
        let grad = d0(m, &contract1(m, &a, &fa.adjacent_form(m)));
        let t = advection_term(m, &a);
        for (f, face) in m.faces().iter().enumerate() {
            let [i, j] = face.cells;
            let want = generic.get(i, j) + grad.get(i, j);
            assert!((t[f] - want).abs() < 1e-13, "face {f}: {} vs {want}", t[f]);
        }
    }
}

#[test]
fn advection_is_harlow_welsh_on_grids() {
    let m = build_regular_grid(6, 5, 0.4, Boundary::Periodic).unwrap();
    for seed in 0..5 {
        let a = noisy(&m, seed);
        let t = advection_term(&m, &a);
        let hw = harlow_welsh_term(&m, &a).unwrap();
        for (x, y) in t.iter().zip(&hw) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }
}

#[test]
fn uniform_flow_advection_vanishes() {
    let m = build_regular_grid(4, 4, 0.5, Boundary::Periodic).unwrap();
    let u = discretize_from_streamfunction(&m, &vec![0.0; 16], Vec3::new(1.0, 0.5, 0.0)).unwrap();
    assert!(advection_term(&m, &u).iter().all(|v| v.abs() < 1e-15));
    assert!(advection_term(&m, &VelocityField::zeros(&m)).iter().all(|v| *v == 0.0));
}

#[test]
fn advection_jacobian_matches_finite_differences() {
    let m = build_regular_grid(4, 5, 0.3, Boundary::Periodic).unwrap();
    let a = noisy(&m, 11);
    let mut j = Triplets::new(m.face_count());
    advection_jacobian(&m, &a, AdvectionForm::Full, 1.0, &mut j);
    let dense = j.to_dense();
    let scale = a.max_abs();
    let h = 1e-6 * scale;
    for g in 0..m.face_count() {
        let mut plus = a.clone();
        let mut minus = a.clone();
        plus.flux[g] += h;
        minus.flux[g] -= h;
        let tp = advection_term(&m, &plus);
        let tm = advection_term(&m, &minus);
        for f in 0..m.face_count() {
            let fd = (tp[f] - tm[f]) / (2.0 * h);
            assert!((fd - dense[f][g]).abs() <= 1e-6 * (1.0 + dense[f][g].abs()), "({f},{g})");
        }
    }
}

#[test]
fn viscosity_matches_five_point_stencil() {
    let (n, h) = (6, 0.5);
    let m = build_regular_grid(n, n, h, Boundary::Periodic).unwrap();
    let g = *m.regular().unwrap();
    let i0 = g.cell(2, 3);
    let f0 = m.link(i0, g.cell(3, 3)).unwrap().face;
    let mut a = VelocityField::zeros(&m);
    a.flux[f0] = 1.0;
    let got = viscosity_term(&m, &a, 1.0);
    // x-velocity sits on x-faces; its 5-point Laplacian times h is the flat value
    let ux = |x: usize, y: usize| {
        let f = m.link(g.cell(x % n, y % n), g.cell((x + 1) % n, y % n)).unwrap().face;
        a.flux[f] / h
    };
    for (f, face) in m.faces().iter().enumerate() {
        let (x, y) = g.coords(face.cells[0]);
        let want = if face.normal == Vec3::x() {
            let lap = ux(x + 1, y) + ux(x + n - 1, y) + ux(x, y + 1) + ux(x, y + n - 1) - 4.0 * ux(x, y);
            h * lap / (h * h)
        } else {
            0.0
        };
        assert!((got[f] - want).abs() < 1e-12, "face {f}: {} vs {want}", got[f]);
    }
    let u = discretize_from_streamfunction(&m, &vec![0.0; m.node_count()], Vec3::x()).unwrap();
    assert!(viscosity_term(&m, &u, 0.7).iter().all(|v| v.abs() < 1e-12));
    assert!(viscosity_term(&m, &a, 0.0).iter().all(|v| *v == 0.0));
}

#[test]
fn residual_examples() {
    let m = build_regular_grid(4, 4, 1.0, Boundary::Periodic).unwrap();
    let cfg = SimConfig::default();
    let u = discretize_from_streamfunction(&m, &vec![0.0; 16], Vec3::x()).unwrap();
    let p = vec![0.0; 16];
    assert!(residual(&m, &u, &u, &p, &cfg).unwrap().norm_inf() < 1e-12);
    let z = VelocityField::zeros(&m);
    assert_eq!(residual(&m, &z, &z, &p, &cfg).unwrap().norm_inf(), 0.0);
    let a = noisy(&m, 1);
    let r1 = residual(&m, &a, &a, &p, &cfg).unwrap();
    let r2 = residual(&m, &a, &a, &p, &SimConfig { dt: 0.5, ..cfg.clone() }).unwrap();
    assert_eq!(r1, r2);
    assert_eq!(r1.momentum, advection_term(&m, &a));
}

fn solver(m: &MeshGeometry, jac: JacobianMode) -> Integrator<'_> {
    let cfg = SimConfig { jacobian: jac, newton_tol: 1e-12, max_newton_iters: 60, ..SimConfig::default() };
    Integrator::new(m, cfg).unwrap()
}

#[test]
fn steady_and_zero_states() {
    let m = build_regular_grid(5, 5, 0.5, Boundary::Periodic).unwrap();
    let u = discretize_from_streamfunction(&m, &vec![0.0; 25], Vec3::new(0.4, 1.0, 0.0)).unwrap();
    let mut s = solver(&m, JacobianMode::Full);
    let (next, p, rep) = s.solve_step(&u, &vec![0.0; 25]).unwrap();
    assert_eq!(next, u);
    assert_eq!(rep.newton_iters, 1);
    assert!(p.iter().all(|v| *v == 0.0));
    let z = VelocityField::zeros(&m);
    assert_eq!(s.solve_step(&z, &vec![0.0; 25]).unwrap().0, z);
}

#[test]
fn full_and_diagonal_jacobians_agree() {
    let m = build_regular_grid(8, 8, 0.25, Boundary::Periodic).unwrap();
    let a = vortex(&m, 1.0);
    let p0 = vec![0.0; m.cell_count()];
    let (full, _, rf) = solver(&m, JacobianMode::Full).solve_step(&a, &p0).unwrap();
    let (diag, _, rd) = solver(&m, JacobianMode::Diagonal).solve_step(&a, &p0).unwrap();
    assert!(rd.newton_iters >= rf.newton_iters);
    for (x, y) in full.flux.iter().zip(&diag.flux) {
        assert!((x - y).abs() < 1e-11);
    }
    assert!(rf.max_divergence <= 1e-12);
}

#[test]
fn step_is_time_reversible() {
    let m = build_regular_grid(8, 6, 0.25, Boundary::Periodic).unwrap();
    let a = vortex(&m, 1.3);
    let p0 = vec![0.0; m.cell_count()];
    let mut s = solver(&m, JacobianMode::Full);
    let (next, _, _) = s.solve_step(&a, &p0).unwrap();
    let (back, _, _) = s.solve_step(&next.scaled(-1.0), &p0).unwrap();
    for (x, y) in back.flux.iter().zip(&a.flux) {
        assert!((x + y).abs() < 1e-11);
    }
}

#[test]
fn gradient_term_only_changes_pressure() {
    let m = build_regular_grid(6, 6, 0.3, Boundary::Periodic).unwrap();
    let a = vortex(&m, 0.8);
    let p0 = vec![0.0; m.cell_count()];
    let (x, px, _) = solver(&m, JacobianMode::Full).solve_step(&a, &p0).unwrap();
    let mut s = solver(&m, JacobianMode::Full).with_advection_form(AdvectionForm::WithoutGradient);
    let (y, py, _) = s.solve_step(&a, &p0).unwrap();
    for (u, v) in x.flux.iter().zip(&y.flux) {
        assert!((u - v).abs() < 1e-11);
    }
    assert!(px.iter().zip(&py).any(|(u, v)| (u - v).abs() > 1e-6));
}

#[test]
fn zero_mean_gauge() {
    let m = build_regular_grid(5, 5, 0.3, Boundary::Periodic).unwrap();
    let cfg = SimConfig { gauge: PressureGauge::ZeroMean, ..SimConfig::default() };
    let a = vortex(&m, 1.0);
    let (_, p, _) = Integrator::new(&m, cfg).unwrap().solve_step(&a, &vec![0.0; 25]).unwrap();
    assert!(p.iter().sum::<f64>().abs() < 1e-12);
}

#[test]
fn viscous_step_decays_energy() {
    let m = build_regular_grid(8, 8, 0.25, Boundary::Periodic).unwrap();
    let a = vortex(&m, 1.0);
    let cfg = SimConfig { viscosity: 0.05, ..SimConfig::default() };
    let mut s = Integrator::new(&m, cfg).unwrap();
    let (next, _, rep) = s.solve_step(&a, &vec![0.0; 64]).unwrap();
    assert!(rep.energy < kinetic_energy(&m, &a));
    assert!(max_divergence(&m, &next) < 1e-12);
}

#[test]
fn nonconvergence_is_reported() {
    let m = build_regular_grid(6, 6, 0.3, Boundary::Periodic).unwrap();
    let cfg = SimConfig { max_newton_iters: 1, ..SimConfig::default() };
    let err = Integrator::new(&m, cfg).unwrap().solve_step(&vortex(&m, 1.0), &vec![0.0; 36]).unwrap_err();
    assert!(matches!(err, DynamicsError::NonConvergence { iterations: 1, .. }));
}

#[test]
fn scalar_advection() {
    let m = build_regular_grid(6, 5, 0.3, Boundary::Periodic).unwrap();
    let a = noisy(&m, 5);
    let c = vec![2.75; 30];
    assert_eq!(advect_scalar(&m, &a, &c, 0.1).unwrap(), c);
    let phi: Vec<f64> = (0..30).map(|i| (i as f64 * 0.7).sin() + 1.5).collect();
    let same = advect_scalar(&m, &VelocityField::zeros(&m), &phi, 0.1).unwrap();
    assert_eq!(same, phi);
    let moved = advect_scalar(&m, &a, &phi, 0.1).unwrap();
    let (m0, m1) = (crate::calculus::integrate0(&m, &phi), crate::calculus::integrate0(&m, &moved));
    assert!((m1 - m0).abs() <= 1e-12 * m0.abs());
    assert!(moved.iter().zip(&phi).any(|(x, y)| x != y));
}

#[test]
fn configuration_rows_stay_stochastic() {
    let m = build_regular_grid(4, 4, 0.25, Boundary::Periodic).unwrap();
    let q = DiagnosticQ::identity(16);
    assert_eq!(advance_configuration(&m, &q, &VelocityField::zeros(&m), 0.1), q);
    let a = noisy(&m, 2);
    let mut q = q;
    for _ in 0..100 {
        q = advance_configuration(&m, &q, &a, 0.01);
    }
    assert!(q.row_sum_deviation() <= 1e-12);
    assert!(q.orthogonality_drift(&m) > 0.0);
}

#[test]
fn run_with_zero_steps_emits_initial_row() {
    let m = build_regular_grid(4, 4, 0.25, Boundary::Periodic).unwrap();
    let mut s = solver(&m, JacobianMode::Full);
    let mut rows = 0;
    let (_, summary) = run::<DynamicsError>(&mut s, SimState::new(&m, noisy(&m, 1)), 0, |_, r| {
        assert!(r.is_none());
        rows += 1;
        Ok(())
    })
    .unwrap();
    assert_eq!(rows, 1);
    assert_eq!(summary.steps, 0);
}

#[test]
fn invalid_config_is_rejected() {
    let m = build_regular_grid(3, 3, 1.0, Boundary::Periodic).unwrap();
    for cfg in [
        SimConfig { dt: 0.0, ..SimConfig::default() },
        SimConfig { newton_tol: -1.0, ..SimConfig::default() },
        SimConfig { viscosity: -0.1, ..SimConfig::default() },
    ] {
        assert!(matches!(Integrator::new(&m, cfg), Err(DynamicsError::InvalidConfig(_))));
    }
}


#[test]
fn pressure_projection() {
    use crate::fields::discretize_from_face_samples;
    for m in [build_regular_grid(6, 5, 0.4, Boundary::Periodic).unwrap(), triangle_lattice(5, 5, 0.05).unwrap()] {
        let sampled = discretize_from_face_samples(&m, |p| Vec3::new((1.3 * p.y).sin() + p.x * p.x, (0.7 * p.x).cos(), 0.0));
        assert!(max_divergence(&m, &sampled) > 1e-3);
        let a = pressure_project(&m, &sampled).unwrap();
        assert!(max_divergence(&m, &a) < 1e-12);
        // the removed part is a gradient, orthogonal to every divergence-free field
        let mut psi: Vec<f64> = (0..m.node_count()).map(|k| (k as f64 * 0.61).sin()).collect();
        for h in m.hinges().iter().filter(|h| !h.closed) {
            psi[h.nodes[0]] = 0.0;
        }
        let z = discretize_from_streamfunction(&m, &psi, Vec3::zeros()).unwrap();
        assert_eq!(max_divergence(&m, &z), 0.0);
        assert!(pair_flat(&m, &sampled.sub(&a), &z).abs() < 1e-12);
        let again = pressure_project(&m, &z).unwrap();
        assert!(again.sub(&z).max_abs() < 1e-12);
    }
}
