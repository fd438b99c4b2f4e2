use proptest::prelude::*;
use stochflow::calculus::{d0, d1};
use stochflow::dynamics::{advance_configuration, advect_scalar, advection_term, DiagnosticQ};
use stochflow::fields::{discretize_from_streamfunction, divergence, VelocityField};
use stochflow::flat::{pair_dflat, pair_flat};
use stochflow::kelvin::{circulation, curve_from_cell_loop};
use stochflow::mesh::{build_regular_grid, triangle_lattice, Boundary, MeshGeometry, Vec3};

fn mesh(kind: u8, n: usize) -> MeshGeometry {
    match kind {
        0 => build_regular_grid(n, n, 0.3, Boundary::Periodic).unwrap(),
        1 => build_regular_grid(n, n + 1, 0.5, Boundary::Wall).unwrap(),
        _ => triangle_lattice(n, n, 0.05).unwrap(),
    }
}

/// Field from arbitrary node values, zeroed on wall nodes.
fn field(m: &MeshGeometry, psi: &[f64], mean: (f64, f64)) -> VelocityField {
    let mut psi: Vec<f64> = (0..m.node_count()).map(|k| psi[k % psi.len()]).collect();
    for h in m.hinges().iter().filter(|h| !h.closed) {
        psi[h.nodes[0]] = 0.0;
    }
    let mean = if m.period().is_some() { Vec3::new(mean.0, mean.1, 0.0) } else { Vec3::zeros() };
    discretize_from_streamfunction(m, &psi, mean).unwrap()
}

fn values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, 16..48)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn streamfunction_fields_have_zero_divergence(kind in 0u8..3, n in 3usize..7, psi in values(), u in -1.0f64..1.0) {
        let m = mesh(kind, n);
        let a = field(&m, &psi, (u, -0.5 * u));
        prop_assert!(divergence(&m, &a).iter().all(|d| *d == 0.0));
    }

    #[test]
    fn directed_fluxes_are_antisymmetric(kind in 0u8..3, n in 3usize..6, psi in values()) {
        let m = mesh(kind, n);
        let f = field(&m, &psi, (0.2, 0.1));
        for i in 0..m.cell_count() {
            for l in m.neighbors(i) {
                let back = m.link(l.cell, i).unwrap();
                prop_assert_eq!(l.sign * f.flux[l.face], -(back.sign * f.flux[back.face]));
            }
        }
        let scale = f.max_abs().max(1e-300);
        prop_assert!(f.to_matrix(&m).omega_asymmetry(&m) <= 4.0 * f64::EPSILON * scale);
    }

    #[test]
    fn d_of_d_vanishes(kind in 0u8..3, n in 3usize..7, g in values()) {
        let m = mesh(kind, n);
        let g: Vec<f64> = (0..m.cell_count()).map(|i| g[i % g.len()]).collect();
        prop_assert!(d1(&m, &d0(&m, &g)).max_abs() <= 1e-14 * 2.0);
    }

    #[test]
    fn pairing_is_symmetric_and_positive(kind in 0u8..3, n in 3usize..6, p in values(), q in values()) {
        let m = mesh(kind, n);
        let (a, b) = (field(&m, &p, (0.3, 0.0)), field(&m, &q, (-0.1, 0.4)));
        let scale = 1.0 + pair_flat(&m, &a, &a).abs() + pair_flat(&m, &b, &b).abs();
        prop_assert!((pair_flat(&m, &a, &b) - pair_flat(&m, &b, &a)).abs() <= 1e-12 * scale);
        if a.max_abs() > 0.0 {
            prop_assert!(pair_flat(&m, &a, &a) > 0.0);
        }
    }

    #[test]
    fn advection_does_no_work(kind in 0u8..3, n in 3usize..6, p in values()) {
        let m = mesh(kind, n);
        let a = field(&m, &p, (0.4, -0.2));
        let t = advection_term(&m, &a);
        let work: f64 = t.iter().zip(&a.flux).map(|(x, f)| x * f).sum();
        let scale = 1.0 + a.max_abs().powi(3);
        prop_assert!(work.abs() <= 1e-12 * scale, "work {}", work);
        prop_assert!(pair_dflat(&m, &a, &a, &a).abs() <= 1e-12 * scale);
    }

    #[test]
    fn scalar_advection_keeps_mass(kind in 0u8..3, n in 3usize..6, p in values(), g in values(), tau in 0.01f64..0.2) {
        let m = mesh(kind, n);
        let a = field(&m, &p, (0.1, 0.3));
        let phi: Vec<f64> = (0..m.cell_count()).map(|i| g[i % g.len()]).collect();
        let mass = |x: &[f64]| x.iter().zip(m.volumes()).map(|(v, w)| v * w).sum::<f64>();
        let next = advect_scalar(&m, &a, &phi, tau).unwrap();
        let scale = phi.iter().zip(m.volumes()).map(|(v, w)| (v * w).abs()).sum::<f64>().max(1e-300);
        prop_assert!((mass(&next) - mass(&phi)).abs() <= 1e-12 * scale);
    }

    #[test]
    fn configuration_rows_sum_to_one(n in 3usize..5, p in values(), tau in 0.001f64..0.05) {
        let m = mesh(0, n);
        let a = field(&m, &p, (0.2, -0.3));
        let mut q = DiagnosticQ::identity(m.cell_count());
        for _ in 0..20 {
            q = advance_configuration(&m, &q, &a, tau);
        }
        let size = q.q.iter().fold(1.0f64, |s, x| s.max(x.abs()));
        prop_assert!(q.row_sum_deviation() <= 1e-12 * size, "{} at size {}", q.row_sum_deviation(), size);
    }

    #[test]
    fn reversed_curve_negates_circulation(w in 2usize..4, h in 2usize..4, p in values()) {
        let m = build_regular_grid(6, 6, 0.5, Boundary::Periodic).unwrap();
        let g = m.regular().unwrap();
        let mut cells = Vec::new();
        cells.extend((0..w).map(|x| g.cell(1 + x, 1)));
        cells.extend((1..h).map(|y| g.cell(w, 1 + y)));
        cells.extend((1..w).rev().map(|x| g.cell(x, h)));
        cells.extend((2..h).rev().map(|y| g.cell(1, y)));
        let c = curve_from_cell_loop(&m, &cells).unwrap();
        let a = field(&m, &p, (0.5, 0.25));
        let fwd = circulation(&m, &a, &c).unwrap();
        let back = circulation(&m, &a, &c.reversed()).unwrap();
        prop_assert!((fwd + back).abs() <= 1e-12 * (1.0 + fwd.abs()));
    }
}
