use std::collections::HashMap;

use super::{
    Boundary, BoundaryFace, Face, Hinge, MeshError, MeshGeometry, RegularGrid, Vec3,
};

/// Square cells of side `h`, cell `(x, y)` numbered `x + nx·y`.
///
/// Periodic grids need at least three cells per direction so that every
/// adjacent pair shares exactly one face.
pub fn build_regular_grid(
    nx: usize,
    ny: usize,
    h: f64,
    boundary: Boundary,
) -> Result<MeshGeometry, MeshError> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(MeshError::InvalidGrid(format!("spacing h must be positive, got {h}")));
    }
    if nx < 1 || ny < 1 {
        return Err(MeshError::InvalidGrid(format!("need nx, ny >= 1, got {nx}x{ny}")));
    }
    let periodic = boundary == Boundary::Periodic;
    if periodic && (nx < 3 || ny < 3) {
        return Err(MeshError::InvalidGrid(format!(
            "periodic grids need nx, ny >= 3, got {nx}x{ny}"
        )));
    }
    let grid = RegularGrid { nx, ny, h, boundary };
    let cell = |x: usize, y: usize| x + nx * y;
    let (mx, my) = if periodic { (nx, ny) } else { (nx + 1, ny + 1) };
    let node = |x: usize, y: usize| (x % mx) + mx * (y % my);

    let mut nodes = Vec::with_capacity(mx * my);
    for y in 0..my {
        for x in 0..mx {
            nodes.push(Vec3::new(x as f64 * h, y as f64 * h, 0.0));
        }
    }

    let n = nx * ny;
    let area = h * h;
    let mut cells = Vec::with_capacity(n);
    let mut centers = Vec::with_capacity(n);
    for y in 0..ny {
        for x in 0..nx {
            cells.push(vec![node(x, y), node(x + 1, y), node(x + 1, y + 1), node(x, y + 1)]);
            centers.push(Vec3::new((x as f64 + 0.5) * h, (y as f64 + 0.5) * h, 0.0));
        }
    }

    let mut faces = Vec::new();
    let mut boundary_faces = Vec::new();
    for y in 0..ny {
        for x in 0..nx {
            let i = cell(x, y);
            // face towards +x: vertical edge going up, i on its left
            let xr = (x as f64 + 1.0) * h;
            if x + 1 < nx || periodic {
                faces.push(Face {
                    cells: [i, cell((x + 1) % nx, y)],
                    area: h,
                    dual_length: h,
                    normal: Vec3::x(),
                    barycenter: wrap(Vec3::new(xr, (y as f64 + 0.5) * h, 0.0), nx, ny, h, periodic),
                    nodes: vec![node(x + 1, y), node(x + 1, y + 1)],
                    edge: Vec3::new(0.0, h, 0.0),
                });
            } else {
                boundary_faces.push(BoundaryFace {
                    cell: i,
                    area: h,
                    normal: Vec3::x(),
                    barycenter: Vec3::new(xr, (y as f64 + 0.5) * h, 0.0),
                });
            }
            // face towards +y: horizontal edge going left, i on its left
            let yt = (y as f64 + 1.0) * h;
            if y + 1 < ny || periodic {
                faces.push(Face {
                    cells: [i, cell(x, (y + 1) % ny)],
                    area: h,
                    dual_length: h,
                    normal: Vec3::y(),
                    barycenter: wrap(Vec3::new((x as f64 + 0.5) * h, yt, 0.0), nx, ny, h, periodic),
                    nodes: vec![node(x + 1, y + 1), node(x, y + 1)],
                    edge: Vec3::new(-h, 0.0, 0.0),
                });
            } else {
                boundary_faces.push(BoundaryFace {
                    cell: i,
                    area: h,
                    normal: Vec3::y(),
                    barycenter: Vec3::new((x as f64 + 0.5) * h, yt, 0.0),
                });
            }
            if !periodic && x == 0 {
                boundary_faces.push(BoundaryFace {
                    cell: i,
                    area: h,
                    normal: -Vec3::x(),
                    barycenter: Vec3::new(0.0, (y as f64 + 0.5) * h, 0.0),
                });
            }
            if !periodic && y == 0 {
                boundary_faces.push(BoundaryFace {
                    cell: i,
                    area: h,
                    normal: -Vec3::y(),
                    barycenter: Vec3::new((x as f64 + 0.5) * h, 0.0, 0.0),
                });
            }
        }
    }

    // Hinges are grid nodes; the four surrounding cells in counterclockwise
    // order start with the upper-right one.
    let mut hinges = Vec::with_capacity(mx * my);
    for ny_ in 0..my {
        for nx_ in 0..mx {
            let around: [(isize, isize); 4] = [(0, 0), (-1, 0), (-1, -1), (0, -1)];
            let present: Vec<Option<usize>> = around
                .iter()
                .map(|&(dx, dy)| {
                    let cx = nx_ as isize + dx;
                    let cy = ny_ as isize + dy;
                    if periodic {
                        Some(cell(cx.rem_euclid(nx as isize) as usize, cy.rem_euclid(ny as isize) as usize))
                    } else if cx >= 0 && cy >= 0 && (cx as usize) < nx && (cy as usize) < ny {
                        Some(cell(cx as usize, cy as usize))
                    } else {
                        None
                    }
                })
                .collect();
            let (ring, closed) = cyclic_run(&present);
            if ring.is_empty() {
                continue;
            }
            let m = ring.len();
            hinges.push(Hinge {
                nodes: vec![node(nx_, ny_)],
                point: nodes[node(nx_, ny_)],
                length: 1.0,
                ring,
                links: Vec::new(),
                closed,
                corners: vec![area / 4.0; m],
                dual_area: 0.0,
            });
        }
    }

    let (lx, ly) = (nx as f64 * h, ny as f64 * h);
    let mut mesh = MeshGeometry {
        dim: 2,
        nodes,
        cells,
        volumes: vec![area; n],
        centers,
        faces,
        boundary_faces,
        links: Vec::new(),
        hinges,
        triples: Vec::new(),
        triple_index: HashMap::new(),
        regular: Some(grid),
        period: periodic.then(|| Vec3::new(lx, ly, 0.0)),
        eps_geom: 1e-10 * (lx * lx + ly * ly).sqrt(),
        diameter: (lx * lx + ly * ly).sqrt(),
    };
    mesh.finish();
    Ok(mesh)
}

fn wrap(p: Vec3, nx: usize, ny: usize, h: f64, periodic: bool) -> Vec3 {
    if !periodic {
        return p;
    }
    let (lx, ly) = (nx as f64 * h, ny as f64 * h);
    Vec3::new(p.x.rem_euclid(lx), p.y.rem_euclid(ly), 0.0)
}

/// Longest cyclic run of present entries, in order. A full cycle is closed.
fn cyclic_run(items: &[Option<usize>]) -> (Vec<usize>, bool) {
    let m = items.len();
    if items.iter().all(Option::is_some) {
        return (items.iter().map(|c| c.unwrap()).collect(), true);
    }
    let start = (0..m)
        .find(|&t| items[t].is_some() && items[(t + m - 1) % m].is_none())
        .unwrap_or(0);
    let mut ring = Vec::new();
    for s in 0..m {
        match items[(start + s) % m] {
            Some(c) => ring.push(c),
            None => break,
        }
    }
    (ring, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_three_by_three() {
        let m = build_regular_grid(3, 3, 1.0, Boundary::Periodic).unwrap();
        assert_eq!(m.cell_count(), 9);
        assert!((0..9).all(|i| m.neighbors(i).len() == 4));
        assert!(m.volumes().iter().all(|&v| v == 1.0));
        assert_eq!(m.face_count(), 18);
        assert!(m.boundary_faces().is_empty());
    }

    #[test]
    fn wall_two_by_two() {
        let m = build_regular_grid(2, 2, 0.5, Boundary::Wall).unwrap();
        assert_eq!(m.cell_count(), 4);
        assert_eq!(m.face_count(), 4);
        assert_eq!(m.boundary_faces().len(), 8);
        assert!(m.volumes().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn rejects_small_periodic_and_bad_spacing() {
        assert!(matches!(
            build_regular_grid(2, 2, 1.0, Boundary::Periodic),
            Err(MeshError::InvalidGrid(_))
        ));
        assert!(build_regular_grid(4, 4, 0.0, Boundary::Wall).is_err());
        assert!(build_regular_grid(4, 4, -1.0, Boundary::Periodic).is_err());
    }

    #[test]
    fn grid_metrics() {
        let h = 0.3;
        let m = build_regular_grid(5, 4, h, Boundary::Periodic).unwrap();
        for f in m.faces() {
            assert_eq!(f.area, h);
            assert_eq!(f.dual_length, h);
        }
        assert_eq!(m.hinges().len(), 20);
        for e in m.hinges() {
            assert!(e.closed);
            assert_eq!(e.ring.len(), 4);
            assert!((e.dual_area - h * h).abs() < 1e-15);
            assert!(e.corners.iter().all(|&c| c == h * h / 4.0));
        }
    }

    #[test]
    fn grid_triples_are_half() {
        let m = build_regular_grid(4, 5, 0.1, Boundary::Periodic).unwrap();
        assert_eq!(m.triples().len(), 4 * 20);
        for t in m.triples() {
            assert!((t.coeff - 0.5).abs() < 1e-15);
        }
        let w = build_regular_grid(2, 2, 1.0, Boundary::Wall).unwrap();
        // only the centre node has a full ring; boundary nodes have at most two cells
        assert_eq!(w.triples().len(), 4);
    }

    #[test]
    fn closed_cell_boundaries_on_periodic_grid() {
        let m = build_regular_grid(3, 4, 0.7, Boundary::Periodic).unwrap();
        for i in 0..m.cell_count() {
            let s: Vec3 = m
                .neighbors(i)
                .iter()
                .map(|l| m.face(l.face).normal * (l.sign * m.face(l.face).area))
                .sum();
            assert_eq!(s, Vec3::zeros());
        }
    }

    #[test]
    fn ring_turns_counterclockwise() {
        let m = build_regular_grid(4, 4, 1.0, Boundary::Periodic).unwrap();
        for e in m.hinges() {
            for t in 0..4 {
                let a = m.displacement(&e.point, &m.centers()[e.ring[t]]);
                let b = m.displacement(&e.point, &m.centers()[e.ring[(t + 1) % 4]]);
                assert!(a.cross(&b).z > 0.0);
            }
        }
    }
}
