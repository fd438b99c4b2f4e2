use std::collections::{BTreeMap, HashMap};

use nalgebra::Matrix3;

use super::{BoundaryFace, Face, Hinge, MeshError, MeshGeometry, Vec3};

/// How non-positive dual edges are treated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DualPolicy {
    /// Reject any dual edge not longer than the degeneracy threshold.
    Strict,
    /// Accept cocircular configurations (zero-length duals); still reject negative ones.
    AllowDegenerate,
}

/// Triangle (2D) or tetrahedral (3D) complex with wall boundary.
pub fn build_simplicial(nodes: &[Vec3], cells: &[Vec<usize>], dim: usize) -> Result<MeshGeometry, MeshError> {
    build_simplicial_with(nodes, cells, dim, DualPolicy::Strict)
}

pub fn build_simplicial_with(
    nodes: &[Vec3],
    cells: &[Vec<usize>],
    dim: usize,
    policy: DualPolicy,
) -> Result<MeshGeometry, MeshError> {
    if dim != 2 && dim != 3 {
        return Err(MeshError::InvalidInput(format!("dimension must be 2 or 3, got {dim}")));
    }
    if cells.is_empty() {
        return Err(MeshError::InvalidInput("no cells".into()));
    }
    for (c, v) in cells.iter().enumerate() {
        if v.len() != dim + 1 {
            return Err(MeshError::InvalidInput(format!(
                "cell {c} has {} vertices, expected {}",
                v.len(),
                dim + 1
            )));
        }
        if let Some(&bad) = v.iter().find(|&&k| k >= nodes.len()) {
            return Err(MeshError::InvalidInput(format!("cell {c} references missing node {bad}")));
        }
        let mut s = v.clone();
        s.sort_unstable();
        s.dedup();
        if s.len() != v.len() {
            return Err(MeshError::InvalidInput(format!("cell {c} repeats a vertex")));
        }
    }
    let (lo, hi) = nodes.iter().fold(
        (Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY)),
        |(lo, hi), p| (lo.inf(p), hi.sup(p)),
    );
    let diameter = (hi - lo).norm();
    let eps_geom = 1e-10 * diameter;

    let mut cells: Vec<Vec<usize>> = cells.to_vec();
    let signed: Vec<f64> = cells.iter().map(|c| signed_volume(nodes, c, dim)).collect();
    let vol_eps = 1e-14 * diameter.powi(dim as i32);
    let degenerate: Vec<usize> = (0..cells.len()).filter(|&c| signed[c].abs() <= vol_eps).collect();
    if !degenerate.is_empty() {
        return Err(MeshError::InvertedCell(degenerate));
    }
    let negative: Vec<usize> = (0..cells.len()).filter(|&c| signed[c] < 0.0).collect();
    if negative.len() == cells.len() {
        for c in &mut cells {
            c.swap(0, 1);
        }
    } else if !negative.is_empty() {
        return Err(MeshError::InvertedCell(negative));
    }
    let volumes: Vec<f64> = signed.iter().map(|v| v.abs()).collect();

    let centers: Vec<Vec3> = cells
        .iter()
        .map(|c| {
            if dim == 2 {
                circumcenter_tri(&nodes[c[0]], &nodes[c[1]], &nodes[c[2]])
            } else {
                circumcenter_tet(&nodes[c[0]], &nodes[c[1]], &nodes[c[2]], &nodes[c[3]])
            }
        })
        .collect();

    let mut mesh = MeshGeometry {
        dim,
        nodes: nodes.to_vec(),
        cells,
        volumes,
        centers,
        faces: Vec::new(),
        boundary_faces: Vec::new(),
        links: Vec::new(),
        hinges: Vec::new(),
        triples: Vec::new(),
        triple_index: HashMap::new(),
        regular: None,
        period: None,
        eps_geom,
        diameter,
    };
    if dim == 2 {
        faces_2d(&mut mesh)?;
    } else {
        faces_3d(&mut mesh)?;
    }

    let threshold = match policy {
        DualPolicy::Strict => eps_geom,
        DualPolicy::AllowDegenerate => -eps_geom,
    };
    let bad: Vec<(usize, usize, f64)> = mesh
        .faces
        .iter()
        .filter(|f| f.dual_length <= threshold)
        .map(|f| (f.cells[0], f.cells[1], f.dual_length))
        .collect();
    if !bad.is_empty() {
        return Err(MeshError::NonDelaunay { threshold: eps_geom, pairs: bad });
    }
    if policy == DualPolicy::AllowDegenerate {
        for f in &mut mesh.faces {
            if f.dual_length.abs() <= eps_geom {
                f.dual_length = 0.0;
            }
        }
    }

    mesh.finish();
    if dim == 2 {
        hinges_2d(&mut mesh)?;
    } else {
        hinges_3d(&mut mesh)?;
    }
    mesh.finish();
    Ok(mesh)
}

fn signed_volume(nodes: &[Vec3], c: &[usize], dim: usize) -> f64 {
    let a = nodes[c[0]];
    if dim == 2 {
        0.5 * (nodes[c[1]] - a).cross(&(nodes[c[2]] - a)).z
    } else {
        (nodes[c[1]] - a).dot(&(nodes[c[2]] - a).cross(&(nodes[c[3]] - a))) / 6.0
    }
}

pub(crate) fn circumcenter_tri(a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let n = ab.cross(&ac);
    let num = n.cross(&ab) * ac.norm_squared() + ac.cross(&n) * ab.norm_squared();
    a + num / (2.0 * n.norm_squared())
}

pub(crate) fn circumcenter_tet(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> Vec3 {
    let (u, v, w) = (b - a, c - a, d - a);
    let m = Matrix3::from_rows(&[u.transpose(), v.transpose(), w.transpose()]);
    let rhs = Vec3::new(u.norm_squared(), v.norm_squared(), w.norm_squared()) * 0.5;
    let x = m.lu().solve(&rhs).expect("non-degenerate tetrahedron");
    a + x
}

fn faces_2d(mesh: &mut MeshGeometry) -> Result<(), MeshError> {
    // directed edges of counterclockwise triangles keep their cell on the left
    let mut edges: BTreeMap<(usize, usize), Vec<(usize, usize, usize)>> = BTreeMap::new();
    for (c, v) in mesh.cells.iter().enumerate() {
        for t in 0..3 {
            let (p, q) = (v[t], v[(t + 1) % 3]);
            edges.entry((p.min(q), p.max(q))).or_default().push((c, p, q));
        }
    }
    let mut inconsistent = Vec::new();
    for (key, users) in &edges {
        let (p, q) = (mesh.nodes[key.0], mesh.nodes[key.1]);
        match users.as_slice() {
            [(c, s, e)] => {
                let t = mesh.nodes[*e] - mesh.nodes[*s];
                mesh.boundary_faces.push(BoundaryFace {
                    cell: *c,
                    area: t.norm(),
                    normal: Vec3::new(t.y, -t.x, 0.0) / t.norm(),
                    barycenter: (p + q) * 0.5,
                });
            }
            [(ci, s, e), (cj, s2, _)] => {
                if s == s2 {
                    inconsistent.push((*ci, *cj));
                    continue;
                }
                let t = mesh.nodes[*e] - mesh.nodes[*s];
                let normal = Vec3::new(t.y, -t.x, 0.0) / t.norm();
                let dual = (mesh.centers[*cj] - mesh.centers[*ci]).dot(&normal);
                mesh.faces.push(Face {
                    cells: [*ci, *cj],
                    area: t.norm(),
                    dual_length: dual,
                    normal,
                    barycenter: (p + q) * 0.5,
                    nodes: vec![*s, *e],
                    edge: t,
                });
            }
            _ => {
                return Err(MeshError::NonManifold(format!(
                    "edge ({}, {}) shared by {} cells",
                    key.0,
                    key.1,
                    users.len()
                )))
            }
        }
    }
    if !inconsistent.is_empty() {
        return Err(MeshError::InconsistentOrientation(inconsistent));
    }
    Ok(())
}

fn faces_3d(mesh: &mut MeshGeometry) -> Result<(), MeshError> {
    let mut tris: BTreeMap<[usize; 3], Vec<usize>> = BTreeMap::new();
    for (c, v) in mesh.cells.iter().enumerate() {
        for skip in 0..4 {
            let mut f: Vec<usize> = (0..4).filter(|&t| t != skip).map(|t| v[t]).collect();
            f.sort_unstable();
            tris.entry([f[0], f[1], f[2]]).or_default().push(c);
        }
    }
    let centroid = |c: usize, mesh: &MeshGeometry| -> Vec3 {
        mesh.cells[c].iter().map(|&k| mesh.nodes[k]).sum::<Vec3>() / 4.0
    };
    let mut inconsistent = Vec::new();
    for (key, users) in &tris {
        let (a, b, c) = (mesh.nodes[key[0]], mesh.nodes[key[1]], mesh.nodes[key[2]]);
        let cross = (b - a).cross(&(c - a));
        let area = 0.5 * cross.norm();
        let bary = (a + b + c) / 3.0;
        let mut normal = cross / cross.norm();
        let ci = users[0];
        if normal.dot(&(bary - centroid(ci, mesh))) < 0.0 {
            normal = -normal;
        }
        match users.as_slice() {
            [_] => mesh.boundary_faces.push(BoundaryFace { cell: ci, area, normal, barycenter: bary }),
            [_, cj] => {
                if normal.dot(&(centroid(*cj, mesh) - bary)) <= 0.0 {
                    inconsistent.push((ci, *cj));
                    continue;
                }
                let dual = (mesh.centers[*cj] - mesh.centers[ci]).dot(&normal);
                mesh.faces.push(Face {
                    cells: [ci, *cj],
                    area,
                    dual_length: dual,
                    normal,
                    barycenter: bary,
                    nodes: key.to_vec(),
                    edge: Vec3::zeros(),
                });
            }
            _ => {
                return Err(MeshError::NonManifold(format!(
                    "triangle {key:?} shared by {} cells",
                    users.len()
                )))
            }
        }
    }
    if !inconsistent.is_empty() {
        return Err(MeshError::InconsistentOrientation(inconsistent));
    }
    Ok(())
}

/// Orders the cells of one hinge given, for each, its successor in the positive sense.
fn order_ring(
    hinge: &str,
    incident: &[usize],
    next: &HashMap<usize, usize>,
) -> Result<(Vec<usize>, bool), MeshError> {
    let has_prev: std::collections::HashSet<usize> = next.values().copied().collect();
    let start = incident.iter().copied().filter(|c| !has_prev.contains(c)).min();
    let closed = start.is_none();
    let start = start.unwrap_or_else(|| *incident.iter().min().unwrap());
    let mut ring = vec![start];
    let mut cur = start;
    while let Some(&n) = next.get(&cur) {
        if n == start {
            break;
        }
        ring.push(n);
        cur = n;
        if ring.len() > incident.len() {
            break;
        }
    }
    if ring.len() != incident.len() {
        return Err(MeshError::NonManifold(format!("cells around {hinge} do not form a single fan")));
    }
    Ok((ring, closed))
}

fn hinges_2d(mesh: &mut MeshGeometry) -> Result<(), MeshError> {
    let mut around: BTreeMap<usize, Vec<(usize, usize, usize)>> = BTreeMap::new();
    for (c, v) in mesh.cells.iter().enumerate() {
        for t in 0..3 {
            around.entry(v[t]).or_default().push((c, v[(t + 1) % 3], v[(t + 2) % 3]));
        }
    }
    let mut hinges = Vec::with_capacity(around.len());
    for (vtx, list) in around {
        // triangle (v, a, b) is followed counterclockwise by the one across edge (v, b)
        let by_edge: HashMap<usize, usize> = list.iter().map(|&(c, a, _)| (a, c)).collect();
        let next: HashMap<usize, usize> = list
            .iter()
            .filter_map(|&(c, _, b)| by_edge.get(&b).map(|&n| (c, n)))
            .collect();
        let incident: Vec<usize> = list.iter().map(|t| t.0).collect();
        let (ring, closed) = order_ring(&format!("vertex {vtx}"), &incident, &next)?;
        let p = mesh.nodes[vtx];
        let corners = ring
            .iter()
            .map(|&c| {
                let &(_, a, b) = list.iter().find(|t| t.0 == c).unwrap();
                let ma = (p + mesh.nodes[a]) * 0.5;
                let mb = (p + mesh.nodes[b]) * 0.5;
                shoelace(&[p, ma, mesh.centers[c], mb])
            })
            .collect();
        hinges.push(Hinge {
            nodes: vec![vtx],
            point: p,
            length: 1.0,
            ring,
            links: Vec::new(),
            closed,
            corners,
            dual_area: 0.0,
        });
    }
    mesh.hinges = hinges;
    Ok(())
}

fn shoelace(pts: &[Vec3]) -> f64 {
    let m = pts.len();
    0.5 * (0..m)
        .map(|t| {
            let (a, b) = (pts[t], pts[(t + 1) % m]);
            a.x * b.y - a.y * b.x
        })
        .sum::<f64>()
}

fn hinges_3d(mesh: &mut MeshGeometry) -> Result<(), MeshError> {
    let mut around: BTreeMap<(usize, usize), Vec<(usize, usize, usize)>> = BTreeMap::new();
    for (c, v) in mesh.cells.iter().enumerate() {
        for a in 0..4 {
            for b in a + 1..4 {
                let (u, w) = (v[a].min(v[b]), v[a].max(v[b]));
                let others: Vec<usize> = (0..4).filter(|&t| t != a && t != b).map(|t| v[t]).collect();
                let (pu, pw) = (mesh.nodes[u], mesh.nodes[w]);
                let (mut x, mut y) = (others[0], others[1]);
                if (mesh.nodes[x] - pu).cross(&(mesh.nodes[y] - pu)).dot(&(pw - pu)) < 0.0 {
                    std::mem::swap(&mut x, &mut y);
                }
                around.entry((u, w)).or_default().push((c, x, y));
            }
        }
    }
    let mut hinges = Vec::with_capacity(around.len());
    for ((u, w), list) in around {
        let by_first: HashMap<usize, usize> = list.iter().map(|&(c, x, _)| (x, c)).collect();
        let next: HashMap<usize, usize> = list
            .iter()
            .filter_map(|&(c, _, y)| by_first.get(&y).map(|&n| (c, n)))
            .collect();
        let incident: Vec<usize> = list.iter().map(|t| t.0).collect();
        let (ring, closed) = order_ring(&format!("edge ({u}, {w})"), &incident, &next)?;
        let (pu, pw) = (mesh.nodes[u], mesh.nodes[w]);
        let axis = (pw - pu).normalize();
        let mid = (pu + pw) * 0.5;
        let corners = ring
            .iter()
            .map(|&c| {
                let &(_, x, y) = list.iter().find(|t| t.0 == c).unwrap();
                let fx = circumcenter_tri(&pu, &pw, &mesh.nodes[x]) - mid;
                let fy = circumcenter_tri(&pu, &pw, &mesh.nodes[y]) - mid;
                let cc = mesh.centers[c] - mid;
                0.5 * (fx.cross(&cc) + cc.cross(&fy)).dot(&axis)
            })
            .collect();
        hinges.push(Hinge {
            nodes: vec![u, w],
            point: mid,
            length: (pw - pu).norm(),
            ring,
            links: Vec::new(),
            closed,
            corners,
            dual_area: 0.0,
        });
    }
    mesh.hinges = hinges;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v2(x: f64, y: f64) -> Vec3 {
        Vec3::new(x, y, 0.0)
    }

    #[test]
    fn unit_square_split_along_diagonal() {
        let nodes = [v2(0., 0.), v2(1., 0.), v2(1., 1.), v2(0., 1.)];
        let cells = [vec![0, 1, 2], vec![0, 2, 3]];
        // both circumcentres sit at the square centre: a cocircular, zero-length dual
        assert!(matches!(build_simplicial(&nodes, &cells, 2), Err(MeshError::NonDelaunay { .. })));
        let m = build_simplicial_with(&nodes, &cells, 2, DualPolicy::AllowDegenerate).unwrap();
        assert_eq!(m.cell_count(), 2);
        assert_eq!(m.face_count(), 1);
        assert_eq!(m.volumes(), &[0.5, 0.5]);
        assert_eq!(m.boundary_faces().len(), 4);
    }

    #[test]
    fn equilateral_pair_dual_length() {
        let s = 2.0;
        let hgt = s * 3f64.sqrt() / 2.0;
        let nodes = [v2(0., 0.), v2(s, 0.), v2(s / 2., hgt), v2(s / 2., -hgt)];
        let m = build_simplicial(&nodes, &[vec![0, 1, 2], vec![1, 0, 3]], 2).unwrap();
        let circumradius = s / 3f64.sqrt();
        let to_edge = hgt - circumradius;
        let f = &m.faces()[0];
        assert!((f.dual_length - 2.0 * (circumradius - to_edge)).abs() < 1e-14);
        assert!((f.area - s).abs() < 1e-15);
    }

    #[test]
    fn obtuse_pair_is_not_delaunay() {
        // opposite angles sum beyond π: both circumcentres cross the shared edge
        let nodes = [v2(0., 0.), v2(4., 0.), v2(2., 0.5), v2(2., -0.5)];
        let r = build_simplicial(&nodes, &[vec![0, 1, 2], vec![1, 0, 3]], 2);
        match r {
            Err(MeshError::NonDelaunay { pairs, .. }) => {
                assert_eq!(pairs.len(), 1);
                assert!(pairs[0].2 < 0.0);
            }
            other => panic!("expected NonDelaunay, got {other:?}"),
        }
    }

    #[test]
    fn orientation_errors() {
        let nodes = [v2(0., 0.), v2(1., 0.), v2(0., 1.), v2(1.1, 1.3)];
        let flat = [v2(0., 0.), v2(1., 0.), v2(2., 0.)];
        assert!(matches!(
            build_simplicial(&flat, &[vec![0, 1, 2]], 2),
            Err(MeshError::InvertedCell(_))
        ));
        assert!(matches!(
            build_simplicial(&nodes, &[vec![0, 1, 2], vec![1, 2, 3]], 2),
            Err(MeshError::InvertedCell(_))
        ));
        // uniformly clockwise input is consistently oriented and accepted
        let m = build_simplicial(&nodes, &[vec![0, 2, 1], vec![1, 2, 3]], 2).unwrap();
        assert!(m.volumes().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn tetrahedron_circumcenter_is_equidistant() {
        let p = [
            Vec3::new(0.1, 0.0, 0.2),
            Vec3::new(1.3, 0.2, 0.0),
            Vec3::new(0.4, 1.1, 0.3),
            Vec3::new(0.2, 0.3, 1.4),
        ];
        let c = circumcenter_tet(&p[0], &p[1], &p[2], &p[3]);
        let r: Vec<f64> = p.iter().map(|q| (q - c).norm()).collect();
        assert!(r.iter().all(|x| (x - r[0]).abs() < 1e-13));
        let t = circumcenter_tri(&p[0], &p[1], &p[2]);
        let n = (p[1] - p[0]).cross(&(p[2] - p[0]));
        assert!((t - p[0]).dot(&n).abs() < 1e-13);
        assert!(((t - p[0]).norm() - (t - p[1]).norm()).abs() < 1e-13);
        assert!(((t - p[0]).norm() - (t - p[2]).norm()).abs() < 1e-13);
    }
}

/// Triangulated strip lattice of `cols × rows` nodes with alternate rows
/// shifted by half a spacing, so every triangle is close to equilateral.
/// `jitter` (fraction of the spacing) moves interior nodes by a fixed
/// deterministic pattern; keep it below about 0.1 to stay Delaunay.
pub fn triangle_lattice(cols: usize, rows: usize, jitter: f64) -> Result<MeshGeometry, MeshError> {
    if cols < 2 || rows < 2 {
        return Err(MeshError::InvalidGrid("triangle lattice needs at least 2 × 2 nodes".into()));
    }
    let dy = 3f64.sqrt() / 2.0;
    let mut nodes = Vec::with_capacity(cols * rows);
    for r in 0..rows {
        for c in 0..cols {
            let mut p = Vec3::new(c as f64 + 0.5 * (r % 2) as f64, r as f64 * dy, 0.0);
            if r > 0 && r + 1 < rows && c > 0 && c + 1 < cols {
                let s = (r * cols + c) as f64;
                p.x += jitter * (s * 12.9898).sin();
                p.y += jitter * (s * 78.233).cos();
            }
            nodes.push(p);
        }
    }
    let id = |r: usize, c: usize| r * cols + c;
    let mut cells = Vec::new();
    for r in 0..rows - 1 {
        for c in 0..cols - 1 {
            if r % 2 == 0 {
                cells.push(vec![id(r, c), id(r, c + 1), id(r + 1, c)]);
                cells.push(vec![id(r, c + 1), id(r + 1, c + 1), id(r + 1, c)]);
            } else {
                cells.push(vec![id(r, c), id(r, c + 1), id(r + 1, c + 1)]);
                cells.push(vec![id(r, c), id(r + 1, c + 1), id(r + 1, c)]);
            }
        }
    }
    build_simplicial(&nodes, &cells, 2)
}
