//! Discrete forms on cells: 0-forms are per-cell values, 1-forms antisymmetric
//! matrices, 2-forms antisymmetric 3-tensors kept on corner triples.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::fields::{within_two, MatrixEntries, VelocityField};
use crate::mesh::MeshGeometry;

pub type Form0 = Vec<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalculusError {
    #[error("velocity is not null-row: max |row sum| = {0:e}")]
    NotNullRow(f64),
}

/// Antisymmetric matrix with one stored value per unordered pair.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Form1 {
    values: BTreeMap<(usize, usize), f64>,
}

impl Form1 {
    pub fn new() -> Self {
        Self::default()
    }

    /// Per-face values oriented as the faces are stored.
    pub fn from_faces(mesh: &MeshGeometry, values: &[f64]) -> Self {
        let mut f = Form1::new();
        for (v, face) in values.iter().zip(mesh.faces()) {
            f.add(face.cells[0], face.cells[1], *v);
        }
        f
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i < j {
            self.values.get(&(i, j)).copied().unwrap_or(0.0)
        } else if i > j {
            -self.values.get(&(j, i)).copied().unwrap_or(0.0)
        } else {
            0.0
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert_ne!(i, j, "1-forms vanish on the diagonal");
        if i < j {
            self.values.insert((i, j), v);
        } else {
            self.values.insert((j, i), -v);
        }
    }

    /// Adds `v` to `F_ij` (and so `−v` to `F_ji`).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if i == j {
            return;
        }
        let (key, v) = if i < j { ((i, j), v) } else { ((j, i), -v) };
        *self.values.entry(key).or_insert(0.0) += v;
    }

    /// Stored pairs `(i, j, F_ij)` with `i < j`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.values.iter().map(|(&(i, j), &v)| (i, j, v))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Values on the mesh faces, oriented as stored.
    pub fn on_faces(&self, mesh: &MeshGeometry) -> Vec<f64> {
        mesh.faces().iter().map(|f| self.get(f.cells[0], f.cells[1])).collect()
    }
}

/// Antisymmetric 3-tensor stored as `(i; j, k)` with middle cell `i`
/// adjacent to both ends, keyed with `j < k`.
///
/// Lookups try the first index as the middle, then the other two in
/// ascending order, applying the permutation sign.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Form2 {
    values: BTreeMap<(usize, usize, usize), f64>,
}

impl Form2 {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        assert!(i != j && j != k && i != k, "2-forms vanish on repeated indices");
        if j < k {
            self.values.insert((i, j, k), v);
        } else {
            self.values.insert((i, k, j), -v);
        }
    }

    pub fn add(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let (key, v) = if j < k { ((i, j, k), v) } else { ((i, k, j), -v) };
        *self.values.entry(key).or_insert(0.0) += v;
    }

    fn stored(&self, m: usize, a: usize, b: usize) -> Option<f64> {
        if a < b {
            self.values.get(&(m, a, b)).copied()
        } else {
            self.values.get(&(m, b, a)).map(|v| -v)
        }
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        if i == j || j == k || i == k {
            return 0.0;
        }
        if let Some(v) = self.stored(i, j, k) {
            return v;
        }
        // F_ijk = F_jki = F_kij
        let by_j = |s: &Self| s.stored(j, k, i);
        let by_k = |s: &Self| s.stored(k, i, j);
        let found = if j < k { by_j(self).or_else(|| by_k(self)) } else { by_k(self).or_else(|| by_j(self)) };
        found.unwrap_or(0.0)
    }

    /// Stored entries `(i, j, k, F_ijk)` with `j < k`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        self.values.iter().map(|(&(i, j, k), &v)| (i, j, k, v))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// For every stored unordered pair, the cells completing a stored triple.
    fn thirds(&self) -> HashMap<(usize, usize), BTreeSet<usize>> {
        let mut t: HashMap<(usize, usize), BTreeSet<usize>> = HashMap::new();
        for &(i, j, k) in self.values.keys() {
            for (a, b, c) in [(i, j, k), (i, k, j), (j, k, i)] {
                t.entry((a.min(b), a.max(b))).or_default().insert(c);
            }
        }
        t
    }
}

/// `∫ F dV = Σ Ω_i F_i`.
pub fn integrate0(mesh: &MeshGeometry, f: &[f64]) -> f64 {
    f.iter().zip(mesh.volumes()).map(|(a, b)| a * b).sum()
}

/// `(dF)_ij = F_j − F_i` on all pairs at most two cells apart.
pub fn d0(mesh: &MeshGeometry, f: &[f64]) -> Form1 {
    let mut out = Form1::new();
    for i in 0..mesh.cell_count() {
        for j in within_two(mesh, i) {
            if j > i {
                out.set(i, j, f[j] - f[i]);
            }
        }
    }
    out
}

/// `(dF)_ijk = F_ij + F_jk + F_ki` on the corner triples.
pub fn d1(mesh: &MeshGeometry, f: &Form1) -> Form2 {
    let mut out = Form2::new();
    for t in mesh.triples() {
        out.set(t.i, t.j, t.k, f.get(t.i, t.j) + f.get(t.j, t.k) + f.get(t.k, t.i));
    }
    out
}

/// `(ι_A F)_i = Σ_j A_ij F_ij`.
pub fn contract1(mesh: &MeshGeometry, a: &VelocityField, f: &Form1) -> Form0 {
    let mut out = vec![0.0; mesh.cell_count()];
    for (k, face) in mesh.faces().iter().enumerate() {
        let [i, j] = face.cells;
        let fij = f.get(i, j);
        out[i] += a.flux[k] / (2.0 * mesh.volume(i)) * fij;
        out[j] += a.flux[k] / (2.0 * mesh.volume(j)) * fij;
    }
    out
}

/// `(ι_A F)_ij = Σ_k (F_ikj A_ik − F_jki A_jk)`.
pub fn contract2(mesh: &MeshGeometry, a: &VelocityField, f: &Form2) -> Form1 {
    let thirds = f.thirds();
    let mut out = Form1::new();
    for i in 0..mesh.cell_count() {
        for l in mesh.neighbors(i) {
            let k = l.cell;
            let aik = a.a(mesh, i, k);
            if aik == 0.0 {
                continue;
            }
            if let Some(js) = thirds.get(&(i.min(k), i.max(k))) {
                for &j in js {
                    out.add(i, j, f.get(i, k, j) * aik);
                }
            }
        }
    }
    out
}

/// `⟨⟨F, X⟩⟩ = Σ_ij Ω_i X_ij F_ij`.
pub fn pair1(mesh: &MeshGeometry, f: &Form1, x: &impl MatrixEntries) -> f64 {
    pair1_with(mesh, |i, j| f.get(i, j), x)
}

/// Pairing against an arbitrary (not necessarily antisymmetric) matrix `F`.
pub fn pair1_with(mesh: &MeshGeometry, f: impl Fn(usize, usize) -> f64, x: &impl MatrixEntries) -> f64 {
    let mut s = 0.0;
    x.for_each_entry(mesh, &mut |i, j, v| s += mesh.volume(i) * v * f(i, j));
    s
}

/// `⟨⟨F, A, B⟩⟩ = 2 Σ Ω_i F_ijk A_ij B_ik`.
pub fn pair2(mesh: &MeshGeometry, f: &Form2, a: &VelocityField, b: &VelocityField) -> f64 {
    let mut s = 0.0;
    for i in 0..mesh.cell_count() {
        let nb = mesh.neighbors(i);
        for lj in nb {
            let aij = lj.sign * a.flux[lj.face];
            if aij == 0.0 {
                continue;
            }
            for lk in nb {
                if lk.cell == lj.cell {
                    continue;
                }
                let bik = lk.sign * b.flux[lk.face];
                s += f.get(i, lj.cell, lk.cell) * aij * bik / (2.0 * mesh.volume(i));
            }
        }
    }
    s
}

fn null_row_check(mesh: &MeshGeometry, a: &VelocityField) -> Result<(), CalculusError> {
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..mesh.cell_count() {
        let (mut s, mut m) = (0.0, 0.0);
        for l in mesh.neighbors(i) {
            let v = l.sign * a.flux[l.face] / (2.0 * mesh.volume(i));
            s += v;
            m += v.abs();
        }
        worst = worst.max(s.abs());
        scale = scale.max(m);
    }
    if worst > 1e-9 * scale.max(f64::MIN_POSITIVE) {
        return Err(CalculusError::NotNullRow(worst));
    }
    Ok(())
}

/// `L_A F = ι_A dF + d ι_A F`, with `dF` evaluated by cyclic sums on demand.
///
/// The result lives on every pair where `AF − (AF)ᵀ` can be nonzero, which
/// reaches three cells apart when `F` has two-away entries.
pub fn lie1(mesh: &MeshGeometry, a: &VelocityField, f: &Form1) -> Result<Form1, CalculusError> {
    null_row_check(mesh, a)?;
    let n = mesh.cell_count();
    let p = contract1(mesh, a, f);
    let mut support: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j, _) in f.iter() {
        support[i].push(j);
        support[j].push(i);
    }
    let mut pairs = BTreeSet::new();
    for i in 0..n {
        for l in mesh.neighbors(i) {
            for &j in &support[l.cell] {
                if j != i {
                    pairs.insert((i.min(j), i.max(j)));
                }
            }
        }
    }
    let df = |i: usize, j: usize, k: usize| f.get(i, j) + f.get(j, k) + f.get(k, i);
    let mut out = Form1::new();
    for (i, j) in pairs {
        let mut v = p[j] - p[i];
        for l in mesh.neighbors(i) {
            v += a.a(mesh, i, l.cell) * df(i, l.cell, j);
        }
        for l in mesh.neighbors(j) {
            v -= a.a(mesh, j, l.cell) * df(j, l.cell, i);
        }
        out.set(i, j, v);
    }
    Ok(out)
}

/// Circulation of `A♭` around the dual loop of every hinge, `Σ s F_f |e_f|/|S_f|`.
pub fn dec_vorticity(mesh: &MeshGeometry, a: &VelocityField) -> Vec<f64> {
    mesh.hinges()
        .iter()
        .map(|h| h.links.iter().map(|&(f, s)| s * a.flux[f] * mesh.face(f).hodge()).sum())
        .collect()
}
