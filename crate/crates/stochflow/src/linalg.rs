//! Sparse direct solves backed by faer's LU with partial pivoting.

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, SymbolicSparseColMat, Triplet};
use faer::{Conj, Mat, Par};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinAlgError {
    #[error("matrix assembly failed: {0}")]
    Assembly(String),
    #[error("singular matrix: {0}")]
    Singular(String),
}

/// Coordinate-format accumulator; duplicate entries are summed.
#[derive(Clone, Debug, Default)]
pub struct Triplets {
    pub n: usize,
    entries: Vec<Triplet<usize, usize, f64>>,
}

impl Triplets {
    pub fn new(n: usize) -> Self {
        Triplets { n, entries: Vec::new() }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, val: f64) {
        if val != 0.0 {
            self.entries.push(Triplet::new(row, col, val));
        }
    }

    /// Structural entry kept even when zero, so the symbolic pattern is stable.
    #[inline]
    pub fn push_structural(&mut self, row: usize, col: usize, val: f64) {
        self.entries.push(Triplet::new(row, col, val));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries.iter().map(|t| (t.row, t.col, t.val))
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn matrix(&self) -> Result<SparseColMat<usize, f64>, LinAlgError> {
        SparseColMat::try_new_from_triplets(self.n, self.n, &self.entries)
            .map_err(|e| LinAlgError::Assembly(format!("{e:?}")))
    }

    /// Dense copy, for small systems and tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for t in &self.entries {
            d[t.row][t.col] += t.val;
        }
        d
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for t in &self.entries {
            y[t.row] += t.val * x[t.col];
        }
        y
    }
}

/// Factorized square sparse matrix.
pub struct SparseLu {
    lu: Lu<usize, f64>,
    n: usize,
}

impl SparseLu {
    pub fn factor(t: &Triplets) -> Result<Self, LinAlgError> {
        let m = t.matrix()?;
        let symbolic =
            SymbolicLu::try_new(m.symbolic()).map_err(|e| LinAlgError::Singular(format!("{e:?}")))?;
        Self::factor_with(&symbolic, &m)
    }

    pub fn factor_with(symbolic: &SymbolicLu<usize>, m: &SparseColMat<usize, f64>) -> Result<Self, LinAlgError> {
        faer::set_global_parallelism(Par::Seq);
        let lu = Lu::try_new_with_symbolic(symbolic.clone(), m.as_ref())
            .map_err(|e| LinAlgError::Singular(format!("{e:?}")))?;
        Ok(SparseLu { lu, n: m.nrows() })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, LinAlgError> {
        let mut b = Mat::from_fn(self.n, 1, |i, _| rhs[i]);
        self.lu.solve_in_place_with_conj(Conj::No, b.as_mut());
        let x: Vec<f64> = (0..self.n).map(|i| b[(i, 0)]).collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(LinAlgError::Singular("non-finite solution".into()));
        }
        Ok(x)
    }
}

/// Cached symbolic analysis for a triplet list whose `(row, col)` sequence
/// repeats between calls; only the values are scattered again.
#[derive(Default)]
pub struct PatternCache {
    n: usize,
    coords: Vec<(usize, usize)>,
    slots: Vec<usize>,
    symbolic: Option<(SymbolicSparseColMat<usize>, SymbolicLu<usize>)>,
}

impl PatternCache {
    pub fn factor(&mut self, t: &Triplets) -> Result<SparseLu, LinAlgError> {
        let same = self.symbolic.is_some()
            && self.n == t.n
            && self.coords.len() == t.entries.len()
            && self.coords.iter().zip(&t.entries).all(|(c, e)| *c == (e.row, e.col));
        if !same {
            self.analyse(t)?;
        }
        let (sym, lu) = self.symbolic.as_ref().expect("analysed above");
        let mut values = vec![0.0; sym.row_idx().len()];
        for (slot, e) in self.slots.iter().zip(&t.entries) {
            values[*slot] += e.val;
        }
        let m = SparseColMat::new(sym.clone(), values);
        SparseLu::factor_with(lu, &m)
    }

    fn analyse(&mut self, t: &Triplets) -> Result<(), LinAlgError> {
        if let Some(e) = t.entries.iter().find(|e| e.row >= t.n || e.col >= t.n) {
            return Err(LinAlgError::Assembly(format!("entry ({}, {}) outside {} x {}", e.row, e.col, t.n, t.n)));
        }
        let mut order: Vec<usize> = (0..t.entries.len()).collect();
        order.sort_unstable_by_key(|&k| (t.entries[k].col, t.entries[k].row));
        let mut col_ptr = vec![0usize; t.n + 1];
        let mut row_idx = Vec::new();
        let mut slots = vec![0usize; t.entries.len()];
        let mut last = None;
        for &k in &order {
            let key = (t.entries[k].col, t.entries[k].row);
            if last != Some(key) {
                row_idx.push(key.1);
                col_ptr[key.0 + 1] += 1;
                last = Some(key);
            }
            slots[k] = row_idx.len() - 1;
        }
        for c in 0..t.n {
            col_ptr[c + 1] += col_ptr[c];
        }
        let sym = SymbolicSparseColMat::new_checked(t.n, t.n, col_ptr, None, row_idx);
        let lu = SymbolicLu::try_new(sym.as_ref()).map_err(|e| LinAlgError::Singular(format!("{e:?}")))?;
        self.n = t.n;
        self.coords = t.entries.iter().map(|e| (e.row, e.col)).collect();
        self.slots = slots;
        self.symbolic = Some((sym, lu));
        Ok(())
    }
}
