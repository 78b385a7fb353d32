//! Symmetric sparse matrices and positive definite solvers.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Compressed-column pattern of a structurally symmetric matrix. Both
/// triangles are stored and row indices are sorted within each column.
#[derive(Debug)]
pub struct SparsePattern {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    diag: Vec<usize>,
}

impl SparsePattern {
    /// Pattern of a block matrix whose block graph couples every pair of
    /// nodes sharing a cell. Each node carries `block` consecutive unknowns.
    pub fn from_cells<'a, I>(nodes: usize, block: usize, cells: I) -> Self
    where
        I: IntoIterator<Item = &'a [usize]>,
    {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
        for cell in cells {
            for &a in cell {
                adj[a].extend_from_slice(cell);
            }
        }
        for list in adj.iter_mut() {
            list.sort_unstable();
            list.dedup();
        }
        let n = nodes * block;
        let mut col_ptr = Vec::with_capacity(n + 1);
        col_ptr.push(0);
        let mut row_idx = Vec::new();
        for list in &adj {
            for _ in 0..block {
                for &b in list {
                    row_idx.extend((0..block).map(|k| b * block + k));
                }
                col_ptr.push(row_idx.len());
            }
        }
        // A node with no cell still needs its diagonal.
        let mut pattern = Self { n, col_ptr, row_idx, diag: Vec::new() };
        if adj.iter().any(|l| l.is_empty()) {
            pattern = pattern.with_full_diagonal();
        }
        pattern.index_diagonal();
        pattern
    }

    fn with_full_diagonal(self) -> Self {
        let mut col_ptr = vec![0];
        let mut row_idx = Vec::with_capacity(self.row_idx.len() + self.n);
        for j in 0..self.n {
            let mut rows: Vec<usize> = self.row_idx[self.col_ptr[j]..self.col_ptr[j + 1]].to_vec();
            if rows.binary_search(&j).is_err() {
                rows.push(j);
                rows.sort_unstable();
            }
            row_idx.extend(rows);
            col_ptr.push(row_idx.len());
        }
        Self { n: self.n, col_ptr, row_idx, diag: Vec::new() }
    }

    fn index_diagonal(&mut self) {
        self.diag = (0..self.n)
            .map(|j| self.find(j, j).expect("diagonal present"))
            .collect();
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Storage position of entry (i, j).
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let lo = self.col_ptr[j];
        let rows = &self.row_idx[lo..self.col_ptr[j + 1]];
        rows.binary_search(&i).ok().map(|k| lo + k)
    }

    pub fn column(&self, j: usize) -> (&[usize], std::ops::Range<usize>) {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[r.clone()], r)
    }
}

/// Symmetric matrix sharing a [`SparsePattern`].
#[derive(Debug, Clone)]
pub struct SymmetricMatrix {
    pattern: Arc<SparsePattern>,
    values: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(pattern: Arc<SparsePattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self { pattern, values }
    }

    pub fn pattern(&self) -> &Arc<SparsePattern> {
        &self.pattern
    }

    pub fn dim(&self) -> usize {
        self.pattern.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Adds `v` at (i, j) only; callers add the transposed entry themselves.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .pattern
            .find(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside sparsity pattern"));
        self.values[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.find(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.pattern.diag.iter().map(|&k| self.values[k]).collect()
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            let (rows, range) = self.pattern.column(j);
            for (&i, &a) in rows.iter().zip(&self.values[range]) {
                y[i] += a * xj;
            }
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.matvec(x, &mut y);
        y
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let mut sums = vec![0.0; self.dim()];
        for j in 0..self.dim() {
            let (rows, range) = self.pattern.column(j);
            for (&i, &a) in rows.iter().zip(&self.values[range]) {
                sums[i] += a.abs();
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    /// ‖A − Aᵀ‖_∞.
    pub fn asymmetry(&self) -> f64 {
        let mut sums = vec![0.0; self.dim()];
        for j in 0..self.dim() {
            let (rows, range) = self.pattern.column(j);
            for (&i, &a) in rows.iter().zip(&self.values[range]) {
                sums[i] += (a - self.get(j, i)).abs();
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Eliminates the unknowns flagged in `fixed` with prescribed `values`.
    ///
    /// Rows and columns of fixed unknowns are cleared except for the
    /// diagonal, which keeps its magnitude; `rhs` is adjusted so that the
    /// solution takes the prescribed values and the free rows see the
    /// coupling. The pattern is untouched, so factorizations can reuse
    /// their symbolic analysis.
    pub fn constrain(&mut self, rhs: &mut [f64], fixed: &[bool], values: &[f64]) {
        let n = self.dim();
        for j in 0..n {
            let (rows, range) = self.pattern.column(j);
            let vals = &mut self.values[range];
            if fixed[j] {
                let vj = values[j];
                for (&i, a) in rows.iter().zip(vals.iter_mut()) {
                    if i == j {
                        if *a <= 0.0 {
                            *a = 1.0;
                        }
                    } else {
                        if !fixed[i] {
                            rhs[i] -= *a * vj;
                        }
                        *a = 0.0;
                    }
                }
            } else {
                for (&i, a) in rows.iter().zip(vals.iter_mut()) {
                    if fixed[i] {
                        *a = 0.0;
                    }
                }
            }
        }
        for j in 0..n {
            if fixed[j] {
                rhs[j] = self.values[self.pattern.diag[j]] * values[j];
            }
        }
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let p = &self.pattern;
        let sym = SymbolicSparseColMat::new_checked(p.n, p.n, p.col_ptr.clone(), None, p.row_idx.clone());
        Ok(SparseColMat::new(sym, self.values.clone()))
    }
}

/// Sparse Cholesky factor.
pub struct CholeskyFactor {
    llt: Llt<usize, f64>,
}

impl CholeskyFactor {
    fn new(symbolic: &SymbolicLlt<usize>, a: &SymmetricMatrix) -> Result<Self> {
        let m = a.to_faer()?;
        let llt = Llt::try_new_with_symbolic(symbolic.clone(), m.as_ref(), Side::Lower).map_err(|e| {
            Error::SingularSystem(format!(
                "Cholesky factorization failed ({e:?}); the constrained system is not positive \
                 definite, check supports and rigid-body pins"
            ))
        })?;
        Ok(Self { llt })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut m = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
        self.llt.solve_in_place(m.as_mut());
        (0..b.len()).map(|i| m[(i, 0)]).collect()
    }
}

/// How [`SpdSolver`] treats successive matrices on one pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStrategy {
    /// Fresh numeric factorization for every matrix.
    Direct,
    /// Conjugate gradients preconditioned with the most recent factor;
    /// refactor when the iteration count exceeds `refactor_after`.
    StaleFactor { refactor_after: usize },
    /// Jacobi-preconditioned conjugate gradients only.
    Jacobi { max_iters: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub factorizations: usize,
    pub solves: usize,
    pub cg_iterations: usize,
}

/// Solver for a sequence of symmetric positive definite systems on a
/// fixed sparsity pattern. The symbolic analysis is computed once.
pub struct SpdSolver {
    strategy: SolveStrategy,
    symbolic: Option<SymbolicLlt<usize>>,
    factor: Option<CholeskyFactor>,
    stats: SolverStats,
}

impl SpdSolver {
    pub fn new(strategy: SolveStrategy) -> Self {
        Self { strategy, symbolic: None, factor: None, stats: SolverStats::default() }
    }

    pub fn stats(&self) -> SolverStats {
        self.stats
    }

    fn refactor(&mut self, a: &SymmetricMatrix) -> Result<()> {
        if self.symbolic.is_none() {
            let m = a.to_faer()?;
            let sym = SymbolicLlt::try_new(m.symbolic(), Side::Lower)
                .map_err(|e| Error::SingularSystem(format!("symbolic analysis failed: {e:?}")))?;
            self.symbolic = Some(sym);
        }
        self.factor = Some(CholeskyFactor::new(self.symbolic.as_ref().unwrap(), a)?);
        self.stats.factorizations += 1;
        Ok(())
    }

    /// Solves `a x = b` to relative residual `tol` (2-norm).
    pub fn solve(&mut self, a: &SymmetricMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>> {
        if !a.all_finite() || b.iter().any(|v| !v.is_finite()) {
            return Err(Error::Assembly("non-finite entries in linear system".into()));
        }
        self.stats.solves += 1;
        let x = match self.strategy {
            SolveStrategy::Direct => {
                self.refactor(a)?;
                let f = self.factor.as_ref().unwrap();
                refine(a, b, |r| f.solve(r))
            }
            SolveStrategy::StaleFactor { refactor_after } => {
                if self.factor.is_none() {
                    self.refactor(a)?;
                }
                let f = self.factor.as_ref().unwrap();
                match pcg(a, b, tol, refactor_after, |r| f.solve(r)) {
                    Ok((x, it)) => {
                        self.stats.cg_iterations += it;
                        x
                    }
                    Err(_) => {
                        self.refactor(a)?;
                        let f = self.factor.as_ref().unwrap();
                        refine(a, b, |r| f.solve(r))
                    }
                }
            }
            SolveStrategy::Jacobi { max_iters } => {
                let inv: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();
                let (x, it) = pcg(a, b, tol, max_iters, |r| {
                    r.iter().zip(&inv).map(|(r, d)| r * d).collect()
                })?;
                self.stats.cg_iterations += it;
                x
            }
        };
        Ok(x)
    }
}

/// Direct solve followed by one step of iterative refinement.
fn refine(a: &SymmetricMatrix, b: &[f64], solve: impl Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
    let mut x = solve(b);
    let ax = a.mul(&x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
    let dx = solve(&r);
    x.iter_mut().zip(dx).for_each(|(x, d)| *x += d);
    x
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

/// Preconditioned conjugate gradients from a zero initial guess.
pub fn pcg(
    a: &SymmetricMatrix,
    b: &[f64],
    tol: f64,
    max_iters: usize,
    precond: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<(Vec<f64>, usize)> {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let mut r = b.to_vec();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iters {
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SingularSystem(
                "conjugate gradients met a non-positive curvature direction".into(),
            ));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if dot(&r, &r).sqrt() <= tol * bnorm {
            return Ok((x, it));
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::IterationBudget(format!(
        "conjugate gradients did not reach {tol:e} in {max_iters} iterations"
    )))
}
