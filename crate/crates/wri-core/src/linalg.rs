//! Sparse linear algebra: CSR matrices, direct and iterative solvers.
//!
//! Everything the operator assemblies produce is a [`SparseMatrix`] in
//! compressed-sparse-row form with sorted, duplicate-free column indices and
//! no stored zeros. Direct factorisations are delegated to `faer`'s sparse
//! LU/Cholesky (fill-reducing ordering, pure Rust); this module owns the
//! assembly algebra (products, sums, transposes, block composition), a
//! conjugate-gradient fallback for normal systems, the power iteration used
//! for penalty tuning, and a deterministic pairwise reduction helper used for
//! order-independent accumulation.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Result, WriError};

// ---------------------------------------------------------------------------
// scalar abstraction
// ---------------------------------------------------------------------------

/// Scalar types the sparse kernels are generic over (`f64`, `Complex64`).
pub trait Scalar:
    Copy
    + PartialEq
    + std::fmt::Debug
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Neg<Output = Self>
    + std::ops::AddAssign
    + Send
    + Sync
    + 'static
{
    fn zero() -> Self;
    fn one() -> Self;
    /// Complex conjugate (identity for reals).
    fn conj(self) -> Self;
    /// Modulus.
    fn abs(self) -> f64;
    fn from_f64(x: f64) -> Self;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn conj(self) -> Self {
        self
    }
    fn abs(self) -> f64 {
        f64::abs(self)
    }
    fn from_f64(x: f64) -> Self {
        x
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn abs(self) -> f64 {
        self.norm()
    }
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
}

// ---------------------------------------------------------------------------
// vector helpers
// ---------------------------------------------------------------------------

/// Conjugating inner product `sum conj(a_i) b_i`.
pub fn vdot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b) {
        acc += x.conj() * *y;
    }
    acc
}

/// Euclidean norm.
pub fn vnorm<T: Scalar>(a: &[T]) -> f64 {
    a.iter().map(|x| x.abs() * x.abs()).sum::<f64>().sqrt()
}

/// `y += alpha * x`.
pub fn vaxpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

/// Promote a real vector to complex.
pub fn to_complex(v: &[f64]) -> Vec<Complex64> {
    v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
}

/// Real parts of a complex vector.
pub fn re_parts(v: &[Complex64]) -> Vec<f64> {
    v.iter().map(|z| z.re).collect()
}

// ---------------------------------------------------------------------------
// CSR sparse matrix
// ---------------------------------------------------------------------------

/// Compressed-sparse-row matrix.
///
/// Invariants (enforced by every constructor and operation):
/// - `indptr.len() == nrows + 1`, nondecreasing, `indptr[nrows] == nnz`;
/// - column indices are strictly increasing within each row;
/// - no explicitly stored zero values.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> SparseMatrix<T> {
    /// Empty (all-zero) matrix.
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    /// Identity.
    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: vec![T::one(); n],
        }
    }

    /// Diagonal matrix from a dense vector (zeros on the diagonal are pruned).
    pub fn from_diag(d: &[T]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n, n);
        let mut nnz = 0;
        for (i, &v) in d.iter().enumerate() {
            if v != T::zero() {
                m.indices.push(i);
                m.data.push(v);
                nnz += 1;
            }
            m.indptr[i + 1] = nnz;
        }
        m
    }

    /// Build from (row, col, value) triplets; duplicates are summed, zeros
    /// (after summation) pruned, indices sorted.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, T)],
    ) -> Result<Self> {
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(WriError::DimensionMismatch {
                    op: "from_triplets",
                    expected: format!("indices within {nrows}x{ncols}"),
                    got: format!("({r}, {c})"),
                });
            }
        }
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_unstable_by_key(|&k| (triplets[k].0, triplets[k].1));

        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &k in &order {
            let (r, c, v) = triplets[k];
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                // close out a now-complete entry that summed to zero
                if let Some((lr, _)) = last {
                    if *data.last().unwrap() == T::zero() {
                        data.pop();
                        indices.pop();
                        indptr[lr + 1] -= 1;
                    }
                }
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        if let Some((lr, _)) = last {
            if *data.last().unwrap() == T::zero() {
                data.pop();
                indices.pop();
                indptr[lr + 1] -= 1;
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Ok(Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.data[a..b])
    }

    /// Raw CSR parts `(indptr, indices, data)`.
    pub fn csr_parts(&self) -> (&[usize], &[usize], &[T]) {
        (&self.indptr, &self.indices, &self.data)
    }

    /// Entry `(i, j)` (zero if not stored).
    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => T::zero(),
        }
    }

    /// Main diagonal as a dense vector.
    pub fn diag(&self) -> Vec<T> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i))
            .collect()
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(
            x.len(),
            self.ncols,
            "matvec: operand length {} does not match ncols {}",
            x.len(),
            self.ncols
        );
        let mut y = vec![T::zero(); self.nrows];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let mut acc = T::zero();
            for (&j, &v) in cols.iter().zip(vals) {
                acc += v * x[j];
            }
            y[i] = acc;
        }
        y
    }

    /// `y = A^H x` without forming the adjoint.
    pub fn matvec_adjoint(&self, x: &[T]) -> Vec<T> {
        assert_eq!(
            x.len(),
            self.nrows,
            "matvec_adjoint: operand length {} does not match nrows {}",
            x.len(),
            self.nrows
        );
        let mut y = vec![T::zero(); self.ncols];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                y[j] += v.conj() * x[i];
            }
        }
        y
    }

    /// Sparse product `A * B`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.ncols != other.nrows {
            return Err(WriError::DimensionMismatch {
                op: "matmul",
                expected: format!("inner dim {}", self.ncols),
                got: format!("{}", other.nrows),
            });
        }
        let nrows = self.nrows;
        let ncols = other.ncols;
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        // dense accumulator with a touch list per row
        let mut acc = vec![T::zero(); ncols];
        let mut touched: Vec<usize> = Vec::new();
        for i in 0..nrows {
            touched.clear();
            let (acols, avals) = self.row(i);
            for (&k, &a) in acols.iter().zip(avals) {
                let (bcols, bvals) = other.row(k);
                for (&j, &b) in bcols.iter().zip(bvals) {
                    if acc[j] == T::zero() && !touched.contains(&j) {
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                if acc[j] != T::zero() {
                    indices.push(j);
                    data.push(acc[j]);
                }
                acc[j] = T::zero();
            }
            indptr[i + 1] = indices.len();
        }
        Ok(Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        })
    }

    /// `A + B`.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.add_scaled(other, T::one())
    }

    /// `A - B`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add_scaled(other, -T::one())
    }

    /// `A + alpha * B`.
    pub fn add_scaled(&self, other: &Self, alpha: T) -> Result<Self> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(WriError::DimensionMismatch {
                op: "add",
                expected: format!("{}x{}", self.nrows, self.ncols),
                got: format!("{}x{}", other.nrows, other.ncols),
            });
        }
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.nnz() + other.nnz());
        let mut data = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.nrows {
            let (ac, av) = self.row(i);
            let (bc, bv) = other.row(i);
            let (mut p, mut q) = (0usize, 0usize);
            while p < ac.len() || q < bc.len() {
                let (j, v) = if q >= bc.len() || (p < ac.len() && ac[p] < bc[q]) {
                    let out = (ac[p], av[p]);
                    p += 1;
                    out
                } else if p >= ac.len() || bc[q] < ac[p] {
                    let out = (bc[q], alpha * bv[q]);
                    q += 1;
                    out
                } else {
                    let out = (ac[p], av[p] + alpha * bv[q]);
                    p += 1;
                    q += 1;
                    out
                };
                if v != T::zero() {
                    indices.push(j);
                    data.push(v);
                }
            }
            indptr[i + 1] = indices.len();
        }
        Ok(Self {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            data,
        })
    }

    /// `alpha * A`.
    pub fn scaled(&self, alpha: T) -> Self {
        if alpha == T::zero() {
            return Self::zeros(self.nrows, self.ncols);
        }
        let mut out = self.clone();
        for v in &mut out.data {
            *v = alpha * *v;
        }
        out
    }

    /// `diag(d) * A` (row scaling). Zero scales prune the row.
    pub fn left_scaled(&self, d: &[T]) -> Self {
        assert_eq!(d.len(), self.nrows, "left_scaled: diagonal length mismatch");
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.nnz());
        let mut data = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            if d[i] != T::zero() {
                let (cols, vals) = self.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    let w = d[i] * v;
                    if w != T::zero() {
                        indices.push(j);
                        data.push(w);
                    }
                }
            }
            indptr[i + 1] = indices.len();
        }
        Self {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            data,
        }
    }

    /// `A * diag(d)` (column scaling).
    pub fn right_scaled(&self, d: &[T]) -> Self {
        assert_eq!(d.len(), self.ncols, "right_scaled: diagonal length mismatch");
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.nnz());
        let mut data = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let w = v * d[j];
                if w != T::zero() {
                    indices.push(j);
                    data.push(w);
                }
            }
            indptr[i + 1] = indices.len();
        }
        Self {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            data,
        }
    }

    /// Transpose (no conjugation).
    pub fn transpose(&self) -> Self {
        let mut indptr = vec![0usize; self.ncols + 1];
        for &j in &self.indices {
            indptr[j + 1] += 1;
        }
        for j in 0..self.ncols {
            indptr[j + 1] += indptr[j];
        }
        let mut indices = vec![0usize; self.nnz()];
        let mut data = vec![T::zero(); self.nnz()];
        let mut next = indptr.clone();
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let slot = next[j];
                indices[slot] = i;
                data[slot] = v;
                next[j] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr,
            indices,
            data,
        }
    }

    /// Elementwise conjugate.
    pub fn conjugate(&self) -> Self {
        let mut out = self.clone();
        for v in &mut out.data {
            *v = v.conj();
        }
        out
    }

    /// Conjugate transpose `A^H`.
    pub fn adjoint(&self) -> Self {
        self.transpose().conjugate()
    }

    /// Compose a block matrix. `None` blocks are zero. Block-row heights and
    /// block-column widths are inferred from the present blocks and must be
    /// consistent; a fully absent block row or column is rejected.
    pub fn from_blocks(blocks: &[Vec<Option<&SparseMatrix<T>>>]) -> Result<Self> {
        let brows = blocks.len();
        let bcols = blocks.first().map_or(0, |r| r.len());
        if brows == 0 || bcols == 0 || blocks.iter().any(|r| r.len() != bcols) {
            return Err(WriError::InvalidInput(
                "from_blocks: ragged or empty block layout".into(),
            ));
        }
        let mut row_dims = vec![None; brows];
        let mut col_dims = vec![None; bcols];
        for (bi, brow) in blocks.iter().enumerate() {
            for (bj, blk) in brow.iter().enumerate() {
                if let Some(m) = blk {
                    match row_dims[bi] {
                        None => row_dims[bi] = Some(m.nrows),
                        Some(h) if h != m.nrows => {
                            return Err(WriError::DimensionMismatch {
                                op: "from_blocks",
                                expected: format!("block row {bi} height {h}"),
                                got: format!("{}", m.nrows),
                            })
                        }
                        _ => {}
                    }
                    match col_dims[bj] {
                        None => col_dims[bj] = Some(m.ncols),
                        Some(w) if w != m.ncols => {
                            return Err(WriError::DimensionMismatch {
                                op: "from_blocks",
                                expected: format!("block col {bj} width {w}"),
                                got: format!("{}", m.ncols),
                            })
                        }
                        _ => {}
                    }
                }
            }
        }
        let row_dims: Vec<usize> = row_dims
            .into_iter()
            .collect::<Option<_>>()
            .ok_or_else(|| WriError::InvalidInput("from_blocks: empty block row".into()))?;
        let col_dims: Vec<usize> = col_dims
            .into_iter()
            .collect::<Option<_>>()
            .ok_or_else(|| WriError::InvalidInput("from_blocks: empty block column".into()))?;
        let mut row_off = vec![0usize; brows + 1];
        for i in 0..brows {
            row_off[i + 1] = row_off[i] + row_dims[i];
        }
        let mut col_off = vec![0usize; bcols + 1];
        for j in 0..bcols {
            col_off[j + 1] = col_off[j] + col_dims[j];
        }
        let nrows = row_off[brows];
        let ncols = col_off[bcols];
        let nnz: usize = blocks
            .iter()
            .flatten()
            .filter_map(|b| b.map(|m| m.nnz()))
            .sum();
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(nnz);
        let mut data = Vec::with_capacity(nnz);
        for bi in 0..brows {
            for i in 0..row_dims[bi] {
                for (bj, blk) in blocks[bi].iter().enumerate() {
                    if let Some(m) = blk {
                        let (cols, vals) = m.row(i);
                        for (&j, &v) in cols.iter().zip(vals) {
                            indices.push(col_off[bj] + j);
                            data.push(v);
                        }
                    }
                }
                indptr[row_off[bi] + i + 1] = indices.len();
            }
        }
        Ok(Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        })
    }

    /// Dense copy as a row-major vector (tests and small oracles only).
    pub fn to_dense(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.nrows * self.ncols];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out[i * self.ncols + j] = v;
            }
        }
        out
    }

    /// Check structural invariants (used by tests).
    pub fn check_invariants(&self) -> Result<()> {
        if self.indptr.len() != self.nrows + 1 || self.indptr[self.nrows] != self.data.len() {
            return Err(WriError::InvalidInput("csr: bad indptr".into()));
        }
        for i in 0..self.nrows {
            if self.indptr[i] > self.indptr[i + 1] {
                return Err(WriError::InvalidInput("csr: decreasing indptr".into()));
            }
            let (cols, vals) = self.row(i);
            for w in cols.windows(2) {
                if w[0] >= w[1] {
                    return Err(WriError::InvalidInput("csr: unsorted/duplicate column".into()));
                }
            }
            if cols.iter().any(|&j| j >= self.ncols) {
                return Err(WriError::InvalidInput("csr: column out of range".into()));
            }
            if vals.iter().any(|&v| v == T::zero()) {
                return Err(WriError::InvalidInput("csr: stored zero".into()));
            }
        }
        Ok(())
    }
}

impl SparseMatrix<f64> {
    /// Promote to a complex matrix.
    pub fn to_complex(&self) -> SparseMatrix<Complex64> {
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            data: self.data.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }
}

impl SparseMatrix<Complex64> {
    /// Elementwise real part (prunes entries whose real part is zero).
    pub fn real_part(&self) -> SparseMatrix<f64> {
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.nnz());
        let mut data = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if v.re != 0.0 {
                    indices.push(j);
                    data.push(v.re);
                }
            }
            indptr[i + 1] = indices.len();
        }
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            data,
        }
    }
}

// ---------------------------------------------------------------------------
// direct solvers (faer bridge)
// ---------------------------------------------------------------------------

use faer::linalg::solvers::Solve as _;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

fn to_faer_c(m: &SparseMatrix<Complex64>) -> Result<SparseColMat<usize, Complex64>> {
    let mut trips = Vec::with_capacity(m.nnz());
    for i in 0..m.nrows() {
        let (cols, vals) = m.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            trips.push(Triplet::new(i, j, v));
        }
    }
    SparseColMat::try_new_from_triplets(m.nrows(), m.ncols(), &trips)
        .map_err(|e| WriError::InvalidInput(format!("faer conversion: {e:?}")))
}

fn to_faer_r(m: &SparseMatrix<f64>) -> Result<SparseColMat<usize, f64>> {
    let mut trips = Vec::with_capacity(m.nnz());
    for i in 0..m.nrows() {
        let (cols, vals) = m.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            trips.push(Triplet::new(i, j, v));
        }
    }
    SparseColMat::try_new_from_triplets(m.nrows(), m.ncols(), &trips)
        .map_err(|e| WriError::InvalidInput(format!("faer conversion: {e:?}")))
}

/// Dense column-major matrix of complex right-hand sides / solutions.
pub fn mat_from_columns(cols: &[Vec<Complex64>]) -> Mat<Complex64> {
    let n = cols.first().map_or(0, |c| c.len());
    Mat::from_fn(n, cols.len(), |i, j| cols[j][i])
}

/// Extract column `j` of a dense matrix.
pub fn mat_column(m: &Mat<Complex64>, j: usize) -> Vec<Complex64> {
    (0..m.nrows()).map(|i| m[(i, j)]).collect()
}

/// Sparse LU factorisation of a square complex matrix.
///
/// Keeps a copy of the operator so solutions can be residual-checked.
pub struct ComplexLu {
    a: SparseMatrix<Complex64>,
    fact: faer::sparse::linalg::solvers::Lu<usize, Complex64>,
}

impl ComplexLu {
    pub fn new(a: &SparseMatrix<Complex64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(WriError::DimensionMismatch {
                op: "ComplexLu",
                expected: "square matrix".into(),
                got: format!("{}x{}", a.nrows(), a.ncols()),
            });
        }
        let fact = to_faer_c(a)?
            .sp_lu()
            .map_err(|e| WriError::Singular(format!("sparse LU: {e:?}")))?;
        Ok(Self { a: a.clone(), fact })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Solve `A X = B` for a dense block of right-hand sides.
    pub fn solve_mat(&self, b: &Mat<Complex64>) -> Mat<Complex64> {
        self.fact.solve(b)
    }

    /// Solve `A x = b`.
    pub fn solve_vec(&self, b: &[Complex64]) -> Vec<Complex64> {
        let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        let x = self.fact.solve(&rhs);
        mat_column(&x, 0)
    }

    /// Solve `A^H x = b` using the transpose solve: `A^H x = b` iff
    /// `A^T conj(x) = conj(b)`.
    pub fn solve_adjoint_vec(&self, b: &[Complex64]) -> Vec<Complex64> {
        let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i].conj());
        let x = self.fact.solve_transpose(&rhs);
        (0..b.len()).map(|i| x[(i, 0)].conj()).collect()
    }

    /// Solve and report the worst relative residual over the columns of `B`.
    pub fn solve_mat_checked(&self, b: &Mat<Complex64>) -> (Mat<Complex64>, f64) {
        let x = self.solve_mat(b);
        let mut worst = 0.0f64;
        for j in 0..b.ncols() {
            let xj = mat_column(&x, j);
            let bj = mat_column(b, j);
            let r = self.a.matvec(&xj);
            let num: f64 = r
                .iter()
                .zip(&bj)
                .map(|(ri, bi)| (ri - bi).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let den = vnorm(&bj).max(f64::MIN_POSITIVE);
            worst = worst.max(num / den);
        }
        (x, worst)
    }
}

/// Sparse symmetric-positive-definite (or general) factorisation of a real
/// matrix: Cholesky first, LU fallback for indefinite systems.
pub struct RealFactor {
    a: SparseMatrix<f64>,
    kind: RealFactorKind,
}

enum RealFactorKind {
    Llt(faer::sparse::linalg::solvers::Llt<usize, f64>),
    Lu(faer::sparse::linalg::solvers::Lu<usize, f64>),
}

impl RealFactor {
    pub fn new(a: &SparseMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(WriError::DimensionMismatch {
                op: "RealFactor",
                expected: "square matrix".into(),
                got: format!("{}x{}", a.nrows(), a.ncols()),
            });
        }
        let fm = to_faer_r(a)?;
        let kind = match fm.sp_cholesky(faer::Side::Lower) {
            Ok(llt) => RealFactorKind::Llt(llt),
            Err(_) => RealFactorKind::Lu(
                fm.sp_lu()
                    .map_err(|e| WriError::Singular(format!("sparse LU: {e:?}")))?,
            ),
        };
        Ok(Self { a: a.clone(), kind })
    }

    /// Solve `A x = b` and return `(x, relative residual)`.
    pub fn solve_checked(&self, b: &[f64]) -> (Vec<f64>, f64) {
        let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        let x = match &self.kind {
            RealFactorKind::Llt(f) => f.solve(&rhs),
            RealFactorKind::Lu(f) => f.solve(&rhs),
        };
        let xv: Vec<f64> = (0..b.len()).map(|i| x[(i, 0)]).collect();
        let r = self.a.matvec(&xv);
        let num: f64 = r
            .iter()
            .zip(b)
            .map(|(ri, bi)| (ri - bi) * (ri - bi))
            .sum::<f64>()
            .sqrt();
        let den = vnorm(b).max(f64::MIN_POSITIVE);
        (xv, num / den)
    }
}

/// Direct sparse solve of a square complex system (factor once, solve once).
pub fn solve_sparse(a: &SparseMatrix<Complex64>, b: &[Complex64]) -> Result<Vec<Complex64>> {
    let lu = ComplexLu::new(a)?;
    Ok(lu.solve_vec(b))
}

// ---------------------------------------------------------------------------
// dense helpers for small oracles
// ---------------------------------------------------------------------------

/// Dense LU solve of a small square complex system given in row-major order.
/// Partial pivoting; intended for test oracles and tiny reductions only.
pub fn dense_solve(n: usize, a_row_major: &[Complex64], b: &[Complex64]) -> Result<Vec<Complex64>> {
    assert_eq!(a_row_major.len(), n * n);
    assert_eq!(b.len(), n);
    let mut a = a_row_major.to_vec();
    let mut x = b.to_vec();
    for k in 0..n {
        // pivot
        let (p, pv) = (k..n)
            .map(|i| (i, a[i * n + k].norm()))
            .max_by(|l, r| l.1.total_cmp(&r.1))
            .unwrap();
        if pv == 0.0 {
            return Err(WriError::Singular("dense_solve".into()));
        }
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            x.swap(k, p);
        }
        let piv = a[k * n + k];
        for i in (k + 1)..n {
            let f = a[i * n + k] / piv;
            if f != Complex64::new(0.0, 0.0) {
                for j in k..n {
                    let t = a[k * n + j];
                    a[i * n + j] -= f * t;
                }
                let t = x[k];
                x[i] -= f * t;
            }
        }
    }
    for i in (0..n).rev() {
        let mut acc = x[i];
        for j in (i + 1)..n {
            acc -= a[i * n + j] * x[j];
        }
        x[i] = acc / a[i * n + i];
    }
    Ok(x)
}

// ---------------------------------------------------------------------------
// conjugate gradient (fallback for normal systems)
// ---------------------------------------------------------------------------

/// Result of an iterative solve.
#[derive(Debug, Clone)]
pub struct CgResult<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Conjugate gradient for Hermitian positive (semi-)definite operators,
/// provided as a matvec closure. Works for real SPD and complex HPD systems.
pub fn conjugate_gradient<T: Scalar>(
    apply: impl Fn(&[T]) -> Vec<T>,
    b: &[T],
    tol: f64,
    max_iter: usize,
) -> CgResult<T> {
    let n = b.len();
    let mut x = vec![T::zero(); n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let b_norm = vnorm(b).max(f64::MIN_POSITIVE);
    let mut rs_old = vdot(&r, &r);
    let mut iterations = 0;
    while iterations < max_iter {
        let res = vnorm(&r) / b_norm;
        if res <= tol {
            return CgResult {
                x,
                iterations,
                relative_residual: res,
                converged: true,
            };
        }
        let ap = apply(&p);
        let denom = vdot(&p, &ap);
        if denom.abs() == 0.0 {
            break;
        }
        // alpha = rs_old / (p, Ap); scalars are real for HPD systems but we
        // carry them in T to keep the kernel generic.
        let alpha = mul_div(rs_old, denom);
        vaxpy(alpha, &p, &mut x);
        vaxpy(-alpha, &ap, &mut r);
        let rs_new = vdot(&r, &r);
        let beta = mul_div(rs_new, rs_old);
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rs_old = rs_new;
        iterations += 1;
    }
    let res = vnorm(&r) / b_norm;
    CgResult {
        x,
        iterations,
        relative_residual: res,
        converged: res <= tol,
    }
}

fn mul_div<T: Scalar>(num: T, den: T) -> T {
    // T is a field here (f64 or Complex64); expressed through Scalar to keep
    // the CG kernel generic without a Div bound on the public trait.
    let d = den.abs() * den.abs();
    num * den.conj() * T::from_f64(1.0 / d)
}

// ---------------------------------------------------------------------------
// power iteration
// ---------------------------------------------------------------------------

/// Result of the dominant-eigenvalue power iteration.
#[derive(Debug, Clone, Copy)]
pub struct PowerIteration {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest eigenvalue (in modulus) of a Hermitian positive semi-definite
/// operator given as a matvec closure. Deterministic: the start vector comes
/// from a seeded generator; stops when the eigenvalue estimate changes by
/// less than `tol` relatively, or after `max_iter` iterations.
pub fn max_eigenvalue(
    apply: impl Fn(&[Complex64]) -> Vec<Complex64>,
    n: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> PowerIteration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let nv = vnorm(&v).max(f64::MIN_POSITIVE);
    v.iter_mut().for_each(|z| *z /= nv);
    let mut lambda = 0.0f64;
    for it in 1..=max_iter {
        let w = apply(&v);
        let nw = vnorm(&w);
        if nw == 0.0 {
            return PowerIteration {
                value: 0.0,
                iterations: it,
                converged: true,
            };
        }
        let lambda_new = nw; // |Av| for unit v; exact for HPSD in the limit
        v = w;
        v.iter_mut().for_each(|z| *z /= nw);
        if (lambda_new - lambda).abs() <= tol * lambda_new && it > 1 {
            return PowerIteration {
                value: lambda_new,
                iterations: it,
                converged: true,
            };
        }
        lambda = lambda_new;
    }
    PowerIteration {
        value: lambda,
        iterations: max_iter,
        converged: false,
    }
}

// ---------------------------------------------------------------------------
// deterministic pairwise reduction
// ---------------------------------------------------------------------------

/// Deterministic parallel pairwise reduction over `n` indexed leaves.
///
/// The reduction tree depends only on `n` (recursive halving), so the result
/// is independent of thread scheduling; with a floating-point `combine` this
/// is pairwise summation. Returns `None` for `n == 0`.
pub fn tree_reduce<T, L, C>(n: usize, leaf: &L, combine: &C) -> Option<T>
where
    T: Send,
    L: Fn(usize) -> T + Sync,
    C: Fn(T, T) -> T + Sync,
{
    fn go<T, L, C>(lo: usize, hi: usize, leaf: &L, combine: &C) -> T
    where
        T: Send,
        L: Fn(usize) -> T + Sync,
        C: Fn(T, T) -> T + Sync,
    {
        let len = hi - lo;
        if len == 1 {
            return leaf(lo);
        }
        let mid = lo + len / 2;
        if len <= 4 {
            let a = go(lo, mid, leaf, combine);
            let b = go(mid, hi, leaf, combine);
            combine(a, b)
        } else {
            let (a, b) = rayon::join(
                || go(lo, mid, leaf, combine),
                || go(mid, hi, leaf, combine),
            );
            combine(a, b)
        }
    }
    if n == 0 {
        None
    } else {
        Some(go(0, n, leaf, combine))
    }
}

// ---------------------------------------------------------------------------
