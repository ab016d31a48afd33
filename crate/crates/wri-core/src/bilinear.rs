//! Model-side linearisation of the VTI wave operator.
//!
//! The second-order operator is bilinear: for fixed fields `u` it is linear
//! in the inversion parameters, so there is an exact rewriting
//!
//! ```text
//! A(m) u - s  =  L(u) m_act - y(u)
//! ```
//!
//! where `m_act` stacks the classes being inverted for, `L(u)` holds their
//! coefficient diagonals, and `y(u)` folds the source, the passive-class
//! terms and the model-free `Dzz u_z` term. The model step of the
//! reconstruction scheme minimises over `m_act` with `u` frozen, which makes
//! `sum_l Re(L^H L)` (diagonal blocks) and `sum_l Re(L^H (y + dual))` the only
//! quantities ever needed — they are accumulated source by source without
//! materialising any `L`.
//!
//! Coefficients per class and row block (`n` cells each):
//!
//! | class  | x row           | z row           |
//! |--------|-----------------|-----------------|
//! | `v0`   | `w^2 u_x`       | `w^2 u_z`       |
//! | `eps`  | `Dxx u_x`       | 0               |
//! | `delta`| `Dzz u_z`       | `Dxx u_x`       |
//!
//! When `eps` is the only active class the z row carries no information about
//! it, so the materialised `L` drops that block and becomes n x n.
//!
//! The compliance parametrisation is linearised too ([`compliance_l`]); its
//! buoyancy column is the non-diagonal product `D_b diag(D_f u)` because the
//! buoyancy sits inside the stencil.

use faer::Mat;
use num_complex::Complex64;

use crate::linalg::{mat_column, tree_reduce, SparseMatrix};
use crate::medium::{ActiveSet, ComplianceModel, InversionModel, ModelClass};
use crate::mesh::{self, Axis, Grid, PmlProfile, Stagger};
use crate::{Result, WriError};

/// True when the z-row block of the materialised `L` is identically zero and
/// therefore dropped: `eps` is the only class that never appears in the z
/// row.
pub fn drops_z_row(active: &ActiveSet) -> bool {
    active.classes() == [ModelClass::Eps]
}

/// One wavefield's linearisation data: the field halves and the derivative
/// images every coefficient is built from.
pub struct Linearization<'a> {
    omega: f64,
    u_x: &'a [Complex64],
    u_z: &'a [Complex64],
    dxx_ux: Vec<Complex64>,
    dzz_uz: Vec<Complex64>,
}

impl<'a> Linearization<'a> {
    /// Precompute `Dxx u_x` and `Dzz u_z` for a stacked field `u = [u_x; u_z]`.
    pub fn new(
        omega: f64,
        dxx: &SparseMatrix<Complex64>,
        dzz: &SparseMatrix<Complex64>,
        u: &'a [Complex64],
    ) -> Result<Self> {
        let n = dxx.nrows();
        if u.len() != 2 * n {
            return Err(WriError::DimensionMismatch {
                op: "Linearization",
                expected: format!("{}", 2 * n),
                got: format!("{}", u.len()),
            });
        }
        let (u_x, u_z) = u.split_at(n);
        Ok(Self {
            omega,
            u_x,
            u_z,
            dxx_ux: dxx.matvec(u_x),
            dzz_uz: dzz.matvec(u_z),
        })
    }

    pub fn n(&self) -> usize {
        self.u_x.len()
    }

    /// Coefficient of cell `i` of `class` in the x row (block row 0) or z row
    /// (block row 1).
    fn coefficient(&self, class: ModelClass, block_row: usize, i: usize) -> Complex64 {
        let w2 = self.omega * self.omega;
        match (class, block_row) {
            (ModelClass::V0, 0) => w2 * self.u_x[i],
            (ModelClass::V0, 1) => w2 * self.u_z[i],
            (ModelClass::Eps, 0) => self.dxx_ux[i],
            (ModelClass::Eps, 1) => Complex64::new(0.0, 0.0),
            (ModelClass::Delta, 0) => self.dzz_uz[i],
            (ModelClass::Delta, 1) => self.dxx_ux[i],
            _ => unreachable!("block_row is 0 or 1"),
        }
    }

    /// Materialised `L(u)` with both row blocks, zero columns included
    /// (2n x kn).
    pub fn l_matrix_full(&self, active: &ActiveSet) -> SparseMatrix<Complex64> {
        let n = self.n();
        let k = active.len();
        let mut trips = Vec::with_capacity(2 * k * n);
        for (c, &class) in active.classes().iter().enumerate() {
            for block_row in 0..2 {
                for i in 0..n {
                    let v = self.coefficient(class, block_row, i);
                    if v != Complex64::new(0.0, 0.0) {
                        trips.push((block_row * n + i, c * n + i, v));
                    }
                }
            }
        }
        SparseMatrix::from_triplets(2 * n, k * n, &trips).expect("indices in range")
    }

    /// Materialised `L(u)` in its published shape: the z-row block is dropped
    /// when it is identically zero (`eps`-only), giving n x n instead of
    /// 2n x n.
    pub fn l_matrix(&self, active: &ActiveSet) -> SparseMatrix<Complex64> {
        let full = self.l_matrix_full(active);
        if !drops_z_row(active) {
            return full;
        }
        let n = self.n();
        let mut trips = Vec::with_capacity(n);
        for i in 0..n {
            let (cols, vals) = full.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                trips.push((i, j, v));
            }
        }
        SparseMatrix::from_triplets(n, full.ncols(), &trips).expect("indices in range")
    }

    /// Shift `y(u)` with both row blocks: the source minus every passive-class
    /// term minus the model-free `Dzz u_z`.
    pub fn shift_full(
        &self,
        active: &ActiveSet,
        model: &InversionModel,
        s: &[Complex64],
    ) -> Result<Vec<Complex64>> {
        let n = self.n();
        if s.len() != 2 * n || model.len() != n {
            return Err(WriError::DimensionMismatch {
                op: "shift_full",
                expected: format!("source {}, model {n}", 2 * n),
                got: format!("source {}, model {}", s.len(), model.len()),
            });
        }
        let mut y = s.to_vec();
        for class in ModelClass::ALL {
            if active.contains(class) {
                continue;
            }
            let values = model.class(class);
            for i in 0..n {
                y[i] -= self.coefficient(class, 0, i) * values[i];
                y[n + i] -= self.coefficient(class, 1, i) * values[i];
            }
        }
        for i in 0..n {
            y[n + i] -= self.dzz_uz[i];
        }
        Ok(y)
    }

    /// Shift in the published shape (see [`Linearization::l_matrix`]).
    pub fn shift(
        &self,
        active: &ActiveSet,
        model: &InversionModel,
        s: &[Complex64],
    ) -> Result<Vec<Complex64>> {
        let mut y = self.shift_full(active, model, s)?;
        if drops_z_row(active) {
            y.truncate(self.n());
        }
        Ok(y)
    }

    /// `(dA/dm_{class,cell}) u` — the virtual source a unit model perturbation
    /// radiates. Equals the matching column of the full `L(u)`.
    pub fn virtual_source(&self, class: ModelClass, cell: usize) -> Vec<Complex64> {
        let n = self.n();
        let mut v = vec![Complex64::new(0.0, 0.0); 2 * n];
        v[cell] = self.coefficient(class, 0, cell);
        v[n + cell] = self.coefficient(class, 1, cell);
        v
    }
}

// ---------------------------------------------------------------------------
// normal-equation accumulation
// ---------------------------------------------------------------------------

/// `sum_l Re(L_l^H L_l)` and `sum_l Re(L_l^H t_l)` over wavefields, stored as
/// k x k diagonal blocks of length n plus a stacked right-hand side. This is
/// everything the model step needs, at O(k^2 n) memory regardless of how many
/// sources and frequencies contribute.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalBlocks {
    n: usize,
    k: usize,
    /// Block `(c1, c2)` at `c1 * k + c2`, each a length-n diagonal.
    blocks: Vec<Vec<f64>>,
    /// Stacked `k * n` right-hand side.
    rhs: Vec<f64>,
}

impl NormalBlocks {
    pub fn zeros(n: usize, k: usize) -> Self {
        Self {
            n,
            k,
            blocks: vec![vec![0.0; n]; k * k],
            rhs: vec![0.0; k * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn classes(&self) -> usize {
        self.k
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn block(&self, c1: usize, c2: usize) -> &[f64] {
        &self.blocks[c1 * self.k + c2]
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!(
            (self.n, self.k),
            (other.n, other.k),
            "normal blocks must share shape"
        );
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
        for (x, y) in self.rhs.iter_mut().zip(&other.rhs) {
            *x += *y;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for b in &mut self.blocks {
            for x in b.iter_mut() {
                *x *= alpha;
            }
        }
        for x in &mut self.rhs {
            *x *= alpha;
        }
    }

    /// Assemble the k n x k n sparse matrix (k^2 diagonal blocks).
    pub fn to_sparse(&self) -> SparseMatrix<f64> {
        let (n, k) = (self.n, self.k);
        let mut trips = Vec::with_capacity(k * k * n);
        for c1 in 0..k {
            for c2 in 0..k {
                let d = self.block(c1, c2);
                for i in 0..n {
                    if d[i] != 0.0 {
                        trips.push((c1 * n + i, c2 * n + i, d[i]));
                    }
                }
            }
        }
        SparseMatrix::from_triplets(k * n, k * n, &trips).expect("indices in range")
    }

    /// Mean absolute diagonal of `sum Re(L^H L)` — the quantity the penalty
    /// weight is tuned against.
    pub fn mean_abs_diag(&self) -> f64 {
        let mut acc = 0.0;
        for c in 0..self.k {
            for &v in self.block(c, c) {
                acc += v.abs();
            }
        }
        acc / (self.k * self.n) as f64
    }
}

/// Accumulate the model-step normal contributions of one frequency:
/// wavefields `u` and combined right-hand sides `b = s + dual` as 2n x n_s
/// column matrices. Columns are combined with a fixed-shape reduction tree,
/// so the result is bitwise reproducible at any thread count.
pub fn accumulate_normal(
    active: &ActiveSet,
    model: &InversionModel,
    omega: f64,
    dxx: &SparseMatrix<Complex64>,
    dzz: &SparseMatrix<Complex64>,
    u: &Mat<Complex64>,
    b: &Mat<Complex64>,
) -> Result<NormalBlocks> {
    let n = dxx.nrows();
    let k = active.len();
    if u.nrows() != 2 * n || b.nrows() != 2 * n || u.ncols() != b.ncols() {
        return Err(WriError::DimensionMismatch {
            op: "accumulate_normal",
            expected: format!("u and b of shape {} x n_s", 2 * n),
            got: format!(
                "u {} x {}, b {} x {}",
                u.nrows(),
                u.ncols(),
                b.nrows(),
                b.ncols()
            ),
        });
    }
    if model.len() != n {
        return Err(WriError::DimensionMismatch {
            op: "accumulate_normal",
            expected: format!("model of {n} cells"),
            got: format!("{}", model.len()),
        });
    }
    let leaf = |j: usize| -> Result<NormalBlocks> {
        let uj = mat_column(u, j);
        let lin = Linearization::new(omega, dxx, dzz, &uj)?;
        let mut t: Vec<Complex64> = (0..2 * n).map(|i| b[(i, j)]).collect();
        for class in ModelClass::ALL {
            if active.contains(class) {
                continue;
            }
            let values = model.class(class);
            for i in 0..n {
                t[i] -= lin.coefficient(class, 0, i) * values[i];
                t[n + i] -= lin.coefficient(class, 1, i) * values[i];
            }
        }
        for i in 0..n {
            t[n + i] -= lin.dzz_uz[i];
        }
        let mut out = NormalBlocks::zeros(n, k);
        for (c1, &class1) in active.classes().iter().enumerate() {
            for block_row in 0..2 {
                for i in 0..n {
                    let a = lin.coefficient(class1, block_row, i);
                    if a == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    let ac = a.conj();
                    for (c2, &class2) in active.classes().iter().enumerate() {
                        let v = (ac * lin.coefficient(class2, block_row, i)).re;
                        out.blocks[c1 * k + c2][i] += v;
                    }
                    out.rhs[c1 * n + i] += (ac * t[block_row * n + i]).re;
                }
            }
        }
        Ok(out)
    };
    let combine = |mut a: Result<NormalBlocks>, b: Result<NormalBlocks>| -> Result<NormalBlocks> {
        let rb = b?;
        if let Ok(acc) = &mut a {
            acc.add_assign(&rb);
        }
        a
    };
    tree_reduce(u.ncols(), &leaf, &combine)
        .unwrap_or_else(|| Ok(NormalBlocks::zeros(n, k)))
}

// ---------------------------------------------------------------------------
// compliance parametrisation
// ---------------------------------------------------------------------------

/// Linearisation of the compliance-form operator in `(s11, s13, s33, b)`,
/// materialised as a 2n x 4n matrix. The compliance classes keep diagonal
/// coefficient blocks (`w^2 u`), but the buoyancy column is `D_b diag(D_f u)`
/// per axis because buoyancy sits between the two difference operators. The
/// identity `A_c(m_c) u = L_c(u) m_c` holds with no shift term: every entry
/// of the compliance operator carries a model factor.
pub fn compliance_l(
    grid: &Grid,
    pml: &PmlProfile,
    u: &[Complex64],
) -> Result<SparseMatrix<Complex64>> {
    if grid.free_surface_top {
        return Err(WriError::InvalidInput(
            "compliance_l: free-surface tops are not supported in the compliance form".into(),
        ));
    }
    let n = grid.n();
    if u.len() != 2 * n {
        return Err(WriError::DimensionMismatch {
            op: "compliance_l",
            expected: format!("{}", 2 * n),
            got: format!("{}", u.len()),
        });
    }
    let (u_x, u_z) = u.split_at(n);
    let w2 = pml.omega() * pml.omega();
    let wdiag = |v: &[Complex64]| -> SparseMatrix<Complex64> {
        let d: Vec<Complex64> = v.iter().map(|&x| w2 * x).collect();
        SparseMatrix::from_diag(&d)
    };
    let dfx = mesh::first_derivative(grid, Axis::X, Stagger::NodeToFace, Some(pml));
    let dfz = mesh::first_derivative(grid, Axis::Z, Stagger::NodeToFace, Some(pml));
    let dbx = mesh::first_derivative(grid, Axis::X, Stagger::FaceToNode, Some(pml));
    let dbz = mesh::first_derivative(grid, Axis::Z, Stagger::FaceToNode, Some(pml));
    let ux_d = wdiag(u_x);
    let uz_d = wdiag(u_z);
    let b_x = dbx.right_scaled(&dfx.matvec(u_x));
    let b_z = dbz.right_scaled(&dfz.matvec(u_z));
    SparseMatrix::from_blocks(&[
        vec![Some(&ux_d), Some(&uz_d), None, Some(&b_x)],
        vec![None, Some(&ux_d), Some(&uz_d), Some(&b_z)],
    ])
}

/// Stack a compliance model as `[s11; s13; s33; b]` for [`compliance_l`].
pub fn stack_compliance(comp: &ComplianceModel) -> Vec<f64> {
    let mut m = Vec::with_capacity(4 * comp.s11.len());
    m.extend_from_slice(&comp.s11);
    m.extend_from_slice(&comp.s13);
    m.extend_from_slice(&comp.s33);
    m.extend_from_slice(&comp.b);
    m
}

/// Linearisation of the **first-order** compliance operator in
/// `(s11, s13, s33, b)`, materialised as a 4n x 4n matrix over the state
/// `q = [u_x; u_z; w_x; w_z]`. The stress rows contribute `-iw` diagonals in
/// the wavefield components; the face rows contribute the buoyancy column
/// `-diag(D_f u)` per axis (faces carry the buoyancy of their owner node).
/// Unlike the second-order compliance form, this operator keeps
/// model-independent entries — the blocks acting on `w` — so the identity is
/// `A_c1(m) q = L_c1(q) m + shift(q)` with the shift from
/// [`first_order_compliance_shift`].
pub fn first_order_compliance_l(
    grid: &Grid,
    pml: &PmlProfile,
    q: &[Complex64],
) -> Result<SparseMatrix<Complex64>> {
    if grid.free_surface_top {
        return Err(WriError::InvalidInput(
            "first_order_compliance_l: free-surface tops are not supported in the compliance form"
                .into(),
        ));
    }
    let n = grid.n();
    if q.len() != 4 * n {
        return Err(WriError::DimensionMismatch {
            op: "first_order_compliance_l",
            expected: format!("{}", 4 * n),
            got: format!("{}", q.len()),
        });
    }
    let u_x = &q[..n];
    let u_z = &q[n..2 * n];
    let miw = Complex64::new(0.0, -pml.omega());
    let wdiag = |v: &[Complex64]| -> SparseMatrix<Complex64> {
        let d: Vec<Complex64> = v.iter().map(|&x| miw * x).collect();
        SparseMatrix::from_diag(&d)
    };
    let dfx = mesh::first_derivative(grid, Axis::X, Stagger::NodeToFace, Some(pml));
    let dfz = mesh::first_derivative(grid, Axis::Z, Stagger::NodeToFace, Some(pml));
    let neg_diag = |v: Vec<Complex64>| -> SparseMatrix<Complex64> {
        let d: Vec<Complex64> = v.into_iter().map(|x| -x).collect();
        SparseMatrix::from_diag(&d)
    };
    let ux_d = wdiag(u_x);
    let uz_d = wdiag(u_z);
    let bx_d = neg_diag(dfx.matvec(u_x));
    let bz_d = neg_diag(dfz.matvec(u_z));
    SparseMatrix::from_blocks(&[
        vec![Some(&ux_d), Some(&uz_d), None, None],
        vec![None, Some(&ux_d), Some(&uz_d), None],
        vec![None, None, None, Some(&bx_d)],
        vec![None, None, None, Some(&bz_d)],
    ])
}

/// Model-independent part of the first-order compliance operator applied to
/// `q = [u_x; u_z; w_x; w_z]`: the action of the `w` columns,
/// `[-D_bx w_x; -D_bz w_z; -iw w_x; -iw w_z]`.
pub fn first_order_compliance_shift(
    grid: &Grid,
    pml: &PmlProfile,
    q: &[Complex64],
) -> Result<Vec<Complex64>> {
    let n = grid.n();
    if q.len() != 4 * n {
        return Err(WriError::DimensionMismatch {
            op: "first_order_compliance_shift",
            expected: format!("{}", 4 * n),
            got: format!("{}", q.len()),
        });
    }
    let w_x = &q[2 * n..3 * n];
    let w_z = &q[3 * n..];
    let dbx = mesh::first_derivative(grid, Axis::X, Stagger::FaceToNode, Some(pml));
    let dbz = mesh::first_derivative(grid, Axis::Z, Stagger::FaceToNode, Some(pml));
    let miw = Complex64::new(0.0, -pml.omega());
    let mut out = Vec::with_capacity(4 * n);
    out.extend(dbx.matvec(w_x).into_iter().map(|v| -v));
    out.extend(dbz.matvec(w_z).into_iter().map(|v| -v));
    out.extend(w_x.iter().map(|&v| miw * v));
    out.extend(w_z.iter().map(|&v| miw * v));
    Ok(out)
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::to_complex;
    use crate::medium::PhysicalModel;
    use crate::wave;

    const TAU: f64 = std::f64::consts::TAU;

    fn demo_model(g: &Grid) -> PhysicalModel {
        let mut p = PhysicalModel::constant(g.n(), 0.0, 0.0, 0.0);
        for ix in 0..g.nx {
            for iz in 0..g.nz {
                let i = g.idx(ix, iz);
                let sx = ix as f64 / (g.nx - 1) as f64;
                let sz = iz as f64 / (g.nz - 1) as f64;
                p.v0[i] = 2.1 + 0.7 * sx + 0.3 * sz;
                p.eps[i] = 0.18 + 0.05 * sx * sz;
                p.delta[i] = 0.03 + 0.05 * sz;
            }
        }
        p
    }

    /// Deterministic pseudo-random complex field (no solver involved — the
    /// identities under test are algebraic).
    fn pseudo_field(n: usize, seed: f64) -> Vec<Complex64> {
        (0..n)
            .map(|i| {
                let t = seed + i as f64;
                Complex64::new((1.7 * t).sin() + 0.2, (2.3 * t).cos() - 0.1)
            })
            .collect()
    }

    fn all_active_sets() -> Vec<ActiveSet> {
        let c = ModelClass::ALL;
        let mut sets = Vec::new();
        for mask in 1u32..8 {
            let classes: Vec<ModelClass> = (0..3)
                .filter(|b| mask & (1 << b) != 0)
                .map(|b| c[b as usize])
                .collect();
            sets.push(ActiveSet::new(&classes).unwrap());
        }
        sets
    }

    #[test]
    fn bilinear_identity_holds_for_every_active_set() {
        let g = Grid::new(11, 9, 0.05, 0.04, 2, false).unwrap();
        let omega = TAU * 4.0;
        let pml = PmlProfile::new(&g, omega, 3.0).unwrap();
        let p = demo_model(&g);
        let m = p.to_inversion().unwrap();
        let a = wave::second_order(&g, &m, &pml).unwrap();
        let dxx = mesh::second_derivative(&g, Axis::X, Some(&pml));
        let dzz = mesh::second_derivative(&g, Axis::Z, Some(&pml));
        let u = pseudo_field(2 * g.n(), 0.37);
        let s = wave::pair_source(&g, 5, 4, omega);
        let lhs: Vec<Complex64> = a
            .matvec(&u)
            .iter()
            .zip(&s)
            .map(|(au, si)| au - si)
            .collect();
        let lin = Linearization::new(omega, &dxx, &dzz, &u).unwrap();
        let scale = lhs.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for active in all_active_sets() {
            let l = lin.l_matrix_full(&active);
            let y = lin.shift_full(&active, &m, &s).unwrap();
            let m_act = m.stack(&active);
            let rhs = l.matvec(&to_complex(&m_act));
            let worst = lhs
                .iter()
                .zip(rhs.iter().zip(&y))
                .map(|(left, (lm, yi))| (left - (lm - yi)).norm())
                .fold(0.0, f64::max);
            assert!(
                worst < 1e-12 * scale,
                "identity broken for {:?}: {worst:.3e}",
                active.classes()
            );
        }
    }

    #[test]
    fn published_shapes_drop_the_zero_row_for_eps_only() {
        let g = Grid::new(8, 7, 0.05, 0.05, 2, false).unwrap();
        let omega = TAU * 4.0;
        let pml = PmlProfile::new(&g, omega, 2.5).unwrap();
        let dxx = mesh::second_derivative(&g, Axis::X, Some(&pml));
        let dzz = mesh::second_derivative(&g, Axis::Z, Some(&pml));
        let u = pseudo_field(2 * g.n(), 1.23);
        let lin = Linearization::new(omega, &dxx, &dzz, &u).unwrap();
        let n = g.n();
        for active in all_active_sets() {
            let l = lin.l_matrix(&active);
            let expect_rows = if drops_z_row(&active) { n } else { 2 * n };
            assert_eq!(l.nrows(), expect_rows, "{:?}", active.classes());
            assert_eq!(l.ncols(), active.len() * n);
            let m = demo_model(&g).to_inversion().unwrap();
            let y = lin.shift(&active, &m, &wave::pair_source(&g, 3, 3, omega)).unwrap();
            assert_eq!(y.len(), expect_rows);
        }
        let eps_only = ActiveSet::new(&[ModelClass::Eps]).unwrap();
        assert!(drops_z_row(&eps_only));
    }

    #[test]
    fn restricting_the_active_set_is_a_column_restriction() {
        // the coefficient of a class cannot depend on which other classes are
        // active: sub-blocks must agree bitwise with the full linearisation
        let g = Grid::new(9, 8, 0.04, 0.04, 2, false).unwrap();
        let omega = TAU * 5.0;
        let pml = PmlProfile::new(&g, omega, 2.5).unwrap();
        let dxx = mesh::second_derivative(&g, Axis::X, Some(&pml));
        let dzz = mesh::second_derivative(&g, Axis::Z, Some(&pml));
        let u = pseudo_field(2 * g.n(), 2.9);
        let lin = Linearization::new(omega, &dxx, &dzz, &u).unwrap();
        let full = lin.l_matrix_full(&ActiveSet::all());
        let n = g.n();
        for active in all_active_sets() {
            let l = lin.l_matrix_full(&active);
            for (c, &class) in active.classes().iter().enumerate() {
                let c_full = ActiveSet::all().position(class).unwrap();
                for i in 0..2 * n {
                    let got = l.get(i, c * n + (i % n));
                    let want = full.get(i, c_full * n + (i % n));
                    assert_eq!(got, want, "class {class:?} row {i}");
                }
            }
        }
    }

    #[test]
    fn virtual_source_matches_operator_perturbation() {
        let g = Grid::new(9, 8, 0.05, 0.04, 2, false).unwrap();
        let omega = TAU * 4.5;
        let pml = PmlProfile::new(&g, omega, 3.0).unwrap();
        let p = demo_model(&g);
        let m = p.to_inversion().unwrap();
        let dxx = mesh::second_derivative(&g, Axis::X, Some(&pml));
        let dzz = mesh::second_derivative(&g, Axis::Z, Some(&pml));
        let u = pseudo_field(2 * g.n(), 0.11);
        let lin = Linearization::new(omega, &dxx, &dzz, &u).unwrap();
        let a0 = wave::second_order(&g, &m, &pml).unwrap();
        let au0 = a0.matvec(&u);
        let cell = g.idx(4, 5);
        let h = 0.01;
        for class in ModelClass::ALL {
            let mut mp = m.clone();
            mp.class_mut(class)[cell] += h;
            let aup = wave::second_order(&g, &mp, &pml).unwrap().matvec(&u);
            let vs = lin.virtual_source(class, cell);
            // A is exactly linear in m, so the divided difference is exact
            let worst = au0
                .iter()
                .zip(aup.iter().zip(&vs))
                .map(|(a, (ap, v))| ((ap - a) / h - v).norm())
                .fold(0.0, f64::max);
            let scale = vs.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
            assert!(worst < 1e-10 * scale, "{class:?}: {worst:.3e}");
        }
    }

    #[test]
    fn accumulated_normal_blocks_match_materialised_products() {
        let g = Grid::new(8, 7, 0.05, 0.05, 2, false).unwrap();
        let omega = TAU * 4.0;
        let pml = PmlProfile::new(&g, omega, 2.5).unwrap();
        let m = demo_model(&g).to_inversion().unwrap();
        let dxx = mesh::second_derivative(&g, Axis::X, Some(&pml));
        let dzz = mesh::second_derivative(&g, Axis::Z, Some(&pml));
        let n = g.n();
        let n_s = 3;
        let u = Mat::from_fn(2 * n, n_s, |i, j| {
            let t = 0.31 * (j + 1) as f64 + i as f64;
            Complex64::new((1.3 * t).sin(), (0.7 * t).cos())
        });
        let b = Mat::from_fn(2 * n, n_s, |i, j| {
            let t = 0.57 * (j + 1) as f64 + 2.0 * i as f64;
            Complex64::new((0.9 * t).cos(), (1.1 * t).sin())
        });
        for active in [ActiveSet::all(), ActiveSet::new(&[ModelClass::Eps]).unwrap()] {
            let acc = accumulate_normal(&active, &m, omega, &dxx, &dzz, &u, &b).unwrap();
            let k = active.len();
            // dense reference from materialised L and shifts
            let mut dense = vec![0.0f64; (k * n) * (k * n)];
            let mut rhs = vec![0.0f64; k * n];
            for j in 0..n_s {
                let uj = mat_column(&u, j);
                let bj = mat_column(&b, j);
                let lin = Linearization::new(omega, &dxx, &dzz, &uj).unwrap();
                let l = lin.l_matrix_full(&active);
                let y = lin.shift_full(&active, &m, &bj).unwrap();
                let ld = l.to_dense();
                for r in 0..2 * n {
                    for c1 in 0..k * n {
                        let a = ld[r * k * n + c1].conj();
                        if a == Complex64::new(0.0, 0.0) {
                            continue;
                        }
                        for c2 in 0..k * n {
                            dense[c1 * k * n + c2] += (a * ld[r * k * n + c2]).re;
                        }
                        rhs[c1] += (a * y[r]).re;
                    }
                }
            }
            let got = acc.to_sparse().to_dense();
            let worst = dense
                .iter()
                .zip(&got)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let scale = dense.iter().map(|a| a.abs()).fold(0.0, f64::max);
            assert!(worst < 1e-12 * scale, "normal matrix mismatch: {worst:.3e}");
            let worst_rhs = rhs
                .iter()
                .zip(acc.rhs())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let scale_rhs = rhs.iter().map(|a| a.abs()).fold(0.0, f64::max);
            assert!(worst_rhs < 1e-12 * scale_rhs, "rhs mismatch: {worst_rhs:.3e}");
        }
    }

    #[test]
    fn accumulation_is_bitwise_deterministic() {
        let g = Grid::new(10, 9, 0.05, 0.05, 2, false).unwrap();
        let omega = TAU * 6.0;
        let pml = PmlProfile::new(&g, omega, 2.5).unwrap();
        let m = demo_model(&g).to_inversion().unwrap();
        let dxx = mesh::second_derivative(&g, Axis::X, Some(&pml));
        let dzz = mesh::second_derivative(&g, Axis::Z, Some(&pml));
        let n = g.n();
        let u = Mat::from_fn(2 * n, 7, |i, j| {
            Complex64::new((i + 3 * j) as f64 * 0.01, (2 * i + j) as f64 * 0.02)
        });
        let b = Mat::from_fn(2 * n, 7, |i, j| {
            Complex64::new((i * j) as f64 * 0.003, i as f64 * 0.001)
        });
        let active = ActiveSet::all();
        let a1 = accumulate_normal(&active, &m, omega, &dxx, &dzz, &u, &b).unwrap();
        let a2 = accumulate_normal(&active, &m, omega, &dxx, &dzz, &u, &b).unwrap();
        assert_eq!(a1, a2, "fixed-shape reduction must be run-to-run identical");
    }

    #[test]
    fn compliance_linearisation_reproduces_the_operator() {
        let g = Grid::new(10, 8, 0.05, 0.04, 2, false).unwrap();
        let omega = TAU * 5.0;
        let pml = PmlProfile::new(&g, omega, 3.0).unwrap();
        let p = demo_model(&g);
        let cm = p.to_compliance().unwrap();
        let a_c = wave::second_order_compliance(&g, &cm, &pml).unwrap();
        let u = pseudo_field(2 * g.n(), 0.71);
        let l_c = compliance_l(&g, &pml, &u).unwrap();
        assert_eq!(l_c.ncols(), 4 * g.n());
        let lhs = a_c.matvec(&u);
        let rhs = l_c.matvec(&to_complex(&stack_compliance(&cm)));
        let scale = lhs.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let worst = lhs
            .iter()
            .zip(&rhs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(
            worst < 1e-12 * scale,
            "compliance identity broken: {worst:.3e}"
        );
    }

    #[test]
    fn first_order_compliance_linearisation_reproduces_the_operator() {
        let g = Grid::new(10, 8, 0.05, 0.04, 2, false).unwrap();
        let omega = TAU * 5.0;
        let pml = PmlProfile::new(&g, omega, 3.0).unwrap();
        let p = demo_model(&g);
        let cm = p.to_compliance().unwrap();
        let a_c1 = wave::first_order_compliance(&g, &cm, &pml).unwrap();
        let q = pseudo_field(4 * g.n(), 0.43);
        let l = first_order_compliance_l(&g, &pml, &q).unwrap();
        assert_eq!(l.nrows(), 4 * g.n());
        assert_eq!(l.ncols(), 4 * g.n());
        let lhs = a_c1.matvec(&q);
        let lm = l.matvec(&to_complex(&stack_compliance(&cm)));
        let shift = first_order_compliance_shift(&g, &pml, &q).unwrap();
        let scale = lhs.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let worst = lhs
            .iter()
            .zip(lm.iter().zip(&shift))
            .map(|(a, (b, c))| (a - (b + c)).norm())
            .fold(0.0, f64::max);
        assert!(
            worst < 1e-12 * scale,
            "first-order compliance identity broken: {worst:.3e}"
        );
    }
}
