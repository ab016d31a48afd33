//! Frequency-domain wave operators for VTI acoustic media.
//!
//! Every assembly lives on the full padded [`Grid`] and produces a square
//! sparse complex matrix:
//! - [`second_order`]: the 2n x 2n coupled system in `[u_x; u_z]` whose
//!   coefficients are the inversion parameters `m_v0, m_eps, m_delta` — the
//!   form the reconstruction scheme linearises in the model;
//! - [`scalar_helmholtz`]: the n x n isotropic special case (optionally with
//!   an accuracy-optimised nine-point stencil for square cells);
//! - [`first_order_stiffness`] / [`first_order_compliance`]: 4n x 4n
//!   velocity–stress forms in `[u_x; u_z; w_x; w_z]` whose Schur complement
//!   over the face fields reproduces the second-order matrix exactly;
//! - [`second_order_compliance`]: the 2n x 2n form linear in the compliance
//!   coefficients `s11, s13, s33` and buoyancy;
//! - [`reduced_fourth_order`]: the n x n system in `u_x` alone obtained by
//!   eliminating `u_z` through the exact row combination of the second-order
//!   equations (a wider, fourth-order stencil).
//!
//! A "unit point source" is a discrete delta of amplitude one at a grid node;
//! the second-order right-hand side injects it as `omega^2` on both the x and
//! z component ([`pair_source`]). A node value acts as a density over its
//! `dx dz` cell, so on this convention the homogeneous isotropic response
//! matches `-i omega^2 dx dz / 4 * H0^(1)(k r)`.

use num_complex::Complex64;

use crate::linalg::{to_complex, SparseMatrix};
use crate::medium::{ComplianceModel, InversionModel, StiffnessModel};
use crate::mesh::{self, Axis, Grid, PmlProfile, Stagger};
use crate::{Result, WriError};

/// Finite-difference stencil for the scalar (isotropic) operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stencil {
    /// Classic second-order five-point composition of staggered differences.
    #[default]
    FivePoint,
    /// Mixed-grid nine-point rows in the undamped deep interior (square cells
    /// only); damped, edge and free-surface rows keep the five-point form.
    NinePoint,
}

/// Mixed-grid weighting between the axis-aligned and 45-degree Laplacians.
const MIXED_LAPLACIAN_WEIGHT: f64 = 0.5461;
/// Lumped-mass weight on the stencil centre.
const MASS_CENTER_WEIGHT: f64 = 0.6248;
/// Lumped-mass weight on each of the four edge neighbours (corners get none).
const MASS_EDGE_WEIGHT: f64 = 0.09381;

/// Cells where `|m_v0 * m_delta|` falls below this cannot be reduced to the
/// fourth-order single-field system (the elimination divides by it).
pub const REDUCTION_DIAGONAL_FLOOR: f64 = 1e-6;

fn check_model_len(op: &'static str, grid: &Grid, len: usize) -> Result<()> {
    if len != grid.n() {
        return Err(WriError::DimensionMismatch {
            op,
            expected: format!("{} cells", grid.n()),
            got: format!("{len}"),
        });
    }
    Ok(())
}

fn omega2_diag(values: &[f64], omega: f64) -> SparseMatrix<Complex64> {
    let w2 = omega * omega;
    let d: Vec<Complex64> = values.iter().map(|&v| Complex64::new(w2 * v, 0.0)).collect();
    SparseMatrix::from_diag(&d)
}

/// Buoyancy at the faces of `axis`: face `i` shares the index of the node on
/// its low side, so the face field is the node field reinterpreted. Keeping
/// this identification (rather than averaging neighbours) makes the
/// buoyancy-linearised operator an exact product `D_b diag(D_f u)`.
fn face_buoyancy(_grid: &Grid, b_nodes: &[f64], _axis: Axis) -> Vec<f64> {
    b_nodes.to_vec()
}

/// `D_b diag(b_face) D_f` along `axis` (under a free surface the z-operator
/// gets the same symmetric top-row elimination as the unweighted one).
fn buoyant_second_derivative(
    grid: &Grid,
    axis: Axis,
    b_nodes: &[f64],
    pml: &PmlProfile,
) -> SparseMatrix<Complex64> {
    let df = mesh::first_derivative(grid, axis, Stagger::NodeToFace, Some(pml));
    let db = mesh::first_derivative(grid, axis, Stagger::FaceToNode, Some(pml));
    let bf = to_complex(&face_buoyancy(grid, b_nodes, axis));
    let dd = db
        .matmul(&df.left_scaled(&bf))
        .expect("staggered pair is conformable");
    if axis == Axis::Z && grid.free_surface_top {
        mesh::apply_dirichlet_top(grid, &dd)
    } else {
        dd
    }
}

// ---------------------------------------------------------------------------
// second-order forms
// ---------------------------------------------------------------------------

/// Coupled second-order VTI operator, 2n x 2n over `[u_x; u_z]`:
///
/// ```text
/// [ w^2 M + E Dxx      Delta Dzz     ]
/// [ Delta Dxx          w^2 M + Dzz   ]
/// ```
///
/// with `M, E, Delta` the diagonal inversion-parameter fields and `Dxx, Dzz`
/// the absorbing staggered second differences. Linear in each parameter
/// class, which is what the model step exploits.
pub fn second_order(
    grid: &Grid,
    model: &InversionModel,
    pml: &PmlProfile,
) -> Result<SparseMatrix<Complex64>> {
    check_model_len("second_order", grid, model.len())?;
    let dxx = mesh::second_derivative(grid, Axis::X, Some(pml));
    let dzz = mesh::second_derivative(grid, Axis::Z, Some(pml));
    let mass = omega2_diag(&model.m_v0, pml.omega());
    let a11 = dxx.left_scaled(&to_complex(&model.m_eps)).add(&mass)?;
    let a12 = dzz.left_scaled(&to_complex(&model.m_delta));
    let a21 = dxx.left_scaled(&to_complex(&model.m_delta));
    let a22 = dzz.add(&mass)?;
    SparseMatrix::from_blocks(&[
        vec![Some(&a11), Some(&a12)],
        vec![Some(&a21), Some(&a22)],
    ])
}

/// Scalar Helmholtz operator `w^2 diag(m_v0) + Dxx + Dzz` (n x n). The
/// nine-point stencil improves dispersion for square cells; rows touching
/// damping, grid edges or the free surface keep the five-point composition so
/// boundary handling is unchanged.
pub fn scalar_helmholtz(
    grid: &Grid,
    m_v0: &[f64],
    pml: &PmlProfile,
    stencil: Stencil,
) -> Result<SparseMatrix<Complex64>> {
    check_model_len("scalar_helmholtz", grid, m_v0.len())?;
    let dxx = mesh::second_derivative(grid, Axis::X, Some(pml));
    let dzz = mesh::second_derivative(grid, Axis::Z, Some(pml));
    let five = dxx.add(&dzz)?.add(&omega2_diag(m_v0, pml.omega()))?;
    match stencil {
        Stencil::FivePoint => Ok(five),
        Stencil::NinePoint => nine_point_rows(grid, m_v0, pml, &five),
    }
}

/// Replace deep-interior rows of the five-point operator with the mixed-grid
/// nine-point discretisation.
fn nine_point_rows(
    grid: &Grid,
    m_v0: &[f64],
    pml: &PmlProfile,
    five: &SparseMatrix<Complex64>,
) -> Result<SparseMatrix<Complex64>> {
    if (grid.dx - grid.dz).abs() > 1e-12 * grid.dx.abs() {
        return Err(WriError::InvalidInput(format!(
            "nine-point stencil needs square cells, got dx = {}, dz = {}",
            grid.dx, grid.dz
        )));
    }
    let h2 = grid.dx * grid.dx;
    let w2 = pml.omega() * pml.omega();
    let a = MIXED_LAPLACIAN_WEIGHT;
    let dxn = pml.damping(Axis::X, false);
    let dxf = pml.damping(Axis::X, true);
    let dzn = pml.damping(Axis::Z, false);
    let dzf = pml.damping(Axis::Z, true);
    // A row is "deep" when all nine nodes exist, none of them is damped (node
    // or connecting face), and nothing in the patch touches the eliminated
    // free-surface row.
    let iz_min = if grid.free_surface_top { 2 } else { 1 };
    let deep = |ix: usize, iz: usize| -> bool {
        ix >= 1
            && ix + 1 < grid.nx
            && iz >= iz_min
            && iz + 1 < grid.nz
            && dxn[ix - 1..=ix + 1].iter().all(|&d| d == 0.0)
            && dxf[ix - 1..=ix].iter().all(|&d| d == 0.0)
            && dzn[iz - 1..=iz + 1].iter().all(|&d| d == 0.0)
            && dzf[iz - 1..=iz].iter().all(|&d| d == 0.0)
    };
    let mut trips: Vec<(usize, usize, Complex64)> = Vec::with_capacity(five.nnz() + 4 * grid.n());
    for ix in 0..grid.nx {
        for iz in 0..grid.nz {
            let r = grid.idx(ix, iz);
            if !deep(ix, iz) {
                let (cols, vals) = five.row(r);
                for (&j, &v) in cols.iter().zip(vals) {
                    trips.push((r, j, v));
                }
                continue;
            }
            let centre = w2 * MASS_CENTER_WEIGHT * m_v0[r] - a * 4.0 / h2 - (1.0 - a) * 2.0 / h2;
            trips.push((r, r, Complex64::new(centre, 0.0)));
            for (jx, jz) in [
                (ix - 1, iz),
                (ix + 1, iz),
                (ix, iz - 1),
                (ix, iz + 1),
            ] {
                let j = grid.idx(jx, jz);
                let v = w2 * MASS_EDGE_WEIGHT * m_v0[j] + a / h2;
                trips.push((r, j, Complex64::new(v, 0.0)));
            }
            for (jx, jz) in [
                (ix - 1, iz - 1),
                (ix + 1, iz - 1),
                (ix - 1, iz + 1),
                (ix + 1, iz + 1),
            ] {
                let j = grid.idx(jx, jz);
                trips.push((r, j, Complex64::new((1.0 - a) / (2.0 * h2), 0.0)));
            }
        }
    }
    SparseMatrix::from_triplets(grid.n(), grid.n(), &trips)
}

/// Second-order compliance form, 2n x 2n over `[u_x; u_z]`:
///
/// ```text
/// [ Dxx_b + w^2 diag(s11)    w^2 diag(s13)          ]
/// [ w^2 diag(s13)            Dzz_b + w^2 diag(s33)  ]
/// ```
///
/// `Dxx_b = D_b diag(b_face) D_f` carries the buoyancy inside the stencil.
/// Left-multiplying by the per-cell stiffness blocks recovers the standard
/// second-order rows, so solutions agree given the matching right-hand side
/// ([`compliance_rhs`]).
pub fn second_order_compliance(
    grid: &Grid,
    comp: &ComplianceModel,
    pml: &PmlProfile,
) -> Result<SparseMatrix<Complex64>> {
    check_model_len("second_order_compliance", grid, comp.s11.len())?;
    let dxx_b = buoyant_second_derivative(grid, Axis::X, &comp.b, pml);
    let dzz_b = buoyant_second_derivative(grid, Axis::Z, &comp.b, pml);
    let a11 = dxx_b.add(&omega2_diag(&comp.s11, pml.omega()))?;
    let a12 = omega2_diag(&comp.s13, pml.omega());
    let a21 = a12.clone();
    let a22 = dzz_b.add(&omega2_diag(&comp.s33, pml.omega()))?;
    SparseMatrix::from_blocks(&[
        vec![Some(&a11), Some(&a12)],
        vec![Some(&a21), Some(&a22)],
    ])
}

/// Map a standard second-order right-hand side `S` (length 2n) to the
/// compliance form: `rhs_c = M_S (v0^2 .* S)` per cell, where `M_S` is the
/// compliance 2x2 and `v0^2 = c33`.
pub fn compliance_rhs(
    grid: &Grid,
    comp: &ComplianceModel,
    stiff: &StiffnessModel,
    s: &[Complex64],
) -> Result<Vec<Complex64>> {
    let n = grid.n();
    if s.len() != 2 * n {
        return Err(WriError::DimensionMismatch {
            op: "compliance_rhs",
            expected: format!("{}", 2 * n),
            got: format!("{}", s.len()),
        });
    }
    let mut out = vec![Complex64::new(0.0, 0.0); 2 * n];
    for i in 0..n {
        let tx = s[i] * stiff.c33[i];
        let tz = s[n + i] * stiff.c33[i];
        out[i] = comp.s11[i] * tx + comp.s13[i] * tz;
        out[n + i] = comp.s13[i] * tx + comp.s33[i] * tz;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// first-order forms
// ---------------------------------------------------------------------------

fn reject_free_surface(op: &str, grid: &Grid) -> Result<()> {
    if grid.free_surface_top {
        return Err(WriError::InvalidInput(format!(
            "{op}: the velocity--stress forms do not support a free-surface top \
             (use the second-order operator)"
        )));
    }
    Ok(())
}

/// First-order (velocity--stress) stiffness form, 4n x 4n over
/// `[u_x; u_z; w_x; w_z]` with the face fields `w = D_f u / (i w)`:
///
/// ```text
/// [ -iw I        0         c11 Dbx    c13 Dbz ]
/// [  0          -iw I      c13 Dbx    c33 Dbz ]
/// [  b_fx Dfx    0        -iw I       0       ]
/// [  0           b_fz Dfz  0         -iw I    ]
/// ```
///
/// Eliminating `w` and scaling rows by `m_v0` reproduces [`second_order`]
/// exactly, discretisation included ([`stiffness_rhs`] maps the sources).
pub fn first_order_stiffness(
    grid: &Grid,
    stiff: &StiffnessModel,
    pml: &PmlProfile,
) -> Result<SparseMatrix<Complex64>> {
    reject_free_surface("first_order_stiffness", grid)?;
    check_model_len("first_order_stiffness", grid, stiff.c11.len())?;
    let n = grid.n();
    let miw = Complex64::new(0.0, -pml.omega());
    let ident = SparseMatrix::from_diag(&vec![miw; n]);
    let dfx = mesh::first_derivative(grid, Axis::X, Stagger::NodeToFace, Some(pml));
    let dfz = mesh::first_derivative(grid, Axis::Z, Stagger::NodeToFace, Some(pml));
    let dbx = mesh::first_derivative(grid, Axis::X, Stagger::FaceToNode, Some(pml));
    let dbz = mesh::first_derivative(grid, Axis::Z, Stagger::FaceToNode, Some(pml));
    let c11_dbx = dbx.left_scaled(&to_complex(&stiff.c11));
    let c13_dbx = dbx.left_scaled(&to_complex(&stiff.c13));
    let c13_dbz = dbz.left_scaled(&to_complex(&stiff.c13));
    let c33_dbz = dbz.left_scaled(&to_complex(&stiff.c33));
    let bx_dfx = dfx.left_scaled(&to_complex(&face_buoyancy(grid, &stiff.b, Axis::X)));
    let bz_dfz = dfz.left_scaled(&to_complex(&face_buoyancy(grid, &stiff.b, Axis::Z)));
    SparseMatrix::from_blocks(&[
        vec![Some(&ident), None, Some(&c11_dbx), Some(&c13_dbz)],
        vec![None, Some(&ident), Some(&c13_dbx), Some(&c33_dbz)],
        vec![Some(&bx_dfx), None, Some(&ident), None],
        vec![None, Some(&bz_dfz), None, Some(&ident)],
    ])
}

/// First-order compliance form, 4n x 4n over `[u_x; u_z; w_x; w_z]`:
///
/// ```text
/// [ -iw s11   -iw s13   -Dbx       0    ]
/// [ -iw s13   -iw s33    0        -Dbz  ]
/// [ -b_fx Dfx  0        -iw I      0    ]
/// [  0        -b_fz Dfz  0        -iw I ]
/// ```
///
/// Eliminating `w` reproduces [`second_order_compliance`] exactly
/// ([`compliance_first_order_rhs`] maps the sources).
pub fn first_order_compliance(
    grid: &Grid,
    comp: &ComplianceModel,
    pml: &PmlProfile,
) -> Result<SparseMatrix<Complex64>> {
    reject_free_surface("first_order_compliance", grid)?;
    check_model_len("first_order_compliance", grid, comp.s11.len())?;
    let n = grid.n();
    let miw = Complex64::new(0.0, -pml.omega());
    let ident = SparseMatrix::from_diag(&vec![miw; n]);
    let sdiag = |v: &[f64]| -> SparseMatrix<Complex64> {
        let d: Vec<Complex64> = v.iter().map(|&x| miw * x).collect();
        SparseMatrix::from_diag(&d)
    };
    let s11 = sdiag(&comp.s11);
    let s13 = sdiag(&comp.s13);
    let s33 = sdiag(&comp.s33);
    let dbx = mesh::first_derivative(grid, Axis::X, Stagger::FaceToNode, Some(pml)).scaled(
        Complex64::new(-1.0, 0.0),
    );
    let dbz = mesh::first_derivative(grid, Axis::Z, Stagger::FaceToNode, Some(pml)).scaled(
        Complex64::new(-1.0, 0.0),
    );
    let dfx = mesh::first_derivative(grid, Axis::X, Stagger::NodeToFace, Some(pml));
    let dfz = mesh::first_derivative(grid, Axis::Z, Stagger::NodeToFace, Some(pml));
    let bx_dfx = dfx
        .left_scaled(&to_complex(&face_buoyancy(grid, &comp.b, Axis::X)))
        .scaled(Complex64::new(-1.0, 0.0));
    let bz_dfz = dfz
        .left_scaled(&to_complex(&face_buoyancy(grid, &comp.b, Axis::Z)))
        .scaled(Complex64::new(-1.0, 0.0));
    SparseMatrix::from_blocks(&[
        vec![Some(&s11), Some(&s13), Some(&dbx), None],
        vec![Some(&s13), Some(&s33), None, Some(&dbz)],
        vec![Some(&bx_dfx), None, Some(&ident), None],
        vec![None, Some(&bz_dfz), None, Some(&ident)],
    ])
}

/// Map a standard second-order right-hand side `S` to the stiffness
/// first-order form: `f_u = (-i/w) v0^2 .* S` on the stress rows, zero on the
/// face rows. Solving [`first_order_stiffness`] with this source makes its
/// `[u_x; u_z]` equal the [`second_order`] solution for `S`.
pub fn stiffness_rhs(
    grid: &Grid,
    stiff: &StiffnessModel,
    omega: f64,
    s: &[Complex64],
) -> Result<Vec<Complex64>> {
    let n = grid.n();
    if s.len() != 2 * n {
        return Err(WriError::DimensionMismatch {
            op: "stiffness_rhs",
            expected: format!("{}", 2 * n),
            got: format!("{}", s.len()),
        });
    }
    let mi_over_w = Complex64::new(0.0, -1.0 / omega);
    let mut out = vec![Complex64::new(0.0, 0.0); 4 * n];
    for i in 0..n {
        out[i] = mi_over_w * stiff.c33[i] * s[i];
        out[n + i] = mi_over_w * stiff.c33[i] * s[n + i];
    }
    Ok(out)
}

/// Map a compliance-form right-hand side (from [`compliance_rhs`]) to the
/// first-order compliance source: `(-i/w) rhs_c` on the stress rows.
pub fn compliance_first_order_rhs(grid: &Grid, omega: f64, rhs_c: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = grid.n();
    if rhs_c.len() != 2 * n {
        return Err(WriError::DimensionMismatch {
            op: "compliance_first_order_rhs",
            expected: format!("{}", 2 * n),
            got: format!("{}", rhs_c.len()),
        });
    }
    let mi_over_w = Complex64::new(0.0, -1.0 / omega);
    let mut out = vec![Complex64::new(0.0, 0.0); 4 * n];
    for i in 0..2 * n {
        out[i] = mi_over_w * rhs_c[i];
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// reduced fourth-order form
// ---------------------------------------------------------------------------

/// Single-field reduction of the second-order system. Combining the two rows
/// as `Delta * (z row) - (x row)` eliminates `Dzz u_z` and yields the affine
/// recovery `u_z = A_z u_x + B_z(rhs)`; substituting into the x row leaves an
/// n x n system for `u_x` with a wider (fourth-order) stencil.
#[derive(Debug, Clone)]
pub struct ReducedVtiSystem {
    /// `w^2 M + E Dxx + Delta Dzz A_z` (n x n).
    pub a_red: SparseMatrix<Complex64>,
    /// Recovery operator `A_z = (w^2 M Delta)^{-1} [(E - Delta^2) Dxx + w^2 M]`.
    pub a_z: SparseMatrix<Complex64>,
    /// `Delta Dzz`, kept for right-hand-side reduction.
    dzz_delta: SparseMatrix<Complex64>,
    /// `1 / (w^2 m_v0 m_delta)` per cell.
    inv_w2_md: Vec<f64>,
    /// `m_delta` per cell.
    m_delta: Vec<f64>,
    omega: f64,
}

/// Right-hand side of the reduced system together with the affine part of the
/// `u_z` recovery (both depend on the original 2n source).
#[derive(Debug, Clone)]
pub struct ReducedRhs {
    pub rhs: Vec<Complex64>,
    pub b_z: Vec<Complex64>,
}

/// Build the reduced system. Fails when `min |m_v0 m_delta|` drops below
/// [`REDUCTION_DIAGONAL_FLOOR`] (the row combination divides by it).
pub fn reduced_fourth_order(
    grid: &Grid,
    model: &InversionModel,
    pml: &PmlProfile,
) -> Result<ReducedVtiSystem> {
    check_model_len("reduced_fourth_order", grid, model.len())?;
    let n = grid.n();
    let omega = pml.omega();
    let w2 = omega * omega;
    let mut inv_w2_md = Vec::with_capacity(n);
    for i in 0..n {
        let md = model.m_v0[i] * model.m_delta[i];
        if md.abs() < REDUCTION_DIAGONAL_FLOOR {
            return Err(WriError::Singular(format!(
                "fourth-order reduction: |m_v0 * m_delta| = {:.3e} at cell {i} \
                 is below the floor {REDUCTION_DIAGONAL_FLOOR:.1e}",
                md.abs()
            )));
        }
        inv_w2_md.push(1.0 / (w2 * md));
    }
    let dxx = mesh::second_derivative(grid, Axis::X, Some(pml));
    let dzz = mesh::second_derivative(grid, Axis::Z, Some(pml));
    let e_minus_d2: Vec<f64> = (0..n)
        .map(|i| model.m_eps[i] - model.m_delta[i] * model.m_delta[i])
        .collect();
    let mass = omega2_diag(&model.m_v0, omega);
    let a_z = dxx
        .left_scaled(&to_complex(&e_minus_d2))
        .add(&mass)?
        .left_scaled(&to_complex(&inv_w2_md));
    let dzz_delta = dzz.left_scaled(&to_complex(&model.m_delta));
    let a_red = dxx
        .left_scaled(&to_complex(&model.m_eps))
        .add(&mass)?
        .add(&dzz_delta.matmul(&a_z)?)?;
    Ok(ReducedVtiSystem {
        a_red,
        a_z,
        dzz_delta,
        inv_w2_md,
        m_delta: model.m_delta.clone(),
        omega,
    })
}

impl ReducedVtiSystem {
    pub fn n(&self) -> usize {
        self.a_red.nrows()
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Reduce a full 2n right-hand side `[rhs_x; rhs_z]`:
    /// `b_z = (w^2 M Delta)^{-1} (Delta rhs_z - rhs_x)` and
    /// `rhs = rhs_x - Delta Dzz b_z`.
    pub fn reduce_rhs(&self, full: &[Complex64]) -> Result<ReducedRhs> {
        let n = self.n();
        if full.len() != 2 * n {
            return Err(WriError::DimensionMismatch {
                op: "reduce_rhs",
                expected: format!("{}", 2 * n),
                got: format!("{}", full.len()),
            });
        }
        let b_z: Vec<Complex64> = (0..n)
            .map(|i| (full[n + i] * self.m_delta[i] - full[i]) * self.inv_w2_md[i])
            .collect();
        let shift = self.dzz_delta.matvec(&b_z);
        let rhs = (0..n).map(|i| full[i] - shift[i]).collect();
        Ok(ReducedRhs { rhs, b_z })
    }

    /// `u_z = A_z u_x + b_z`.
    pub fn recover_uz(&self, u_x: &[Complex64], b_z: &[Complex64]) -> Vec<Complex64> {
        let mut u_z = self.a_z.matvec(u_x);
        for (z, b) in u_z.iter_mut().zip(b_z) {
            *z += *b;
        }
        u_z
    }
}

// ---------------------------------------------------------------------------
// sources
// ---------------------------------------------------------------------------

/// Unit discrete delta at a node (length n).
pub fn delta_source(grid: &Grid, ix: usize, iz: usize) -> Vec<Complex64> {
    let mut s = vec![Complex64::new(0.0, 0.0); grid.n()];
    s[grid.idx(ix, iz)] = Complex64::new(1.0, 0.0);
    s
}

/// Second-order right-hand side for a unit point source: `omega^2` on both
/// the x and z component at the node (length 2n).
pub fn pair_source(grid: &Grid, ix: usize, iz: usize, omega: f64) -> Vec<Complex64> {
    let n = grid.n();
    let mut s = vec![Complex64::new(0.0, 0.0); 2 * n];
    let k = grid.idx(ix, iz);
    let amp = Complex64::new(omega * omega, 0.0);
    s[k] = amp;
    s[n + k] = amp;
    s
}

/// Scalar right-hand side for a unit point source: `omega^2` at the node.
pub fn scalar_source(grid: &Grid, ix: usize, iz: usize, omega: f64) -> Vec<Complex64> {
    let mut s = vec![Complex64::new(0.0, 0.0); grid.n()];
    s[grid.idx(ix, iz)] = Complex64::new(omega * omega, 0.0);
    s
}

// ---------------------------------------------------------------------------
