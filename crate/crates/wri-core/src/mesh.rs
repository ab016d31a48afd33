//! Regular grid, absorbing boundary profile, and finite-difference operators.
//!
//! The computational box is a regular `nx * nz` node grid (spacing `dx`, `dz`
//! in km) that *includes* the absorbing collar: experiments build their models
//! on the interior and replicate-pad them outward. Nodes are ordered
//! column-fast: `index = ix * nz + iz`, with `iz = 0` the top row.
//!
//! Spatial derivatives are staggered second-order first differences. The
//! `node -> face` forward difference `D_f` puts face `i` between nodes `i` and
//! `i + 1`; the matching `face -> node` backward difference is `D_b = -D_f^T`,
//! so the composed second derivative `D_b * D_f` is the standard symmetric
//! 3-point stencil. Absorbing boundaries enter as complex coordinate
//! stretches `1 / (1 + i d/omega)` applied at the positions (node or face)
//! where each difference lives, which keeps the first-order and second-order
//! operator assemblies exactly consistent under elimination.
//!
//! Regularisation gradients are a separate pair of *real* forward-difference
//! operators with replicated-edge (Neumann) closure; they never enter the
//! wave operator.

use num_complex::Complex64;

use crate::linalg::SparseMatrix;
use crate::{Result, WriError};

/// Derivative axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Z,
}

/// Which way a staggered first difference maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stagger {
    /// Forward difference, node field -> face field (face `i` between nodes
    /// `i` and `i+1`; the node past the boundary is treated as zero).
    NodeToFace,
    /// Backward difference, face field -> node field; exactly `-D_f^T`.
    FaceToNode,
}

/// Regular 2-D grid including the absorbing collar.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    /// Node count along x (including collars).
    pub nx: usize,
    /// Node count along z (including collars).
    pub nz: usize,
    /// Node spacing along x in km.
    pub dx: f64,
    /// Node spacing along z in km.
    pub dz: f64,
    /// Absorbing collar width in cells (left, right, bottom; top unless a
    /// free surface is requested).
    pub pml_width: usize,
    /// Dirichlet (pressure = 0) top row instead of a top absorbing collar.
    pub free_surface_top: bool,
}

impl Grid {
    /// Build a grid from full box dimensions.
    pub fn new(
        nx: usize,
        nz: usize,
        dx: f64,
        dz: f64,
        pml_width: usize,
        free_surface_top: bool,
    ) -> Result<Self> {
        if nx == 0 || nz == 0 || !(dx > 0.0) || !(dz > 0.0) {
            return Err(WriError::InvalidInput(format!(
                "grid: need positive dimensions, got nx={nx} nz={nz} dx={dx} dz={dz}"
            )));
        }
        let g = Self {
            nx,
            nz,
            dx,
            dz,
            pml_width,
            free_surface_top,
        };
        let (cx, cz) = (2 * pml_width, g.collar_top() + pml_width);
        if cx >= nx || cz >= nz {
            return Err(WriError::InvalidInput(format!(
                "grid: absorbing collar ({pml_width} cells/side) swallows the {nx}x{nz} box"
            )));
        }
        Ok(g)
    }

    /// Build a grid by padding an interior box with the absorbing collar.
    pub fn with_interior(
        nx_interior: usize,
        nz_interior: usize,
        dx: f64,
        dz: f64,
        pml_width: usize,
        free_surface_top: bool,
    ) -> Result<Self> {
        let top = if free_surface_top { 0 } else { pml_width };
        Self::new(
            nx_interior + 2 * pml_width,
            nz_interior + top + pml_width,
            dx,
            dz,
            pml_width,
            free_surface_top,
        )
    }

    /// Total number of nodes (the scalar operator dimension).
    pub fn n(&self) -> usize {
        self.nx * self.nz
    }

    /// Flat node index; column-fast (`iz` varies fastest).
    #[inline]
    pub fn idx(&self, ix: usize, iz: usize) -> usize {
        debug_assert!(ix < self.nx && iz < self.nz);
        ix * self.nz + iz
    }

    /// Inverse of [`Grid::idx`].
    #[inline]
    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index / self.nz, index % self.nz)
    }

    /// Node position in km (origin at the top-left corner of the full box).
    pub fn x(&self, ix: usize) -> f64 {
        ix as f64 * self.dx
    }

    pub fn z(&self, iz: usize) -> f64 {
        iz as f64 * self.dz
    }

    /// Collar width on the top side (0 under a free surface).
    pub fn collar_top(&self) -> usize {
        if self.free_surface_top {
            0
        } else {
            self.pml_width
        }
    }

    /// Interior index ranges (collar excluded).
    pub fn interior_x(&self) -> std::ops::Range<usize> {
        self.pml_width..self.nx - self.pml_width
    }

    pub fn interior_z(&self) -> std::ops::Range<usize> {
        self.collar_top()..self.nz - self.pml_width
    }

    pub fn is_interior(&self, ix: usize, iz: usize) -> bool {
        self.interior_x().contains(&ix) && self.interior_z().contains(&iz)
    }

    /// Offset of the interior origin in km.
    pub fn interior_origin(&self) -> (f64, f64) {
        (
            self.pml_width as f64 * self.dx,
            self.collar_top() as f64 * self.dz,
        )
    }

    /// Snap a position (km, interior-origin coordinates) to the nearest node.
    /// Returns `(ix, iz, moved)` where `moved` flags a snap farther than a
    /// relative epsilon of the spacing.
    pub fn snap(&self, x: f64, z: f64) -> (usize, usize, bool) {
        let (ox, oz) = self.interior_origin();
        let fx = (x + ox) / self.dx;
        let fz = (z + oz) / self.dz;
        let ix = (fx.round().max(0.0) as usize).min(self.nx - 1);
        let iz = (fz.round().max(0.0) as usize).min(self.nz - 1);
        let moved = (fx - ix as f64).abs() > 1e-9 || (fz - iz as f64).abs() > 1e-9;
        (ix, iz, moved)
    }

    /// Replicate-pad an interior field into the full box.
    pub fn pad_from_interior(&self, interior: &[f64]) -> Result<Vec<f64>> {
        let (inx, inz) = (self.interior_x().len(), self.interior_z().len());
        if interior.len() != inx * inz {
            return Err(WriError::DimensionMismatch {
                op: "pad_from_interior",
                expected: format!("{} ({}x{})", inx * inz, inx, inz),
                got: format!("{}", interior.len()),
            });
        }
        let (x0, z0) = (self.pml_width, self.collar_top());
        let mut full = vec![0.0; self.n()];
        for ix in 0..self.nx {
            let cx = ix.clamp(x0, x0 + inx - 1) - x0;
            for iz in 0..self.nz {
                let cz = iz.clamp(z0, z0 + inz - 1) - z0;
                full[self.idx(ix, iz)] = interior[cx * inz + cz];
            }
        }
        Ok(full)
    }

    /// Restrict a full-box field to the interior.
    pub fn restrict_to_interior(&self, full: &[f64]) -> Result<Vec<f64>> {
        if full.len() != self.n() {
            return Err(WriError::DimensionMismatch {
                op: "restrict_to_interior",
                expected: format!("{}", self.n()),
                got: format!("{}", full.len()),
            });
        }
        let mut out = Vec::with_capacity(self.interior_x().len() * self.interior_z().len());
        for ix in self.interior_x() {
            for iz in self.interior_z() {
                out.push(full[self.idx(ix, iz)]);
            }
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// absorbing profile
// ---------------------------------------------------------------------------

/// Quadratic absorbing-layer damping profile and the complex stretches it
/// induces at a given angular frequency.
///
/// Damping is `d(l) = d0 * (l / L)^2` with `l` the depth into the collar and
/// `d0 = 3 v_ref ln(1/R) / (2 L)`, which gives a theoretical normal-incidence
/// reflection coefficient of `R`. A derivative taken at a damped position is
/// multiplied by `1 / (1 + i d/omega)`; the underlying stretch `1 + i d/omega`
/// has modulus >= 1 in the collar and equals 1 in the interior.
#[derive(Debug, Clone)]
pub struct PmlProfile {
    omega: f64,
    d_x_node: Vec<f64>,
    d_x_face: Vec<f64>,
    d_z_node: Vec<f64>,
    d_z_face: Vec<f64>,
}

/// Default theoretical reflection target for the quadratic profile.
pub const PML_REFLECTION_TARGET: f64 = 1e-3;

impl PmlProfile {
    /// Profile with the default reflection target. `v_ref` should be the
    /// fastest velocity the collar has to absorb (km/s); `omega` in rad/s.
    pub fn new(grid: &Grid, omega: f64, v_ref: f64) -> Result<Self> {
        Self::with_reflection_target(grid, omega, v_ref, PML_REFLECTION_TARGET)
    }

    pub fn with_reflection_target(
        grid: &Grid,
        omega: f64,
        v_ref: f64,
        r_target: f64,
    ) -> Result<Self> {
        if !(omega > 0.0) || !(v_ref > 0.0) || !(r_target > 0.0 && r_target < 1.0) {
            return Err(WriError::InvalidInput(format!(
                "pml: need omega > 0, v_ref > 0, 0 < R < 1; got {omega}, {v_ref}, {r_target}"
            )));
        }
        let w = grid.pml_width;
        let damp = |pos: f64, len: f64, lo_on: bool, hi_on: bool, span: f64| -> f64 {
            if w == 0 {
                return 0.0;
            }
            let l_phys = w as f64 * len;
            let d0 = 3.0 * v_ref * (1.0 / r_target).ln() / (2.0 * l_phys);
            let lo_edge = l_phys;
            let hi_edge = span - l_phys;
            let mut l = 0.0;
            if lo_on && pos < lo_edge {
                l = lo_edge - pos;
            } else if hi_on && pos > hi_edge {
                l = pos - hi_edge;
            }
            let frac = (l / l_phys).min(1.0);
            d0 * frac * frac
        };
        let span_x = (grid.nx - 1) as f64 * grid.dx;
        let span_z = (grid.nz - 1) as f64 * grid.dz;
        let top_on = !grid.free_surface_top;
        let d_x_node = (0..grid.nx)
            .map(|i| damp(i as f64 * grid.dx, grid.dx, true, true, span_x))
            .collect();
        let d_x_face = (0..grid.nx)
            .map(|i| damp((i as f64 + 0.5) * grid.dx, grid.dx, true, true, span_x))
            .collect();
        let d_z_node = (0..grid.nz)
            .map(|i| damp(i as f64 * grid.dz, grid.dz, top_on, true, span_z))
            .collect();
        let d_z_face = (0..grid.nz)
            .map(|i| damp((i as f64 + 0.5) * grid.dz, grid.dz, top_on, true, span_z))
            .collect();
        Ok(Self {
            omega,
            d_x_node,
            d_x_face,
            d_z_node,
            d_z_face,
        })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Derivative coefficient `1 / (1 + i d/omega)` at the requested
    /// positions of the given axis.
    pub fn stretch(&self, axis: Axis, at_faces: bool) -> Vec<Complex64> {
        let d = match (axis, at_faces) {
            (Axis::X, false) => &self.d_x_node,
            (Axis::X, true) => &self.d_x_face,
            (Axis::Z, false) => &self.d_z_node,
            (Axis::Z, true) => &self.d_z_face,
        };
        d.iter()
            .map(|&di| (Complex64::new(1.0, di / self.omega)).inv())
            .collect()
    }

    /// Raw damping samples (for tests / diagnostics).
    pub fn damping(&self, axis: Axis, at_faces: bool) -> &[f64] {
        match (axis, at_faces) {
            (Axis::X, false) => &self.d_x_node,
            (Axis::X, true) => &self.d_x_face,
            (Axis::Z, false) => &self.d_z_node,
            (Axis::Z, true) => &self.d_z_face,
        }
    }
}

// ---------------------------------------------------------------------------
// finite-difference operators
// ---------------------------------------------------------------------------

/// Unstretched forward difference `D_f` along `axis` (node -> face, 1/spacing
/// scaling, zero ghost past the high boundary), as a real matrix.
fn forward_difference_raw(grid: &Grid, axis: Axis) -> SparseMatrix<f64> {
    let n = grid.n();
    let h = match axis {
        Axis::X => grid.dx,
        Axis::Z => grid.dz,
    };
    let inv_h = 1.0 / h;
    let mut trips = Vec::with_capacity(2 * n);
    for ix in 0..grid.nx {
        for iz in 0..grid.nz {
            let r = grid.idx(ix, iz);
            trips.push((r, r, -inv_h));
            let neigh = match axis {
                Axis::X if ix + 1 < grid.nx => Some(grid.idx(ix + 1, iz)),
                Axis::Z if iz + 1 < grid.nz => Some(grid.idx(ix, iz + 1)),
                _ => None,
            };
            if let Some(c) = neigh {
                trips.push((r, c, inv_h));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &trips).expect("forward difference triplets are in range")
}

/// Staggered first difference along `axis`, optionally stretched by an
/// absorbing profile. `NodeToFace` is the forward difference evaluated at
/// faces; `FaceToNode` is `-D_f^T` evaluated at nodes. With a profile, each
/// row is scaled by the stretch at the position where the derivative lives.
pub fn first_derivative(
    grid: &Grid,
    axis: Axis,
    stagger: Stagger,
    pml: Option<&PmlProfile>,
) -> SparseMatrix<Complex64> {
    let raw = match stagger {
        Stagger::NodeToFace => forward_difference_raw(grid, axis),
        Stagger::FaceToNode => forward_difference_raw(grid, axis).transpose().scaled(-1.0),
    };
    let cx = raw.to_complex();
    match pml {
        None => cx,
        Some(profile) => {
            let s = profile.stretch(axis, stagger == Stagger::NodeToFace);
            let full: Vec<Complex64> = (0..grid.n())
                .map(|r| {
                    let (ix, iz) = grid.coords(r);
                    match axis {
                        Axis::X => s[ix],
                        Axis::Z => s[iz],
                    }
                })
                .collect();
            cx.left_scaled(&full)
        }
    }
}

/// Second derivative along `axis`: the explicit sparse product of the
/// face->node and node->face first differences. Under a free-surface top the
/// z-operator has its top grid row eliminated symmetrically (Dirichlet
/// pressure: row and column zeroed, Dirichlet diagonal kept).
pub fn second_derivative(
    grid: &Grid,
    axis: Axis,
    pml: Option<&PmlProfile>,
) -> SparseMatrix<Complex64> {
    let df = first_derivative(grid, axis, Stagger::NodeToFace, pml);
    let db = first_derivative(grid, axis, Stagger::FaceToNode, pml);
    let dd = db.matmul(&df).expect("staggered pair is conformable");
    if axis == Axis::Z && grid.free_surface_top {
        apply_dirichlet_top(grid, &dd)
    } else {
        dd
    }
}

/// Symmetric Dirichlet elimination of the top grid row: zero every entry in a
/// top-row row or column, put the Dirichlet diagonal `-2/dz^2` on the row.
pub(crate) fn apply_dirichlet_top(
    grid: &Grid,
    m: &SparseMatrix<Complex64>,
) -> SparseMatrix<Complex64> {
    let diag = Complex64::new(-2.0 / (grid.dz * grid.dz), 0.0);
    let is_top = |r: usize| -> bool { grid.coords(r).1 == 0 };
    let mut trips: Vec<(usize, usize, Complex64)> = Vec::with_capacity(m.nnz() + grid.nx);
    for i in 0..m.nrows() {
        if is_top(i) {
            continue;
        }
        let (cols, vals) = m.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if !is_top(j) {
                trips.push((i, j, v));
            }
        }
    }
    for ix in 0..grid.nx {
        trips.push((grid.idx(ix, 0), grid.idx(ix, 0), diag));
    }
    SparseMatrix::from_triplets(m.nrows(), m.ncols(), &trips).expect("indices preserved")
}

/// Real forward-difference gradient for regularisation along `axis` with
/// replicated-edge closure: interior rows are `(f[i+1] - f[i]) / h`, rows at
/// the high edge are identically zero (the replicated neighbour cancels).
pub fn tv_gradient(grid: &Grid, axis: Axis) -> SparseMatrix<f64> {
    let n = grid.n();
    let h = match axis {
        Axis::X => grid.dx,
        Axis::Z => grid.dz,
    };
    let inv_h = 1.0 / h;
    let mut trips = Vec::with_capacity(2 * n);
    for ix in 0..grid.nx {
        for iz in 0..grid.nz {
            let r = grid.idx(ix, iz);
            let neigh = match axis {
                Axis::X if ix + 1 < grid.nx => Some(grid.idx(ix + 1, iz)),
                Axis::Z if iz + 1 < grid.nz => Some(grid.idx(ix, iz + 1)),
                _ => None,
            };
            if let Some(c) = neigh {
                trips.push((r, r, -inv_h));
                trips.push((r, c, inv_h));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &trips).expect("tv gradient triplets are in range")
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-14;

    fn small_grid() -> Grid {
        Grid::new(8, 6, 0.02, 0.02, 0, false).unwrap()
    }

    fn pml_grid() -> Grid {
        Grid::with_interior(6, 6, 0.02, 0.02, 3, false).unwrap()
    }

    #[test]
    fn grid_rejects_oversized_collar() {
        assert!(Grid::new(8, 8, 0.01, 0.01, 4, false).is_err());
        assert!(Grid::new(9, 9, 0.01, 0.01, 4, false).is_ok());
    }

    #[test]
    fn interior_padding_round_trips() {
        let g = pml_grid();
        let interior: Vec<f64> = (0..36).map(|i| i as f64).collect();
        let full = g.pad_from_interior(&interior).unwrap();
        assert_eq!(full.len(), g.n());
        let back = g.restrict_to_interior(&full).unwrap();
        assert_eq!(back, interior);
        // collar replicates the nearest interior value
        let corner = full[g.idx(0, 0)];
        assert_eq!(corner, interior[0]);
    }

    #[test]
    fn forward_difference_exact_on_linear_ramp() {
        let g = small_grid();
        let a = 3.7; // slope per km
        let f: Vec<f64> = (0..g.n())
            .map(|r| {
                let (ix, _) = g.coords(r);
                a * g.x(ix)
            })
            .collect();
        let d = first_derivative(&g, Axis::X, Stagger::NodeToFace, None);
        let df = d.matvec(&crate::linalg::to_complex(&f));
        for ix in 0..g.nx - 1 {
            for iz in 0..g.nz {
                let v = df[g.idx(ix, iz)];
                assert!(
                    (v.re - a).abs() < 1e-10 && v.im.abs() < EPS,
                    "forward difference of a linear ramp must be the slope, got {v}"
                );
            }
        }
    }

    #[test]
    fn backward_difference_is_negated_transpose_of_forward() {
        let g = small_grid();
        for axis in [Axis::X, Axis::Z] {
            let df = first_derivative(&g, axis, Stagger::NodeToFace, None);
            let db = first_derivative(&g, axis, Stagger::FaceToNode, None);
            assert_eq!(db, df.transpose().scaled(Complex64::new(-1.0, 0.0)));
        }
    }

    #[test]
    fn second_derivative_equals_product_of_first_derivative_outputs() {
        let g = pml_grid();
        let pml = PmlProfile::new(&g, 2.0 * std::f64::consts::PI * 5.0, 3.0).unwrap();
        for axis in [Axis::X, Axis::Z] {
            let df = first_derivative(&g, axis, Stagger::NodeToFace, Some(&pml));
            let db = first_derivative(&g, axis, Stagger::FaceToNode, Some(&pml));
            let product = db.matmul(&df).unwrap();
            let dd = second_derivative(&g, axis, Some(&pml));
            assert_eq!(product.nnz(), dd.nnz());
            for i in 0..dd.nrows() {
                let (cols, vals) = dd.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    let p = product.get(i, j);
                    assert!(
                        (p - v).norm() <= 1e-14 * v.norm().max(1.0),
                        "entry ({i},{j}) differs: {p} vs {v}"
                    );
                }
            }
        }
    }

    #[test]
    fn second_derivative_exact_on_quadratic_interior() {
        let g = small_grid();
        let f: Vec<f64> = (0..g.n())
            .map(|r| {
                let (_, iz) = g.coords(r);
                let z = g.z(iz);
                2.5 * z * z
            })
            .collect();
        let dzz = second_derivative(&g, Axis::Z, None);
        let out = dzz.matvec(&crate::linalg::to_complex(&f));
        for ix in 0..g.nx {
            for iz in 1..g.nz - 1 {
                let v = out[g.idx(ix, iz)];
                assert!(
                    (v.re - 5.0).abs() < 1e-8,
                    "3-point stencil must be exact on quadratics, got {v} at iz={iz}"
                );
            }
        }
    }

    #[test]
    fn second_derivative_without_pml_is_symmetric() {
        let g = small_grid();
        for axis in [Axis::X, Axis::Z] {
            let dd = second_derivative(&g, axis, None);
            assert_eq!(dd, dd.transpose(), "unstretched D_b*D_f must be symmetric");
        }
    }

    #[test]
    fn pml_stretch_is_unity_in_interior_and_damped_in_collar() {
        let g = pml_grid();
        let omega = 2.0 * std::f64::consts::PI * 4.0;
        let pml = PmlProfile::new(&g, omega, 3.0).unwrap();
        let s = pml.stretch(Axis::X, false);
        for ix in 0..g.nx {
            let d = pml.damping(Axis::X, false)[ix];
            let underlying = Complex64::new(1.0, d / omega);
            assert!(
                underlying.norm() >= 1.0 - EPS,
                "underlying stretch modulus must never drop below 1"
            );
            if g.interior_x().contains(&ix) {
                assert!(
                    (s[ix] - Complex64::new(1.0, 0.0)).norm() < EPS,
                    "interior stretch must be exactly 1"
                );
            } else {
                assert!(d > 0.0, "collar node {ix} must damp");
            }
        }
        // damping grows quadratically toward the outer edge
        let d = pml.damping(Axis::X, false);
        assert!(d[0] > d[1] && d[1] > d[2], "profile must increase outward");
    }

    #[test]
    fn free_surface_blocks_top_damping_and_dirichlets_top_row() {
        let g = Grid::with_interior(6, 6, 0.02, 0.02, 3, true).unwrap();
        let omega = 2.0 * std::f64::consts::PI * 4.0;
        let pml = PmlProfile::new(&g, omega, 3.0).unwrap();
        assert_eq!(pml.damping(Axis::Z, false)[0], 0.0, "no top collar damping");
        assert!(pml.damping(Axis::Z, false)[g.nz - 1] > 0.0, "bottom still damps");

        let dzz = second_derivative(&g, Axis::Z, Some(&pml));
        let inv_h2 = 1.0 / (g.dz * g.dz);
        for ix in 0..g.nx {
            let r = g.idx(ix, 0);
            let (cols, vals) = dzz.row(r);
            assert_eq!(cols, &[r], "top row couples to nothing but itself");
            assert!((vals[0] - Complex64::new(-2.0 * inv_h2, 0.0)).norm() < EPS);
            // the row below must see the zero boundary value, not the top node
            let r1 = g.idx(ix, 1);
            assert_eq!(dzz.get(r1, r), Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn tv_gradient_rows_sum_to_zero_and_scale_steps() {
        let g = small_grid();
        for axis in [Axis::X, Axis::Z] {
            let t = tv_gradient(&g, axis);
            for i in 0..t.nrows() {
                let (_, vals) = t.row(i);
                let sum: f64 = vals.iter().sum();
                assert!(sum.abs() < EPS, "row {i} sums to {sum}");
            }
        }
        // single-cell step of height h along x -> one nonzero of h/dx per
        // affected row
        let h = 0.37;
        let step_ix = 3;
        let f: Vec<f64> = (0..g.n())
            .map(|r| {
                let (ix, _) = g.coords(r);
                if ix > step_ix {
                    h
                } else {
                    0.0
                }
            })
            .collect();
        let gx = tv_gradient(&g, Axis::X).matvec(&f);
        for r in 0..g.n() {
            let (ix, _) = g.coords(r);
            let expect = if ix == step_ix { h / g.dx } else { 0.0 };
            assert!(
                (gx[r] - expect).abs() < 1e-12,
                "step gradient at ix={ix}: {} vs {expect}",
                gx[r]
            );
        }
    }

    #[test]
    fn snap_reports_movement() {
        let g = pml_grid();
        let (ix, iz, moved) = g.snap(0.04, 0.02);
        assert_eq!((ix, iz), (g.pml_width + 2, g.pml_width + 1));
        assert!(!moved);
        let (_, _, moved) = g.snap(0.043, 0.02);
        assert!(moved, "off-node position must be flagged as snapped");
    }
}
