//! VTI acoustic medium parametrisations, bounds, and model file I/O.
//!
//! Three equivalent descriptions of the medium are used:
//! - **physical**: vertical velocity `v0` (km/s) and the Thomsen parameters
//!   `epsilon`, `delta` (dimensionless) — the units experiments and plots use;
//! - **inversion**: `m_v0 = 1/v0^2`, `m_eps = 1 + 2 eps`,
//!   `m_delta = sqrt(1 + 2 delta)` — the parametrisation in which the wave
//!   operator is linear per class and the optimisation runs;
//! - **stiffness/compliance**: `c11 = v0^2 (1+2 eps)`, `c13 = v0^2 sqrt(1+2 delta)`,
//!   `c33 = v0^2` with buoyancy `b`, and the per-cell inverse `s_ij` — used by
//!   the first-order and compliance-form operator assemblies.
//!
//! A model field is stored cell-fast in grid order (`ix * nz + iz`); stacked
//! multi-class vectors are class-major (all cells of the first active class,
//! then the next).

use std::io::{Read, Write};
use std::path::Path;

use crate::mesh::Grid;
use crate::{Result, WriError};

/// Relative determinant threshold below which the per-cell stiffness tensor
/// is treated as numerically singular when inverting to compliance.
const COMPLIANCE_DET_REL_TOL: f64 = 1e-12;

/// One parameter class of the VTI model, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ModelClass {
    V0,
    Eps,
    Delta,
}

impl ModelClass {
    pub const ALL: [ModelClass; 3] = [ModelClass::V0, ModelClass::Eps, ModelClass::Delta];

    pub fn name(self) -> &'static str {
        match self {
            ModelClass::V0 => "v0",
            ModelClass::Eps => "eps",
            ModelClass::Delta => "delta",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "v0" | "v" => Ok(ModelClass::V0),
            "eps" | "epsilon" => Ok(ModelClass::Eps),
            "delta" => Ok(ModelClass::Delta),
            other => Err(WriError::InvalidInput(format!(
                "unknown model class '{other}' (expected v0, eps, delta)"
            ))),
        }
    }
}

/// Ordered set of classes being inverted for (the rest stay passive).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSet(Vec<ModelClass>);

impl ActiveSet {
    /// Build from a list of classes; duplicates collapse, order is canonical.
    pub fn new(classes: &[ModelClass]) -> Result<Self> {
        let mut v: Vec<ModelClass> = ModelClass::ALL
            .iter()
            .copied()
            .filter(|c| classes.contains(c))
            .collect();
        if v.is_empty() {
            return Err(WriError::InvalidInput(
                "active set must contain at least one class".into(),
            ));
        }
        v.dedup();
        Ok(Self(v))
    }

    pub fn all() -> Self {
        Self(ModelClass::ALL.to_vec())
    }

    pub fn classes(&self) -> &[ModelClass] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees at least one class
    }

    pub fn contains(&self, c: ModelClass) -> bool {
        self.0.contains(&c)
    }

    /// Position of a class within the stacked vector, if active.
    pub fn position(&self, c: ModelClass) -> Option<usize> {
        self.0.iter().position(|&x| x == c)
    }
}

/// Physical description: `v0` km/s, Thomsen `eps`, `delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalModel {
    pub v0: Vec<f64>,
    pub eps: Vec<f64>,
    pub delta: Vec<f64>,
}

/// Inversion description: `m_v0 = 1/v0^2`, `m_eps = 1+2eps`,
/// `m_delta = sqrt(1+2delta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InversionModel {
    pub m_v0: Vec<f64>,
    pub m_eps: Vec<f64>,
    pub m_delta: Vec<f64>,
}

/// Stiffness description used by the first-order assemblies.
#[derive(Debug, Clone, PartialEq)]
pub struct StiffnessModel {
    pub c11: Vec<f64>,
    pub c13: Vec<f64>,
    pub c33: Vec<f64>,
    /// Buoyancy (1/density); constant 1 unless a density model is supplied.
    pub b: Vec<f64>,
}

/// Compliance description (per-cell inverse of the stiffness 2x2).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplianceModel {
    pub s11: Vec<f64>,
    pub s13: Vec<f64>,
    pub s33: Vec<f64>,
    pub b: Vec<f64>,
}

impl PhysicalModel {
    /// Homogeneous model.
    pub fn constant(n: usize, v0: f64, eps: f64, delta: f64) -> Self {
        Self {
            v0: vec![v0; n],
            eps: vec![eps; n],
            delta: vec![delta; n],
        }
    }

    pub fn len(&self) -> usize {
        self.v0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v0.is_empty()
    }

    fn check_consistent(&self) -> Result<()> {
        if self.eps.len() != self.v0.len() || self.delta.len() != self.v0.len() {
            return Err(WriError::DimensionMismatch {
                op: "PhysicalModel",
                expected: format!("{} cells in every class", self.v0.len()),
                got: format!("eps {}, delta {}", self.eps.len(), self.delta.len()),
            });
        }
        Ok(())
    }

    /// Convert to the inversion parametrisation. Rejects non-physical cells
    /// (`v0 <= 0`, `1 + 2 eps <= 0`, `1 + 2 delta < 0`).
    pub fn to_inversion(&self) -> Result<InversionModel> {
        self.check_consistent()?;
        let mut m = InversionModel {
            m_v0: Vec::with_capacity(self.len()),
            m_eps: Vec::with_capacity(self.len()),
            m_delta: Vec::with_capacity(self.len()),
        };
        for i in 0..self.len() {
            let (v, e, d) = (self.v0[i], self.eps[i], self.delta[i]);
            if !(v > 0.0) {
                return Err(WriError::InvalidInput(format!(
                    "cell {i}: v0 = {v} must be positive"
                )));
            }
            if !(1.0 + 2.0 * e > 0.0) {
                return Err(WriError::InvalidInput(format!(
                    "cell {i}: 1 + 2*eps = {} must be positive",
                    1.0 + 2.0 * e
                )));
            }
            if 1.0 + 2.0 * d < 0.0 {
                return Err(WriError::InvalidInput(format!(
                    "cell {i}: 1 + 2*delta = {} must be nonnegative",
                    1.0 + 2.0 * d
                )));
            }
            m.m_v0.push(1.0 / (v * v));
            m.m_eps.push(1.0 + 2.0 * e);
            m.m_delta.push((1.0 + 2.0 * d).sqrt());
        }
        Ok(m)
    }

    /// Stiffness coefficients with unit buoyancy.
    pub fn to_stiffness(&self) -> Result<StiffnessModel> {
        self.check_consistent()?;
        let n = self.len();
        let mut s = StiffnessModel {
            c11: Vec::with_capacity(n),
            c13: Vec::with_capacity(n),
            c33: Vec::with_capacity(n),
            b: vec![1.0; n],
        };
        for i in 0..n {
            let v2 = self.v0[i] * self.v0[i];
            let onep2d = 1.0 + 2.0 * self.delta[i];
            if onep2d < 0.0 {
                return Err(WriError::InvalidInput(format!(
                    "cell {i}: 1 + 2*delta = {onep2d} must be nonnegative"
                )));
            }
            s.c11.push(v2 * (1.0 + 2.0 * self.eps[i]));
            s.c13.push(v2 * onep2d.sqrt());
            s.c33.push(v2);
        }
        Ok(s)
    }

    /// Compliance coefficients (inverse stiffness). Fails on cells whose
    /// stiffness 2x2 is numerically singular, e.g. the elliptic degeneracy
    /// `v0 = 1, eps = delta = 0` where `c11 c33 - c13^2 = 0`.
    pub fn to_compliance(&self) -> Result<ComplianceModel> {
        let st = self.to_stiffness()?;
        let n = st.c11.len();
        let mut cm = ComplianceModel {
            s11: Vec::with_capacity(n),
            s13: Vec::with_capacity(n),
            s33: Vec::with_capacity(n),
            b: st.b.clone(),
        };
        for i in 0..n {
            let det = st.c11[i] * st.c33[i] - st.c13[i] * st.c13[i];
            let scale = (st.c11[i] * st.c33[i]).abs().max(st.c13[i] * st.c13[i]);
            if det.abs() <= COMPLIANCE_DET_REL_TOL * scale.max(f64::MIN_POSITIVE) {
                return Err(WriError::Singular(format!(
                    "stiffness tensor at cell {i} (det = {det:.3e})"
                )));
            }
            cm.s11.push(st.c33[i] / det);
            cm.s13.push(-st.c13[i] / det);
            cm.s33.push(st.c11[i] / det);
        }
        Ok(cm)
    }
}

impl InversionModel {
    pub fn len(&self) -> usize {
        self.m_v0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m_v0.is_empty()
    }

    /// Convert back to physical units. Rejects non-physical cells
    /// (`m_v0 <= 0`, `m_eps <= 0`, `m_delta < 0`).
    pub fn to_physical(&self) -> Result<PhysicalModel> {
        let n = self.len();
        let mut p = PhysicalModel {
            v0: Vec::with_capacity(n),
            eps: Vec::with_capacity(n),
            delta: Vec::with_capacity(n),
        };
        for i in 0..n {
            let (mv, me, md) = (self.m_v0[i], self.m_eps[i], self.m_delta[i]);
            if !(mv > 0.0) {
                return Err(WriError::InvalidInput(format!(
                    "cell {i}: m_v0 = {mv} must be positive"
                )));
            }
            if !(me > 0.0) || md < 0.0 {
                return Err(WriError::InvalidInput(format!(
                    "cell {i}: m_eps = {me} must be positive, m_delta = {md} nonnegative"
                )));
            }
            p.v0.push(1.0 / mv.sqrt());
            p.eps.push(0.5 * (me - 1.0));
            p.delta.push(0.5 * (md * md - 1.0));
        }
        Ok(p)
    }

    /// Borrow one class field.
    pub fn class(&self, c: ModelClass) -> &[f64] {
        match c {
            ModelClass::V0 => &self.m_v0,
            ModelClass::Eps => &self.m_eps,
            ModelClass::Delta => &self.m_delta,
        }
    }

    pub fn class_mut(&mut self, c: ModelClass) -> &mut Vec<f64> {
        match c {
            ModelClass::V0 => &mut self.m_v0,
            ModelClass::Eps => &mut self.m_eps,
            ModelClass::Delta => &mut self.m_delta,
        }
    }

    /// Stack the active classes into one class-major vector.
    pub fn stack(&self, active: &ActiveSet) -> Vec<f64> {
        let mut out = Vec::with_capacity(active.len() * self.len());
        for &c in active.classes() {
            out.extend_from_slice(self.class(c));
        }
        out
    }

    /// Replace the active classes from a stacked vector, leaving passives.
    pub fn unstack_into(&mut self, stacked: &[f64], active: &ActiveSet) -> Result<()> {
        let n = self.len();
        if stacked.len() != n * active.len() {
            return Err(WriError::DimensionMismatch {
                op: "unstack_into",
                expected: format!("{} ({} classes x {n})", n * active.len(), active.len()),
                got: format!("{}", stacked.len()),
            });
        }
        for (k, &c) in active.classes().iter().enumerate() {
            self.class_mut(c).copy_from_slice(&stacked[k * n..(k + 1) * n]);
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// bounds
// ---------------------------------------------------------------------------

/// Physical box constraints per class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalBounds {
    pub v0: (f64, f64),
    pub eps: (f64, f64),
    pub delta: (f64, f64),
}

impl Default for PhysicalBounds {
    /// Defaults wide enough for the sedimentary experiments:
    /// v0 in [1.4, 6.0] km/s, eps and delta in [0, 0.3].
    fn default() -> Self {
        Self {
            v0: (1.4, 6.0),
            eps: (0.0, 0.3),
            delta: (0.0, 0.3),
        }
    }
}

impl PhysicalBounds {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("v0", self.v0), ("eps", self.eps), ("delta", self.delta)] {
            if !(lo < hi) {
                return Err(WriError::InvalidInput(format!(
                    "bounds for {name}: lower {lo} must be below upper {hi}"
                )));
            }
        }
        if !(self.v0.0 > 0.0) {
            return Err(WriError::InvalidInput(
                "bounds: v0 lower bound must be positive".into(),
            ));
        }
        if 1.0 + 2.0 * self.eps.0 <= 0.0 || 1.0 + 2.0 * self.delta.0 < 0.0 {
            return Err(WriError::InvalidInput(
                "bounds: eps/delta lower bounds are non-physical".into(),
            ));
        }
        Ok(())
    }

    /// Map to inversion-space bounds `(lower, upper)` per class. The `v0`
    /// map is decreasing, so its bounds swap: `m_v0` in
    /// `[1/v_hi^2, 1/v_lo^2]`.
    pub fn inversion_bounds(&self, c: ModelClass) -> (f64, f64) {
        match c {
            ModelClass::V0 => (1.0 / (self.v0.1 * self.v0.1), 1.0 / (self.v0.0 * self.v0.0)),
            ModelClass::Eps => (1.0 + 2.0 * self.eps.0, 1.0 + 2.0 * self.eps.1),
            ModelClass::Delta => (
                (1.0 + 2.0 * self.delta.0).sqrt(),
                (1.0 + 2.0 * self.delta.1).sqrt(),
            ),
        }
    }

    /// Stacked inversion-space bound vectors for an active set over `n` cells.
    pub fn stacked(&self, active: &ActiveSet, n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut lo = Vec::with_capacity(active.len() * n);
        let mut hi = Vec::with_capacity(active.len() * n);
        for &c in active.classes() {
            let (l, h) = self.inversion_bounds(c);
            lo.extend(std::iter::repeat(l).take(n));
            hi.extend(std::iter::repeat(h).take(n));
        }
        (lo, hi)
    }
}

// ---------------------------------------------------------------------------
// model file I/O
// ---------------------------------------------------------------------------

/// Write one model field as flat little-endian f64 binary plus a structured
/// text header (`<path>.meta`) recording grid shape, spacing, name and units.
pub fn write_field(
    path: &Path,
    grid: &Grid,
    field: &str,
    units: &str,
    data: &[f64],
) -> Result<()> {
    if data.len() != grid.n() {
        return Err(WriError::DimensionMismatch {
            op: "write_field",
            expected: format!("{}", grid.n()),
            got: format!("{}", data.len()),
        });
    }
    let mut bytes = Vec::with_capacity(8 * data.len());
    for &v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::File::create(path)?.write_all(&bytes)?;
    let meta = format!(
        "nx = {}\nnz = {}\ndx = {}\ndz = {}\nfield = {}\nunits = {}\n",
        grid.nx, grid.nz, grid.dx, grid.dz, field, units
    );
    std::fs::write(meta_path(path), meta)?;
    Ok(())
}

/// Read a field written by [`write_field`]; checks the header against the
/// grid and returns `(field_name, units, data)`.
pub fn read_field(path: &Path, grid: &Grid) -> Result<(String, String, Vec<f64>)> {
    let meta_file = meta_path(path);
    let text = std::fs::read_to_string(&meta_file)?;
    let mut nx = None;
    let mut nz = None;
    let mut dx = None;
    let mut dz = None;
    let mut field = None;
    let mut units = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| WriError::MalformedFile {
            path: meta_file.display().to_string(),
            reason: format!("line {} is not 'key = value'", lineno + 1),
        })?;
        let (k, v) = (k.trim(), v.trim());
        let parse_num = |v: &str| -> Result<f64> {
            v.parse().map_err(|_| WriError::MalformedFile {
                path: meta_file.display().to_string(),
                reason: format!("bad numeric value for {k}: '{v}'"),
            })
        };
        match k {
            "nx" => nx = Some(parse_num(v)? as usize),
            "nz" => nz = Some(parse_num(v)? as usize),
            "dx" => dx = Some(parse_num(v)?),
            "dz" => dz = Some(parse_num(v)?),
            "field" => field = Some(v.to_string()),
            "units" => units = Some(v.to_string()),
            other => {
                return Err(WriError::MalformedFile {
                    path: meta_file.display().to_string(),
                    reason: format!("unknown header key '{other}'"),
                })
            }
        }
    }
    let (nx, nz) = (
        nx.ok_or_else(|| missing(&meta_file, "nx"))?,
        nz.ok_or_else(|| missing(&meta_file, "nz"))?,
    );
    let (dx, dz) = (
        dx.ok_or_else(|| missing(&meta_file, "dx"))?,
        dz.ok_or_else(|| missing(&meta_file, "dz"))?,
    );
    if nx != grid.nx || nz != grid.nz {
        return Err(WriError::DimensionMismatch {
            op: "read_field",
            expected: format!("{}x{}", grid.nx, grid.nz),
            got: format!("{nx}x{nz}"),
        });
    }
    if (dx - grid.dx).abs() > 1e-12 || (dz - grid.dz).abs() > 1e-12 {
        return Err(WriError::InvalidInput(format!(
            "read_field: spacing mismatch ({dx}, {dz}) vs grid ({}, {})",
            grid.dx, grid.dz
        )));
    }
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * grid.n() {
        return Err(WriError::MalformedFile {
            path: path.display().to_string(),
            reason: format!("payload is {} bytes, expected {}", bytes.len(), 8 * grid.n()),
        });
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((
        field.ok_or_else(|| missing(&meta_file, "field"))?,
        units.ok_or_else(|| missing(&meta_file, "units"))?,
        data,
    ))
}

fn meta_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_os_string();
    os.push(".meta");
    std::path::PathBuf::from(os)
}

fn missing(path: &Path, key: &str) -> WriError {
    WriError::MalformedFile {
        path: path.display().to_string(),
        reason: format!("missing header key '{key}'"),
    }
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EPS: f64 = 1e-12;

    #[test]
    fn inversion_round_trip_on_representative_values() {
        let p = PhysicalModel {
            v0: vec![1.5, 3.0, 4.5],
            eps: vec![0.0, 0.05, 0.2],
            delta: vec![0.0, 0.05, 0.1],
        };
        let m = p.to_inversion().unwrap();
        assert!((m.m_v0[1] - 1.0 / 9.0).abs() < EPS);
        assert!((m.m_eps[2] - 1.4).abs() < EPS);
        assert!((m.m_delta[2] - 1.2f64.sqrt()).abs() < EPS);
        let back = m.to_physical().unwrap();
        for i in 0..3 {
            assert!((back.v0[i] - p.v0[i]).abs() < EPS);
            assert!((back.eps[i] - p.eps[i]).abs() < EPS);
            assert!((back.delta[i] - p.delta[i]).abs() < EPS);
        }
    }

    #[test]
    fn conversion_rejects_non_physical_cells() {
        let bad_v = PhysicalModel::constant(4, -1.0, 0.0, 0.0);
        assert!(bad_v.to_inversion().is_err());
        let bad_delta = PhysicalModel::constant(4, 2.0, 0.0, -0.75);
        assert!(bad_delta.to_inversion().is_err());
    }

    #[test]
    fn stiffness_values_match_definitions() {
        let p = PhysicalModel::constant(2, 3.0, 0.2, 0.1);
        let s = p.to_stiffness().unwrap();
        assert!((s.c33[0] - 9.0).abs() < EPS);
        assert!((s.c11[0] - 9.0 * 1.4).abs() < EPS);
        assert!((s.c13[0] - 9.0 * 1.2f64.sqrt()).abs() < EPS);
        assert_eq!(s.b[0], 1.0);
    }

    #[test]
    fn compliance_is_percell_inverse_of_stiffness() {
        let p = PhysicalModel::constant(1, 2.5, 0.15, 0.05);
        let st = p.to_stiffness().unwrap();
        let cm = p.to_compliance().unwrap();
        // C * S = I per cell
        let a = st.c11[0] * cm.s11[0] + st.c13[0] * cm.s13[0];
        let b = st.c11[0] * cm.s13[0] + st.c13[0] * cm.s33[0];
        let c = st.c13[0] * cm.s11[0] + st.c33[0] * cm.s13[0];
        let d = st.c13[0] * cm.s13[0] + st.c33[0] * cm.s33[0];
        assert!((a - 1.0).abs() < EPS && d < 1.0 + EPS && (d - 1.0).abs() < EPS);
        assert!(b.abs() < EPS && c.abs() < EPS);
    }

    #[test]
    fn compliance_rejects_elliptic_degeneracy() {
        // v0 = 1, eps = delta = 0: c11 = c33 = c13 = 1, det = 0
        let p = PhysicalModel::constant(3, 1.0, 0.0, 0.0);
        match p.to_compliance() {
            Err(WriError::Singular(_)) => {}
            other => panic!("expected a singular-tensor error, got {other:?}"),
        }
    }

    #[test]
    fn active_set_is_canonically_ordered() {
        let a = ActiveSet::new(&[ModelClass::Delta, ModelClass::V0]).unwrap();
        assert_eq!(a.classes(), &[ModelClass::V0, ModelClass::Delta]);
        assert_eq!(a.position(ModelClass::Delta), Some(1));
        assert!(ActiveSet::new(&[]).is_err());
    }

    #[test]
    fn stack_and_unstack_round_trip() {
        let p = PhysicalModel {
            v0: vec![2.0, 2.5],
            eps: vec![0.1, 0.2],
            delta: vec![0.02, 0.04],
        };
        let mut m = p.to_inversion().unwrap();
        let active = ActiveSet::new(&[ModelClass::V0, ModelClass::Delta]).unwrap();
        let stacked = m.stack(&active);
        assert_eq!(stacked.len(), 4);
        assert_eq!(stacked[0], m.m_v0[0]);
        assert_eq!(stacked[2], m.m_delta[0]);
        let eps_before = m.m_eps.clone();
        let mut stacked2 = stacked.clone();
        stacked2[1] = 0.123;
        m.unstack_into(&stacked2, &active).unwrap();
        assert_eq!(m.m_v0[1], 0.123);
        assert_eq!(m.m_eps, eps_before, "passive class must be untouched");
    }

    #[test]
    fn bounds_map_accounts_for_decreasing_v0() {
        let b = PhysicalBounds::default();
        b.validate().unwrap();
        let (lo, hi) = b.inversion_bounds(ModelClass::V0);
        assert!((lo - 1.0 / 36.0).abs() < EPS, "lower bound from fastest v");
        assert!((hi - 1.0 / 1.96).abs() < 1e-10, "upper bound from slowest v");
        assert!(lo < hi);
        let (dl, dh) = b.inversion_bounds(ModelClass::Delta);
        assert!((dl - 1.0).abs() < EPS && (dh - 1.6f64.sqrt()).abs() < EPS);
    }

    #[test]
    fn field_io_round_trips_bitwise() {
        let g = Grid::new(5, 4, 0.02, 0.025, 0, false).unwrap();
        let data: Vec<f64> = (0..g.n()).map(|i| (i as f64).sin() * 1e3).collect();
        let dir = std::env::temp_dir().join("wri_medium_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("v0.f64");
        write_field(&path, &g, "v0", "km/s", &data).unwrap();
        let (name, units, back) = read_field(&path, &g).unwrap();
        assert_eq!(name, "v0");
        assert_eq!(units, "km/s");
        assert_eq!(back.len(), data.len());
        for (a, b) in data.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits(), "payload must round-trip bitwise");
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn field_io_rejects_unknown_header_keys() {
        let g = Grid::new(2, 2, 0.01, 0.01, 0, false).unwrap();
        let dir = std::env::temp_dir().join("wri_medium_io_badkey");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("f.f64");
        write_field(&path, &g, "f", "1", &[0.0; 4]).unwrap();
        std::fs::write(
            dir.join("f.f64.meta"),
            "nx = 2\nnz = 2\ndx = 0.01\ndz = 0.01\nfield = f\nunits = 1\nbogus = 3\n",
        )
        .unwrap();
        assert!(matches!(
            read_field(&path, &g),
            Err(WriError::MalformedFile { .. })
        ));
        std::fs::remove_dir_all(&dir).ok();
    }

    proptest! {
        #[test]
        fn physical_inversion_round_trip(
            v in 1.0f64..7.0,
            e in -0.2f64..0.4,
            d in -0.2f64..0.4,
        ) {
            let p = PhysicalModel::constant(1, v, e, d);
            let m = p.to_inversion().unwrap();
            let back = m.to_physical().unwrap();
            prop_assert!((back.v0[0] - v).abs() < 1e-12 * v.max(1.0));
            prop_assert!((back.eps[0] - e).abs() < 1e-12);
            prop_assert!((back.delta[0] - d).abs() < 1e-12);
        }

        #[test]
        fn projection_never_leaves_bounds(x in -10.0f64..10.0) {
            let b = PhysicalBounds::default();
            for c in ModelClass::ALL {
                let (lo, hi) = b.inversion_bounds(c);
                let clamped = x.clamp(lo, hi);
                prop_assert!(clamped >= lo && clamped <= hi);
            }
        }
    }
}
