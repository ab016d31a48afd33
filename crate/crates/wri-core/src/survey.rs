//! Synthetic surveys: acquisition geometry, the receiver sampling operator,
//! data synthesis, calibrated noise, and the on-disk data format.
//!
//! Sources and receivers are specified in interior physical coordinates
//! (km, origin at the interior corner, z down) and snapped to grid nodes. The
//! recorded observable is the average of the two field components at a
//! receiver node, so the sampling operator is `P = [P~ / 2, P~ / 2]` with
//! `P~` a 0/1 node selection — every instrumented node contributes four
//! quarter entries to `P^T P`.
//!
//! Data files are flat little-endian binaries of interleaved re/im `f64`
//! pairs (receiver-fast, source-major, frequency blocks in order) next to a
//! structured-text manifest that pins shapes, frequencies, an FNV-1a
//! geometry digest, and — for noisy data — the exact per-frequency noise
//! norms the stopping rule needs.

use std::hash::Hasher;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use faer::Mat;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{ComplexLu, SparseMatrix};
use crate::medium::InversionModel;
use crate::mesh::{Grid, PmlProfile};
use crate::wave;
use crate::{Result, WriError};

const TAU: f64 = std::f64::consts::TAU;

/// How an acquisition was laid out. Recorded alongside the geometry so
/// experiment configs and manifests can state the survey style.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcquisitionKind {
    /// Sources and receivers walk the interior perimeter (full angular
    /// illumination of a central target).
    Surrounding,
    /// Fixed-spread surface layout: one horizontal source line and one
    /// horizontal receiver line, each at its own depth.
    SurfaceFixedSpread,
    /// Hand-placed positions.
    Custom,
}

/// Snapped acquisition geometry on the full grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Acquisition {
    /// Source nodes `(ix, iz)` on the full grid.
    pub sources: Vec<(usize, usize)>,
    /// Receiver nodes `(ix, iz)` on the full grid (duplicates allowed: a
    /// position snapped onto an already-used node keeps its own data row).
    pub receivers: Vec<(usize, usize)>,
    /// How many requested positions moved while snapping.
    pub moved: usize,
    /// Survey style this geometry was built as.
    pub kind: AcquisitionKind,
}

impl Acquisition {
    /// Snap physical positions (interior coordinates, km) to grid nodes.
    /// Every snapped node must land in the interior.
    pub fn from_positions(
        grid: &Grid,
        sources: &[(f64, f64)],
        receivers: &[(f64, f64)],
    ) -> Result<Self> {
        let mut moved = 0;
        let mut snap_all = |positions: &[(f64, f64)], what: &str| -> Result<Vec<(usize, usize)>> {
            positions
                .iter()
                .map(|&(x, z)| {
                    let (ix, iz, m) = grid.snap(x, z);
                    if m {
                        moved += 1;
                    }
                    if !grid.is_interior(ix, iz) {
                        return Err(WriError::InvalidInput(format!(
                            "{what} at ({x}, {z}) km snaps to node ({ix}, {iz}) inside the \
                             absorbing collar"
                        )));
                    }
                    Ok((ix, iz))
                })
                .collect()
        };
        let sources = snap_all(sources, "source")?;
        let receivers = snap_all(receivers, "receiver")?;
        if sources.is_empty() || receivers.is_empty() {
            return Err(WriError::InvalidInput(
                "acquisition needs at least one source and one receiver".into(),
            ));
        }
        Ok(Self {
            sources,
            receivers,
            moved,
            kind: AcquisitionKind::Custom,
        })
    }

    pub fn n_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn n_receivers(&self) -> usize {
        self.receivers.len()
    }

    /// Node selection `P~` (n_r x n, unit entries).
    pub fn sampling_scalar(&self, grid: &Grid) -> SparseMatrix<f64> {
        let trips: Vec<(usize, usize, f64)> = self
            .receivers
            .iter()
            .enumerate()
            .map(|(r, &(ix, iz))| (r, grid.idx(ix, iz), 1.0))
            .collect();
        SparseMatrix::from_triplets(self.receivers.len(), grid.n(), &trips)
            .expect("receiver nodes are on the grid")
    }

    /// Component-averaging sampling operator `P = [P~ / 2, P~ / 2]`
    /// (n_r x 2n).
    pub fn sampling(&self, grid: &Grid) -> SparseMatrix<f64> {
        let n = grid.n();
        let mut trips = Vec::with_capacity(2 * self.receivers.len());
        for (r, &(ix, iz)) in self.receivers.iter().enumerate() {
            let c = grid.idx(ix, iz);
            trips.push((r, c, 0.5));
            trips.push((r, n + c, 0.5));
        }
        SparseMatrix::from_triplets(self.receivers.len(), 2 * n, &trips)
            .expect("receiver nodes are on the grid")
    }

    /// FNV-1a digest of the snapped geometry; stored in data manifests so a
    /// data set cannot be replayed against the wrong acquisition.
    pub fn geometry_digest(&self) -> u64 {
        let mut h = fnv::FnvHasher::default();
        h.write(b"sources");
        for &(ix, iz) in &self.sources {
            h.write(&(ix as u64).to_le_bytes());
            h.write(&(iz as u64).to_le_bytes());
        }
        h.write(b"receivers");
        for &(ix, iz) in &self.receivers {
            h.write(&(ix as u64).to_le_bytes());
            h.write(&(iz as u64).to_le_bytes());
        }
        h.finish()
    }
}

/// `count` positions evenly spaced along a horizontal line at depth `z`,
/// starting at `x0` (interior coordinates, km).
pub fn line_positions(x0: f64, spacing: f64, count: usize, z: f64) -> Vec<(f64, f64)> {
    (0..count).map(|k| (x0 + k as f64 * spacing, z)).collect()
}

/// Positions around the rectangle `inset` km inside the interior boundary,
/// `per_side` of them on each side walking the loop corner to corner
/// (excluding each far corner so nothing is listed twice).
pub fn ring_positions(grid: &Grid, inset: f64, per_side: usize) -> Vec<(f64, f64)> {
    let width = (grid.interior_x().len() - 1) as f64 * grid.dx;
    let height = (grid.interior_z().len() - 1) as f64 * grid.dz;
    let (x0, x1) = (inset, width - inset);
    let (z0, z1) = (inset, height - inset);
    let mut out = Vec::with_capacity(4 * per_side);
    let lerp = |a: f64, b: f64, k: usize| a + (b - a) * k as f64 / per_side as f64;
    for k in 0..per_side {
        out.push((lerp(x0, x1, k), z0)); // top, left -> right
    }
    for k in 0..per_side {
        out.push((x1, lerp(z0, z1, k))); // right, down
    }
    for k in 0..per_side {
        out.push((lerp(x1, x0, k), z1)); // bottom, right -> left
    }
    for k in 0..per_side {
        out.push((x0, lerp(z1, z0, k))); // left, up
    }
    out
}

/// `count` positions uniformly spaced by arc length along the interior
/// boundary rectangle, walking top-left -> top-right -> bottom-right ->
/// bottom-left and back up. Counts need not divide the perimeter; one
/// position lands within a cell of every exact arc mark.
fn perimeter_positions(grid: &Grid, count: usize) -> Result<Vec<(f64, f64)>> {
    if count == 0 {
        return Err(WriError::InvalidInput(
            "a perimeter layout needs at least one position".into(),
        ));
    }
    let width = (grid.interior_x().len() - 1) as f64 * grid.dx;
    let height = (grid.interior_z().len() - 1) as f64 * grid.dz;
    if width <= 0.0 || height <= 0.0 {
        return Err(WriError::InvalidInput(
            "the interior is a single line; no perimeter to walk".into(),
        ));
    }
    let total = 2.0 * (width + height);
    Ok((0..count)
        .map(|k| {
            let mut t = total * k as f64 / count as f64;
            if t < width {
                return (t, 0.0);
            }
            t -= width;
            if t < height {
                return (width, t);
            }
            t -= height;
            if t < width {
                return (width - t, height);
            }
            (0.0, height - (t - width))
        })
        .collect())
}

/// Surrounding survey: `n_s` sources and `n_r` receivers evenly spaced along
/// the interior perimeter (full angular illumination). Counts are exact;
/// positions repeat nodes when a count exceeds the perimeter node count.
pub fn make_surrounding_acquisition(grid: &Grid, n_s: usize, n_r: usize) -> Result<Acquisition> {
    let srcs = perimeter_positions(grid, n_s)?;
    let rcvs = perimeter_positions(grid, n_r)?;
    let mut acq = Acquisition::from_positions(grid, &srcs, &rcvs)?;
    acq.kind = AcquisitionKind::Surrounding;
    Ok(acq)
}

/// Fixed-spread surface survey: one source line and one receiver line, each
/// spanning the interior width at its own spacing and depth (`depths` =
/// `(source z, receiver z)` km). Each line holds `floor(width / spacing)`
/// positions, centred in the interior.
pub fn make_surface_acquisition(
    grid: &Grid,
    source_spacing: f64,
    receiver_spacing: f64,
    depths: (f64, f64),
) -> Result<Acquisition> {
    let width = (grid.interior_x().len() - 1) as f64 * grid.dx;
    let line = |spacing: f64, z: f64, what: &str| -> Result<Vec<(f64, f64)>> {
        if !(spacing > 0.0) {
            return Err(WriError::InvalidInput(format!(
                "{what} spacing must be positive, got {spacing}"
            )));
        }
        let count = (width / spacing + 1e-9).floor() as usize;
        if count == 0 {
            return Err(WriError::InvalidInput(format!(
                "{what} spacing {spacing} km exceeds the interior width {width} km"
            )));
        }
        let span = (count - 1) as f64 * spacing;
        Ok(line_positions((width - span) / 2.0, spacing, count, z))
    };
    let srcs = line(source_spacing, depths.0, "source")?;
    let rcvs = line(receiver_spacing, depths.1, "receiver")?;
    let mut acq = Acquisition::from_positions(grid, &srcs, &rcvs)?;
    acq.kind = AcquisitionKind::SurfaceFixedSpread;
    Ok(acq)
}

// ---------------------------------------------------------------------------
// data sets
// ---------------------------------------------------------------------------

/// Multi-frequency single-component data: one n_r x n_s record per frequency.
#[derive(Debug, Clone)]
pub struct DataSet {
    pub freqs_hz: Vec<f64>,
    pub records: Vec<Mat<Complex64>>,
    /// Exact Frobenius norm of the noise added per frequency (absent for
    /// clean data); the data-fit stopping threshold is set from these.
    pub noise_norms: Option<Vec<f64>>,
}

impl DataSet {
    pub fn n_frequencies(&self) -> usize {
        self.freqs_hz.len()
    }

    pub fn n_receivers(&self) -> usize {
        self.records.first().map_or(0, |r| r.nrows())
    }

    pub fn n_sources(&self) -> usize {
        self.records.first().map_or(0, |r| r.ncols())
    }

    /// Frobenius norm of one frequency record.
    pub fn record_norm(&self, fi: usize) -> f64 {
        mat_norm(&self.records[fi])
    }

    /// Index of a frequency (within 1e-9 Hz).
    pub fn freq_index(&self, f_hz: f64) -> Option<usize> {
        self.freqs_hz.iter().position(|&f| (f - f_hz).abs() < 1e-9)
    }

    /// Add complex Gaussian noise scaled, per frequency, so the achieved
    /// signal-to-noise ratio is exactly `snr_db` (and therefore also exact
    /// over the whole set). Seeded and reproducible: each frequency derives
    /// its own stream from `seed`. `+inf` is the no-noise sentinel: the data
    /// stay untouched.
    pub fn add_noise(&mut self, snr_db: f64, seed: u64) {
        if snr_db == f64::INFINITY {
            return;
        }
        let target = 10f64.powf(-snr_db / 20.0);
        let mut norms = Vec::with_capacity(self.records.len());
        for (fi, rec) in self.records.iter_mut().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(fi as u64 + 1)));
            let noise = Mat::from_fn(rec.nrows(), rec.ncols(), |_, _| {
                Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            });
            let signal = mat_norm(rec);
            let raw = mat_norm(&noise);
            if raw == 0.0 || signal == 0.0 {
                norms.push(0.0);
                continue;
            }
            let alpha = signal * target / raw;
            for j in 0..rec.ncols() {
                for i in 0..rec.nrows() {
                    rec[(i, j)] += alpha * noise[(i, j)];
                }
            }
            norms.push(signal * target);
        }
        self.noise_norms = Some(norms);
    }

    /// Write the binary payload and its `.manifest` sidecar.
    pub fn save(&self, path: &Path, geometry_digest: u64) -> Result<()> {
        let (n_r, n_s) = (self.n_receivers(), self.n_sources());
        let mut bytes = Vec::with_capacity(16 * n_r * n_s * self.records.len());
        for rec in &self.records {
            for j in 0..n_s {
                for i in 0..n_r {
                    bytes.extend_from_slice(&rec[(i, j)].re.to_le_bytes());
                    bytes.extend_from_slice(&rec[(i, j)].im.to_le_bytes());
                }
            }
        }
        std::fs::File::create(path)?.write_all(&bytes)?;
        let mut manifest = String::new();
        manifest.push_str("format = complex_f64_interleaved\n");
        manifest.push_str(&format!("n_receivers = {n_r}\n"));
        manifest.push_str(&format!("n_sources = {n_s}\n"));
        manifest.push_str(&format!(
            "frequencies_hz = {}\n",
            join_floats(&self.freqs_hz)
        ));
        manifest.push_str(&format!("geometry_digest = {geometry_digest}\n"));
        if let Some(norms) = &self.noise_norms {
            manifest.push_str(&format!("noise_norms = {}\n", join_floats(norms)));
        }
        std::fs::write(manifest_path(path), manifest)?;
        Ok(())
    }

    /// Read a data set written by [`DataSet::save`]. When `expected_digest`
    /// is given, a mismatch is rejected before any payload is touched.
    pub fn load(path: &Path, expected_digest: Option<u64>) -> Result<Self> {
        let mpath = manifest_path(path);
        let text = std::fs::read_to_string(&mpath)?;
        let bad = |reason: String| WriError::MalformedFile {
            path: mpath.display().to_string(),
            reason,
        };
        let mut format = None;
        let mut n_r = None;
        let mut n_s = None;
        let mut freqs: Option<Vec<f64>> = None;
        let mut digest = None;
        let mut noise_norms = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("line {} is not 'key = value'", lineno + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "format" => format = Some(v.to_string()),
                "n_receivers" => n_r = Some(parse_usize(v).map_err(&bad)?),
                "n_sources" => n_s = Some(parse_usize(v).map_err(&bad)?),
                "frequencies_hz" => freqs = Some(parse_floats(v).map_err(&bad)?),
                "geometry_digest" => {
                    digest = Some(v.parse::<u64>().map_err(|_| bad(format!("bad digest '{v}'")))?)
                }
                "noise_norms" => noise_norms = Some(parse_floats(v).map_err(&bad)?),
                other => return Err(bad(format!("unknown manifest key '{other}'"))),
            }
        }
        match format.as_deref() {
            Some("complex_f64_interleaved") => {}
            other => {
                return Err(bad(format!(
                    "unsupported format {other:?} (expected complex_f64_interleaved)"
                )))
            }
        }
        let n_r = n_r.ok_or_else(|| bad("missing n_receivers".into()))?;
        let n_s = n_s.ok_or_else(|| bad("missing n_sources".into()))?;
        let freqs = freqs.ok_or_else(|| bad("missing frequencies_hz".into()))?;
        let digest = digest.ok_or_else(|| bad("missing geometry_digest".into()))?;
        if let Some(want) = expected_digest {
            if digest != want {
                return Err(WriError::MalformedFile {
                    path: mpath.display().to_string(),
                    reason: format!(
                        "geometry digest {digest} does not match the acquisition ({want})"
                    ),
                });
            }
        }
        if let Some(norms) = &noise_norms {
            if norms.len() != freqs.len() {
                return Err(bad(format!(
                    "{} noise norms for {} frequencies",
                    norms.len(),
                    freqs.len()
                )));
            }
        }
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let expect = 16 * n_r * n_s * freqs.len();
        if bytes.len() != expect {
            return Err(WriError::MalformedFile {
                path: path.display().to_string(),
                reason: format!("payload is {} bytes, expected {expect}", bytes.len()),
            });
        }
        let mut records = Vec::with_capacity(freqs.len());
        let mut off = 0;
        let read_f64 = |bytes: &[u8], off: usize| -> f64 {
            f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap())
        };
        for _ in 0..freqs.len() {
            let mut rec = Mat::zeros(n_r, n_s);
            for j in 0..n_s {
                for i in 0..n_r {
                    let re = read_f64(&bytes, off);
                    let im = read_f64(&bytes, off + 8);
                    rec[(i, j)] = Complex64::new(re, im);
                    off += 16;
                }
            }
            records.push(rec);
        }
        Ok(Self {
            freqs_hz: freqs,
            records,
            noise_norms,
        })
    }
}

fn manifest_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_os_string();
    os.push(".manifest");
    PathBuf::from(os)
}

fn join_floats(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:?}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_usize(v: &str) -> std::result::Result<usize, String> {
    v.parse().map_err(|_| format!("bad integer '{v}'"))
}

fn parse_floats(v: &str) -> std::result::Result<Vec<f64>, String> {
    v.split_whitespace()
        .map(|t| t.parse().map_err(|_| format!("bad float '{t}'")))
        .collect()
}

pub fn mat_norm(m: &Mat<Complex64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += m[(i, j)].norm_sqr();
        }
    }
    acc.sqrt()
}

/// Apply a real sampling operator to a column block of stacked fields.
pub fn sample_columns(p: &SparseMatrix<f64>, u: &Mat<Complex64>) -> Mat<Complex64> {
    let pc = p.to_complex();
    let mut out = Mat::zeros(p.nrows(), u.ncols());
    for j in 0..u.ncols() {
        let col: Vec<Complex64> = (0..u.nrows()).map(|i| u[(i, j)]).collect();
        let y = pc.matvec(&col);
        for i in 0..p.nrows() {
            out[(i, j)] = y[i];
        }
    }
    out
}

// ---------------------------------------------------------------------------
// synthesis
// ---------------------------------------------------------------------------

/// Source matrix for one frequency: a `2n x n_s` block of unit point sources
/// scaled by `omega^2` on both components.
pub fn source_block(grid: &Grid, acq: &Acquisition, omega: f64) -> Mat<Complex64> {
    let n = grid.n();
    let amp = Complex64::new(omega * omega, 0.0);
    let mut b = Mat::zeros(2 * n, acq.n_sources());
    for (j, &(ix, iz)) in acq.sources.iter().enumerate() {
        let k = grid.idx(ix, iz);
        b[(k, j)] = amp;
        b[(n + k, j)] = amp;
    }
    b
}

/// Forward-model a survey: solve the second-order system per frequency for
/// all sources and sample at the receivers. `v_ref` for the absorbing collar
/// is the fastest velocity in the model.
pub fn synthesize(
    grid: &Grid,
    model: &InversionModel,
    acq: &Acquisition,
    freqs_hz: &[f64],
) -> Result<DataSet> {
    if freqs_hz.is_empty() {
        return Err(WriError::InvalidInput("no frequencies to synthesise".into()));
    }
    let v_ref = reference_velocity(model)?;
    let p = acq.sampling(grid);
    let mut records = Vec::with_capacity(freqs_hz.len());
    for &f in freqs_hz {
        let omega = TAU * f;
        let pml = PmlProfile::new(grid, omega, v_ref)?;
        let a = wave::second_order(grid, model, &pml)?;
        let lu = ComplexLu::new(&a)?;
        let u = lu.solve_mat(&source_block(grid, acq, omega));
        records.push(sample_columns(&p, &u));
    }
    Ok(DataSet {
        freqs_hz: freqs_hz.to_vec(),
        records,
        noise_norms: None,
    })
}

/// Fastest velocity in the model (used as the absorbing-collar reference).
pub fn reference_velocity(model: &InversionModel) -> Result<f64> {
    let min_m = model
        .m_v0
        .iter()
        .fold(f64::INFINITY, |acc, &v| acc.min(v));
    if !(min_m > 0.0) {
        return Err(WriError::InvalidInput(format!(
            "model has non-positive m_v0 (min {min_m})"
        )));
    }
    Ok(1.0 / min_m.sqrt())
}

// ---------------------------------------------------------------------------
