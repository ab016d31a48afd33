//! Iteratively refined wavefield reconstruction with bound constraints and
//! total-variation regularisation.
//!
//! One iteration of the scheme, at fixed penalty weights:
//!
//! 1. **wavefields** — per frequency, solve the relaxed problem
//!    `[P^T P / lambda + A^H A] U = P^H (D + D~) / lambda + A^H (S + S~)`;
//!    only the penalty ratio `lambda = lambda1/lambda0` enters
//!    ([`reconstruct_wavefields`]);
//! 2. **model** — minimise over the active classes the quadratic
//!    `lambda1 sum_l ||L_l m - (y_l + duals)||^2
//!    + sum_i gamma_i ||Gbar m_i - (p_i + p~_i)||^2
//!    + sum_i zeta_i ||m_i - (q_i + q~_i)||^2` via the diagonal-block normal
//!    accumulation ([`estimate_model`]);
//! 3. **TV split** — per class, `p = prox(z)` with `z = Gbar m - p~`: the
//!    isotropic shrinkage `p = z max(1 - 1/(gamma |z|), 0)` ([`tv_prox`]);
//! 4. **bounds split** — `q = clamp(m - q~)` ([`project_bounds`]);
//! 5. **duals** — running sums of the constraint violations:
//!    `S~ += S - A(m) U`, `D~ += D - P U`, `p~ += p - Gbar m`, `q~ += q - m`;
//! 6. **stop** — when both `||A U - S||_F` and `||P U - D||_F` fall under
//!    their thresholds, or at the iteration cap.
//!
//! Hyper-parameters follow the percentage rules: at each iteration
//! `theta_i = 2% max_cells |Gbar m - p~|` per class sets `gamma_i = zeta_i =
//! theta_i` (TV mode) or `gamma_i = 0, zeta_i = theta_i` (bound-only mode);
//! `lambda1` is set at the first iteration of each batch to 10% of the mean
//! absolute diagonal of the accumulated normal matrix; `lambda` is tuned per
//! batch from the largest eigenvalue of `A^-H P^T P A^-1` by seeded power
//! iteration. Duals reset at every batch, and batches walk each frequency
//! path with one-frequency overlap.

use faer::Mat;
use num_complex::Complex64;

use crate::bilinear::{accumulate_normal, NormalBlocks};
use crate::linalg::{max_eigenvalue, ComplexLu, PowerIteration, RealFactor, SparseMatrix};
use crate::medium::{ActiveSet, InversionModel, ModelClass, PhysicalBounds};
use crate::mesh::{self, Axis, Grid, PmlProfile};
use crate::survey::{mat_norm, sample_columns, source_block, Acquisition, DataSet};
use crate::wave;
use crate::{Result, WriError};

const TAU: f64 = std::f64::consts::TAU;

/// How the wavefield step is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Step1Engine {
    /// Direct factorisation of the 2n x 2n penalty normal system — the
    /// minimiser of the full relaxed objective.
    #[default]
    NormalDirect,
    /// Eliminate `u_z` through the exact row combination and solve the
    /// n x n fourth-order reduction, carrying the data rows through the
    /// elimination. Coincides with the full solve on consistent data and
    /// is about four times cheaper to factor; on inconsistent right-hand
    /// sides it weights the row combination instead of the two residual
    /// rows independently.
    FourthOrder,
}

/// Regularisation mode of the model step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Regularization {
    /// Bound constraints only (`gamma = 0`, damping-style).
    Bounds,
    /// Bound constraints plus isotropic total variation.
    #[default]
    BoundsTv,
}

/// Penalty and hyper-parameter rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyConfig {
    /// `lambda1 = lambda1_pct * mean |diag(sum L^H L)|`, set at the first
    /// iteration of each batch.
    pub lambda1_pct: f64,
    /// `lambda = ratio_fraction * xi_max` with `xi_max` the power-iteration
    /// estimate (use ~1e-2 for clean data, ~1e0 for noisy data).
    pub ratio_fraction: f64,
    /// Multiplicative growth of `lambda1` per iteration (1 = constant).
    pub lambda1_growth: f64,
    /// Fraction of `max |Gbar m - p~|` used for `theta` (the 2% rule).
    pub theta_percent: f64,
    /// Weight multiplier for the optional epsilon prior (`10 zeta_eps`).
    pub eps_prior_weight: f64,
    /// Seed for the power-iteration start vector.
    pub power_seed: u64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            lambda1_pct: 0.1,
            ratio_fraction: 1e-2,
            lambda1_growth: 1.0,
            theta_percent: 0.02,
            eps_prior_weight: 10.0,
            power_seed: 0x5eed,
        }
    }
}

/// Iteration cap and convergence thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub max_iterations: usize,
    /// Threshold on `||A U - S||_F` over the batch.
    pub eps_bilinear: f64,
    /// Threshold on `||P U - D||_F` over the batch (clean data); with noisy
    /// data the recorded batch noise level takes over when larger.
    pub eps_data: f64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            max_iterations: 15,
            eps_bilinear: 1e-3,
            eps_data: 1e-5,
        }
    }
}

/// Full configuration of a reconstruction run.
#[derive(Debug, Clone)]
pub struct InversionConfig {
    pub active: ActiveSet,
    pub regularization: Regularization,
    pub engine: Step1Engine,
    pub penalty: PenaltyConfig,
    pub stop: StopRule,
    pub bounds: PhysicalBounds,
    /// Optional prior for `m_eps` (inversion units), weighted by
    /// `eps_prior_weight * zeta_eps` in the model step.
    pub eps_prior: Option<Vec<f64>>,
}

impl InversionConfig {
    pub fn new(active: ActiveSet) -> Self {
        Self {
            active,
            regularization: Regularization::default(),
            engine: Step1Engine::default(),
            penalty: PenaltyConfig::default(),
            stop: StopRule::default(),
            bounds: PhysicalBounds::default(),
            eps_prior: None,
        }
    }
}

/// One logged iteration.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub batch: usize,
    pub iteration: usize,
    pub freqs_hz: Vec<f64>,
    pub lambda: f64,
    pub lambda1: f64,
    /// `theta` per active class, canonical order.
    pub theta: Vec<f64>,
    pub bilinear_residual: f64,
    pub data_residual: f64,
    /// First-order optimality of the wavefield step: worst relative normal
    /// residual over the batch frequencies.
    pub step1_rel_residual: f64,
    /// First-order optimality of the model step (relative normal residual).
    pub step2_rel_residual: f64,
    pub converged: bool,
}

/// Split the ordered frequencies of one path into batches of `size` with
/// `overlap` shared frequencies between consecutive batches.
pub fn frequency_batches(freqs: &[f64], size: usize, overlap: usize) -> Vec<Vec<f64>> {
    assert!(size > 0 && overlap < size, "need 0 <= overlap < size");
    if freqs.is_empty() {
        return Vec::new();
    }
    if freqs.len() <= size {
        return vec![freqs.to_vec()];
    }
    let step = size - overlap;
    let mut out = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + size).min(freqs.len());
        out.push(freqs[start..end].to_vec());
        if end == freqs.len() {
            break;
        }
        start += step;
    }
    out
}

/// Frequencies of one continuation path: `start, start + spacing, ...` up to
/// and including `stop` (within rounding).
pub fn path_frequencies(start_hz: f64, stop_hz: f64, spacing_hz: f64) -> Vec<f64> {
    assert!(spacing_hz > 0.0 && stop_hz >= start_hz);
    let count = ((stop_hz - start_hz) / spacing_hz + 1.5).floor() as usize;
    (0..count)
        .map(|i| start_hz + i as f64 * spacing_hz)
        .filter(|&f| f <= stop_hz + 1e-9)
        .collect()
}

/// The default three-path continuation schedule (Hz ranges).
pub const DEFAULT_PATHS: [(f64, f64); 3] = [(3.0, 6.0), (4.0, 8.5), (6.0, 15.0)];

/// Isotropic shrinkage: per cell, `p = z max(1 - 1/(gamma r), 0)` with
/// `r = sqrt(zx^2 + zz^2)` — the closed-form minimiser of
/// `(1/gamma) sum_cells |p| + 1/2 ||p - z||^2` over paired gradient fields.
pub fn tv_prox(zx: &[f64], zz: &[f64], gamma: f64) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(zx.len(), zz.len());
    let n = zx.len();
    if gamma <= 0.0 {
        return (vec![0.0; n], vec![0.0; n]);
    }
    let mut px = vec![0.0; n];
    let mut pz = vec![0.0; n];
    for i in 0..n {
        let r = zx[i].hypot(zz[i]);
        if gamma * r > 1.0 {
            let xi = 1.0 - 1.0 / (gamma * r);
            px[i] = xi * zx[i];
            pz[i] = xi * zz[i];
        }
    }
    (px, pz)
}

/// Element-wise projection onto `[lo, hi]`.
pub fn project_bounds(x: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(lo.iter().zip(hi))
        .map(|(&v, (&l, &h))| v.clamp(l, h))
        .collect()
}

// ---------------------------------------------------------------------------
// step 1: wavefield reconstruction
// ---------------------------------------------------------------------------

/// Result of one relaxed wavefield solve.
pub struct WavefieldSolution {
    /// Full fields, `2n x n_s` (the reduced engine recovers `u_z`).
    pub u: Mat<Complex64>,
    /// Relative normal-equation residual of the engine's own quadratic —
    /// the first-order optimality measure of the step.
    pub rel_residual: f64,
}

/// Solve the relaxed wavefield problem for one frequency:
/// minimise `||P u - d_total||^2 / lambda + ||A(m) u - s_total||^2` per
/// source column. `d_total`/`s_total` carry the duals (`D + D~`, `S + S~`).
/// An infinite `lambda` drops the data term: `u = A^-1 s_total` exactly.
pub fn reconstruct_wavefields(
    grid: &Grid,
    model: &InversionModel,
    pml: &PmlProfile,
    acq: &Acquisition,
    d_total: &Mat<Complex64>,
    s_total: &Mat<Complex64>,
    lambda: f64,
    engine: Step1Engine,
) -> Result<WavefieldSolution> {
    let n = grid.n();
    if s_total.nrows() != 2 * n || d_total.ncols() != s_total.ncols() {
        return Err(WriError::DimensionMismatch {
            op: "reconstruct_wavefields",
            expected: format!("sources 2n x n_s = {} x {}", 2 * n, d_total.ncols()),
            got: format!("{} x {}", s_total.nrows(), s_total.ncols()),
        });
    }
    if !(lambda > 0.0) {
        return Err(WriError::InvalidInput(format!(
            "penalty ratio must be positive, got {lambda}"
        )));
    }
    match engine {
        Step1Engine::NormalDirect => {
            let a = wave::second_order(grid, model, pml)?;
            if !lambda.is_finite() {
                let lu = ComplexLu::new(&a)?;
                let u = lu.solve_mat(s_total);
                let res = relative_normal_residual(&a, &u, s_total);
                return Ok(WavefieldSolution {
                    u,
                    rel_residual: res,
                });
            }
            let inv_l = Complex64::new(1.0 / lambda, 0.0);
            let p = acq.sampling(grid).to_complex();
            let ptp = p.adjoint().matmul(&p)?;
            let k = a.adjoint().matmul(&a)?.add(&ptp.scaled(inv_l))?;
            let mut rhs = sp_mul_mat_adjoint(&a, s_total);
            let pd = sp_mul_mat_adjoint(&p, d_total);
            for j in 0..rhs.ncols() {
                for i in 0..rhs.nrows() {
                    rhs[(i, j)] += inv_l * pd[(i, j)];
                }
            }
            let lu = ComplexLu::new(&k)?;
            let u = lu.solve_mat(&rhs);
            let res = relative_normal_residual(&k, &u, &rhs);
            Ok(WavefieldSolution {
                u,
                rel_residual: res,
            })
        }
        Step1Engine::FourthOrder => {
            let red = wave::reduced_fourth_order(grid, model, pml)?;
            let n_s = s_total.ncols();
            // reduce the right-hand sides column by column
            let mut b_red = Mat::zeros(n, n_s);
            let mut b_z = Mat::zeros(n, n_s);
            for j in 0..n_s {
                let col: Vec<Complex64> = (0..2 * n).map(|i| s_total[(i, j)]).collect();
                let rr = red.reduce_rhs(&col)?;
                for i in 0..n {
                    b_red[(i, j)] = rr.rhs[i];
                    b_z[(i, j)] = rr.b_z[i];
                }
            }
            let recover = |ux: &Mat<Complex64>| -> Mat<Complex64> {
                let mut u = Mat::zeros(2 * n, n_s);
                for j in 0..n_s {
                    let ux_col: Vec<Complex64> = (0..n).map(|i| ux[(i, j)]).collect();
                    let bz_col: Vec<Complex64> = (0..n).map(|i| b_z[(i, j)]).collect();
                    let uz_col = red.recover_uz(&ux_col, &bz_col);
                    for i in 0..n {
                        u[(i, j)] = ux_col[i];
                        u[(n + i, j)] = uz_col[i];
                    }
                }
                u
            };
            if !lambda.is_finite() {
                let lu = ComplexLu::new(&red.a_red)?;
                let ux = lu.solve_mat(&b_red);
                let res = relative_normal_residual(&red.a_red, &ux, &b_red);
                return Ok(WavefieldSolution {
                    u: recover(&ux),
                    rel_residual: res,
                });
            }
            let inv_l = Complex64::new(1.0 / lambda, 0.0);
            // data rows through the elimination: P u = P_red u_x + P~ b_z / 2
            let p_red = reduced_sampling(grid, acq, &red)?;
            let pt = acq.sampling_scalar(grid).to_complex();
            let shift = sp_mul_mat(&pt, &b_z);
            let d_red = Mat::from_fn(d_total.nrows(), n_s, |i, j| {
                d_total[(i, j)] - 0.5 * shift[(i, j)]
            });
            let ptp_red = p_red.adjoint().matmul(&p_red)?;
            let k = red
                .a_red
                .adjoint()
                .matmul(&red.a_red)?
                .add(&ptp_red.scaled(inv_l))?;
            let mut rhs = sp_mul_mat_adjoint(&red.a_red, &b_red);
            let pd = sp_mul_mat_adjoint(&p_red, &d_red);
            for j in 0..n_s {
                for i in 0..n {
                    rhs[(i, j)] += inv_l * pd[(i, j)];
                }
            }
            let lu = ComplexLu::new(&k)?;
            let ux = lu.solve_mat(&rhs);
            let res = relative_normal_residual(&k, &ux, &rhs);
            Ok(WavefieldSolution {
                u: recover(&ux),
                rel_residual: res,
            })
        }
    }
}

/// Sampling of the reduced unknown: `P_red = P~ (I + A_z) / 2`.
fn reduced_sampling(
    grid: &Grid,
    acq: &Acquisition,
    red: &wave::ReducedVtiSystem,
) -> Result<SparseMatrix<Complex64>> {
    let pt = acq.sampling_scalar(grid).to_complex();
    let i_plus_az = SparseMatrix::identity(grid.n()).add(&red.a_z)?;
    Ok(pt.matmul(&i_plus_az)?.scaled(Complex64::new(0.5, 0.0)))
}

/// Largest eigenvalue of the data-fit sharpness operator `A^-H P^T P A^-1`
/// (its reduced analog under the fourth-order engine) at one frequency, by
/// seeded power iteration.
fn xi_for(
    grid: &Grid,
    model: &InversionModel,
    acq: &Acquisition,
    pml: &PmlProfile,
    engine: Step1Engine,
    seed: u64,
) -> Result<PowerIteration> {
    match engine {
        Step1Engine::NormalDirect => {
            let a = wave::second_order(grid, model, pml)?;
            let p = acq.sampling(grid).to_complex();
            let ptp = p.adjoint().matmul(&p)?;
            let lu = ComplexLu::new(&a)?;
            let apply = |x: &[Complex64]| -> Vec<Complex64> {
                let y = lu.solve_vec(x);
                let w = ptp.matvec(&y);
                lu.solve_adjoint_vec(&w)
            };
            Ok(max_eigenvalue(apply, 2 * grid.n(), 1e-4, 200, seed))
        }
        Step1Engine::FourthOrder => {
            let red = wave::reduced_fourth_order(grid, model, pml)?;
            let p_red = reduced_sampling(grid, acq, &red)?;
            let ptp_red = p_red.adjoint().matmul(&p_red)?;
            let lu = ComplexLu::new(&red.a_red)?;
            let apply = |x: &[Complex64]| -> Vec<Complex64> {
                let y = lu.solve_vec(x);
                let w = ptp_red.matvec(&y);
                lu.solve_adjoint_vec(&w)
            };
            Ok(max_eigenvalue(apply, grid.n(), 1e-4, 200, seed))
        }
    }
}

fn relative_normal_residual(
    k: &SparseMatrix<Complex64>,
    u: &Mat<Complex64>,
    rhs: &Mat<Complex64>,
) -> f64 {
    let ku = sp_mul_mat(k, u);
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..rhs.ncols() {
        for i in 0..rhs.nrows() {
            num += (ku[(i, j)] - rhs[(i, j)]).norm_sqr();
            den += rhs[(i, j)].norm_sqr();
        }
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

// ---------------------------------------------------------------------------
// step 2: model estimation
// ---------------------------------------------------------------------------

/// Per-frequency ingredients of the model step.
pub struct FrequencyContribution<'x> {
    pub omega: f64,
    pub dxx: &'x SparseMatrix<Complex64>,
    pub dzz: &'x SparseMatrix<Complex64>,
    /// Reconstructed wavefields, `2n x n_s`.
    pub u: &'x Mat<Complex64>,
    /// Combined sources `S + S~`, `2n x n_s`.
    pub b: &'x Mat<Complex64>,
}

/// Regularisation side of the model-step quadratic. Targets are stacked over
/// the active classes; weights are one scalar per class.
pub struct ModelObjective<'x> {
    pub active: &'x ActiveSet,
    pub lambda1: f64,
    /// TV weights per class (`Gamma` diagonal); zero disables the class.
    pub gamma: &'x [f64],
    /// Bound/damping weights per class (`Z` diagonal).
    pub zeta: &'x [f64],
    /// TV targets `(p_x + p~_x, p_z + p~_z)`, stacked; required where
    /// `gamma > 0`.
    pub tv_target: Option<(&'x [f64], &'x [f64])>,
    /// Bound target `q + q~`, stacked.
    pub bound_target: &'x [f64],
    /// Optional `(prior field, weight)` Tikhonov pull on the eps class.
    pub eps_prior: Option<(&'x [f64], f64)>,
}

/// Solve the model-step quadratic
/// `[lambda1 sum Re(L^H L) + Gbar^T Gamma Gbar + Z] m = lambda1 sum Re(L^H t)
/// + Gbar^T Gamma (p + p~) + Z (q + q~)` over the stacked active classes.
/// Returns the stacked solution and the relative residual of the solve.
pub fn estimate_model(
    grid: &Grid,
    model: &InversionModel,
    freqs: &[FrequencyContribution],
    obj: &ModelObjective,
) -> Result<(Vec<f64>, f64)> {
    let n = grid.n();
    let k = obj.active.len();
    if obj.gamma.len() != k || obj.zeta.len() != k {
        return Err(WriError::DimensionMismatch {
            op: "estimate_model",
            expected: format!("{k} per-class weights"),
            got: format!("{} / {}", obj.gamma.len(), obj.zeta.len()),
        });
    }
    if obj.bound_target.len() != k * n {
        return Err(WriError::DimensionMismatch {
            op: "estimate_model",
            expected: format!("{} stacked target entries", k * n),
            got: format!("{}", obj.bound_target.len()),
        });
    }
    let mut normal = NormalBlocks::zeros(n, k);
    for fc in freqs {
        normal.add_assign(&accumulate_normal(
            obj.active, model, fc.omega, fc.dxx, fc.dzz, fc.u, fc.b,
        )?);
    }
    normal.scale(obj.lambda1);
    let mut lhs = normal.to_sparse();
    let mut rhs = normal.rhs().to_vec();
    let gx = mesh::tv_gradient(grid, Axis::X);
    let gz = mesh::tv_gradient(grid, Axis::Z);
    let lap = gx.transpose().matmul(&gx)?.add(&gz.transpose().matmul(&gz)?)?;
    for c in 0..k {
        let base = c * n;
        if obj.gamma[c] > 0.0 {
            let (tx_all, tz_all) = obj.tv_target.ok_or_else(|| {
                WriError::InvalidInput("gamma > 0 requires a TV target".into())
            })?;
            lhs = add_block(&lhs, &lap.scaled(obj.gamma[c]), base)?;
            let gv = gx.matvec_adjoint(&tx_all[base..base + n]);
            let hv = gz.matvec_adjoint(&tz_all[base..base + n]);
            for i in 0..n {
                rhs[base + i] += obj.gamma[c] * (gv[i] + hv[i]);
            }
        }
        if obj.zeta[c] > 0.0 {
            let zd = SparseMatrix::from_diag(&vec![obj.zeta[c]; n]);
            lhs = add_block(&lhs, &zd, base)?;
            for i in 0..n {
                rhs[base + i] += obj.zeta[c] * obj.bound_target[base + i];
            }
        }
    }
    if let (Some((prior, w)), Some(c)) = (obj.eps_prior, obj.active.position(ModelClass::Eps)) {
        if w > 0.0 {
            if prior.len() != n {
                return Err(WriError::DimensionMismatch {
                    op: "estimate_model",
                    expected: format!("{n} prior cells"),
                    got: format!("{}", prior.len()),
                });
            }
            let base = c * n;
            lhs = add_block(&lhs, &SparseMatrix::from_diag(&vec![w; n]), base)?;
            for i in 0..n {
                rhs[base + i] += w * prior[i];
            }
        }
    }
    let factor = RealFactor::new(&lhs)?;
    let (m_new, abs_res) = factor.solve_checked(&rhs);
    let rhs_norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    let rel = if rhs_norm > 0.0 {
        abs_res / rhs_norm
    } else {
        abs_res
    };
    if !rel.is_finite() || rel > 1e-6 {
        return Err(WriError::NotConverged {
            what: "model-step normal solve".into(),
            iterations: 1,
            residual: rel,
        });
    }
    Ok((m_new, rel))
}

/// Add an n x n block at diagonal offset `base` of a k n x k n matrix.
fn add_block(
    lhs: &SparseMatrix<f64>,
    block: &SparseMatrix<f64>,
    base: usize,
) -> Result<SparseMatrix<f64>> {
    let mut trips = Vec::with_capacity(block.nnz());
    for i in 0..block.nrows() {
        let (cols, vals) = block.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            trips.push((base + i, base + j, v));
        }
    }
    let shifted = SparseMatrix::from_triplets(lhs.nrows(), lhs.ncols(), &trips)?;
    lhs.add(&shifted)
}

// ---------------------------------------------------------------------------
// matrix helpers over faer column blocks
// ---------------------------------------------------------------------------

fn mat_sub(a: &Mat<Complex64>, b: &Mat<Complex64>) -> Mat<Complex64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] - b[(i, j)])
}

fn mat_add(a: &Mat<Complex64>, b: &Mat<Complex64>) -> Mat<Complex64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] + b[(i, j)])
}

fn mat_add_assign(a: &mut Mat<Complex64>, b: &Mat<Complex64>) {
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            a[(i, j)] += b[(i, j)];
        }
    }
}

fn sp_mul_mat(a: &SparseMatrix<Complex64>, x: &Mat<Complex64>) -> Mat<Complex64> {
    let mut out = Mat::zeros(a.nrows(), x.ncols());
    for j in 0..x.ncols() {
        let col: Vec<Complex64> = (0..x.nrows()).map(|i| x[(i, j)]).collect();
        let y = a.matvec(&col);
        for i in 0..a.nrows() {
            out[(i, j)] = y[i];
        }
    }
    out
}

fn sp_mul_mat_adjoint(a: &SparseMatrix<Complex64>, x: &Mat<Complex64>) -> Mat<Complex64> {
    let mut out = Mat::zeros(a.ncols(), x.ncols());
    for j in 0..x.ncols() {
        let col: Vec<Complex64> = (0..x.nrows()).map(|i| x[(i, j)]).collect();
        let y = a.matvec_adjoint(&col);
        for i in 0..a.ncols() {
            out[(i, j)] = y[i];
        }
    }
    out
}

// ---------------------------------------------------------------------------
// driver
// ---------------------------------------------------------------------------

/// Per-frequency quantities that live for a whole batch.
struct FrequencyWork {
    omega: f64,
    /// Index into the data set records.
    data_index: usize,
    dxx: SparseMatrix<Complex64>,
    dzz: SparseMatrix<Complex64>,
    pml: PmlProfile,
    sources: Mat<Complex64>,
    src_dual: Mat<Complex64>,
    data_dual: Mat<Complex64>,
    /// Current operator (tracks the model as it updates).
    a: SparseMatrix<Complex64>,
    /// Latest reconstructed wavefields.
    u: Mat<Complex64>,
}

/// The reconstruction state: model iterate, splits, duals, and logs.
pub struct Inversion<'a> {
    grid: &'a Grid,
    acq: &'a Acquisition,
    data: &'a DataSet,
    pub config: InversionConfig,
    pub model: InversionModel,
    /// Pressure sampling operator (`n_r x 2n`).
    p_real: SparseMatrix<f64>,
    /// Regularisation gradients (shared by every class).
    gx: SparseMatrix<f64>,
    gz: SparseMatrix<f64>,
    /// Stacked splits and duals over the active classes.
    px: Vec<f64>,
    pz: Vec<f64>,
    pdx: Vec<f64>,
    pdz: Vec<f64>,
    q: Vec<f64>,
    qd: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    pub records: Vec<IterationRecord>,
}

impl<'a> Inversion<'a> {
    pub fn new(
        grid: &'a Grid,
        acq: &'a Acquisition,
        data: &'a DataSet,
        initial: InversionModel,
        config: InversionConfig,
    ) -> Result<Self> {
        if initial.len() != grid.n() {
            return Err(WriError::DimensionMismatch {
                op: "Inversion",
                expected: format!("{} model cells", grid.n()),
                got: format!("{}", initial.len()),
            });
        }
        if data.n_receivers() != acq.n_receivers() || data.n_sources() != acq.n_sources() {
            return Err(WriError::DimensionMismatch {
                op: "Inversion",
                expected: format!("{} x {} data", acq.n_receivers(), acq.n_sources()),
                got: format!("{} x {}", data.n_receivers(), data.n_sources()),
            });
        }
        config.bounds.validate()?;
        if let Some(prior) = &config.eps_prior {
            if prior.len() != grid.n() {
                return Err(WriError::DimensionMismatch {
                    op: "Inversion",
                    expected: format!("{} prior cells", grid.n()),
                    got: format!("{}", prior.len()),
                });
            }
        }
        let n = grid.n();
        let kn = config.active.len() * n;
        let p_real = acq.sampling(grid);
        let gx = mesh::tv_gradient(grid, Axis::X);
        let gz = mesh::tv_gradient(grid, Axis::Z);
        let (lo, hi) = config.bounds.stacked(&config.active, n);
        Ok(Self {
            grid,
            acq,
            data,
            config,
            model: initial,
            p_real,
            gx,
            gz,
            px: vec![0.0; kn],
            pz: vec![0.0; kn],
            pdx: vec![0.0; kn],
            pdz: vec![0.0; kn],
            q: vec![0.0; kn],
            qd: vec![0.0; kn],
            lo,
            hi,
            records: Vec::new(),
        })
    }

    fn n(&self) -> usize {
        self.grid.n()
    }

    /// Current TV split, stacked `(p_x, p_z)`.
    pub fn tv_split(&self) -> (&[f64], &[f64]) {
        (&self.px, &self.pz)
    }

    /// Current TV duals, stacked `(p~_x, p~_z)`.
    pub fn tv_dual(&self) -> (&[f64], &[f64]) {
        (&self.pdx, &self.pdz)
    }

    /// Current bound split `q`, stacked.
    pub fn bound_split(&self) -> &[f64] {
        &self.q
    }

    /// Current bound dual `q~`, stacked.
    pub fn bound_dual(&self) -> &[f64] {
        &self.qd
    }

    /// Stacked bound vectors `(lo, hi)` over the active classes.
    pub fn stacked_bounds(&self) -> (&[f64], &[f64]) {
        (&self.lo, &self.hi)
    }

    fn stacked_model(&self) -> Vec<f64> {
        self.model.stack(&self.config.active)
    }

    /// `Gbar m` per class, stacked.
    fn stacked_gradients(&self, m: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n();
        let k = self.config.active.len();
        let mut gxm = Vec::with_capacity(k * n);
        let mut gzm = Vec::with_capacity(k * n);
        for c in 0..k {
            gxm.extend(self.gx.matvec(&m[c * n..(c + 1) * n]));
            gzm.extend(self.gz.matvec(&m[c * n..(c + 1) * n]));
        }
        (gxm, gzm)
    }

    /// Reset splits and duals at a batch start: targets sit at the current
    /// model (zero violation), wavefield duals at zero.
    fn reset_splits(&mut self) {
        let m = self.stacked_model();
        let (gxm, gzm) = self.stacked_gradients(&m);
        self.px = gxm;
        self.pz = gzm;
        self.pdx.iter_mut().for_each(|v| *v = 0.0);
        self.pdz.iter_mut().for_each(|v| *v = 0.0);
        self.q = project_bounds(&m, &self.lo, &self.hi);
        self.qd.iter_mut().for_each(|v| *v = 0.0);
    }

    /// The 2% rule: `theta` per active class from `z = Gbar m - p~`.
    fn theta(&self) -> Vec<f64> {
        let n = self.n();
        let m = self.stacked_model();
        let (gxm, gzm) = self.stacked_gradients(&m);
        let mut out = Vec::with_capacity(self.config.active.len());
        for c in 0..self.config.active.len() {
            let mut peak = 0.0f64;
            for i in c * n..(c + 1) * n {
                let zx = gxm[i] - self.pdx[i];
                let zz = gzm[i] - self.pdz[i];
                peak = peak.max(zx.hypot(zz));
            }
            out.push(self.config.penalty.theta_percent * peak);
        }
        out
    }

    /// Splits and duals (steps 3-5 of the scheme, model side).
    fn update_splits(&mut self, gamma: &[f64]) {
        let n = self.n();
        let m = self.stacked_model();
        let (gxm, gzm) = self.stacked_gradients(&m);
        let tv = self.config.regularization == Regularization::BoundsTv;
        for (c, &g) in gamma.iter().enumerate() {
            let base = c * n;
            if tv && g > 0.0 {
                let zx: Vec<f64> = (0..n).map(|i| gxm[base + i] - self.pdx[base + i]).collect();
                let zz: Vec<f64> = (0..n).map(|i| gzm[base + i] - self.pdz[base + i]).collect();
                let (px, pz) = tv_prox(&zx, &zz, g);
                self.px[base..base + n].copy_from_slice(&px);
                self.pz[base..base + n].copy_from_slice(&pz);
            }
        }
        self.q = project_bounds(
            &m.iter().zip(&self.qd).map(|(a, b)| a - b).collect::<Vec<_>>(),
            &self.lo,
            &self.hi,
        );
        // dual ascent: running sums of the violations
        for i in 0..m.len() {
            if tv {
                self.pdx[i] += self.px[i] - gxm[i];
                self.pdz[i] += self.pz[i] - gzm[i];
            }
            self.qd[i] += self.q[i] - m[i];
        }
    }

    /// Data threshold for a batch: the configured floor, or the recorded
    /// batch noise level when the data carry one.
    fn effective_eps_data(&self, batch_hz: &[f64]) -> f64 {
        let floor = self.config.stop.eps_data;
        match &self.data.noise_norms {
            None => floor,
            Some(norms) => {
                let mut sq = 0.0;
                for &f in batch_hz {
                    if let Some(i) = self.data.freq_index(f) {
                        sq += norms[i] * norms[i];
                    }
                }
                floor.max(sq.sqrt())
            }
        }
    }

    /// Open one frequency batch: reset duals, prepare operators, tune the
    /// penalty ratio. Iterations are then driven through the session.
    pub fn begin_batch<'s>(
        &'s mut self,
        batch_no: usize,
        batch_hz: &[f64],
    ) -> Result<BatchSession<'s, 'a>> {
        if batch_hz.is_empty() {
            return Err(WriError::InvalidInput("empty frequency batch".into()));
        }
        self.reset_splits();
        let v_ref = crate::survey::reference_velocity(&self.model)?;
        let n = self.n();
        let n_s = self.acq.n_sources();
        let work = batch_hz
            .iter()
            .map(|&f| {
                let data_index = self
                    .data
                    .freq_index(f)
                    .ok_or_else(|| WriError::InvalidInput(format!("no data record at {f} Hz")))?;
                let omega = TAU * f;
                let pml = PmlProfile::new(self.grid, omega, v_ref)?;
                let dxx = mesh::second_derivative(self.grid, Axis::X, Some(&pml));
                let dzz = mesh::second_derivative(self.grid, Axis::Z, Some(&pml));
                let sources = source_block(self.grid, self.acq, omega);
                let a = wave::second_order(self.grid, &self.model, &pml)?;
                Ok(FrequencyWork {
                    omega,
                    data_index,
                    dxx,
                    dzz,
                    pml,
                    sources,
                    src_dual: Mat::zeros(2 * n, n_s),
                    data_dual: Mat::zeros(self.acq.n_receivers(), n_s),
                    a,
                    u: Mat::zeros(2 * n, n_s),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let (xi, xi_converged) = self.xi_max(&work)?;
        let lambda = (self.config.penalty.ratio_fraction * xi).max(f64::MIN_POSITIVE);
        let eps_data = self.effective_eps_data(batch_hz);
        Ok(BatchSession {
            batch_no,
            freqs_hz: batch_hz.to_vec(),
            work,
            lambda,
            xi_max: xi,
            xi_converged,
            lambda1: 1.0,
            eps_data,
            iter: 0,
            stopped: false,
            inv: self,
        })
    }

    /// Largest eigenvalue of `A^-H P^T P A^-1` over the batch (the data-fit
    /// sharpness of the relaxed problem), by seeded power iteration. Returns
    /// the estimate and whether every per-frequency iteration converged.
    fn xi_max(&self, work: &[FrequencyWork]) -> Result<(f64, bool)> {
        let mut xi: f64 = 0.0;
        let mut all_converged = true;
        for fw in work {
            let est = xi_for(
                self.grid,
                &self.model,
                self.acq,
                &fw.pml,
                self.config.engine,
                self.config.penalty.power_seed,
            )?;
            xi = xi.max(est.value);
            all_converged &= est.converged;
        }
        Ok((xi, all_converged))
    }

    /// One batch of the multiscale schedule, run to its stopping rule.
    pub fn run_batch(&mut self, batch_no: usize, batch_hz: &[f64]) -> Result<()> {
        let mut session = self.begin_batch(batch_no, batch_hz)?;
        while !session.done() {
            session.iterate()?;
        }
        Ok(())
    }

    /// Walk a list of batches in order.
    pub fn run_batches(&mut self, batches: &[Vec<f64>]) -> Result<()> {
        for (b, batch) in batches.iter().enumerate() {
            self.run_batch(b, batch)?;
        }
        Ok(())
    }

    /// Multiscale continuation: each `(start, stop)` path is split into
    /// overlapping batches (`batch_size`/`overlap`, the usual choice 2/1) at
    /// `spacing_hz`; every path starts from the previous path's final model.
    pub fn run_paths(
        &mut self,
        schedule: &[(f64, f64)],
        spacing_hz: f64,
        batch_size: usize,
        overlap: usize,
    ) -> Result<()> {
        let mut batch_no = 0;
        for &(start, stop) in schedule {
            let freqs = path_frequencies(start, stop, spacing_hz);
            for batch in frequency_batches(&freqs, batch_size, overlap) {
                self.run_batch(batch_no, &batch)?;
                batch_no += 1;
            }
        }
        Ok(())
    }
}

/// One open frequency batch: owns the per-frequency operators, duals, and
/// tuning, and exposes the iteration state for inspection between steps.
pub struct BatchSession<'s, 'a> {
    inv: &'s mut Inversion<'a>,
    batch_no: usize,
    freqs_hz: Vec<f64>,
    work: Vec<FrequencyWork>,
    /// Tuned penalty ratio `lambda1/lambda0`, fixed for the batch.
    pub lambda: f64,
    /// The power-iteration estimate behind `lambda`.
    pub xi_max: f64,
    /// Whether every per-frequency power iteration met its tolerance (a
    /// non-converged estimate is still used, per the tuning rule).
    pub xi_converged: bool,
    lambda1: f64,
    eps_data: f64,
    iter: usize,
    stopped: bool,
}

impl<'s, 'a> BatchSession<'s, 'a> {
    pub fn done(&self) -> bool {
        self.stopped || self.iter >= self.inv.config.stop.max_iterations
    }

    pub fn iteration(&self) -> usize {
        self.iter
    }

    pub fn n_frequencies(&self) -> usize {
        self.work.len()
    }

    /// Latest reconstructed wavefields for batch frequency `i` (`2n x n_s`).
    pub fn wavefield(&self, i: usize) -> &Mat<Complex64> {
        &self.work[i].u
    }

    /// Source block `S` for batch frequency `i`.
    pub fn sources(&self, i: usize) -> &Mat<Complex64> {
        &self.work[i].sources
    }

    /// Source-residual dual `S~` for batch frequency `i`.
    pub fn source_dual(&self, i: usize) -> &Mat<Complex64> {
        &self.work[i].src_dual
    }

    /// Data-residual dual `D~` for batch frequency `i`.
    pub fn data_dual(&self, i: usize) -> &Mat<Complex64> {
        &self.work[i].data_dual
    }

    /// Absorbing profile for batch frequency `i` (fixed for the batch, built
    /// at the opening model's reference velocity).
    pub fn pml(&self, i: usize) -> &PmlProfile {
        &self.work[i].pml
    }

    /// Wave operator `A(m)` for batch frequency `i` at the current model.
    pub fn operator(&self, i: usize) -> &SparseMatrix<Complex64> {
        &self.work[i].a
    }

    /// Frequencies of this batch, Hz.
    pub fn frequencies(&self) -> &[f64] {
        &self.freqs_hz
    }

    /// The inversion state this session drives.
    pub fn inversion(&self) -> &Inversion<'a> {
        self.inv
    }

    /// One full ADMM iteration (steps 1-6). Appends and returns the record.
    pub fn iterate(&mut self) -> Result<IterationRecord> {
        self.iter += 1;
        let n = self.inv.n();
        // step 1: wavefields at the current model
        let mut step1_rel = 0.0f64;
        for fw in &mut self.work {
            let d_total = mat_add(&self.inv.data.records[fw.data_index], &fw.data_dual);
            let s_total = mat_add(&fw.sources, &fw.src_dual);
            let sol = reconstruct_wavefields(
                self.inv.grid,
                &self.inv.model,
                &fw.pml,
                self.inv.acq,
                &d_total,
                &s_total,
                self.lambda,
                self.inv.config.engine,
            )?;
            fw.u = sol.u;
            step1_rel = step1_rel.max(sol.rel_residual);
        }
        // tune lambda1 on the first pass from the accumulated diagonal
        if self.iter == 1 {
            let mut probe = NormalBlocks::zeros(n, self.inv.config.active.len());
            for fw in &self.work {
                let b = mat_add(&fw.sources, &fw.src_dual);
                probe.add_assign(&accumulate_normal(
                    &self.inv.config.active,
                    &self.inv.model,
                    fw.omega,
                    &fw.dxx,
                    &fw.dzz,
                    &fw.u,
                    &b,
                )?);
            }
            let mean = probe.mean_abs_diag();
            if mean > 0.0 {
                self.lambda1 = self.inv.config.penalty.lambda1_pct * mean;
            }
        } else {
            self.lambda1 *= self.inv.config.penalty.lambda1_growth;
        }
        // percentage rules for this iteration
        let theta = self.inv.theta();
        let tv = self.inv.config.regularization == Regularization::BoundsTv;
        let gamma: Vec<f64> = theta.iter().map(|&t| if tv { t } else { 0.0 }).collect();
        let zeta = theta.clone();
        // step 2: model update
        let kn = self.inv.config.active.len() * n;
        let mut tvx = vec![0.0; kn];
        let mut tvz = vec![0.0; kn];
        let mut bound_target = vec![0.0; kn];
        for i in 0..kn {
            tvx[i] = self.inv.px[i] + self.inv.pdx[i];
            tvz[i] = self.inv.pz[i] + self.inv.pdz[i];
            bound_target[i] = self.inv.q[i] + self.inv.qd[i];
        }
        let eps_prior: Option<(&[f64], f64)> = match (
            &self.inv.config.eps_prior,
            self.inv.config.active.position(ModelClass::Eps),
        ) {
            (Some(prior), Some(c)) => {
                Some((&prior[..], self.inv.config.penalty.eps_prior_weight * zeta[c]))
            }
            _ => None,
        };
        let b_totals: Vec<Mat<Complex64>> = self
            .work
            .iter()
            .map(|fw| mat_add(&fw.sources, &fw.src_dual))
            .collect();
        let contributions: Vec<FrequencyContribution> = self
            .work
            .iter()
            .zip(&b_totals)
            .map(|(fw, b)| FrequencyContribution {
                omega: fw.omega,
                dxx: &fw.dxx,
                dzz: &fw.dzz,
                u: &fw.u,
                b,
            })
            .collect();
        let obj = ModelObjective {
            active: &self.inv.config.active,
            lambda1: self.lambda1,
            gamma: &gamma,
            zeta: &zeta,
            tv_target: Some((&tvx, &tvz)),
            bound_target: &bound_target,
            eps_prior,
        };
        let (m_new, step2_rel) =
            estimate_model(self.inv.grid, &self.inv.model, &contributions, &obj)?;
        drop(contributions);
        let active = self.inv.config.active.clone();
        self.inv.model.unstack_into(&m_new, &active)?;
        // steps 3-5 (model side)
        self.inv.update_splits(&gamma);
        // step 5 (wavefield side) + step 6 residuals, at the new model
        let mut bilinear_sq = 0.0;
        let mut data_sq = 0.0;
        for fw in &mut self.work {
            fw.a = wave::second_order(self.inv.grid, &self.inv.model, &fw.pml)?;
            let au = sp_mul_mat(&fw.a, &fw.u);
            let s_viol = mat_sub(&fw.sources, &au);
            let pu = sample_columns(&self.inv.p_real, &fw.u);
            let d_viol = mat_sub(&self.inv.data.records[fw.data_index], &pu);
            bilinear_sq += mat_norm(&s_viol).powi(2);
            data_sq += mat_norm(&d_viol).powi(2);
            mat_add_assign(&mut fw.src_dual, &s_viol);
            mat_add_assign(&mut fw.data_dual, &d_viol);
        }
        let bilinear_residual = bilinear_sq.sqrt();
        let data_residual = data_sq.sqrt();
        let converged = bilinear_residual <= self.inv.config.stop.eps_bilinear
            && data_residual <= self.eps_data;
        self.stopped = converged;
        let record = IterationRecord {
            batch: self.batch_no,
            iteration: self.iter,
            freqs_hz: self.freqs_hz.clone(),
            lambda: self.lambda,
            lambda1: self.lambda1,
            theta,
            bilinear_residual,
            data_residual,
            step1_rel_residual: step1_rel,
            step2_rel_residual: step2_rel,
            converged,
        };
        self.inv.records.push(record.clone());
        Ok(record)
    }
}

// ---------------------------------------------------------------------------
// objective landscapes
// ---------------------------------------------------------------------------

/// Sampled objective surfaces along model-space line segments, for comparing
/// the classic reduced data misfit with the relaxed-reconstruction objective.
#[derive(Debug, Clone)]
pub struct LandscapeResult {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    /// Reduced data misfit `1/2 ||P A^-1 S - D||^2`, row-major `[ia][ib]`.
    pub fwi: Vec<f64>,
    /// Relaxation objective after one wavefield solve with zero duals:
    /// `1/(2 lambda) ||P U - D||^2 + 1/2 ||A U - S||^2`.
    pub wri: Vec<f64>,
    /// Penalty ratio used (tuned once at `alpha = beta = 1`).
    pub lambda: f64,
}

/// Scan `m(alpha, beta)` with `m_v0 = true + |alpha| (init - true)` and
/// `m_eps = true + |beta| (init - true)` (`m_delta` stays at the true model),
/// evaluating both objectives over the given data. `alpha = beta = 0` is the
/// true model; `|alpha| = |beta| = 1` the initial one. Both objectives are
/// evaluated on the full system whichever wavefield engine does the solves.
pub fn objective_landscape(
    grid: &Grid,
    acq: &Acquisition,
    data: &DataSet,
    m_true: &InversionModel,
    m_init: &InversionModel,
    alphas: &[f64],
    betas: &[f64],
    ratio_fraction: f64,
    power_seed: u64,
    engine: Step1Engine,
) -> Result<LandscapeResult> {
    if m_true.len() != grid.n() || m_init.len() != grid.n() {
        return Err(WriError::DimensionMismatch {
            op: "objective_landscape",
            expected: format!("{} cells", grid.n()),
            got: format!("{} / {}", m_true.len(), m_init.len()),
        });
    }
    let blend = |a: f64, b: f64| -> InversionModel {
        let mut m = m_true.clone();
        for i in 0..m.len() {
            m.m_v0[i] += a.abs() * (m_init.m_v0[i] - m_true.m_v0[i]);
            m.m_eps[i] += b.abs() * (m_init.m_eps[i] - m_true.m_eps[i]);
        }
        m
    };
    let p_real = acq.sampling(grid);
    let v_ref = crate::survey::reference_velocity(m_init)?
        .max(crate::survey::reference_velocity(m_true)?);
    // tune the ratio once, at the initial model
    let mut xi: f64 = 0.0;
    for &f in &data.freqs_hz {
        let pml = PmlProfile::new(grid, TAU * f, v_ref)?;
        xi = xi.max(xi_for(grid, m_init, acq, &pml, engine, power_seed)?.value);
    }
    let lambda = (ratio_fraction * xi).max(f64::MIN_POSITIVE);
    let mut fwi = vec![0.0; alphas.len() * betas.len()];
    let mut wri = vec![0.0; alphas.len() * betas.len()];
    for (ia, &a_val) in alphas.iter().enumerate() {
        for (ib, &b_val) in betas.iter().enumerate() {
            let m = blend(a_val, b_val);
            let mut j_fwi = 0.0;
            let mut j_wri = 0.0;
            for (fi, &f) in data.freqs_hz.iter().enumerate() {
                let omega = TAU * f;
                let pml = PmlProfile::new(grid, omega, v_ref)?;
                let a = wave::second_order(grid, &m, &pml)?;
                let s = source_block(grid, acq, omega);
                let d = &data.records[fi];
                // reduced misfit: exact solve (the infinite-ratio limit)
                let u_exact =
                    reconstruct_wavefields(grid, &m, &pml, acq, d, &s, f64::INFINITY, engine)?.u;
                let pu = sample_columns(&p_real, &u_exact);
                j_fwi += 0.5 * mat_norm(&mat_sub(&pu, d)).powi(2);
                // relaxation objective: one wavefield step, zero duals
                let sol = reconstruct_wavefields(grid, &m, &pml, acq, d, &s, lambda, engine)?;
                let pu_w = sample_columns(&p_real, &sol.u);
                let au = sp_mul_mat(&a, &sol.u);
                j_wri += 0.5 / lambda * mat_norm(&mat_sub(&pu_w, d)).powi(2)
                    + 0.5 * mat_norm(&mat_sub(&au, &s)).powi(2);
            }
            fwi[ia * betas.len() + ib] = j_fwi;
            wri[ia * betas.len() + ib] = j_wri;
        }
    }
    Ok(LandscapeResult {
        alphas: alphas.to_vec(),
        betas: betas.to_vec(),
        fwi,
        wri,
        lambda,
    })
}

/// Strict interior local minima of a sampled 1D curve whose prominence
/// (barrier height to escape on the easier side, relative to the curve's
/// total range) exceeds `min_prominence`. Used to count spurious basins.
pub fn prominent_local_minima(values: &[f64], min_prominence: f64) -> Vec<usize> {
    let n = values.len();
    if n < 3 {
        return Vec::new();
    }
    let range = {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (hi - lo).max(f64::MIN_POSITIVE)
    };
    let mut out = Vec::new();
    for i in 1..n - 1 {
        if !(values[i] < values[i - 1] && values[i] < values[i + 1]) {
            continue;
        }
        // barrier on each side: highest point before reaching a lower value
        let mut left_barrier = 0.0f64;
        let mut j = i;
        while j > 0 {
            j -= 1;
            left_barrier = left_barrier.max(values[j] - values[i]);
            if values[j] < values[i] {
                break;
            }
        }
        let mut right_barrier = 0.0f64;
        let mut j = i;
        while j + 1 < n {
            j += 1;
            right_barrier = right_barrier.max(values[j] - values[i]);
            if values[j] < values[i] {
                break;
            }
        }
        if left_barrier.min(right_barrier) / range > min_prominence {
            out.push(i);
        }
    }
    out
}

// ---------------------------------------------------------------------------
