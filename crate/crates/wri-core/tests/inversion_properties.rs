//! Cross-module checks of the two quadratic sub-problems and the outer loop:
//! the model step against a dense least-squares oracle, exactness on
//! consistent inputs, and the no-regularisation fixed point of the whole
//! scheme at the true model.

use faer::Mat;
use num_complex::Complex64;

use wri_core::bilinear::Linearization;
use wri_core::inversion::{
    estimate_model, reconstruct_wavefields, FrequencyContribution, Inversion, InversionConfig,
    ModelObjective, Step1Engine,
};
use wri_core::linalg::{dense_solve, mat_column, to_complex};
use wri_core::medium::{ActiveSet, ModelClass, PhysicalModel};
use wri_core::mesh::{self, Axis, Grid, PmlProfile};
use wri_core::survey::{
    reference_velocity, ring_positions, source_block, synthesize, Acquisition,
};

const TAU: f64 = std::f64::consts::TAU;

/// Deterministic pseudo-random values; the identities under test are
/// algebraic, so no statistical quality is needed.
fn wobble(i: usize, seed: f64) -> f64 {
    let t = seed + i as f64;
    (1.9 * t).sin() * 0.6 + (0.7 * t).cos() * 0.4
}

fn smooth_model(g: &Grid) -> PhysicalModel {
    let mut p = PhysicalModel::constant(g.n(), 0.0, 0.0, 0.0);
    for ix in 0..g.nx {
        for iz in 0..g.nz {
            let i = g.idx(ix, iz);
            let sx = ix as f64 / (g.nx - 1) as f64;
            let sz = iz as f64 / (g.nz - 1) as f64;
            p.v0[i] = 2.2 + 0.5 * sx + 0.3 * sz;
            p.eps[i] = 0.15 + 0.06 * sx * sz;
            p.delta[i] = 0.05 + 0.04 * sz;
        }
    }
    p
}

/// The model step minimises
/// `lambda1 sum ||L m - y||^2 + sum_c gamma_c ||G m_c - t_c||^2
///  + sum_c zeta_c ||m_c - q_c||^2 + w ||m_eps - prior||^2`.
/// Assemble those normal equations densely from the materialised per-column
/// linearisations and compare solutions.
#[test]
fn model_step_matches_a_dense_least_squares_oracle() {
    let g = Grid::with_interior(4, 4, 0.05, 0.05, 1, false).unwrap();
    let n = g.n();
    let active = ActiveSet::new(&[ModelClass::V0, ModelClass::Eps, ModelClass::Delta]).unwrap();
    let k = active.len();
    let kn = k * n;
    let model = smooth_model(&g).to_inversion().unwrap();
    let n_s = 3;
    let lambda1 = 0.37;
    let gamma = [0.21, 0.0, 0.13];
    let zeta = [0.11, 0.05, 0.09];
    let tvx: Vec<f64> = (0..kn).map(|i| wobble(i, 3.1)).collect();
    let tvz: Vec<f64> = (0..kn).map(|i| wobble(i, 4.2)).collect();
    let bound: Vec<f64> = (0..kn).map(|i| wobble(i, 5.3)).collect();
    let prior: Vec<f64> = (0..n).map(|i| 1.3 + 0.1 * wobble(i, 6.4)).collect();
    let prior_w = 0.3;

    let freqs = [4.0, 7.0];
    let mut dense_n = vec![0.0f64; kn * kn];
    let mut dense_rhs = vec![0.0f64; kn];
    let mut ops = Vec::new();
    for (fi, &f) in freqs.iter().enumerate() {
        let omega = TAU * f;
        let pml = PmlProfile::new(&g, omega, 2.5).unwrap();
        let dxx = mesh::second_derivative(&g, Axis::X, Some(&pml));
        let dzz = mesh::second_derivative(&g, Axis::Z, Some(&pml));
        let u = Mat::from_fn(2 * n, n_s, |i, j| {
            Complex64::new(
                wobble(i + 997 * j, 7.5 + fi as f64),
                wobble(i + 997 * j, 8.6 + fi as f64),
            )
        });
        let b = Mat::from_fn(2 * n, n_s, |i, j| {
            Complex64::new(
                wobble(i + 883 * j, 9.7 + fi as f64),
                wobble(i + 883 * j, 0.8 + fi as f64),
            )
        });
        for j in 0..n_s {
            let u_col = mat_column(&u, j);
            let b_col = mat_column(&b, j);
            let lin = Linearization::new(omega, &dxx, &dzz, &u_col).unwrap();
            let l = lin.l_matrix_full(&active).to_dense();
            let y = lin.shift_full(&active, &model, &b_col).unwrap();
            // N += lambda1 Re(L^H L); rhs += lambda1 Re(L^H y)
            for r in 0..2 * n {
                for a in 0..kn {
                    let la = l[r * kn + a];
                    if la == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    dense_rhs[a] += lambda1 * (la.conj() * y[r]).re;
                    for c in 0..kn {
                        let lc = l[r * kn + c];
                        if lc != Complex64::new(0.0, 0.0) {
                            dense_n[a * kn + c] += lambda1 * (la.conj() * lc).re;
                        }
                    }
                }
            }
        }
        ops.push((omega, dxx, dzz, u, b));
    }
    // regularisation blocks
    let gx = mesh::tv_gradient(&g, Axis::X).to_dense();
    let gz = mesh::tv_gradient(&g, Axis::Z).to_dense();
    for c in 0..k {
        let base = c * n;
        for r in 0..n {
            for a in 0..n {
                let (ga, ha) = (gx[r * n + a], gz[r * n + a]);
                if ga != 0.0 {
                    dense_rhs[base + a] += gamma[c] * ga * tvx[base + r];
                }
                if ha != 0.0 {
                    dense_rhs[base + a] += gamma[c] * ha * tvz[base + r];
                }
                for b in 0..n {
                    dense_n[(base + a) * kn + (base + b)] +=
                        gamma[c] * (ga * gx[r * n + b] + ha * gz[r * n + b]);
                }
            }
        }
        for i in 0..n {
            dense_n[(base + i) * kn + (base + i)] += zeta[c];
            dense_rhs[base + i] += zeta[c] * bound[base + i];
        }
    }
    let eps_base = active.position(ModelClass::Eps).unwrap() * n;
    for i in 0..n {
        dense_n[(eps_base + i) * kn + (eps_base + i)] += prior_w;
        dense_rhs[eps_base + i] += prior_w * prior[i];
    }
    let oracle = dense_solve(kn, &to_complex(&dense_n), &to_complex(&dense_rhs)).unwrap();

    let contributions: Vec<FrequencyContribution> = ops
        .iter()
        .map(|(omega, dxx, dzz, u, b)| FrequencyContribution {
            omega: *omega,
            dxx,
            dzz,
            u,
            b,
        })
        .collect();
    let obj = ModelObjective {
        active: &active,
        lambda1,
        gamma: &gamma,
        zeta: &zeta,
        tv_target: Some((&tvx, &tvz)),
        bound_target: &bound,
        eps_prior: Some((&prior, prior_w)),
    };
    let (m_est, rel) = estimate_model(&g, &model, &contributions, &obj).unwrap();
    assert!(rel < 1e-8, "normal solve residual {rel:.3e}");
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..kn {
        num += (m_est[i] - oracle[i].re).powi(2);
        den += oracle[i].re.powi(2);
    }
    let diff = (num / den).sqrt();
    assert!(diff < 1e-10, "model step disagrees with the oracle: {diff:.3e}");
}

/// With consistent wavefields (exact solves at the current model) and no
/// regularisation, the model step returns the current model: the
/// linearisation identity makes it an exact root of the normal equations.
#[test]
fn model_step_reproduces_the_model_behind_consistent_fields() {
    let g = Grid::with_interior(10, 8, 0.05, 0.05, 2, false).unwrap();
    let n = g.n();
    let active = ActiveSet::new(&[ModelClass::V0]).unwrap();
    let model = smooth_model(&g).to_inversion().unwrap();
    let ring = ring_positions(&g, 0.05, 3);
    let acq = Acquisition::from_positions(&g, &ring[..4], &ring).unwrap();
    let v_ref = reference_velocity(&model).unwrap();
    let mut ops = Vec::new();
    for f in [4.0, 6.0] {
        let omega = TAU * f;
        let pml = PmlProfile::new(&g, omega, v_ref).unwrap();
        let s = source_block(&g, &acq, omega);
        let u = reconstruct_wavefields(
            &g,
            &model,
            &pml,
            &acq,
            &Mat::zeros(acq.n_receivers(), acq.n_sources()),
            &s,
            f64::INFINITY,
            Step1Engine::NormalDirect,
        )
        .unwrap()
        .u;
        let dxx = mesh::second_derivative(&g, Axis::X, Some(&pml));
        let dzz = mesh::second_derivative(&g, Axis::Z, Some(&pml));
        ops.push((omega, dxx, dzz, u, s));
    }
    let contributions: Vec<FrequencyContribution> = ops
        .iter()
        .map(|(omega, dxx, dzz, u, b)| FrequencyContribution {
            omega: *omega,
            dxx,
            dzz,
            u,
            b,
        })
        .collect();
    let zeros = vec![0.0; n];
    let obj = ModelObjective {
        active: &active,
        lambda1: 1.0,
        gamma: &[0.0],
        zeta: &[0.0],
        tv_target: None,
        bound_target: &zeros,
        eps_prior: None,
    };
    let (m_est, _) = estimate_model(&g, &model, &contributions, &obj).unwrap();
    let want = model.stack(&active);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        num += (m_est[i] - want[i]).powi(2);
        den += want[i].powi(2);
    }
    let diff = (num / den).sqrt();
    assert!(diff < 1e-8, "consistent fields should return the model: {diff:.3e}");
}

/// Whole-loop fixed point: initialised at the true model with clean data and
/// the percentage rule switched off (`theta = 0`, so no TV or damping pull),
/// three full iterations must not drift away from the truth.
#[test]
fn the_scheme_is_a_fixed_point_at_the_truth_without_regularisation() {
    let g = Grid::with_interior(14, 12, 0.05, 0.05, 3, false).unwrap();
    let mut truth = PhysicalModel::constant(g.n(), 2.0, 0.05, 0.02);
    for ix in 0..g.nx {
        for iz in 0..g.nz {
            let (cx, cz) = (g.nx as f64 / 2.0, g.nz as f64 / 2.0);
            if (ix as f64 - cx).abs() < 2.5 && (iz as f64 - cz).abs() < 2.5 {
                truth.v0[g.idx(ix, iz)] = 2.2;
            }
        }
    }
    let m_true = truth.to_inversion().unwrap();
    let ring = ring_positions(&g, 0.05, 5);
    let acq = Acquisition::from_positions(&g, &ring[..8], &ring).unwrap();
    let data = synthesize(&g, &m_true, &acq, &[4.0, 6.0]).unwrap();
    let active = ActiveSet::new(&[ModelClass::V0]).unwrap();
    let mut config = InversionConfig::new(active.clone());
    config.penalty.theta_percent = 0.0;
    config.stop.max_iterations = 3;
    config.stop.eps_bilinear = 0.0; // force all three iterations
    config.stop.eps_data = 0.0;
    let mut inv = Inversion::new(&g, &acq, &data, m_true.clone(), config).unwrap();
    inv.run_batch(0, &[4.0, 6.0]).unwrap();
    assert_eq!(inv.records.len(), 3);
    let got = inv.model.stack(&active);
    let want = m_true.stack(&active);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..got.len() {
        num += (got[i] - want[i]).powi(2);
        den += want[i].powi(2);
    }
    let drift = (num / den).sqrt();
    assert!(drift < 1e-6, "truth is not a fixed point: drift {drift:.3e}");
    for rec in &inv.records {
        assert!(rec.step1_rel_residual < 1e-8);
        assert!(rec.step2_rel_residual < 1e-8);
        assert!(rec.theta.iter().all(|&t| t == 0.0));
    }
}
