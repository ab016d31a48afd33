//! Fast end-to-end self-checks.
//!
//! `wri validate` runs these on tiny grids in a few seconds. They exercise
//! the public solver surface — field reconstruction, proximal operators,
//! noise calibration, the no-anomaly fixed point — and print one PASS/FAIL
//! line each, so a broken build or an unsound numeric environment shows up
//! before hours are spent on a real run.

use wri_core::inversion::{
    project_bounds, reconstruct_wavefields, tv_prox, Inversion, Step1Engine,
};
use wri_core::medium::{ActiveSet, ModelClass, PhysicalModel};
use wri_core::mesh::Grid;
use wri_core::survey::{make_surrounding_acquisition, mat_norm, synthesize};

struct Check {
    name: &'static str,
    run: fn() -> Result<(), String>,
}

const CHECKS: &[Check] = &[
    Check {
        name: "engines agree on consistent data",
        run: engines_agree,
    },
    Check {
        name: "tv shrinkage and dead zone",
        run: tv_shrinkage,
    },
    Check {
        name: "bound projection",
        run: bound_projection,
    },
    Check {
        name: "noise calibration",
        run: noise_calibration,
    },
    Check {
        name: "no-anomaly run is a fixed point",
        run: fixed_point,
    },
];

/// Run every check, printing one line per check. Returns whether all passed.
pub fn run_all() -> bool {
    let mut ok = true;
    for check in CHECKS {
        match (check.run)() {
            Ok(()) => println!("PASS {}", check.name),
            Err(why) => {
                ok = false;
                println!("FAIL {}: {why}", check.name);
            }
        }
    }
    ok
}

fn tiny() -> Result<(Grid, PhysicalModel, wri_core::survey::Acquisition), String> {
    let grid = Grid::with_interior(14, 12, 0.05, 0.05, 3, false).map_err(|e| e.to_string())?;
    let mut model = PhysicalModel {
        v0: vec![2.0; grid.n()],
        eps: vec![0.08; grid.n()],
        delta: vec![0.04; grid.n()],
    };
    // A soft box anomaly keeps the medium inhomogeneous.
    let xs = grid.interior_x();
    let zs = grid.interior_z();
    for ix in xs.start + 4..xs.start + 9 {
        for iz in zs.start + 3..zs.start + 8 {
            model.v0[ix * grid.nz + iz] = 2.2;
        }
    }
    let acq = make_surrounding_acquisition(&grid, 8, 20).map_err(|e| e.to_string())?;
    Ok((grid, model, acq))
}

fn engines_agree() -> Result<(), String> {
    let (grid, model, acq) = tiny()?;
    let m = model.to_inversion().map_err(|e| e.to_string())?;
    let freqs = [5.0];
    let data = synthesize(&grid, &m, &acq, &freqs).map_err(|e| e.to_string())?;
    let pml = wri_core::mesh::PmlProfile::new(
        &grid,
        std::f64::consts::TAU * freqs[0],
        wri_core::survey::reference_velocity(&m).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let lambda = 1e-3;
    let sources = wri_core::survey::source_block(&grid, &acq, std::f64::consts::TAU * freqs[0]);
    let mut fields = Vec::new();
    for engine in [Step1Engine::NormalDirect, Step1Engine::FourthOrder] {
        let sol = reconstruct_wavefields(
            &grid,
            &m,
            &pml,
            &acq,
            &data.records[0],
            &sources,
            lambda,
            engine,
        )
        .map_err(|e| e.to_string())?;
        fields.push(sol.u);
    }
    let diff = mat_norm(&(&fields[0] - &fields[1]));
    let scale = mat_norm(&fields[0]);
    let rel = diff / scale;
    if rel > 1e-8 {
        return Err(format!("engines differ by {rel:.3e} (tolerance 1e-8)"));
    }
    Ok(())
}

fn tv_shrinkage() -> Result<(), String> {
    // Inside the dead zone gamma * r <= 1 the prox is exactly zero.
    let (px, pz) = tv_prox(&[0.3], &[0.4], 2.0);
    if px[0] != 0.0 || pz[0] != 0.0 {
        return Err(format!("dead zone leaked: ({}, {})", px[0], pz[0]));
    }
    // Outside it shrinks the magnitude by exactly 1/gamma.
    let (px, pz) = tv_prox(&[3.0], &[4.0], 2.0);
    let r = (px[0] * px[0] + pz[0] * pz[0]).sqrt();
    if (r - (5.0 - 0.5)).abs() > 1e-12 {
        return Err(format!("shrunk magnitude {r}, expected 4.5"));
    }
    Ok(())
}

fn bound_projection() -> Result<(), String> {
    let x = [0.1, 0.5, 0.9];
    let lo = [0.2, 0.2, 0.2];
    let hi = [0.8, 0.8, 0.8];
    let p = project_bounds(&x, &lo, &hi);
    let q = project_bounds(&p, &lo, &hi);
    if p != vec![0.2, 0.5, 0.8] {
        return Err(format!("projection produced {p:?}"));
    }
    if p != q {
        return Err("projection is not idempotent".into());
    }
    Ok(())
}

fn noise_calibration() -> Result<(), String> {
    let (grid, model, acq) = tiny()?;
    let m = model.to_inversion().map_err(|e| e.to_string())?;
    let clean = synthesize(&grid, &m, &acq, &[5.0, 7.0]).map_err(|e| e.to_string())?;
    let mut noisy = clean.clone();
    noisy.add_noise(10.0, 7);
    let norms = noisy
        .noise_norms
        .as_ref()
        .ok_or("no noise norms recorded")?;
    for (fi, &n) in norms.iter().enumerate() {
        let s = clean.record_norm(fi);
        let snr = 20.0 * (s / n).log10();
        if (snr - 10.0).abs() > 0.5 {
            return Err(format!("frequency {fi}: achieved {snr:.2} dB, wanted 10"));
        }
    }
    Ok(())
}

fn fixed_point() -> Result<(), String> {
    let (grid, model, acq) = tiny()?;
    let m = model.to_inversion().map_err(|e| e.to_string())?;
    let data = synthesize(&grid, &m, &acq, &[5.0, 7.0]).map_err(|e| e.to_string())?;
    let active = ActiveSet::new(&[ModelClass::V0, ModelClass::Eps]).map_err(|e| e.to_string())?;
    let mut cfg = wri_core::inversion::InversionConfig::new(active);
    cfg.stop.max_iterations = 2;
    let mut inv = Inversion::new(&grid, &acq, &data, m.clone(), cfg).map_err(|e| e.to_string())?;
    inv.run_batch(0, &[5.0, 7.0]).map_err(|e| e.to_string())?;
    let drift = inv
        .model
        .m_v0
        .iter()
        .zip(&m.m_v0)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if drift > 1e-6 {
        return Err(format!("true-model start drifted by {drift:.3e}"));
    }
    Ok(())
}
