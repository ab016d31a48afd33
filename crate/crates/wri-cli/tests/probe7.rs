//! Temporary diagnostics for the inclusion acceptance criterion.

use wri_cli::config::{ClassName, ExperimentConfig, ModelSpec};
use wri_cli::experiments::{run_experiment, RunArtifacts};
use wri_core::medium::ModelClass;

fn stats(run: &RunArtifacts) {
    let g = &run.grid;
    let xs = g.interior_x();
    let zs = g.interior_z();
    let (cx, cz, radius) = match &run.config.truth {
        ModelSpec::Inclusion { center_km, radius_km, .. } => {
            (center_km[0], center_km[1], *radius_km)
        }
        _ => unreachable!(),
    };
    for class in ModelClass::ALL {
        let (f, t) = match class {
            ModelClass::V0 => (&run.final_model.v0, &run.truth.v0),
            ModelClass::Eps => (&run.final_model.eps, &run.truth.eps),
            ModelClass::Delta => (&run.final_model.delta, &run.truth.delta),
        };
        let mut disc = Vec::new();
        let mut bg = Vec::new();
        for ix in xs.clone() {
            for iz in zs.clone() {
                let x = (ix - xs.start) as f64 * g.dx;
                let z = (iz - zs.start) as f64 * g.dz;
                let i = ix * g.nz + iz;
                let r = (x - cx).hypot(z - cz);
                if r <= radius {
                    disc.push(f[i]);
                } else if r > radius + 3.0 * g.dx {
                    bg.push((f[i] - t[i]).abs());
                }
            }
        }
        let dmean = disc.iter().sum::<f64>() / disc.len() as f64;
        let dmax = disc.iter().cloned().fold(f64::MIN, f64::max);
        let dmin = disc.iter().cloned().fold(f64::MAX, f64::min);
        let bgrms = (bg.iter().map(|e| e * e).sum::<f64>() / bg.len() as f64).sqrt();
        println!(
            "  {:5}: disc mean {dmean:.4} min {dmin:.4} max {dmax:.4}  bg rms dev {bgrms:.5}",
            class.name()
        );
        // center row profile through the disc (z = cz)
        let iz_c = zs.start + (cz / g.dz).round() as usize;
        let profile: Vec<f64> = xs
            .clone()
            .filter(|ix| {
                let x = (ix - xs.start) as f64 * g.dx;
                (x - cx).abs() <= 2.5 * radius
            })
            .map(|ix| f[ix * g.nz + iz_c])
            .collect();
        let prof_str: Vec<String> = profile.iter().map(|v| format!("{v:.3}")).collect();
        println!("         profile: {}", prof_str.join(" "));
    }
    println!("  iterations: {}", run.records.len());
    for rec in run.records.iter().take(4) {
        println!(
            "    it {:2} lambda1 {:.3e} theta {:?} bilin {:.3e} data {:.3e}",
            rec.iteration, rec.lambda1, rec.theta, rec.bilinear_residual, rec.data_residual
        );
    }
    if let Some(rec) = run.records.last() {
        println!(
            "    it {:2} lambda1 {:.3e} theta {:?} bilin {:.3e} data {:.3e}",
            rec.iteration, rec.lambda1, rec.theta, rec.bilinear_residual, rec.data_residual
        );
    }
}

#[test]
fn probe_joint_tv() {
    let cfg = ExperimentConfig::inclusion();
    let run = run_experiment(&cfg).unwrap();
    println!("joint TV:");
    stats(&run);
}

#[test]
fn probe_mono_delta_tv() {
    let mut cfg = ExperimentConfig::inclusion();
    cfg.truth = ModelSpec::Inclusion {
        background: [3.0, 0.05, 0.05],
        anomaly: [3.0, 0.05, 0.1],
        center_km: [0.64, 0.64],
        radius_km: 0.1,
    };
    cfg.inversion.active = vec![ClassName::Delta];
    let run = run_experiment(&cfg).unwrap();
    println!("mono delta TV:");
    stats(&run);
}
