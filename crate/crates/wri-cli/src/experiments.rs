//! Experiment assembly and execution.
//!
//! Turns an [`ExperimentConfig`] into grids, models, acquisitions and data,
//! then drives the inversion (or the misfit-landscape scan) and collects
//! everything the output writers need.

use anyhow::{bail, Context};
use wri_core::inversion::{
    objective_landscape, Inversion, IterationRecord, LandscapeResult,
};
use wri_core::medium::{InversionModel, ModelClass, PhysicalModel};
use wri_core::mesh::Grid;
use wri_core::survey::{
    make_surface_acquisition, make_surrounding_acquisition, synthesize, Acquisition,
    DataSet,
};

use crate::config::{
    AcquisitionSpec, ExperimentConfig, FieldInit, ModelSpec,
};

/// Everything a finished inversion run leaves behind.
pub struct RunArtifacts {
    pub config: ExperimentConfig,
    pub grid: Grid,
    pub truth: PhysicalModel,
    pub initial: PhysicalModel,
    pub final_model: PhysicalModel,
    pub records: Vec<IterationRecord>,
}

/// Interior-relative x coordinate of a full-grid column, clamped into the
/// interior so collar nodes take the nearest interior value.
fn interior_x_km(grid: &Grid, ix: usize) -> f64 {
    let xs = grid.interior_x();
    let i = ix.clamp(xs.start, xs.end - 1);
    (i - xs.start) as f64 * grid.dx
}

fn interior_z_km(grid: &Grid, iz: usize) -> f64 {
    let zs = grid.interior_z();
    let i = iz.clamp(zs.start, zs.end - 1);
    (i - zs.start) as f64 * grid.dz
}

/// Evaluate `f(x, z)` (interior km) on the full grid, collar clamped.
fn field_from(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.n());
    for ix in 0..grid.nx {
        let x = interior_x_km(grid, ix);
        for iz in 0..grid.nz {
            out.push(f(x, interior_z_km(grid, iz)));
        }
    }
    out
}

/// Piecewise-constant-in-depth lookup.
fn layer_value(interfaces_km: &[f64], values: &[f64], z: f64) -> f64 {
    let k = interfaces_km.iter().take_while(|&&d| z >= d).count();
    values[k]
}

/// Build the true physical model on the full grid.
pub fn build_truth(cfg: &ExperimentConfig, grid: &Grid) -> anyhow::Result<PhysicalModel> {
    let one = |sel: fn(&[f64; 3]) -> f64, name: &str| -> anyhow::Result<Vec<f64>> {
        match &cfg.truth {
            ModelSpec::Constant { v0, eps, delta } => {
                let v = sel(&[*v0, *eps, *delta]);
                Ok(vec![v; grid.n()])
            }
            ModelSpec::Inclusion {
                background,
                anomaly,
                center_km,
                radius_km,
            } => {
                let (bg, an) = (sel(background), sel(anomaly));
                let (cx, cz, r2) = (center_km[0], center_km[1], radius_km * radius_km);
                Ok(field_from(grid, |x, z| {
                    let (dx, dz) = (x - cx, z - cz);
                    if dx * dx + dz * dz <= r2 {
                        an
                    } else {
                        bg
                    }
                }))
            }
            ModelSpec::Layers {
                interfaces_km,
                v0,
                eps,
                delta,
            } => {
                let values = match name {
                    "v0" => v0,
                    "eps" => eps,
                    _ => delta,
                };
                if values.len() != interfaces_km.len() + 1 {
                    bail!(
                        "layer spec: {} {} values for {} interfaces",
                        values.len(),
                        name,
                        interfaces_km.len()
                    );
                }
                if interfaces_km.windows(2).any(|w| w[0] >= w[1]) {
                    bail!("layer interfaces must increase with depth");
                }
                let (ifs, vals) = (interfaces_km.clone(), values.clone());
                Ok(field_from(grid, move |_, z| layer_value(&ifs, &vals, z)))
            }
        }
    };
    Ok(PhysicalModel {
        v0: one(|v| v[0], "v0")?,
        eps: one(|v| v[1], "eps")?,
        delta: one(|v| v[2], "delta")?,
    })
}

/// Separable Gaussian blur with an edge-renormalised truncated kernel
/// (kernel support 3 sigma). Used to manufacture smooth starting models
/// from the truth.
pub fn gaussian_smooth(grid: &Grid, field: &[f64], sigma_km: f64) -> Vec<f64> {
    let mut out = field.to_vec();
    for (axis_n, stride, other_n, sigma_cells) in [
        (grid.nx, grid.nz, grid.nz, sigma_km / grid.dx),
        (grid.nz, 1usize, grid.nx, sigma_km / grid.dz),
    ] {
        if sigma_cells <= 0.0 {
            continue;
        }
        let half = (3.0 * sigma_cells).ceil() as i64;
        let kernel: Vec<f64> = (-half..=half)
            .map(|k| (-0.5 * (k as f64 / sigma_cells).powi(2)).exp())
            .collect();
        let src = out.clone();
        for j in 0..other_n {
            // Start index of this line in the flat ix*nz + iz layout.
            let base = if stride == 1 { j * grid.nz } else { j };
            for i in 0..axis_n {
                let mut acc = 0.0;
                let mut wsum = 0.0;
                for (ki, w) in kernel.iter().enumerate() {
                    let p = i as i64 + ki as i64 - half;
                    if p < 0 || p >= axis_n as i64 {
                        continue;
                    }
                    acc += w * src[base + p as usize * stride];
                    wsum += w;
                }
                out[base + i * stride] = acc / wsum;
            }
        }
    }
    out
}

/// Build the starting physical model from the truth and the per-class
/// recipes.
pub fn build_initial(
    cfg: &ExperimentConfig,
    grid: &Grid,
    truth: &PhysicalModel,
) -> anyhow::Result<PhysicalModel> {
    let one = |init: &FieldInit, true_field: &[f64]| -> Vec<f64> {
        match init {
            FieldInit::True => true_field.to_vec(),
            FieldInit::Constant { value } => vec![*value; grid.n()],
            FieldInit::VerticalGradient { top, bottom } => {
                let depth = (grid.interior_z().len() - 1) as f64 * grid.dz;
                field_from(grid, |_, z| top + (bottom - top) * z / depth)
            }
            FieldInit::SmoothedTrue { sigma_km } => {
                gaussian_smooth(grid, true_field, *sigma_km)
            }
        }
    };
    Ok(PhysicalModel {
        v0: one(&cfg.initial.v0, &truth.v0),
        eps: one(&cfg.initial.eps, &truth.eps),
        delta: one(&cfg.initial.delta, &truth.delta),
    })
}

/// Build the acquisition.
pub fn build_acquisition(cfg: &ExperimentConfig, grid: &Grid) -> anyhow::Result<Acquisition> {
    let acq = match cfg.acquisition {
        AcquisitionSpec::Surrounding {
            n_sources,
            n_receivers,
        } => make_surrounding_acquisition(grid, n_sources, n_receivers)?,
        AcquisitionSpec::Surface {
            source_spacing_km,
            receiver_spacing_km,
            source_depth_km,
            receiver_depth_km,
        } => make_surface_acquisition(
            grid,
            source_spacing_km,
            receiver_spacing_km,
            (source_depth_km, receiver_depth_km),
        )?,
    };
    Ok(acq)
}

/// Forward-model the observed data for a config: truth model, scheduled
/// frequencies, optional additive noise.
pub fn observed_data(
    cfg: &ExperimentConfig,
    grid: &Grid,
    truth: &InversionModel,
    acq: &Acquisition,
) -> anyhow::Result<DataSet> {
    let freqs = cfg.schedule.all_frequencies();
    if freqs.is_empty() {
        bail!("the frequency schedule is empty");
    }
    let mut data =
        synthesize(grid, truth, acq, &freqs).context("forward modelling the observed data")?;
    data.add_noise(cfg.noise.snr_db, cfg.noise.seed);
    Ok(data)
}

/// Run a full inversion experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> anyhow::Result<RunArtifacts> {
    let grid = cfg.build_grid()?;
    let truth = build_truth(cfg, &grid)?;
    let initial = build_initial(cfg, &grid, &truth)?;
    let acq = build_acquisition(cfg, &grid)?;
    let truth_m = truth.to_inversion()?;
    let initial_m = initial.to_inversion()?;
    let data = observed_data(cfg, &grid, &truth_m, &acq)?;

    let mut inv_cfg = cfg.inversion_config()?;
    if cfg.inversion.use_eps_prior
        && inv_cfg.active.contains(ModelClass::Eps)
    {
        inv_cfg.eps_prior = Some(initial_m.m_eps.clone());
    }

    let mut inv = Inversion::new(&grid, &acq, &data, initial_m, inv_cfg)?;
    for (b, batch) in cfg.schedule.batches().iter().enumerate() {
        inv.run_batch(b, batch)
            .with_context(|| format!("inverting batch {b} ({batch:?} Hz)"))?;
    }

    let final_model = inv.model.to_physical()?;
    let records = std::mem::take(&mut inv.records);
    drop(inv);
    Ok(RunArtifacts {
        config: cfg.clone(),
        grid,
        truth,
        initial,
        final_model,
        records,
    })
}

/// Scan the reduced and penalty objectives along model-space lines: alpha
/// blends the v0 field from the truth (0) towards the initial model
/// (|alpha| = 1), beta does the same for eps.
pub fn run_landscape(cfg: &ExperimentConfig) -> anyhow::Result<(LandscapeResult, Grid)> {
    let grid = cfg.build_grid()?;
    let truth = build_truth(cfg, &grid)?;
    let initial = build_initial(cfg, &grid, &truth)?;
    let acq = build_acquisition(cfg, &grid)?;
    let truth_m = truth.to_inversion()?;
    let initial_m = initial.to_inversion()?;

    let mut data_cfg = cfg.clone();
    data_cfg.schedule.paths = vec![[cfg.landscape.freq_hz, cfg.landscape.freq_hz]];
    data_cfg.schedule.count = 1;
    let data = observed_data(&data_cfg, &grid, &truth_m, &acq)?;

    let result = objective_landscape(
        &grid,
        &acq,
        &data,
        &truth_m,
        &initial_m,
        &cfg.landscape.alphas(),
        &cfg.landscape.betas(),
        cfg.inversion.ratio_fraction,
        cfg.inversion.power_seed,
        cfg.inversion.engine.to_core(),
    )?;
    Ok((result, grid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::GridConfig;

    fn small_grid() -> Grid {
        Grid::with_interior(16, 12, 0.05, 0.05, 3, false).unwrap()
    }

    #[test]
    fn the_inclusion_truth_has_the_right_anomaly_footprint() {
        let cfg = ExperimentConfig::inclusion();
        let grid = cfg.build_grid().unwrap();
        let truth = build_truth(&cfg, &grid).unwrap();
        let xs = grid.interior_x();
        let zs = grid.interior_z();
        // Centre node is inside the disc, corners are background.
        let center = (xs.start + 32) * grid.nz + zs.start + 32;
        let corner = xs.start * grid.nz + zs.start;
        assert_eq!(truth.v0[center], 3.3);
        assert_eq!(truth.eps[center], 0.2);
        assert_eq!(truth.delta[center], 0.1);
        assert_eq!(truth.v0[corner], 3.0);
        // Disc area: radius 5 cells on a 20 m grid -> about 81 nodes.
        let inside = truth.v0.iter().filter(|&&v| v == 3.3).count();
        assert!((60..110).contains(&inside), "disc covers {inside} nodes");
    }

    #[test]
    fn layer_fields_follow_depth_and_clamp_into_the_collar() {
        let cfg = ExperimentConfig::layered();
        let grid = cfg.build_grid().unwrap();
        let truth = build_truth(&cfg, &grid).unwrap();
        let xs = grid.interior_x();
        let zs = grid.interior_z();
        let at = |ix: usize, iz: usize| truth.v0[ix * grid.nz + iz];
        // Top interior row is water; collar above copies it.
        assert_eq!(at(xs.start + 5, zs.start), 1.5);
        assert_eq!(at(xs.start + 5, 0), 1.5);
        // Bottom interior row is basement; collar below copies it.
        assert_eq!(at(xs.start + 5, zs.end - 1), 4.5);
        assert_eq!(at(xs.start + 5, grid.nz - 1), 4.5);
        // The low-velocity zone sits between 0.7 and 0.85 km depth.
        let lvz = zs.start + (0.75 / grid.dz) as usize;
        assert_eq!(at(xs.start + 5, lvz), 1.75);
    }

    #[test]
    fn the_gradient_start_is_linear_in_depth_only() {
        let cfg = ExperimentConfig::layered();
        let grid = cfg.build_grid().unwrap();
        let truth = build_truth(&cfg, &grid).unwrap();
        let init = build_initial(&cfg, &grid, &truth).unwrap();
        let xs = grid.interior_x();
        let zs = grid.interior_z();
        let at = |ix: usize, iz: usize| init.v0[ix * grid.nz + iz];
        assert!((at(xs.start, zs.start) - 1.5).abs() < 1e-12);
        assert!((at(xs.start + 50, zs.end - 1) - 3.2).abs() < 1e-12);
        let mid = at(xs.start + 10, zs.start + (zs.len() - 1) / 2);
        assert!((mid - 0.5 * (1.5 + 3.2)).abs() < 0.02);
        // Same value across a row.
        assert_eq!(at(xs.start + 3, zs.start + 7), at(xs.start + 60, zs.start + 7));
    }

    #[test]
    fn smoothing_preserves_constants_and_the_mean() {
        let grid = small_grid();
        let flat = vec![1.7; grid.n()];
        let sm = gaussian_smooth(&grid, &flat, 0.12);
        assert!(sm.iter().all(|&v| (v - 1.7).abs() < 1e-12));

        // A spike spreads but no new extrema appear.
        let mut spike = vec![0.0; grid.n()];
        spike[grid.n() / 2 + 3] = 1.0;
        let sm = gaussian_smooth(&grid, &spike, 0.1);
        assert!(sm.iter().all(|&v| (-1e-12..=1.0).contains(&v)));
        assert!(sm.iter().sum::<f64>() > 0.0);
        let peak = sm.iter().cloned().fold(0.0, f64::max);
        assert!(peak < 0.5, "spike should flatten, peak = {peak}");
    }

    #[test]
    fn truth_initial_and_acquisition_line_up_with_the_grid() {
        let mut cfg = ExperimentConfig::inclusion();
        cfg.grid = GridConfig {
            nx: 16,
            nz: 12,
            ..GridConfig::default()
        };
        cfg.acquisition = crate::config::AcquisitionSpec::Surrounding {
            n_sources: 12,
            n_receivers: 24,
        };
        let grid = cfg.build_grid().unwrap();
        let truth = build_truth(&cfg, &grid).unwrap();
        let init = build_initial(&cfg, &grid, &truth).unwrap();
        assert_eq!(truth.v0.len(), grid.n());
        assert_eq!(init.eps.len(), grid.n());
        let acq = build_acquisition(&cfg, &grid).unwrap();
        assert_eq!(acq.n_sources(), 12);
        assert_eq!(acq.n_receivers(), 24);
    }
}
