//! Run outputs: model binaries, iteration logs, profiles and images.
//!
//! Everything is written deterministically — the same artifacts produce the
//! same bytes — so reruns can be compared with `diff -r`. Floats are printed
//! with Rust's shortest round-trip formatting, which preserves them exactly.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;
use image::{GrayImage, Luma};
use wri_core::inversion::{IterationRecord, LandscapeResult};
use wri_core::medium::{write_field, PhysicalModel};
use wri_core::mesh::Grid;

use crate::config::OutputConfig;
use crate::experiments::RunArtifacts;

/// Write every artifact of an inversion run into `dir`.
pub fn write_run(dir: &Path, run: &RunArtifacts) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.toml"), run.config.to_toml()?)?;
    for (stage, model) in [
        ("true", &run.truth),
        ("initial", &run.initial),
        ("final", &run.final_model),
    ] {
        write_model(dir, &run.grid, stage, model)?;
        write_images(dir, &run.grid, stage, model, &run.config.output)?;
    }
    std::fs::write(dir.join("iterations.csv"), iterations_csv(&run.records))?;
    write_sections(dir, run)?;
    Ok(())
}

/// The three class fields of one model stage as flat f64 binaries.
fn write_model(
    dir: &Path,
    grid: &Grid,
    stage: &str,
    model: &PhysicalModel,
) -> anyhow::Result<()> {
    for (name, units, data) in [
        ("v0", "km/s", &model.v0),
        ("eps", "1", &model.eps),
        ("delta", "1", &model.delta),
    ] {
        let path = dir.join(format!("{stage}_{name}.bin"));
        write_field(&path, grid, name, units, data)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

/// 8-bit grayscale rendering of one field, full grid, x right and z down.
fn render(grid: &Grid, data: &[f64], clim: [f64; 2]) -> GrayImage {
    let span = (clim[1] - clim[0]).max(f64::MIN_POSITIVE);
    GrayImage::from_fn(grid.nx as u32, grid.nz as u32, |x, y| {
        let v = data[x as usize * grid.nz + y as usize];
        let t = ((v - clim[0]) / span).clamp(0.0, 1.0);
        Luma([(255.0 * t).round() as u8])
    })
}

fn write_images(
    dir: &Path,
    grid: &Grid,
    stage: &str,
    model: &PhysicalModel,
    out: &OutputConfig,
) -> anyhow::Result<()> {
    for (name, clim, data) in [
        ("v0", out.clim_v0, &model.v0),
        ("eps", out.clim_eps, &model.eps),
        ("delta", out.clim_delta, &model.delta),
    ] {
        let path = dir.join(format!("{stage}_{name}.png"));
        render(grid, data, clim)
            .save(&path)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

/// One row per iteration. Frequency lists and per-class thresholds are
/// `;`-joined so the file stays plain comma-separated.
fn iterations_csv(records: &[IterationRecord]) -> String {
    let mut s = String::from(
        "batch,iteration,freqs_hz,lambda,lambda1,theta,bilinear_residual,\
         data_residual,step1_rel_residual,step2_rel_residual,converged\n",
    );
    for r in records {
        let freqs = join(&r.freqs_hz, ";");
        let theta = join(&r.theta, ";");
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.batch,
            r.iteration,
            freqs,
            r.lambda,
            r.lambda1,
            theta,
            r.bilinear_residual,
            r.data_residual,
            r.step1_rel_residual,
            r.step2_rel_residual,
            r.converged
        )
        .unwrap();
    }
    s
}

fn join(values: &[f64], sep: &str) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(sep)
}

/// Vertical and horizontal interior profiles through the three model
/// stages, one CSV per configured cut.
fn write_sections(dir: &Path, run: &RunArtifacts) -> anyhow::Result<()> {
    let grid = &run.grid;
    let xs = grid.interior_x();
    let zs = grid.interior_z();
    let stages = [
        ("true", &run.truth),
        ("initial", &run.initial),
        ("final", &run.final_model),
    ];
    let header = "coord_km,v0_true,v0_initial,v0_final,eps_true,eps_initial,\
                  eps_final,delta_true,delta_initial,delta_final\n";

    for (k, &x_km) in run.config.output.sections_x_km.iter().enumerate() {
        let ix = xs.start + ((x_km / grid.dx).round() as usize).min(xs.len() - 1);
        let mut s = String::from(header);
        for iz in zs.clone() {
            let z = (iz - zs.start) as f64 * grid.dz;
            write!(s, "{z}").unwrap();
            for class in 0..3 {
                for (_, m) in stages {
                    let field = [&m.v0, &m.eps, &m.delta][class];
                    write!(s, ",{}", field[ix * grid.nz + iz]).unwrap();
                }
            }
            s.push('\n');
        }
        std::fs::write(dir.join(format!("section_x{k}.csv")), s)?;
    }
    for (k, &z_km) in run.config.output.sections_z_km.iter().enumerate() {
        let iz = zs.start + ((z_km / grid.dz).round() as usize).min(zs.len() - 1);
        let mut s = String::from(header);
        for ix in xs.clone() {
            let x = (ix - xs.start) as f64 * grid.dx;
            write!(s, "{x}").unwrap();
            for class in 0..3 {
                for (_, m) in stages {
                    let field = [&m.v0, &m.eps, &m.delta][class];
                    write!(s, ",{}", field[ix * grid.nz + iz]).unwrap();
                }
            }
            s.push('\n');
        }
        std::fs::write(dir.join(format!("section_z{k}.csv")), s)?;
    }
    Ok(())
}

/// Landscape scan outputs: one CSV per objective (rows are alpha, columns
/// beta, coordinates in the margin) plus the tuned penalty weight.
pub fn write_landscape(dir: &Path, scan: &LandscapeResult) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, values) in [("fwi", &scan.fwi), ("wri", &scan.wri)] {
        let mut s = String::from("alpha\\beta");
        for b in &scan.betas {
            write!(s, ",{b}").unwrap();
        }
        s.push('\n');
        for (ia, a) in scan.alphas.iter().enumerate() {
            write!(s, "{a}").unwrap();
            for ib in 0..scan.betas.len() {
                write!(s, ",{}", values[ia * scan.betas.len() + ib]).unwrap();
            }
            s.push('\n');
        }
        std::fs::write(dir.join(format!("landscape_{name}.csv")), s)?;
    }
    std::fs::write(dir.join("landscape_lambda.txt"), format!("{}\n", scan.lambda))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn the_gray_mapping_clamps_to_the_limits() {
        let grid = Grid::with_interior(4, 3, 0.01, 0.01, 1, false).unwrap();
        let mut data = vec![1.5; grid.n()];
        data[0] = -10.0;
        data[1] = 10.0;
        data[2] = 2.0;
        let img = render(&grid, &data, [1.0, 2.0]);
        assert_eq!(img.dimensions(), (grid.nx as u32, grid.nz as u32));
        assert_eq!(img.get_pixel(0, 0).0[0], 0);
        assert_eq!(img.get_pixel(0, 1).0[0], 255);
        assert_eq!(img.get_pixel(0, 2).0[0], 255);
        assert_eq!(img.get_pixel(1, 0).0[0], 128);
    }

    #[test]
    fn iteration_rows_match_the_records() {
        let records = vec![IterationRecord {
            batch: 0,
            iteration: 1,
            freqs_hz: vec![4.0, 6.0],
            lambda: 0.5,
            lambda1: 0.25,
            theta: vec![1e-3, 2e-3],
            bilinear_residual: 3.0,
            data_residual: 4.0,
            step1_rel_residual: 1e-12,
            step2_rel_residual: 1e-13,
            converged: false,
        }];
        let text = iterations_csv(&records);
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("batch,iteration"));
        let row = lines.next().unwrap();
        // Floats use Rust's shortest round-trip decimal form.
        assert_eq!(
            row,
            "0,1,4;6,0.5,0.25,0.001;0.002,3,4,0.000000000001,0.0000000000001,false"
        );
        assert!(lines.next().is_none());
    }
}
