//! End-to-end harness checks on miniature experiments: the artifact set is
//! complete, byte-deterministic, and the no-anomaly run is a fixed point.

use std::path::{Path, PathBuf};

use wri_cli::config::{
    AcquisitionSpec, ExperimentConfig, FieldInit, GridConfig, InitialSpec, ModelSpec,
    ScheduleConfig,
};
use wri_cli::experiments::{run_experiment, run_landscape};
use wri_cli::outputs::{write_landscape, write_run};

fn tiny_cfg() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::inclusion();
    cfg.grid = GridConfig {
        nx: 16,
        nz: 14,
        dx: 0.05,
        dz: 0.05,
        pml_nodes: 3,
        free_surface_top: false,
    };
    cfg.truth = ModelSpec::Inclusion {
        background: [2.0, 0.05, 0.05],
        anomaly: [2.2, 0.05, 0.05],
        center_km: [0.375, 0.325],
        radius_km: 0.12,
    };
    cfg.initial = InitialSpec {
        v0: FieldInit::Constant { value: 2.0 },
        eps: FieldInit::Constant { value: 0.05 },
        delta: FieldInit::Constant { value: 0.05 },
    };
    cfg.acquisition = AcquisitionSpec::Surrounding {
        n_sources: 8,
        n_receivers: 20,
    };
    cfg.schedule = ScheduleConfig {
        paths: vec![[4.0, 6.0]],
        count: 2,
        spacing_hz: 1.0,
        batch_size: 0,
        overlap: 0,
    };
    cfg.inversion.active = vec![wri_cli::config::ClassName::V0];
    cfg.inversion.max_iterations = 3;
    cfg.output.sections_x_km = vec![0.375];
    cfg.output.sections_z_km = vec![0.325];
    cfg
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("wri-harness-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn read_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().into_string().unwrap(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn the_artifact_set_is_complete_and_deterministic() {
    let mut cfg = tiny_cfg();
    // Push the run through the noise path too: determinism must hold with a
    // seeded noise realisation.
    cfg.noise.snr_db = 20.0;

    let run1 = run_experiment(&cfg).unwrap();
    let run2 = run_experiment(&cfg).unwrap();
    let (a, b) = (scratch("det-a"), scratch("det-b"));
    write_run(&a, &run1).unwrap();
    write_run(&b, &run2).unwrap();
    // Writing the same run again must not change a byte (idempotent emit).
    write_run(&a, &run1).unwrap();

    let fa = read_sorted(&a);
    let fb = read_sorted(&b);
    let names: Vec<&str> = fa.iter().map(|(n, _)| n.as_str()).collect();
    for expected in [
        "config.toml",
        "iterations.csv",
        "section_x0.csv",
        "section_z0.csv",
        "true_v0.bin",
        "true_v0.bin.meta",
        "initial_eps.bin",
        "final_delta.bin",
        "true_v0.png",
        "initial_eps.png",
        "final_v0.png",
        "final_delta.png",
    ] {
        assert!(names.contains(&expected), "missing {expected}: {names:?}");
    }
    assert_eq!(fa, fb, "two identical runs differ on disk");

    // Images carry the full padded grid.
    let grid = cfg.build_grid().unwrap();
    let img = image::open(a.join("final_v0.png")).unwrap();
    assert_eq!(
        (img.width(), img.height()),
        (grid.nx as u32, grid.nz as u32)
    );

    // One CSV row per recorded iteration.
    let csv = std::fs::read_to_string(a.join("iterations.csv")).unwrap();
    assert_eq!(csv.lines().count(), run1.records.len() + 1);
    assert!(!run1.records.is_empty());

    let _ = std::fs::remove_dir_all(&a);
    let _ = std::fs::remove_dir_all(&b);
}

#[test]
fn a_zero_anomaly_run_reproduces_the_initial_model() {
    let mut cfg = tiny_cfg();
    // No contrast anywhere: the initial model already explains the data.
    cfg.truth = ModelSpec::Constant {
        v0: 2.0,
        eps: 0.05,
        delta: 0.05,
    };
    let run = run_experiment(&cfg).unwrap();
    let drift = run
        .final_model
        .v0
        .iter()
        .zip(&run.initial.v0)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(drift < 1e-6, "fixed point drifted by {drift:.3e}");
}

#[test]
fn the_landscape_scan_writes_rectangular_tables() {
    let mut cfg = tiny_cfg();
    cfg.truth = ModelSpec::Inclusion {
        background: [2.0, 0.05, 0.05],
        anomaly: [2.3, 0.12, 0.05],
        center_km: [0.375, 0.325],
        radius_km: 0.15,
    };
    cfg.landscape.alpha = [0.0, 1.0];
    cfg.landscape.alpha_count = 3;
    cfg.landscape.beta = [1.0, 1.0];
    cfg.landscape.beta_count = 1;
    cfg.landscape.freq_hz = 4.0;

    let (scan, _grid) = run_landscape(&cfg).unwrap();
    assert_eq!(scan.alphas.len(), 3);
    assert_eq!(scan.betas.len(), 1);
    assert_eq!(scan.fwi.len(), 3);
    assert!(scan.lambda > 0.0);
    // Both objectives should prefer the truth (alpha = 0) over the initial
    // model (alpha = 1) on this single-anomaly line.
    assert!(scan.fwi[0] < scan.fwi[2]);
    assert!(scan.wri[0] < scan.wri[2]);

    let dir = scratch("landscape");
    write_landscape(&dir, &scan).unwrap();
    let text = std::fs::read_to_string(dir.join("landscape_wri.csv")).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("alpha\\beta"));
    assert!(rows.iter().all(|r| r.split(',').count() == 2));
    let _ = std::fs::remove_dir_all(&dir);
}
