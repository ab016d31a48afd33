//! `wri` — command line front end for the inversion experiments.

use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use wri_cli::config::{ClassName, ExperimentConfig, RegName};
use wri_cli::{experiments, outputs, validate};

#[derive(Parser)]
#[command(
    name = "wri",
    about = "Frequency-domain wavefield reconstruction inversion experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Joint anisotropic reconstruction of a circular inclusion from
    /// surrounding acquisition.
    Inclusion(RunArgs),
    /// Frequency-continuation inversion of a layered section from surface
    /// acquisition.
    Layered(RunArgs),
    /// Scan the reduced- and penalty-objective landscapes along model lines.
    Landscape(RunArgs),
    /// Forward-model the observed data and stop.
    Forward(RunArgs),
    /// Run fast self-checks of the solver building blocks.
    Validate,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment description (TOML). Defaults to the verb's canonical
    /// experiment; missing keys take their defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    /// Override the noise seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,

    /// Override the data noise level in dB (inf keeps the data exact).
    #[arg(long, value_name = "DB")]
    noise_snr: Option<f64>,

    /// Override the regularisation mode: dmp or dmp+tv.
    #[arg(long, value_parser = RegName::parse)]
    regularization: Option<RegName>,

    /// Override the active model classes (comma separated: v0,eps,delta).
    #[arg(long, value_delimiter = ',', value_parser = ClassName::parse)]
    active: Option<Vec<ClassName>>,
}

impl RunArgs {
    /// Materialise the effective config: file (or the verb's default), then
    /// command line overrides.
    fn config(&self, base: ExperimentConfig) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                ExperimentConfig::from_toml(&text)
                    .with_context(|| format!("parsing {}", path.display()))?
            }
            None => base,
        };
        if let Some(seed) = self.seed {
            cfg.noise.seed = seed;
        }
        if let Some(db) = self.noise_snr {
            cfg.noise.snr_db = db;
        }
        if let Some(reg) = self.regularization {
            cfg.inversion.regularization = reg;
        }
        if let Some(active) = &self.active {
            cfg.inversion.active = active.clone();
        }
        Ok(cfg)
    }
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run() -> anyhow::Result<()> {
    match Cli::parse().cmd {
        Cmd::Inclusion(args) => invert(&args, ExperimentConfig::inclusion()),
        Cmd::Layered(args) => invert(&args, ExperimentConfig::layered()),
        Cmd::Landscape(args) => landscape(&args),
        Cmd::Forward(args) => forward(&args),
        Cmd::Validate => {
            if validate::run_all() {
                Ok(())
            } else {
                anyhow::bail!("self-checks failed")
            }
        }
    }
}

fn invert(args: &RunArgs, base: ExperimentConfig) -> anyhow::Result<()> {
    let cfg = args.config(base)?;
    let run = experiments::run_experiment(&cfg)?;
    for r in &run.records {
        println!(
            "batch {:>2} it {:>2}  |Au-s| {:.6e}  |Pu-d| {:.6e}{}",
            r.batch,
            r.iteration,
            r.bilinear_residual,
            r.data_residual,
            if r.converged { "  converged" } else { "" }
        );
    }
    outputs::write_run(&args.out, &run)?;
    println!(
        "{} iterations over {} batches -> {}",
        run.records.len(),
        run.records.last().map_or(0, |r| r.batch + 1),
        args.out.display()
    );
    Ok(())
}

fn landscape(args: &RunArgs) -> anyhow::Result<()> {
    let cfg = args.config(ExperimentConfig::layered())?;
    let (scan, _grid) = experiments::run_landscape(&cfg)?;
    outputs::write_landscape(&args.out, &scan)?;
    println!(
        "{} x {} landscape at {} Hz (lambda {:.6e}) -> {}",
        scan.alphas.len(),
        scan.betas.len(),
        cfg.landscape.freq_hz,
        scan.lambda,
        args.out.display()
    );
    Ok(())
}

fn forward(args: &RunArgs) -> anyhow::Result<()> {
    let cfg = args.config(ExperimentConfig::inclusion())?;
    let grid = cfg.build_grid()?;
    let truth = experiments::build_truth(&cfg, &grid)?;
    let acq = experiments::build_acquisition(&cfg, &grid)?;
    let truth_m = truth.to_inversion()?;
    let data = experiments::observed_data(&cfg, &grid, &truth_m, &acq)?;
    std::fs::create_dir_all(&args.out)?;
    std::fs::write(args.out.join("config.toml"), cfg.to_toml()?)?;
    let path = args.out.join("data.bin");
    data.save(&path, acq.geometry_digest())?;
    println!(
        "{} frequencies, {} sources, {} receivers -> {}",
        data.freqs_hz.len(),
        data.n_sources(),
        data.n_receivers(),
        path.display()
    );
    Ok(())
}
