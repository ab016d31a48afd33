//! Experiment configuration.
//!
//! Everything a run needs — grid, models, acquisition, frequency schedule,
//! solver knobs, noise, output conventions — lives in one flat structured
//! TOML file. Every field has a default (the circular-inclusion experiment),
//! so an empty file is a valid config; unknown keys are rejected rather than
//! silently ignored, and parse → serialize → parse is the identity.

use serde::{Deserialize, Serialize};
use wri_core::inversion::{
    InversionConfig, PenaltyConfig, Regularization, Step1Engine, StopRule,
};
use wri_core::medium::{ActiveSet, ModelClass, PhysicalBounds};
use wri_core::mesh::Grid;
use wri_core::Result;

/// Complete description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub truth: ModelSpec,
    pub initial: InitialSpec,
    pub acquisition: AcquisitionSpec,
    pub schedule: ScheduleConfig,
    pub inversion: InversionKnobs,
    pub bounds: BoundsConfig,
    pub noise: NoiseConfig,
    pub landscape: LandscapeConfig,
    pub output: OutputConfig,
}

/// Interior discretisation plus the absorbing collar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Interior nodes along x.
    pub nx: usize,
    /// Interior nodes along z.
    pub nz: usize,
    /// Node spacing along x in km.
    pub dx: f64,
    /// Node spacing along z in km.
    pub dz: f64,
    /// Absorbing collar width in nodes on each padded side.
    pub pml_nodes: usize,
    /// Replace the top collar with a pressure-free surface.
    pub free_surface_top: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        // 1.28 x 1.28 km interior at 20 m spacing.
        GridConfig {
            nx: 64,
            nz: 64,
            dx: 0.02,
            dz: 0.02,
            pml_nodes: 10,
            free_surface_top: false,
        }
    }
}

/// True subsurface model. Values are physical units: `v0` km/s, `eps` and
/// `delta` dimensionless Thomsen parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    /// Homogeneous medium.
    Constant { v0: f64, eps: f64, delta: f64 },
    /// Homogeneous background with one circular anomaly. `background` and
    /// `anomaly` are `[v0, eps, delta]`; classes whose anomaly value equals
    /// the background carry no contrast.
    Inclusion {
        background: [f64; 3],
        anomaly: [f64; 3],
        /// Disc centre in interior km, `[x, z]`.
        center_km: [f64; 2],
        radius_km: f64,
    },
    /// Flat layers. `interfaces_km` are the `k` interface depths (interior
    /// km, increasing); the three value lists hold `k + 1` entries, top
    /// layer first.
    Layers {
        interfaces_km: Vec<f64>,
        v0: Vec<f64>,
        eps: Vec<f64>,
        delta: Vec<f64>,
    },
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Inclusion {
            background: [3.0, 0.05, 0.05],
            anomaly: [3.3, 0.2, 0.1],
            center_km: [0.64, 0.64],
            radius_km: 0.1,
        }
    }
}

/// How one starting-model field is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum FieldInit {
    /// Copy the true field (inverse crime on purpose, e.g. passive classes).
    True,
    /// Homogeneous value.
    Constant { value: f64 },
    /// Linear in depth from `top` at z = 0 to `bottom` at the interior floor.
    VerticalGradient { top: f64, bottom: f64 },
    /// Gaussian blur of the true field with the given standard deviation.
    SmoothedTrue { sigma_km: f64 },
}

/// Starting model, one recipe per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSpec {
    pub v0: FieldInit,
    pub eps: FieldInit,
    pub delta: FieldInit,
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec {
            v0: FieldInit::Constant { value: 3.0 },
            eps: FieldInit::Constant { value: 0.05 },
            delta: FieldInit::Constant { value: 0.05 },
        }
    }
}

/// Source/receiver layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum AcquisitionSpec {
    /// Sources and receivers spread uniformly along the interior perimeter.
    Surrounding { n_sources: usize, n_receivers: usize },
    /// Two horizontal lines spanning the interior width.
    Surface {
        source_spacing_km: f64,
        receiver_spacing_km: f64,
        source_depth_km: f64,
        receiver_depth_km: f64,
    },
}

impl Default for AcquisitionSpec {
    fn default() -> Self {
        AcquisitionSpec::Surrounding {
            n_sources: 64,
            n_receivers: 320,
        }
    }
}

/// Frequency schedule: an ordered list of `[start, stop]` Hz paths, each
/// discretised and split into batches that are inverted in sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub paths: Vec<[f64; 2]>,
    /// Evenly spaced frequencies per path; 0 means derive the count from
    /// `spacing_hz` instead.
    pub count: usize,
    /// Frequency spacing within a path, used only when `count` is 0.
    pub spacing_hz: f64,
    /// Frequencies per batch; 0 means invert the whole path as one batch.
    pub batch_size: usize,
    /// Frequencies shared between consecutive batches.
    pub overlap: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        // Nine frequencies inverted jointly.
        ScheduleConfig {
            paths: vec![[4.8, 19.5]],
            count: 9,
            spacing_hz: 0.5,
            batch_size: 0,
            overlap: 0,
        }
    }
}

impl ScheduleConfig {
    /// Frequencies of one path, low to high.
    pub fn path_frequencies(&self, path: [f64; 2]) -> Vec<f64> {
        let [start, stop] = path;
        if self.count > 0 {
            if self.count == 1 {
                return vec![start];
            }
            let step = (stop - start) / (self.count - 1) as f64;
            return (0..self.count).map(|i| start + step * i as f64).collect();
        }
        wri_core::inversion::path_frequencies(start, stop, self.spacing_hz)
    }

    /// All batches of all paths, in inversion order.
    pub fn batches(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for &path in &self.paths {
            let freqs = self.path_frequencies(path);
            if self.batch_size == 0 {
                out.push(freqs);
            } else {
                out.extend(wri_core::inversion::frequency_batches(
                    &freqs,
                    self.batch_size,
                    self.overlap,
                ));
            }
        }
        out
    }

    /// Sorted, deduplicated union of every batch — the frequencies the
    /// observed data set must contain.
    pub fn all_frequencies(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.batches().into_iter().flatten().collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        all.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        all
    }
}

/// Model class names as they appear in config files and `--active` flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassName {
    V0,
    Eps,
    Delta,
}

impl ClassName {
    pub fn to_core(self) -> ModelClass {
        match self {
            ClassName::V0 => ModelClass::V0,
            ClassName::Eps => ModelClass::Eps,
            ClassName::Delta => ModelClass::Delta,
        }
    }

    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "v0" => Ok(ClassName::V0),
            "eps" => Ok(ClassName::Eps),
            "delta" => Ok(ClassName::Delta),
            other => Err(format!(
                "unknown model class '{other}' (expected v0, eps or delta)"
            )),
        }
    }
}

/// Regularisation mode names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegName {
    /// Bound constraints only.
    #[serde(rename = "dmp")]
    Dmp,
    /// Bound constraints plus total variation.
    #[serde(rename = "dmp+tv")]
    DmpTv,
}

impl RegName {
    pub fn to_core(self) -> Regularization {
        match self {
            RegName::Dmp => Regularization::Bounds,
            RegName::DmpTv => Regularization::BoundsTv,
        }
    }

    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "dmp" => Ok(RegName::Dmp),
            "dmp+tv" => Ok(RegName::DmpTv),
            other => Err(format!(
                "unknown regularisation '{other}' (expected dmp or dmp+tv)"
            )),
        }
    }
}

/// Field-reconstruction engine names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EngineName {
    /// Solve the full penalty normal system on the two-component field.
    #[serde(rename = "normal-direct")]
    NormalDirect,
    /// Eliminate one field component first (fourth-order reduction).
    #[serde(rename = "fourth-order")]
    FourthOrder,
}

impl EngineName {
    pub fn to_core(self) -> Step1Engine {
        match self {
            EngineName::NormalDirect => Step1Engine::NormalDirect,
            EngineName::FourthOrder => Step1Engine::FourthOrder,
        }
    }
}

/// Solver knobs: active classes, regularisation mode, penalty tuning and
/// stopping rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InversionKnobs {
    /// Classes the model step updates; the rest stay at their initial field.
    pub active: Vec<ClassName>,
    pub regularization: RegName,
    pub engine: EngineName,
    /// Iteration cap per batch.
    pub max_iterations: usize,
    /// Source-equation stopping threshold (Frobenius norm).
    pub eps_bilinear: f64,
    /// Data-fit stopping threshold floor; noise norms raise it.
    pub eps_data: f64,
    /// Model-step weight as a fraction of the mean normal-matrix diagonal.
    pub lambda1_pct: f64,
    /// Field-step data weight as a fraction of the dominant data-resolution
    /// eigenvalue. Around 1e-2 for clean data; raise to about 1 when the
    /// data carry noise, so the fields stay closer to the wave equation.
    pub ratio_fraction: f64,
    /// Per-iteration growth factor applied to the model-step weight.
    pub lambda1_growth: f64,
    /// Soft-thresholding scale as a fraction of the largest TV residual.
    pub theta_percent: f64,
    /// Weight of the prior attraction term relative to the bound-split one.
    pub eps_prior_weight: f64,
    /// Seed for the power-iteration used to scale the field-step weight.
    pub power_seed: u64,
    /// Attract the eps field towards its initial model (joint inversions
    /// where eps is only weakly constrained by the data).
    pub use_eps_prior: bool,
}

impl Default for InversionKnobs {
    fn default() -> Self {
        let p = PenaltyConfig::default();
        let s = StopRule::default();
        InversionKnobs {
            active: vec![ClassName::V0, ClassName::Eps, ClassName::Delta],
            regularization: RegName::DmpTv,
            engine: EngineName::NormalDirect,
            max_iterations: 25,
            eps_bilinear: s.eps_bilinear,
            eps_data: s.eps_data,
            lambda1_pct: p.lambda1_pct,
            ratio_fraction: p.ratio_fraction,
            lambda1_growth: p.lambda1_growth,
            theta_percent: p.theta_percent,
            eps_prior_weight: p.eps_prior_weight,
            power_seed: p.power_seed,
            use_eps_prior: false,
        }
    }
}

/// Physical box constraints per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsConfig {
    pub v0: [f64; 2],
    pub eps: [f64; 2],
    pub delta: [f64; 2],
}

impl Default for BoundsConfig {
    fn default() -> Self {
        let b = PhysicalBounds::default();
        BoundsConfig {
            v0: [b.v0.0, b.v0.1],
            eps: [b.eps.0, b.eps.1],
            delta: [b.delta.0, b.delta.1],
        }
    }
}

/// Additive Gaussian data noise. `snr_db = inf` (the default) keeps the
/// data exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub snr_db: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            snr_db: f64::INFINITY,
            seed: 2026,
        }
    }
}

/// Misfit-landscape scan over model-space lines: alpha blends the v0 field
/// from the truth (0) towards the initial model (|alpha| = 1), beta does the
/// same for eps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LandscapeConfig {
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    pub alpha_count: usize,
    pub beta_count: usize,
    pub freq_hz: f64,
}

impl Default for LandscapeConfig {
    fn default() -> Self {
        LandscapeConfig {
            alpha: [-1.0, 1.0],
            beta: [-1.0, 1.0],
            alpha_count: 41,
            beta_count: 41,
            freq_hz: 3.0,
        }
    }
}

impl LandscapeConfig {
    pub fn alphas(&self) -> Vec<f64> {
        linspace(self.alpha[0], self.alpha[1], self.alpha_count)
    }

    pub fn betas(&self) -> Vec<f64> {
        linspace(self.beta[0], self.beta[1], self.beta_count)
    }
}

fn linspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let step = (b - a) / (count - 1) as f64;
            (0..count).map(|i| a + step * i as f64).collect()
        }
    }
}

/// Output conventions: grayscale ranges for images and cut positions for
/// profile extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Grayscale limits `[lo, hi]` for the v0 images, km/s.
    pub clim_v0: [f64; 2],
    pub clim_eps: [f64; 2],
    pub clim_delta: [f64; 2],
    /// Interior x positions (km) of vertical profiles.
    pub sections_x_km: Vec<f64>,
    /// Interior z positions (km) of horizontal profiles.
    pub sections_z_km: Vec<f64>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            clim_v0: [2.9, 3.4],
            clim_eps: [0.0, 0.25],
            clim_delta: [0.0, 0.15],
            sections_x_km: vec![0.64],
            sections_z_km: vec![0.64],
        }
    }
}

impl ExperimentConfig {
    /// Circular-inclusion test: joint (v0, eps, delta) reconstruction from
    /// surrounding acquisition. This is also the all-defaults config.
    pub fn inclusion() -> Self {
        ExperimentConfig::default()
    }

    /// Layered-medium test: surface acquisition over a 4 x 1.5 km section
    /// with a low-velocity zone, inverted by frequency continuation from a
    /// crude vertical-gradient start.
    pub fn layered() -> Self {
        ExperimentConfig {
            grid: GridConfig {
                nx: 201,
                nz: 76,
                ..GridConfig::default()
            },
            truth: layered_truth(),
            initial: InitialSpec {
                v0: FieldInit::VerticalGradient {
                    top: 1.5,
                    bottom: 3.2,
                },
                eps: FieldInit::SmoothedTrue { sigma_km: 0.15 },
                delta: FieldInit::SmoothedTrue { sigma_km: 0.15 },
            },
            acquisition: AcquisitionSpec::Surface {
                source_spacing_km: 0.2,
                receiver_spacing_km: 0.05,
                source_depth_km: 0.075,
                receiver_depth_km: 0.025,
            },
            schedule: ScheduleConfig {
                paths: vec![[3.0, 6.0], [4.0, 8.5], [6.0, 12.0]],
                count: 0,
                spacing_hz: 0.5,
                batch_size: 2,
                overlap: 1,
            },
            inversion: InversionKnobs {
                active: vec![ClassName::V0],
                max_iterations: 15,
                ..InversionKnobs::default()
            },
            output: OutputConfig {
                clim_v0: [1.4, 4.8],
                clim_eps: [0.0, 0.25],
                clim_delta: [0.0, 0.15],
                sections_x_km: vec![1.0, 2.0, 3.0],
                sections_z_km: vec![],
            },
            ..ExperimentConfig::default()
        }
    }

    /// Parse a TOML config file.
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        Ok(cfg)
    }

    /// Serialise to TOML.
    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// Build the discretisation.
    pub fn build_grid(&self) -> Result<Grid> {
        Grid::with_interior(
            self.grid.nx,
            self.grid.nz,
            self.grid.dx,
            self.grid.dz,
            self.grid.pml_nodes,
            self.grid.free_surface_top,
        )
    }

    /// Translate the solver knobs into the core configuration.
    pub fn inversion_config(&self) -> Result<InversionConfig> {
        let classes: Vec<ModelClass> =
            self.inversion.active.iter().map(|c| c.to_core()).collect();
        let active = ActiveSet::new(&classes)?;
        let mut cfg = InversionConfig::new(active);
        cfg.regularization = self.inversion.regularization.to_core();
        cfg.engine = self.inversion.engine.to_core();
        cfg.penalty = PenaltyConfig {
            lambda1_pct: self.inversion.lambda1_pct,
            ratio_fraction: self.inversion.ratio_fraction,
            lambda1_growth: self.inversion.lambda1_growth,
            theta_percent: self.inversion.theta_percent,
            eps_prior_weight: self.inversion.eps_prior_weight,
            power_seed: self.inversion.power_seed,
        };
        cfg.stop = StopRule {
            max_iterations: self.inversion.max_iterations,
            eps_bilinear: self.inversion.eps_bilinear,
            eps_data: self.inversion.eps_data,
        };
        cfg.bounds = PhysicalBounds {
            v0: (self.bounds.v0[0], self.bounds.v0[1]),
            eps: (self.bounds.eps[0], self.bounds.eps[1]),
            delta: (self.bounds.delta[0], self.bounds.delta[1]),
        };
        Ok(cfg)
    }
}

/// The layered true model: water over compacting sediments, a buried
/// low-velocity zone, a fast chalk marker and a stiff basement. Strong
/// enough contrasts that a 3 Hz start from a smooth gradient cycle-skips
/// for reduced-space inversion.
fn layered_truth() -> ModelSpec {
    ModelSpec::Layers {
        interfaces_km: vec![0.2, 0.45, 0.7, 0.85, 1.05, 1.25],
        v0: vec![1.5, 2.0, 2.35, 1.75, 3.5, 4.0, 4.5],
        eps: vec![0.0, 0.08, 0.12, 0.05, 0.18, 0.15, 0.1],
        delta: vec![0.0, 0.03, 0.06, 0.02, 0.1, 0.08, 0.05],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn an_empty_file_is_the_default_config() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
    }

    #[test]
    fn serialised_defaults_parse_back_identically() {
        for cfg in [ExperimentConfig::inclusion(), ExperimentConfig::layered()] {
            let text = cfg.to_toml().unwrap();
            let back = ExperimentConfig::from_toml(&text).unwrap();
            assert_eq!(back, cfg);
            // And a second round trip is byte-stable.
            assert_eq!(back.to_toml().unwrap(), text);
        }
    }

    #[test]
    fn partial_files_fill_in_defaults() {
        let cfg = ExperimentConfig::from_toml(
            "[noise]\nsnr_db = 10.0\n\n[inversion]\nregularization = \"dmp\"\n",
        )
        .unwrap();
        assert_eq!(cfg.noise.snr_db, 10.0);
        assert_eq!(cfg.noise.seed, NoiseConfig::default().seed);
        assert_eq!(cfg.inversion.regularization, RegName::Dmp);
        assert_eq!(cfg.grid, GridConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml("[grid]\nnx = 8\nnnz = 9\n");
        assert!(err.is_err());
        let err = ExperimentConfig::from_toml("[typo_section]\nx = 1\n");
        assert!(err.is_err());
    }

    #[test]
    fn infinite_snr_survives_the_round_trip() {
        let cfg = ExperimentConfig::default();
        assert!(cfg.noise.snr_db.is_infinite());
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert!(back.noise.snr_db.is_infinite());
    }

    #[test]
    fn schedules_expand_to_the_expected_batches() {
        let joint = ScheduleConfig::default();
        let batches = joint.batches();
        assert_eq!(batches.len(), 1);
        assert_eq!(batches[0].len(), 9);
        assert!((batches[0][0] - 4.8).abs() < 1e-12);
        assert!((batches[0][8] - 19.5).abs() < 1e-12);

        let cont = ExperimentConfig::layered().schedule;
        let batches = cont.batches();
        // 7 + 10 + 13 frequencies in overlapping pairs: 6 + 9 + 12 batches.
        assert_eq!(batches.len(), 27);
        assert!(batches.iter().all(|b| b.len() == 2));
        let all = cont.all_frequencies();
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        assert!((all[0] - 3.0).abs() < 1e-12);
        assert!((all.last().unwrap() - 12.0).abs() < 1e-12);
    }

    #[test]
    fn class_and_mode_names_parse() {
        assert_eq!(ClassName::parse("eps").unwrap(), ClassName::Eps);
        assert!(ClassName::parse("vp").is_err());
        assert_eq!(RegName::parse("dmp+tv").unwrap(), RegName::DmpTv);
        assert!(RegName::parse("tv").is_err());
    }
}
