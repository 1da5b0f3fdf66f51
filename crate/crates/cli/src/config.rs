//! Run configuration: a TOML tree parsed into options, then validated into
//! concrete sections with every constraint re-checked at the boundary.
//!
//! Error messages name the offending field by its dotted path (for instance
//! `approximator.delta`), so a config typo points straight at the line to fix.
//! The validated tree serializes back to TOML for the run-directory snapshot,
//! and the first eight hex characters of the snapshot's SHA-256 digest name
//! the configuration in every output filename.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use rdiffbr_core::data::SyntheticConfig;
use rdiffbr_core::diffusion::AnchorPolicy;
use rdiffbr_core::{Error, Result};

/// Dataset source plus the knobs that shape it. For a directory source the
/// split and partition knobs apply to the loaded matrices; for the synthetic
/// source they live inside the generator table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSection {
    /// `"synthetic"` or a path to a dataset directory.
    pub source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split_ratios: Option<(f64, f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition_subsets: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticConfig>,
}

impl DatasetSection {
    pub fn is_synthetic(&self) -> bool {
        self.source == "synthetic"
    }

    /// Generator settings; present exactly when the source is synthetic.
    pub fn synthetic(&self) -> &SyntheticConfig {
        self.synthetic
            .as_ref()
            .expect("validated synthetic source carries its generator table")
    }

    pub fn dir(&self) -> PathBuf {
        PathBuf::from(&self.source)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BackboneSection {
    pub dim: usize,
    pub init_scale: f64,
    pub l2_reg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScheduleSection {
    pub t_max: usize,
    pub s: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApproximatorSection {
    pub depth: usize,
    pub hidden_size: usize,
    pub step_dim: usize,
    pub delta: f64,
    pub anchor_policy: AnchorPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrainingSection {
    pub lambda: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub t_prime: usize,
    pub seed: u64,
    pub detach_item_grads: bool,
    pub deterministic_noise: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSection {
    pub ks: Vec<usize>,
    pub rhos: Vec<i32>,
    pub n_seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputSection {
    pub dir: PathBuf,
}

/// A fully validated run configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub dataset: DatasetSection,
    pub backbone: BackboneSection,
    pub schedule: ScheduleSection,
    pub approximator: ApproximatorSection,
    pub training: TrainingSection,
    pub eval: EvalSection,
    pub output: OutputSection,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
}

impl RunConfig {
    /// Read, override and validate a configuration file.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let mut raw: RawRunConfig = toml::from_str(&text).map_err(|e| {
            Error::invalid("config", format!("{}: {}", path.display(), e.message()))
        })?;
        if let Some(seed) = overrides.seed {
            raw.training.get_or_insert_with(Default::default).seed = Some(seed);
        }
        if let Some(epochs) = overrides.epochs {
            raw.training.get_or_insert_with(Default::default).epochs = Some(epochs);
        }
        raw.validate()
    }

    /// The canonical snapshot text written into every run directory.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("validated config serializes")
    }

    /// First eight hex characters of the snapshot's SHA-256, used to stamp
    /// output filenames.
    pub fn hash8(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest[..4].iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn req<T>(value: Option<T>, name: &str) -> Result<T> {
    value.ok_or_else(|| Error::invalid(name, "missing"))
}

fn check(ok: bool, name: &str, reason: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(name, reason))
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRunConfig {
    dataset: Option<RawDataset>,
    backbone: Option<RawBackbone>,
    schedule: Option<RawSchedule>,
    approximator: Option<RawApproximator>,
    training: Option<RawTraining>,
    eval: Option<RawEval>,
    output: Option<RawOutput>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    source: Option<String>,
    split_ratios: Option<(f64, f64, f64)>,
    partition_subsets: Option<usize>,
    synthetic: Option<RawSynthetic>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSynthetic {
    n_themes: Option<usize>,
    items_per_theme: Option<usize>,
    bundles_per_theme: Option<usize>,
    bundle_size: Option<usize>,
    n_users: Option<usize>,
    user_bundle_density: Option<f64>,
    ui_noise_rate: Option<f64>,
    split_ratios: Option<(f64, f64, f64)>,
    partition_subsets: Option<usize>,
    theme_affinity: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBackbone {
    dim: Option<usize>,
    init_scale: Option<f64>,
    l2_reg: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    t_max: Option<usize>,
    s: Option<f64>,
    alpha_min: Option<f64>,
    alpha_max: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawApproximator {
    depth: Option<usize>,
    hidden_size: Option<usize>,
    step_dim: Option<usize>,
    delta: Option<f64>,
    anchor_policy: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTraining {
    lambda: Option<f64>,
    lr: Option<f64>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    t_prime: Option<usize>,
    seed: Option<u64>,
    detach_item_grads: Option<bool>,
    deterministic_noise: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEval {
    ks: Option<Vec<usize>>,
    rhos: Option<Vec<i32>>,
    n_seeds: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

impl RawRunConfig {
    fn validate(self) -> Result<RunConfig> {
        let dataset = validate_dataset(self.dataset.unwrap_or_default())?;
        let backbone = validate_backbone(self.backbone.unwrap_or_default())?;
        let schedule = validate_schedule(self.schedule.unwrap_or_default())?;
        let approximator = validate_approximator(self.approximator.unwrap_or_default())?;
        let training = validate_training(self.training.unwrap_or_default(), &schedule)?;
        let eval = validate_eval(self.eval.unwrap_or_default())?;
        let output = OutputSection {
            dir: req(self.output.unwrap_or_default().dir, "output.dir")?,
        };
        Ok(RunConfig {
            dataset,
            backbone,
            schedule,
            approximator,
            training,
            eval,
            output,
        })
    }
}

fn validate_dataset(raw: RawDataset) -> Result<DatasetSection> {
    let source = req(raw.source, "dataset.source")?;
    check(!source.is_empty(), "dataset.source", "must not be empty")?;
    if source == "synthetic" {
        let syn = req(raw.synthetic, "dataset.synthetic")?;
        let defaults = SyntheticConfig::default();
        let cfg = SyntheticConfig {
            n_themes: req(syn.n_themes, "dataset.synthetic.n_themes")?,
            items_per_theme: req(syn.items_per_theme, "dataset.synthetic.items_per_theme")?,
            bundles_per_theme: req(syn.bundles_per_theme, "dataset.synthetic.bundles_per_theme")?,
            bundle_size: req(syn.bundle_size, "dataset.synthetic.bundle_size")?,
            n_users: req(syn.n_users, "dataset.synthetic.n_users")?,
            user_bundle_density: req(
                syn.user_bundle_density,
                "dataset.synthetic.user_bundle_density",
            )?,
            ui_noise_rate: syn.ui_noise_rate.unwrap_or(defaults.ui_noise_rate),
            split_ratios: syn.split_ratios.unwrap_or(defaults.split_ratios),
            partition_subsets: syn.partition_subsets.unwrap_or(defaults.partition_subsets),
            theme_affinity: syn.theme_affinity.unwrap_or(defaults.theme_affinity),
        };
        check(
            cfg.user_bundle_density > 0.0 && cfg.user_bundle_density <= 1.0,
            "dataset.synthetic.user_bundle_density",
            "must lie in (0, 1]",
        )?;
        check_ratios(cfg.split_ratios, "dataset.synthetic.split_ratios")?;
        Ok(DatasetSection {
            source,
            split_ratios: None,
            partition_subsets: None,
            synthetic: Some(cfg),
        })
    } else {
        check(
            raw.synthetic.is_none(),
            "dataset.synthetic",
            "only applies when dataset.source is \"synthetic\"",
        )?;
        let split_ratios = raw.split_ratios.unwrap_or((0.7, 0.1, 0.2));
        check_ratios(split_ratios, "dataset.split_ratios")?;
        let partition_subsets = raw.partition_subsets.unwrap_or(10);
        check(
            partition_subsets >= 2,
            "dataset.partition_subsets",
            "need at least two subsets to vary",
        )?;
        Ok(DatasetSection {
            source,
            split_ratios: Some(split_ratios),
            partition_subsets: Some(partition_subsets),
            synthetic: None,
        })
    }
}

fn check_ratios(ratios: (f64, f64, f64), name: &str) -> Result<()> {
    let (a, b, c) = ratios;
    check(
        a > 0.0 && b >= 0.0 && c > 0.0 && (a + b + c - 1.0).abs() < 1e-9,
        name,
        format!("({a}, {b}, {c}) must be non-negative and sum to 1"),
    )
}

fn validate_backbone(raw: RawBackbone) -> Result<BackboneSection> {
    let section = BackboneSection {
        dim: req(raw.dim, "backbone.dim")?,
        init_scale: req(raw.init_scale, "backbone.init_scale")?,
        l2_reg: req(raw.l2_reg, "backbone.l2_reg")?,
    };
    check(section.dim >= 1, "backbone.dim", "must be positive")?;
    check(
        section.init_scale > 0.0 && section.init_scale.is_finite(),
        "backbone.init_scale",
        "must be positive and finite",
    )?;
    check(
        section.l2_reg >= 0.0 && section.l2_reg.is_finite(),
        "backbone.l2_reg",
        "must be non-negative and finite",
    )?;
    Ok(section)
}

fn validate_schedule(raw: RawSchedule) -> Result<ScheduleSection> {
    let section = ScheduleSection {
        t_max: req(raw.t_max, "schedule.t_max")?,
        s: req(raw.s, "schedule.s")?,
        alpha_min: req(raw.alpha_min, "schedule.alpha_min")?,
        alpha_max: req(raw.alpha_max, "schedule.alpha_max")?,
    };
    check(
        (1..=200).contains(&section.t_max),
        "schedule.t_max",
        "must lie in [1, 200]",
    )?;
    check(
        section.s > 0.0 && section.s <= 1.0,
        "schedule.s",
        "must lie in (0, 1]",
    )?;
    check(
        section.alpha_min > 0.0 && section.alpha_min < section.alpha_max,
        "schedule.alpha_min",
        "must be positive and below alpha_max",
    )?;
    check(
        section.alpha_max <= 1.0 && section.s * section.alpha_max < 1.0,
        "schedule.alpha_max",
        "scaled noise level s * alpha_max must stay below 1",
    )?;
    Ok(section)
}

fn validate_approximator(raw: RawApproximator) -> Result<ApproximatorSection> {
    let anchor_policy = match raw.anchor_policy.as_deref() {
        None | Some("infer-source-embedding") => AnchorPolicy::InferSourceEmbedding,
        Some("train-noisy-input") => AnchorPolicy::TrainNoisyInput,
        Some(other) => {
            return Err(Error::invalid(
                "approximator.anchor_policy",
                format!(
                    "unknown policy {other:?}; expected \"infer-source-embedding\" or \
                     \"train-noisy-input\""
                ),
            ))
        }
    };
    let section = ApproximatorSection {
        depth: req(raw.depth, "approximator.depth")?,
        hidden_size: req(raw.hidden_size, "approximator.hidden_size")?,
        step_dim: req(raw.step_dim, "approximator.step_dim")?,
        delta: req(raw.delta, "approximator.delta")?,
        anchor_policy,
    };
    check(
        matches!(section.depth, 1 | 2 | 4 | 8),
        "approximator.depth",
        "must be one of {1, 2, 4, 8}",
    )?;
    check(
        (8..=4096).contains(&section.hidden_size),
        "approximator.hidden_size",
        "must lie in [8, 4096]",
    )?;
    check(
        section.step_dim >= 1,
        "approximator.step_dim",
        "must be positive",
    )?;
    check(
        section.delta > 0.0 && section.delta <= 1.0,
        "approximator.delta",
        "must lie in (0, 1]",
    )?;
    Ok(section)
}

fn validate_training(raw: RawTraining, schedule: &ScheduleSection) -> Result<TrainingSection> {
    let section = TrainingSection {
        lambda: req(raw.lambda, "training.lambda")?,
        lr: req(raw.lr, "training.lr")?,
        epochs: req(raw.epochs, "training.epochs")?,
        batch_size: req(raw.batch_size, "training.batch_size")?,
        t_prime: req(raw.t_prime, "training.t_prime")?,
        seed: req(raw.seed, "training.seed")?,
        detach_item_grads: raw.detach_item_grads.unwrap_or(true),
        deterministic_noise: raw.deterministic_noise.unwrap_or(false),
    };
    check(
        section.lambda > 0.0 && section.lambda < 5.0,
        "training.lambda",
        "must lie in (0, 5)",
    )?;
    check(
        section.lr > 0.0 && section.lr.is_finite(),
        "training.lr",
        "must be positive and finite",
    )?;
    check(section.epochs >= 1, "training.epochs", "must be positive")?;
    check(
        section.batch_size >= 1,
        "training.batch_size",
        "must be positive",
    )?;
    check(
        (1..=200).contains(&section.t_prime),
        "training.t_prime",
        "must lie in [1, 200]",
    )?;
    check(
        section.t_prime <= schedule.t_max,
        "training.t_prime",
        format!(
            "{} exceeds schedule.t_max {}",
            section.t_prime, schedule.t_max
        ),
    )?;
    Ok(section)
}

fn validate_eval(raw: RawEval) -> Result<EvalSection> {
    let section = EvalSection {
        ks: req(raw.ks, "eval.ks")?,
        rhos: req(raw.rhos, "eval.rhos")?,
        n_seeds: req(raw.n_seeds, "eval.n_seeds")?,
    };
    check(!section.ks.is_empty(), "eval.ks", "need at least one cutoff")?;
    check(
        section.ks.iter().all(|&k| k >= 1),
        "eval.ks",
        "cutoffs must be positive",
    )?;
    check(
        !section.rhos.is_empty(),
        "eval.rhos",
        "need at least one variation level",
    )?;
    check(section.n_seeds >= 1, "eval.n_seeds", "must be positive")?;
    Ok(section)
}
