//! Shared plumbing between the commands: dataset resolution, seeded training,
//! checkpoint naming and the run-directory layout.
//!
//! Checkpoint and report filenames carry the config hash and the seed
//! (`backbone-<hash8>-s<seed>.bin`), so artifacts from different
//! configurations or seeds never collide inside one run directory, and a rerun
//! of the same configuration lands on the same names with the same bytes.

use std::fs;
use std::path::{Path, PathBuf};

use rdiffbr_core::backbone::init_backbone;
use rdiffbr_core::checkpoint::{
    load_approximator, load_backbone, save_approximator, save_backbone,
};
use rdiffbr_core::data::{
    load_dataset_dir, partition_affiliations, split_user_bundle, synth_planted_dataset,
    z_train_val, AffiliationPartition, Dataset, InteractionMatrix,
};
use rdiffbr_core::diffusion::{EpochLosses, NoiseSchedule, TrainConfig, Trainer};
use rdiffbr_core::eval::InferenceSettings;
use rdiffbr_core::seeds::labels;
use rdiffbr_core::{Approximator, Backbone, Error, Result, Schedule, SeedBank};

use crate::config::RunConfig;

/// Which of the comparison models a training run produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Ranking model alone, no diffusion term.
    BackboneOnly,
    /// Joint training with the configured blend weight.
    Joint,
    /// Joint training with the residual shortcut ablated (blend weight 1).
    JointWoR,
}

impl Role {
    /// Filename stem for this role's checkpoints. The joint model uses the
    /// plain names so `train` output feeds straight into the other commands.
    fn stem(self) -> &'static str {
        match self {
            Role::BackboneOnly => "backbone_only",
            Role::Joint => "backbone",
            Role::JointWoR => "backbone_wo_r",
        }
    }

    fn approx_stem(self) -> Option<&'static str> {
        match self {
            Role::BackboneOnly => None,
            Role::Joint => Some("approx"),
            Role::JointWoR => Some("approx_wo_r"),
        }
    }

    /// Blend weight this role trains with; the ablation pins it to 1.
    pub fn delta(self, cfg: &RunConfig) -> f64 {
        match self {
            Role::JointWoR => 1.0,
            _ => cfg.approximator.delta,
        }
    }
}

/// A model trained for one role at one seed.
pub struct TrainedModel {
    pub backbone: Backbone,
    pub approx: Option<Approximator>,
    pub losses: Vec<EpochLosses<f64>>,
}

/// Resolve the configured dataset at one seed: generate the synthetic
/// catalogue, or load a directory and derive its split and partition.
pub fn prepare_dataset(cfg: &RunConfig, seed: u64) -> Result<(Dataset, AffiliationPartition)> {
    if cfg.dataset.is_synthetic() {
        return synth_planted_dataset(cfg.dataset.synthetic(), seed);
    }
    let raw = load_dataset_dir(&cfg.dataset.dir())?;
    let bank = SeedBank::new(seed);
    let partition = partition_affiliations(
        &raw.z,
        cfg.dataset
            .partition_subsets
            .expect("validated directory source carries partition_subsets"),
        bank.derive(labels::PARTITION),
    )?;
    let ratios = cfg
        .dataset
        .split_ratios
        .expect("validated directory source carries split_ratios");
    let [x_train, x_val, x_test] = split_user_bundle(&raw.x, ratios, bank.derive(labels::SPLIT))?;
    let data = Dataset::new(x_train, x_val, x_test, raw.y, raw.z)?;
    Ok((data, partition))
}

pub fn build_schedule(cfg: &RunConfig) -> Result<Schedule> {
    NoiseSchedule::build(
        cfg.schedule.t_max,
        cfg.schedule.s,
        cfg.schedule.alpha_min,
        cfg.schedule.alpha_max,
    )
}

/// How the reverse chain is driven at evaluation time for a given seed.
pub fn inference_settings(cfg: &RunConfig, seed: u64) -> InferenceSettings {
    InferenceSettings {
        t_prime: cfg.training.t_prime,
        noise_seed: seed,
        deterministic_noise: cfg.training.deterministic_noise,
    }
}

/// Wire up a trainer for one role at one seed, epochs not yet run.
/// Initialization is drawn from the seed's bank under fixed labels, so
/// different roles at the same seed start from the same backbone tables —
/// comparisons are paired.
pub fn build_trainer(
    cfg: &RunConfig,
    data: &Dataset,
    seed: u64,
    role: Role,
    z_train: &InteractionMatrix,
) -> Result<Trainer<f64>> {
    let bank = SeedBank::new(seed);
    let backbone = init_backbone(
        data.n_users(),
        data.n_bundles(),
        data.n_items(),
        cfg.backbone.dim,
        cfg.backbone.init_scale,
        bank.derive(labels::INIT),
    )?;
    let approx = match role {
        Role::BackboneOnly => None,
        _ => Some(Approximator::new(
            cfg.backbone.dim,
            cfg.approximator.step_dim,
            cfg.approximator.depth,
            cfg.approximator.hidden_size,
            role.delta(cfg),
            cfg.approximator.anchor_policy,
            bank.derive(labels::APPROX_INIT),
        )?),
    };
    let train_config = TrainConfig {
        lambda: if approx.is_some() {
            cfg.training.lambda
        } else {
            0.0
        },
        lr: cfg.training.lr,
        l2_reg: cfg.backbone.l2_reg,
        batch_size: cfg.training.batch_size,
        detach_item_grads: cfg.training.detach_item_grads,
        master_seed: seed,
    };
    Trainer::new(backbone, approx, build_schedule(cfg)?, z_train, train_config)
}

/// Train one role from scratch at one seed for the configured epoch count.
pub fn train_role(
    cfg: &RunConfig,
    data: &Dataset,
    partition: &AffiliationPartition,
    seed: u64,
    role: Role,
) -> Result<TrainedModel> {
    let mut trainer = build_trainer(cfg, data, seed, role, &z_train_val(partition))?;
    let mut losses = Vec::with_capacity(cfg.training.epochs);
    for _ in 0..cfg.training.epochs {
        losses.push(trainer.joint_train_epoch(data)?);
    }
    Ok(TrainedModel {
        backbone: trainer.backbone,
        approx: trainer.approx,
        losses,
    })
}

/// Checkpoint metadata shared by every save: enough to re-wire inference
/// without the original config file.
pub fn role_sidecar(cfg: &RunConfig, hash8: &str, seed: u64, role: Role) -> serde_json::Value {
    serde_json::json!({
        "config_hash": hash8,
        "seed": seed,
        "role": role.stem(),
        "dim": cfg.backbone.dim,
        "t_max": cfg.schedule.t_max,
        "t_prime": cfg.training.t_prime,
        "lambda": cfg.training.lambda,
        "delta": role.delta(cfg),
        "deterministic_noise": cfg.training.deterministic_noise,
    })
}

fn backbone_path(dir: &Path, role: Role, hash8: &str, seed: u64) -> PathBuf {
    dir.join(format!("{}-{hash8}-s{seed}.bin", role.stem()))
}

fn approx_path(dir: &Path, role: Role, hash8: &str, seed: u64) -> Option<PathBuf> {
    role.approx_stem()
        .map(|stem| dir.join(format!("{stem}-{hash8}-s{seed}.bin")))
}

/// Write a trained role's checkpoints into the run directory.
pub fn save_role(
    dir: &Path,
    cfg: &RunConfig,
    hash8: &str,
    seed: u64,
    role: Role,
    model: &TrainedModel,
) -> Result<PathBuf> {
    let sidecar = role_sidecar(cfg, hash8, seed, role);
    let bb_path = backbone_path(dir, role, hash8, seed);
    save_backbone(&model.backbone, &bb_path, &sidecar)?;
    if let Some(path) = approx_path(dir, role, hash8, seed) {
        let approx = model
            .approx
            .as_ref()
            .expect("joint roles carry an approximator");
        save_approximator(approx, &path, &sidecar)?;
    }
    Ok(bb_path)
}

/// Load a previously saved role, or explain how to produce it.
pub fn load_role(
    dir: &Path,
    hash8: &str,
    seed: u64,
    role: Role,
) -> Result<(Backbone, Option<Approximator>)> {
    let bb_path = backbone_path(dir, role, hash8, seed);
    if !bb_path.exists() {
        return Err(Error::Io {
            path: bb_path.display().to_string(),
            source: std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "checkpoint not found; run with --train-first or point --run-dir at a directory \
                 that holds checkpoints for this config hash and seed",
            ),
        });
    }
    let (backbone, _) = load_backbone(&bb_path)?;
    let approx = match approx_path(dir, role, hash8, seed) {
        Some(path) => Some(load_approximator(&path)?.0),
        None => None,
    };
    Ok((backbone, approx))
}

/// Train a role or load its checkpoints, saving fresh ones after training so
/// later commands can reuse them.
pub fn obtain_role(
    dir: &Path,
    cfg: &RunConfig,
    hash8: &str,
    seed: u64,
    role: Role,
    train_first: bool,
) -> Result<(Backbone, Option<Approximator>)> {
    if train_first {
        let (data, partition) = prepare_dataset(cfg, seed)?;
        let model = train_role(cfg, &data, &partition, seed, role)?;
        save_role(dir, cfg, hash8, seed, role, &model)?;
        Ok((model.backbone, model.approx))
    } else {
        load_role(dir, hash8, seed, role)
    }
}

/// Resolve the run directory: an explicit override wins, otherwise a
/// timestamped directory under the output root (the `RDIFFBR_OUT` environment
/// variable when set, the configured output directory otherwise).
pub fn resolve_run_dir(
    cmd: &str,
    cfg: &RunConfig,
    hash8: &str,
    explicit: Option<&Path>,
) -> Result<PathBuf> {
    let dir = match explicit {
        Some(path) => path.to_path_buf(),
        None => {
            let root = std::env::var_os("RDIFFBR_OUT")
                .map(PathBuf::from)
                .unwrap_or_else(|| cfg.output.dir.clone());
            root.join(format!("{cmd}-{}-{hash8}", utc_stamp()))
        }
    };
    fs::create_dir_all(&dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    Ok(dir)
}

fn utc_stamp() -> String {
    let format =
        time::macros::format_description!("[year][month][day]T[hour][minute][second]Z");
    time::OffsetDateTime::now_utc()
        .format(format)
        .expect("fixed format never fails")
}

/// Write the config snapshot every command leaves behind.
pub fn write_snapshot(dir: &Path, cfg: &RunConfig, hash8: &str) -> Result<PathBuf> {
    let path = dir.join(format!("config-{hash8}.toml"));
    fs::write(&path, cfg.to_toml()).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(path)
}

/// Seeds an experiment fans out to: the configured seed and its successors.
pub fn experiment_seeds(cfg: &RunConfig) -> Vec<u64> {
    (0..cfg.eval.n_seeds as u64)
        .map(|j| cfg.training.seed.wrapping_add(j))
        .collect()
}

/// Write text to a file inside the run directory.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}
