//! `bench`: wall-clock cost of a training epoch with and without the
//! diffusion term.

use std::path::Path;

use rdiffbr_core::data::z_train_val;
use rdiffbr_core::diffusion::Trainer;
use rdiffbr_core::eval::{timing_report, Variant};
use rdiffbr_core::Result;

use crate::config::RunConfig;
use crate::pipeline::{prepare_dataset, resolve_run_dir, write_snapshot, write_text, Role};

/// Epochs averaged into each variant's mean, after one untimed warm-up.
const EPOCHS_TO_AVERAGE: usize = 5;

pub fn run(cfg: &RunConfig, run_dir: Option<&Path>) -> Result<()> {
    let hash8 = cfg.hash8();
    let dir = resolve_run_dir("bench", cfg, &hash8, run_dir)?;
    write_snapshot(&dir, cfg, &hash8)?;

    let seed = cfg.training.seed;
    let (data, partition) = prepare_dataset(cfg, seed)?;
    let z_train = z_train_val(&partition);

    let mut trainers: Vec<(String, Trainer<f64>)> = Vec::with_capacity(2);
    for (variant, role) in [
        (Variant::Backbone, Role::BackboneOnly),
        (Variant::RDiffBr, Role::Joint),
    ] {
        let trainer = crate::pipeline::build_trainer(cfg, &data, seed, role, &z_train)?;
        trainers.push((variant.label().to_string(), trainer));
    }

    // First epochs pay one-off allocation costs; keep them out of the average.
    for (_, trainer) in &mut trainers {
        trainer.joint_train_epoch(&data)?;
    }
    let data_ref = &data;
    let mut handles: Vec<(String, Box<dyn FnMut() -> Result<()> + '_>)> = trainers
        .iter_mut()
        .map(|(label, trainer)| {
            let label = label.clone();
            let run = Box::new(move || trainer.joint_train_epoch(data_ref).map(|_| ()))
                as Box<dyn FnMut() -> Result<()>>;
            (label, run)
        })
        .collect();
    let mut variants: Vec<(String, &mut dyn FnMut() -> Result<()>)> = handles
        .iter_mut()
        .map(|(label, run)| (label.clone(), run.as_mut() as &mut dyn FnMut() -> Result<()>))
        .collect();
    let timing = timing_report(&mut variants, EPOCHS_TO_AVERAGE)?;

    let doc = serde_json::json!({
        "metadata": {
            "command": "bench",
            "config_hash": hash8,
            "seed": seed,
            "warmup_epochs": 1,
            "users": data.n_users(),
            "bundles": data.n_bundles(),
            "items": data.n_items(),
        },
        "timing": timing,
    });
    write_text(
        &dir.join(format!("bench-{hash8}.json")),
        &serde_json::to_string_pretty(&doc).expect("report serializes"),
    )?;

    let base = timing
        .seconds_per_epoch
        .get(Variant::Backbone.label())
        .copied()
        .unwrap_or(f64::NAN);
    let full = timing
        .seconds_per_epoch
        .get(Variant::RDiffBr.label())
        .copied()
        .unwrap_or(f64::NAN);
    println!(
        "epoch time over {} epochs: backbone {base:.4}s, rdiffbr {full:.4}s, ratio {:.3}; \
         report at {}",
        timing.epochs_averaged,
        timing.overhead_ratio.unwrap_or(f64::NAN),
        dir.display()
    );
    Ok(())
}
