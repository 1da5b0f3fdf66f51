//! `train`: fit the joint model once and leave checkpoints behind.

use std::path::Path;

use rdiffbr_core::Result;

use crate::config::RunConfig;
use crate::pipeline::{
    prepare_dataset, resolve_run_dir, save_role, train_role, write_snapshot, write_text, Role,
    TrainedModel,
};

pub fn run(cfg: &RunConfig, run_dir: Option<&Path>) -> Result<()> {
    let hash8 = cfg.hash8();
    let dir = resolve_run_dir("train", cfg, &hash8, run_dir)?;
    write_snapshot(&dir, cfg, &hash8)?;

    let seed = cfg.training.seed;
    let (data, partition) = prepare_dataset(cfg, seed)?;
    let model = train_role(cfg, &data, &partition, seed, Role::Joint)?;

    let loss_path = dir.join(format!("loss-{hash8}-s{seed}.csv"));
    write_text(&loss_path, &loss_csv(&model))?;
    let bb_path = save_role(&dir, cfg, &hash8, seed, Role::Joint, &model)?;

    let last = model.losses.last().expect("at least one epoch");
    println!(
        "trained {} epochs (final loss {:.6}); checkpoints at {}",
        model.losses.len(),
        last.total,
        bb_path.parent().unwrap_or(&dir).display()
    );
    Ok(())
}

fn loss_csv(model: &TrainedModel) -> String {
    let mut out = String::from("epoch,total,ranking,diffusion,skipped_negatives\n");
    for (i, l) in model.losses.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            i + 1,
            l.total,
            l.ranking,
            l.diffusion,
            l.skipped_negatives
        ));
    }
    out
}
