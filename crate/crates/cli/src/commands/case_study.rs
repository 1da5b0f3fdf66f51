//! `case-study`: which items one bundle's embedding points at, per variant.

use std::path::Path;

use rdiffbr_core::backbone::aggregate_item_level;
use rdiffbr_core::data::compose_z_test;
use rdiffbr_core::diffusion::infer_item_level;
use rdiffbr_core::eval::{nearest_items, Variant};
use rdiffbr_core::{Error, Result};

use crate::config::RunConfig;
use crate::pipeline::{
    build_schedule, inference_settings, obtain_role, prepare_dataset, resolve_run_dir,
    write_snapshot, write_text, Role,
};

pub fn run(
    cfg: &RunConfig,
    run_dir: Option<&Path>,
    bundle: u32,
    k: usize,
    rho: i32,
    train_first: bool,
) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("k", "must be positive"));
    }
    let hash8 = cfg.hash8();
    let dir = resolve_run_dir("case-study", cfg, &hash8, run_dir)?;
    write_snapshot(&dir, cfg, &hash8)?;

    let seed = cfg.training.seed;
    let (data, partition) = prepare_dataset(cfg, seed)?;
    if bundle as usize >= data.n_bundles() {
        return Err(Error::invalid(
            "bundle",
            format!("{bundle} out of range; dataset has {} bundles", data.n_bundles()),
        ));
    }
    let z_eval = compose_z_test(&partition, rho)?;
    let schedule = build_schedule(cfg)?;
    let inference = inference_settings(cfg, seed);

    let mut variants = Vec::with_capacity(3);
    for (variant, role) in [
        (Variant::Backbone, Role::BackboneOnly),
        (Variant::RDiffBr, Role::Joint),
        (Variant::RDiffBrWoR, Role::JointWoR),
    ] {
        let (backbone, approx) = obtain_role(&dir, cfg, &hash8, seed, role, train_first)?;
        let mut table = aggregate_item_level(&z_eval, &backbone.v_i)?;
        if let Some(approx) = &approx {
            table = infer_item_level(
                approx,
                &table,
                &schedule,
                inference.t_prime,
                inference.noise_seed,
                inference.deterministic_noise,
            )?;
        }
        let query = table.row(bundle as usize).to_vec();
        let neighbours: Vec<serde_json::Value> = nearest_items(&query, &backbone.v_i, k)?
            .into_iter()
            .map(|(item, cosine)| {
                serde_json::json!({
                    "item": item,
                    "cosine": cosine,
                    "in_bundle": z_eval.contains(bundle, item),
                })
            })
            .collect();
        variants.push(serde_json::json!({
            "variant": variant.label(),
            "embedding": query,
            "neighbours": neighbours,
        }));
    }

    let doc = serde_json::json!({
        "metadata": {
            "command": "case-study",
            "config_hash": hash8,
            "seed": seed,
            "bundle": bundle,
            "rho": rho,
            "k": k,
        },
        "variants": variants,
    });
    let path = dir.join(format!("case-study-{hash8}-b{bundle}.json"));
    write_text(&path, &serde_json::to_string_pretty(&doc).expect("listing serializes"))?;
    println!(
        "nearest {k} items for bundle {bundle} at rho {rho:+} across 3 variants; listing at {}",
        path.display()
    );
    Ok(())
}
