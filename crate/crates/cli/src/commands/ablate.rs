//! `ablate`: pit the full model against the backbone and the no-residual
//! variant at the requested variation levels.

use std::fmt::Write as _;
use std::path::Path;

use rdiffbr_core::eval::{rho_sweep, EvalReport, Variant, VariantModel};
use rdiffbr_core::Result;

use crate::config::RunConfig;
use crate::pipeline::{
    build_schedule, experiment_seeds, inference_settings, obtain_role, prepare_dataset,
    resolve_run_dir, write_snapshot, Role,
};

pub fn run(
    cfg: &RunConfig,
    run_dir: Option<&Path>,
    rhos_flag: Option<&str>,
    train_first: bool,
) -> Result<()> {
    let rhos = match rhos_flag {
        // The default contrasts heavy removal with heavy addition.
        Some(raw) => super::sweep::parse_rhos(raw)?,
        None => vec![-3, 3],
    };
    let hash8 = cfg.hash8();
    let dir = resolve_run_dir("ablate", cfg, &hash8, run_dir)?;
    write_snapshot(&dir, cfg, &hash8)?;

    let seeds = experiment_seeds(cfg);
    let mut reports = Vec::with_capacity(seeds.len());
    for &seed in &seeds {
        let (bb_only, _) = obtain_role(&dir, cfg, &hash8, seed, Role::BackboneOnly, train_first)?;
        let (joint_bb, joint_approx) =
            obtain_role(&dir, cfg, &hash8, seed, Role::Joint, train_first)?;
        let (wo_r_bb, wo_r_approx) =
            obtain_role(&dir, cfg, &hash8, seed, Role::JointWoR, train_first)?;
        let models = [
            VariantModel {
                variant: Variant::Backbone,
                backbone: &bb_only,
                approx: None,
            },
            VariantModel {
                variant: Variant::RDiffBr,
                backbone: &joint_bb,
                approx: joint_approx.as_ref(),
            },
            VariantModel {
                variant: Variant::RDiffBrWoR,
                backbone: &wo_r_bb,
                approx: wo_r_approx.as_ref(),
            },
        ];
        let (data, partition) = prepare_dataset(cfg, seed)?;
        reports.push(rho_sweep(
            &models,
            &data,
            &partition,
            &build_schedule(cfg)?,
            &inference_settings(cfg, seed),
            &rhos,
            &cfg.eval.ks,
            seed,
        )?);
    }
    let report = EvalReport::merged(reports)?;

    let metadata = serde_json::json!({
        "command": "ablate",
        "config_hash": hash8,
        "variants": [
            Variant::Backbone.label(),
            Variant::RDiffBr.label(),
            Variant::RDiffBrWoR.label(),
        ],
        "delta": cfg.approximator.delta,
        // The no-residual variant ignores the configured blend weight.
        "wo_r_delta": 1.0,
        "rhos": rhos,
        "ks": cfg.eval.ks,
        "seeds": seeds,
    });
    report.write_json(&dir.join(format!("ablation-{hash8}.json")), &metadata)?;
    report.write_csv(&dir.join(format!("ablation-{hash8}.csv")))?;

    let mut summary = String::new();
    for &rho in &rhos {
        write!(summary, "  rho {rho:+}:").expect("string write");
        for variant in [Variant::Backbone, Variant::RDiffBr, Variant::RDiffBrWoR] {
            let mean = report
                .mean_where(
                    |r| r.rho == rho && r.variant == variant.label() && r.k == 20,
                    |r| r.recall,
                )
                .or_else(|| {
                    report.mean_where(
                        |r| r.rho == rho && r.variant == variant.label(),
                        |r| r.recall,
                    )
                })
                .unwrap_or(f64::NAN);
            write!(summary, "  {} {mean:.4}", variant.label()).expect("string write");
        }
        summary.push('\n');
    }
    println!(
        "ablation over {} seed(s) at rho {rhos:?}:\n{summary}reports at {}",
        seeds.len(),
        dir.display()
    );
    Ok(())
}
