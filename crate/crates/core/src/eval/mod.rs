//! Evaluation harness: ranking metrics, variation-level sweeps, ablation
//! variants, nearest-item lookups and epoch timing.
//!
//! Evaluation recomputes the item-level bundle embeddings from whichever
//! affiliation view is under test, optionally regenerates them through the
//! trained approximator, then ranks every candidate bundle per test user. A
//! sweep repeats that across variation levels and model variants and collects
//! the rows into a report.

mod case_study;
mod metrics;
mod report;
mod timing;

pub use case_study::nearest_items;
pub use metrics::{ndcg_at_k, rank_by_score, recall_at_k};
pub use report::{EvalReport, ReportRow};
pub use timing::{timing_report, TimingReport};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::backbone::{aggregate_item_level, score, BackboneState};
use crate::data::{compose_z_test, AffiliationPartition, Dataset, InteractionMatrix};
use crate::diffusion::{infer_item_level, NoiseSchedule, ResidualApproximator};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// The three model variants the experiments compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// The two-view backbone scoring raw pooled embeddings.
    Backbone,
    /// Backbone plus the residual-diffusion regeneration step.
    RDiffBr,
    /// The ablation: diffusion without the residual shortcut (blend weight 1).
    RDiffBrWoR,
}

impl Variant {
    /// Stable label used in report rows and file schemas.
    pub fn label(self) -> &'static str {
        match self {
            Variant::Backbone => "backbone",
            Variant::RDiffBr => "rdiffbr",
            Variant::RDiffBrWoR => "rdiffbr_wo_r",
        }
    }
}

/// How the reverse chain is driven at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferenceSettings {
    /// Corruption depth the source embeddings are pushed to before reversal.
    pub t_prime: usize,
    pub noise_seed: u64,
    /// Replace the injected noise with zeros for exactly reproducible chains.
    pub deterministic_noise: bool,
}

/// A trained model under a variant label, ready to evaluate.
pub struct VariantModel<'a, T: Scalar> {
    pub variant: Variant,
    pub backbone: &'a BackboneState<T>,
    /// Present for the diffusion variants, absent for the plain backbone.
    pub approx: Option<&'a ResidualApproximator<T>>,
}

/// Metrics at one cutoff, averaged over test users.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricPoint {
    pub k: usize,
    pub recall: f64,
    pub ndcg: f64,
}

/// Score every candidate bundle for every test user and average the top-K
/// metrics.
///
/// The item-level bundle table is rebuilt from `z_eval`; when an approximator
/// is supplied the table is regenerated through the reverse chain first. A
/// user's candidates are all bundles except their training positives, their
/// relevants are their held-out test bundles, and users without test bundles
/// are left out of the averages.
pub fn evaluate<T: Scalar>(
    state: &BackboneState<T>,
    approx: Option<&ResidualApproximator<T>>,
    schedule: &NoiseSchedule<T>,
    inference: &InferenceSettings,
    data: &Dataset,
    z_eval: &InteractionMatrix,
    ks: &[usize],
) -> Result<Vec<MetricPoint>> {
    if ks.is_empty() {
        return Err(Error::invalid("Ks", "need at least one cutoff"));
    }
    let mut e_il_b = aggregate_item_level(z_eval, &state.v_i)?;
    if let Some(approx) = approx {
        e_il_b = infer_item_level(
            approx,
            &e_il_b,
            schedule,
            inference.t_prime,
            inference.noise_seed,
            inference.deterministic_noise,
        )?;
    }

    let n_bundles = data.n_bundles();
    let mut sums: Vec<(f64, f64)> = vec![(0.0, 0.0); ks.len()];
    let mut n_scored_users = 0usize;

    for user in 0..data.n_users() as u32 {
        let relevant: BTreeSet<u32> = data.x_test.row(user).into_iter().collect();
        if relevant.is_empty() {
            continue;
        }
        let train_positives: BTreeSet<u32> = data.x_train.row(user).into_iter().collect();
        let mut scored: Vec<(u32, f64)> = (0..n_bundles as u32)
            .filter(|b| !train_positives.contains(b))
            .map(|b| score(state, &e_il_b, user, b).map(|s| (b, s.as_f64())))
            .collect::<Result<_>>()?;
        let ranked = rank_by_score(&mut scored);
        for (slot, &k) in sums.iter_mut().zip(ks) {
            slot.0 += recall_at_k(&ranked, &relevant, k)?;
            slot.1 += ndcg_at_k(&ranked, &relevant, k)?;
        }
        n_scored_users += 1;
    }

    if n_scored_users == 0 {
        return Err(Error::invalid(
            "test split",
            "no user has a held-out bundle to evaluate against",
        ));
    }
    let inv = 1.0 / n_scored_users as f64;
    Ok(ks
        .iter()
        .zip(&sums)
        .map(|(&k, &(recall, ndcg))| MetricPoint {
            k,
            recall: recall * inv,
            ndcg: ndcg * inv,
        })
        .collect())
}

/// Evaluate every supplied variant at every requested variation level.
///
/// Rows come out grouped by level in request order, variants in supplied
/// order, cutoffs in supplied order, all tagged with `seed` for later
/// cross-seed aggregation.
pub fn rho_sweep<T: Scalar>(
    models: &[VariantModel<'_, T>],
    data: &Dataset,
    partition: &AffiliationPartition,
    schedule: &NoiseSchedule<T>,
    inference: &InferenceSettings,
    rhos: &[i32],
    ks: &[usize],
    seed: u64,
) -> Result<EvalReport> {
    if models.is_empty() {
        return Err(Error::invalid("models", "need at least one variant"));
    }
    let mut rows = Vec::with_capacity(rhos.len() * models.len() * ks.len());
    for &rho in rhos {
        let z_eval = compose_z_test(partition, rho)?;
        for model in models {
            let points = evaluate(
                model.backbone,
                model.approx,
                schedule,
                inference,
                data,
                &z_eval,
                ks,
            )?;
            for p in points {
                rows.push(ReportRow {
                    rho,
                    k: p.k,
                    variant: model.variant.label().to_string(),
                    seed,
                    recall: p.recall,
                    ndcg: p.ndcg,
                });
            }
        }
    }
    EvalReport::new(rows)
}
