//! Joint training: ranking loss plus weighted diffusion loss, one Adam step
//! per minibatch.
//!
//! Every epoch walks the user-bundle interactions once in a seeded shuffled
//! order. Each minibatch contributes the pairwise ranking loss over both
//! relations (the user-item edges are spread across the epoch so they are also
//! covered exactly once) and, when an approximator is attached, the diffusion
//! reconstruction loss of the batch's bundles: corrupt each bundle's pooled
//! embedding to a uniformly drawn step, predict the clean vector anchored on
//! the corrupted input itself, and penalise the squared reconstruction error.
//! Gradients from the reconstruction flow into the network and — unless
//! detached — through the pooling into the item table.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::backbone::{
    bpr_loss_and_grads, pooled_row, resolve_negatives, BackboneState, EmbeddingTable, GradTables,
};
use crate::data::{Dataset, InteractionMatrix};
use crate::diffusion::{forward_noise, ApproxGrads, Layer, NoiseSchedule, ResidualApproximator};
use crate::error::{Error, Result};
use crate::scalar::{axpy, Scalar};
use crate::seeds::{labels, SeedBank};

/// Adam hyperparameters; the defaults are the conventional ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
}

impl<T: Scalar> AdamParams<T> {
    pub fn with_lr(lr: T) -> Self {
        AdamParams {
            lr,
            beta1: T::cast(0.9),
            beta2: T::cast(0.999),
            epsilon: T::cast(1e-8),
        }
    }
}

/// First/second moment buffers for one parameter tensor.
#[derive(Debug, Clone)]
struct Moments<T> {
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Scalar> Moments<T> {
    fn zeros(len: usize) -> Self {
        Moments {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
        }
    }

    /// Bias-corrected Adam update of `param` from `grad` at global step `step`
    /// (1-based).
    fn update(&mut self, param: &mut [T], grad: &[T], p: &AdamParams<T>, step: u64) {
        debug_assert_eq!(param.len(), grad.len());
        let one = T::one();
        let bc1 = one - p.beta1.powi(step as i32);
        let bc2 = one - p.beta2.powi(step as i32);
        for ((w, &g), (m, v)) in param
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = p.beta1 * *m + (one - p.beta1) * g;
            *v = p.beta2 * *v + (one - p.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *w = *w - p.lr * m_hat / (v_hat.sqrt() + p.epsilon);
        }
    }
}

/// Knobs of the joint loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig<T> {
    /// Weight of the diffusion loss in the total objective.
    pub lambda: T,
    pub lr: T,
    pub l2_reg: T,
    pub batch_size: usize,
    /// Stop diffusion gradients at the pooled embeddings instead of letting
    /// them reach the item table.
    pub detach_item_grads: bool,
    pub master_seed: u64,
}

impl<T: Scalar> TrainConfig<T> {
    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be positive"));
        }
        if !(self.lambda >= T::zero()) || !self.lambda.is_finite() {
            return Err(Error::invalid("lambda", "must be finite and non-negative"));
        }
        if !(self.lr > T::zero()) {
            return Err(Error::invalid("lr", "must be positive"));
        }
        if !(self.l2_reg >= T::zero()) {
            return Err(Error::invalid("l2_reg", "must be non-negative"));
        }
        Ok(())
    }
}

/// Pre-drawn randomness for one diffusion minibatch: per interaction, the
/// bundle, the corruption depth and the noise vector. Resolving the draws
/// before computing makes the loss a pure function of the parameters, which is
/// what gradient checking needs.
#[derive(Debug, Clone)]
pub struct DiffusionDraws<T> {
    pub bundles: Vec<u32>,
    pub steps: Vec<usize>,
    pub noise: Vec<Vec<T>>,
}

/// Draw depth and noise for each interaction's bundle.
pub fn draw_diffusion_batch<T: Scalar>(
    bundles: &[u32],
    schedule: &NoiseSchedule<T>,
    dim: usize,
    step_rng: &mut ChaCha8Rng,
    noise_rng: &mut ChaCha8Rng,
) -> DiffusionDraws<T> {
    let t_max = schedule.t_max();
    let steps = bundles
        .iter()
        .map(|_| step_rng.gen_range(1..=t_max))
        .collect();
    let noise = bundles
        .iter()
        .map(|_| {
            (0..dim)
                .map(|_| T::sample_standard_normal(noise_rng))
                .collect()
        })
        .collect();
    DiffusionDraws {
        bundles: bundles.to_vec(),
        steps,
        noise,
    }
}

/// Mean squared reconstruction error between clean and predicted batches.
pub fn diffusion_loss<T: Scalar>(e0_batch: &[Vec<T>], pred_batch: &[Vec<T>]) -> Result<T> {
    if e0_batch.is_empty() {
        return Err(Error::invalid("diffusion batch", "must not be empty"));
    }
    if e0_batch.len() != pred_batch.len() {
        return Err(Error::DimensionMismatch {
            context: "clean vs predicted batch size",
            expected: e0_batch.len(),
            got: pred_batch.len(),
        });
    }
    let mut total = T::zero();
    for (e0, pred) in e0_batch.iter().zip(pred_batch) {
        if e0.len() != pred.len() {
            return Err(Error::DimensionMismatch {
                context: "clean vs predicted width",
                expected: e0.len(),
                got: pred.len(),
            });
        }
        total += crate::scalar::squared_distance(e0, pred);
    }
    Ok(total / T::from_usize(e0_batch.len()).expect("batch size fits in scalar"))
}

/// Reconstruction loss of a resolved diffusion batch, with analytic gradients.
///
/// Returns the unweighted mean squared error. Gradients are accumulated scaled
/// by `scale` (the caller passes its loss weight): network parameter and blend
/// gradients into `grads`, and — when an item gradient table is supplied — the
/// chain through the clean target, the corrupted input and the anchor back into
/// the item embeddings.
pub fn diffusion_loss_and_grads<T: Scalar>(
    approx: &ResidualApproximator<T>,
    v_i: &EmbeddingTable<T>,
    bundle_items: &[Vec<u32>],
    schedule: &NoiseSchedule<T>,
    draws: &DiffusionDraws<T>,
    scale: T,
    mut grads: Option<(&mut ApproxGrads<T>, Option<&mut EmbeddingTable<T>>)>,
) -> Result<T> {
    if draws.bundles.is_empty() {
        return Err(Error::invalid("diffusion batch", "must not be empty"));
    }
    let dim = approx.dim();
    let inv_n = T::one() / T::from_usize(draws.bundles.len()).expect("batch size fits in scalar");
    let two = T::cast(2.0);
    let delta = approx.delta();
    let keep = T::one() - delta;

    // Pooled rows are shared across interactions hitting the same bundle.
    let mut pooled: HashMap<u32, Vec<T>> = HashMap::new();
    for &b in &draws.bundles {
        pooled
            .entry(b)
            .or_insert_with(|| pooled_row(&bundle_items[b as usize], v_i));
    }

    let mut loss = T::zero();
    for ((&b, &t), eps) in draws.bundles.iter().zip(&draws.steps).zip(&draws.noise) {
        let e0 = &pooled[&b];
        let e_t = forward_noise(e0, t, schedule, eps)?;
        // Training anchors on the corrupted input itself.
        let input = approx.assemble_input(&e_t, t)?;
        let acts = approx.forward_cached(&input);
        let f = acts.output();
        let pred: Vec<T> = f
            .iter()
            .zip(&e_t)
            .map(|(&fo, &a)| delta * fo + keep * a)
            .collect();
        let err: T = crate::scalar::squared_distance(e0, &pred);
        loss += inv_n * err;

        if let Some((approx_grads, item_grads)) = grads.as_mut() {
            // d loss / d pred, already including the batch mean.
            let d_pred: Vec<T> = pred
                .iter()
                .zip(e0)
                .map(|(&p, &c)| two * inv_n * (p - c))
                .collect();
            // Blend: pred = delta * f + (1 - delta) * anchor, anchor = e_t.
            let d_f: Vec<T> = d_pred.iter().map(|&g| delta * g).collect();
            for (&g, (&fo, &a)) in d_pred.iter().zip(f.iter().zip(&e_t)) {
                approx_grads.delta += scale * g * (fo - a);
            }
            let d_input = approx.backward(&input, &acts, &d_f, scale, approx_grads);

            if let Some(item_grads) = item_grads.as_deref_mut() {
                let items = &bundle_items[b as usize];
                if !items.is_empty() {
                    // The clean embedding appears as the regression target and,
                    // scaled by the surviving signal, inside the corrupted
                    // input — which feeds both the network and the anchor.
                    let signal = schedule.bar_alpha(t)?.sqrt();
                    let mut d_e0: Vec<T> = d_pred.iter().map(|&g| -g).collect();
                    for ((d, &di), &g) in d_e0.iter_mut().zip(&d_input[..dim]).zip(&d_pred) {
                        *d = *d + signal * (di + keep * g);
                    }
                    let share = scale / T::from_usize(items.len()).expect("count fits in scalar");
                    for &i in items {
                        axpy(item_grads.row_mut(i as usize), share, &d_e0);
                    }
                }
            }
        }
    }
    Ok(loss)
}

/// Per-epoch loss summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLosses<T> {
    /// Ranking loss plus `lambda` times the diffusion loss.
    pub total: T,
    pub ranking: T,
    pub diffusion: T,
    /// Positives dropped across the epoch because negative sampling gave up.
    pub skipped_negatives: usize,
}

/// Joint trainer holding the model, optimizer state and random streams.
pub struct Trainer<T: Scalar> {
    pub backbone: BackboneState<T>,
    pub approx: Option<ResidualApproximator<T>>,
    schedule: NoiseSchedule<T>,
    config: TrainConfig<T>,
    bundle_items: Vec<Vec<u32>>,
    adam: AdamParams<T>,
    step: u64,
    epoch: usize,
    shuffle_rng: ChaCha8Rng,
    neg_rng: ChaCha8Rng,
    step_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    grads: GradTables<T>,
    approx_grads: Option<ApproxGrads<T>>,
    item_scratch: EmbeddingTable<T>,
    moments: TrainerMoments<T>,
}

struct TrainerMoments<T> {
    p_u: Moments<T>,
    q_b: Moments<T>,
    p_u_item: Moments<T>,
    v_i: Moments<T>,
    layers: Vec<(Moments<T>, Moments<T>)>,
}

impl<T: Scalar> Trainer<T> {
    /// Wire up a trainer over the training affiliation view `z_train`.
    pub fn new(
        backbone: BackboneState<T>,
        approx: Option<ResidualApproximator<T>>,
        schedule: NoiseSchedule<T>,
        z_train: &InteractionMatrix,
        config: TrainConfig<T>,
    ) -> Result<Self> {
        config.validate()?;
        if let Some(a) = &approx {
            if a.dim() != backbone.dim() {
                return Err(Error::DimensionMismatch {
                    context: "approximator vs backbone width",
                    expected: backbone.dim(),
                    got: a.dim(),
                });
            }
        }
        if z_train.n_cols() != backbone.n_items() {
            return Err(Error::DimensionMismatch {
                context: "affiliation columns vs item table rows",
                expected: backbone.n_items(),
                got: z_train.n_cols(),
            });
        }
        let bank = SeedBank::new(config.master_seed);
        let grads = GradTables::zeros_like(&backbone);
        let approx_grads = approx.as_ref().map(ApproxGrads::zeros_like);
        let item_scratch = EmbeddingTable::zeros(backbone.n_items(), backbone.dim());
        let moments = TrainerMoments {
            p_u: Moments::zeros(backbone.p_u.data().len()),
            q_b: Moments::zeros(backbone.q_b.data().len()),
            p_u_item: Moments::zeros(backbone.p_u_item.data().len()),
            v_i: Moments::zeros(backbone.v_i.data().len()),
            layers: approx
                .as_ref()
                .map(|a| {
                    a.layers()
                        .iter()
                        .map(|l| {
                            (
                                Moments::zeros(l.weight.len()),
                                Moments::zeros(l.bias.len()),
                            )
                        })
                        .collect()
                })
                .unwrap_or_default(),
        };
        Ok(Trainer {
            adam: AdamParams::with_lr(config.lr),
            backbone,
            approx,
            schedule,
            bundle_items: z_train.row_adjacency(),
            config,
            step: 0,
            epoch: 0,
            shuffle_rng: bank.rng(labels::BATCH_SHUFFLE),
            neg_rng: bank.rng(labels::NEGATIVES),
            step_rng: bank.rng(labels::DIFFUSION_T),
            noise_rng: bank.rng(labels::DIFFUSION_NOISE),
            grads,
            approx_grads,
            item_scratch,
            moments,
        })
    }

    pub fn config(&self) -> &TrainConfig<T> {
        &self.config
    }

    pub fn schedule(&self) -> &NoiseSchedule<T> {
        &self.schedule
    }

    /// Epochs completed so far.
    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    /// One pass over the training interactions: ranking plus weighted
    /// diffusion loss, one Adam step per minibatch over every parameter.
    pub fn joint_train_epoch(&mut self, data: &Dataset) -> Result<EpochLosses<T>> {
        let mut ub = data.x_train.edge_vec();
        let mut ui = data.y.edge_vec();
        ub.shuffle(&mut self.shuffle_rng);
        ui.shuffle(&mut self.shuffle_rng);
        self.epoch += 1;

        if ub.is_empty() {
            return Ok(EpochLosses {
                total: T::zero(),
                ranking: T::zero(),
                diffusion: T::zero(),
                skipped_negatives: 0,
            });
        }

        let bs = self.config.batch_size;
        let n_batches = ub.len().div_ceil(bs);
        // Spread the user-item edges over the same batches so one epoch covers
        // both relations exactly once.
        let ui_per_batch = ui.len().div_ceil(n_batches).max(1);

        let mut sum_total = T::zero();
        let mut sum_ranking = T::zero();
        let mut sum_diffusion = T::zero();
        let mut skipped = 0usize;

        for batch_idx in 0..n_batches {
            let ub_chunk = &ub[batch_idx * bs..((batch_idx + 1) * bs).min(ub.len())];
            let ui_start = (batch_idx * ui_per_batch).min(ui.len());
            let ui_chunk = &ui[ui_start..((batch_idx + 1) * ui_per_batch).min(ui.len())];

            let batch =
                resolve_negatives(&data.x_train, &data.y, ub_chunk, ui_chunk, &mut self.neg_rng);
            skipped += batch.skipped;

            self.grads.reset();
            let ranking = bpr_loss_and_grads(
                &self.backbone,
                &self.bundle_items,
                &batch,
                self.config.l2_reg,
                Some(&mut self.grads),
            );

            let mut diffusion = T::zero();
            if let Some(approx) = &self.approx {
                let bundles: Vec<u32> = ub_chunk.iter().map(|&(_, b)| b).collect();
                let draws = draw_diffusion_batch(
                    &bundles,
                    &self.schedule,
                    self.backbone.dim(),
                    &mut self.step_rng,
                    &mut self.noise_rng,
                );
                let approx_grads = self.approx_grads.as_mut().expect("buffers match approx");
                approx_grads.reset();
                let item_grads = if self.config.detach_item_grads {
                    None
                } else {
                    for v in self.item_scratch.data_mut() {
                        *v = T::zero();
                    }
                    Some(&mut self.item_scratch)
                };
                diffusion = diffusion_loss_and_grads(
                    approx,
                    &self.backbone.v_i,
                    &self.bundle_items,
                    &self.schedule,
                    &draws,
                    self.config.lambda,
                    Some((approx_grads, item_grads)),
                )?;
                if !self.config.detach_item_grads {
                    // The scratch gradients already carry the lambda weight.
                    axpy(self.grads.v_i.data_mut(), T::one(), self.item_scratch.data());
                }
            }

            let batch_total = ranking + self.config.lambda * diffusion;
            if !batch_total.is_finite() {
                return Err(Error::NonFinite {
                    context: format!(
                        "joint training epoch {}, batch {batch_idx}",
                        self.epoch
                    ),
                });
            }
            sum_ranking += ranking;
            sum_diffusion += diffusion;
            sum_total += batch_total;

            self.adam_step();
        }

        let inv = T::one() / T::from_usize(n_batches).expect("batch count fits in scalar");
        Ok(EpochLosses {
            total: sum_total * inv,
            ranking: sum_ranking * inv,
            diffusion: sum_diffusion * inv,
            skipped_negatives: skipped,
        })
    }

    /// One Adam step over all four tables and, if present, the network.
    fn adam_step(&mut self) {
        self.step += 1;
        let p = self.adam;
        let step = self.step;
        self.moments
            .p_u
            .update(self.backbone.p_u.data_mut(), self.grads.p_u.data(), &p, step);
        self.moments
            .q_b
            .update(self.backbone.q_b.data_mut(), self.grads.q_b.data(), &p, step);
        self.moments.p_u_item.update(
            self.backbone.p_u_item.data_mut(),
            self.grads.p_u_item.data(),
            &p,
            step,
        );
        self.moments
            .v_i
            .update(self.backbone.v_i.data_mut(), self.grads.v_i.data(), &p, step);
        if let (Some(approx), Some(approx_grads)) = (&mut self.approx, &self.approx_grads) {
            for (l, (w_mom, b_mom)) in self.moments.layers.iter_mut().enumerate() {
                let layer: &mut Layer<T> = &mut approx.layers_mut()[l];
                w_mom.update(&mut layer.weight, &approx_grads.layers[l].weight, &p, step);
                b_mom.update(&mut layer.bias, &approx_grads.layers[l].bias, &p, step);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbone::init_backbone;
    use crate::data::{synth_planted_dataset, z_train_val, SyntheticConfig};
    use crate::diffusion::AnchorPolicy;

    fn tiny_setup(
        lambda: f64,
        with_approx: bool,
        seed: u64,
    ) -> (Trainer<f64>, Dataset) {
        let cfg = SyntheticConfig {
            n_themes: 2,
            items_per_theme: 15,
            bundles_per_theme: 5,
            bundle_size: 10,
            n_users: 20,
            user_bundle_density: 0.3,
            ..SyntheticConfig::default()
        };
        let (data, partition) = synth_planted_dataset(&cfg, seed).unwrap();
        let z_train = z_train_val(&partition);
        let bank = SeedBank::new(seed);
        let backbone = init_backbone(
            data.n_users(),
            data.n_bundles(),
            data.n_items(),
            8,
            0.1,
            bank.derive(labels::INIT),
        )
        .unwrap();
        let approx = with_approx.then(|| {
            ResidualApproximator::new(
                8,
                4,
                2,
                16,
                0.5,
                AnchorPolicy::InferSourceEmbedding,
                bank.derive("approx-init"),
            )
            .unwrap()
        });
        let schedule = NoiseSchedule::build(10, 0.1, 0.1, 0.9).unwrap();
        let trainer = Trainer::new(
            backbone,
            approx,
            schedule,
            &z_train,
            TrainConfig {
                lambda,
                lr: 0.01,
                l2_reg: 1e-4,
                batch_size: 16,
                detach_item_grads: false,
                master_seed: seed,
            },
        )
        .unwrap();
        (trainer, data)
    }

    #[test]
    fn losses_fall_over_a_short_run() {
        let (mut trainer, data) = tiny_setup(1.0, true, 3);
        let first = trainer.joint_train_epoch(&data).unwrap();
        let mut last = first;
        for _ in 0..24 {
            last = trainer.joint_train_epoch(&data).unwrap();
        }
        assert!(
            last.total < first.total,
            "total loss went {} -> {}",
            first.total,
            last.total
        );
        assert!(
            last.diffusion < first.diffusion,
            "diffusion loss went {} -> {}",
            first.diffusion,
            last.diffusion
        );
    }

    #[test]
    fn zero_weight_reduces_to_the_ranking_objective() {
        let (mut trainer, data) = tiny_setup(0.0, true, 5);
        let before = trainer.approx.clone().unwrap();
        for _ in 0..3 {
            let losses = trainer.joint_train_epoch(&data).unwrap();
            assert_eq!(losses.total, losses.ranking);
        }
        // The network saw zero gradient through the whole run.
        assert_eq!(trainer.approx.as_ref().unwrap(), &before);
    }

    #[test]
    fn epochs_are_reproducible_across_trainers() {
        let (mut a, data) = tiny_setup(1.0, true, 7);
        let (mut b, data_b) = tiny_setup(1.0, true, 7);
        for _ in 0..3 {
            let la = a.joint_train_epoch(&data).unwrap();
            let lb = b.joint_train_epoch(&data_b).unwrap();
            assert_eq!(la.total, lb.total);
        }
        assert_eq!(a.backbone, b.backbone);
        assert_eq!(a.approx, b.approx);
    }

    #[test]
    fn backbone_only_trainer_runs_without_an_approximator() {
        let (mut trainer, data) = tiny_setup(1.0, false, 9);
        let losses = trainer.joint_train_epoch(&data).unwrap();
        assert_eq!(losses.diffusion, 0.0);
        assert_eq!(losses.total, losses.ranking);
    }
}
