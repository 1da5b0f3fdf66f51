//! Deterministic reverse walk used at evaluation time.

use crate::backbone::EmbeddingTable;
use crate::diffusion::{forward_noise, AnchorPolicy, NoiseSchedule, ResidualApproximator};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seeds::SeedBank;

/// One reverse step: predict the clean vector from the current noisy one, then
/// move to the posterior mean for step `t`. The posterior variance is ignored —
/// inference walks the mean path.
///
/// At `t = 1` the mean collapses onto the prediction itself, so the walk ends
/// exactly at the approximator's final estimate.
pub fn reverse_step<T: Scalar>(
    approx: &ResidualApproximator<T>,
    e_noisy: &[T],
    t: usize,
    anchor: &[T],
    schedule: &NoiseSchedule<T>,
) -> Result<Vec<T>> {
    if e_noisy.len() != approx.dim() {
        return Err(Error::DimensionMismatch {
            context: "noisy embedding width",
            expected: approx.dim(),
            got: e_noisy.len(),
        });
    }
    let e0_hat = approx.predict_e0(e_noisy, t, anchor)?;
    let (c_noisy, c_clean, _variance) = schedule.posterior_coefficients(t)?;
    Ok(e_noisy
        .iter()
        .zip(&e0_hat)
        .map(|(&n, &c)| c_noisy * n + c_clean * c)
        .collect())
}

/// Re-estimate a whole table of item-level bundle embeddings.
///
/// Each row is corrupted `t_prime` steps forward (with per-row seeded noise, or
/// zero noise when `deterministic_noise` is set) and walked back one posterior
/// mean at a time. The anchor fed to the approximator follows its policy:
/// normally the row's own source embedding, alternatively the current noisy
/// state. Rows are processed independently, so the result does not depend on
/// row order.
pub fn infer_item_level<T: Scalar>(
    approx: &ResidualApproximator<T>,
    source: &EmbeddingTable<T>,
    schedule: &NoiseSchedule<T>,
    t_prime: usize,
    noise_seed: u64,
    deterministic_noise: bool,
) -> Result<EmbeddingTable<T>> {
    if source.dim() != approx.dim() {
        return Err(Error::DimensionMismatch {
            context: "source embedding width",
            expected: approx.dim(),
            got: source.dim(),
        });
    }
    schedule.check_step(t_prime)?;
    let bank = SeedBank::new(noise_seed);
    let mut out = EmbeddingTable::zeros(source.rows(), source.dim());
    for r in 0..source.rows() {
        let clean = source.row(r);
        let eps: Vec<T> = if deterministic_noise {
            vec![T::zero(); source.dim()]
        } else {
            let mut rng = bank.rng_indexed("row", r as u64);
            (0..source.dim())
                .map(|_| T::sample_standard_normal(&mut rng))
                .collect()
        };
        let mut current = forward_noise(clean, t_prime, schedule, &eps)?;
        for t in (1..=t_prime).rev() {
            let next = match approx.anchor_policy() {
                AnchorPolicy::InferSourceEmbedding => {
                    reverse_step(approx, &current, t, clean, schedule)?
                }
                AnchorPolicy::TrainNoisyInput => {
                    let anchor = current.clone();
                    reverse_step(approx, &current, t, &anchor, schedule)?
                }
            };
            current = next;
        }
        out.row_mut(r).copy_from_slice(&current);
    }
    Ok(out)
}
