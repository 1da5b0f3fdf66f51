//! Residual diffusion over item-level bundle embeddings.
//!
//! Training corrupts each bundle's aggregated item embedding with Gaussian
//! noise at a random depth and teaches a small residual network to recover the
//! clean vector. At evaluation time the stored aggregate — possibly computed
//! from very different bundle contents than training saw — is pushed a few
//! steps into the noise and walked back, landing on a vector that behaves like
//! the embeddings the ranking model was actually trained against.

mod approximator;
mod embed;
mod infer;
mod schedule;
mod train;

pub use approximator::{
    AnchorPolicy, ApproxGrads, Layer, MlpActivations, ResidualApproximator,
};
pub use embed::time_embed;
pub use infer::{infer_item_level, reverse_step};
pub use schedule::{forward_noise, posterior_stats, NoiseSchedule};
pub use train::{
    diffusion_loss, diffusion_loss_and_grads, draw_diffusion_batch, AdamParams, DiffusionDraws,
    EpochLosses, TrainConfig, Trainer,
};
