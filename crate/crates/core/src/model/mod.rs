//! Toy video diffusion transformer.
//!
//! Latents are a `frames × grid_h × grid_w` grid of `channels`-wide tokens.
//! Each block applies self-attention, prompt cross-attention and an FFN on
//! standardized inputs; the denoising loop moves the latent toward the
//! block stack's estimate with a linearly decaying step size.

pub mod attention;
pub mod config;
pub mod denoise;
pub mod kernels;
pub mod latent;
pub mod macs;
pub mod prompt;
pub mod weights;

pub use attention::{cross_attention, cross_attention_probs, self_attention, CrossAttnArgs};
pub use config::ModelConfig;
pub use denoise::{denoise_step_full, ffn, full_denoise, init_noise, step_tokens, Trajectory};
pub use kernels::Real;
pub use latent::{read_chrl, write_chrl, LatentShape, LatentTensor};
pub use macs::{full_run_macs, mac_count, MacKind};
pub use prompt::PromptEmbedding;
pub use weights::{init_weights, DiTWeights};

/// Cross-attention amplification factors for one step.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Amplification {
    pub key: f64,
    pub output: f64,
}

impl Amplification {
    pub const NEUTRAL: Self = Self { key: 1.0, output: 1.0 };
}
