use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dimensions, step schedule and seeds of the toy denoiser.
///
/// `branch_gain`, `query_gain` and `key_sink` are internal constants of the
/// toy model exposed for experimentation; the defaults are what the
/// alignment checks are calibrated against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub frames: usize,
    pub grid_h: usize,
    pub grid_w: usize,
    /// Embedding width `d`.
    pub channels: usize,
    pub heads: usize,
    pub blocks: usize,
    pub ffn_mult: usize,
    /// Denoising step count `N`.
    pub steps: usize,
    pub eta_max: f64,
    pub eta_min: f64,
    /// Cross-attention logit bias for (cell, token) pairs bound by the scene layout.
    pub region_bias: f64,
    pub weight_seed: u64,
    pub noise_seed: u64,
    /// Residual scale applied to the self-attention and FFN branches.
    pub branch_gain: f64,
    /// Scale of the content-dependent part of cross-attention queries.
    pub query_gain: f64,
    /// Magnitude of the shared query/key component in cross-attention.
    pub key_sink: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::distilled()
    }
}

impl ModelConfig {
    /// Four-step profile.
    pub fn distilled() -> Self {
        Self {
            frames: 4,
            grid_h: 16,
            grid_w: 16,
            channels: 32,
            heads: 4,
            blocks: 2,
            ffn_mult: 4,
            steps: 4,
            eta_max: 0.7,
            eta_min: 0.3,
            region_bias: 4.0,
            weight_seed: 1,
            noise_seed: 2,
            branch_gain: 0.05,
            query_gain: 0.25,
            key_sink: 2.0,
        }
    }

    /// Fifty-step profile.
    pub fn vanilla() -> Self {
        Self {
            steps: 50,
            ..Self::distilled()
        }
    }

    /// Number of latent tokens `L`.
    pub fn tokens(&self) -> usize {
        self.frames * self.grid_h * self.grid_w
    }

    pub fn cells_per_frame(&self) -> usize {
        self.grid_h * self.grid_w
    }

    pub fn head_dim(&self) -> usize {
        self.channels / self.heads
    }

    pub fn ffn_hidden(&self) -> usize {
        self.ffn_mult * self.channels
    }

    /// Step size at step `t`, decaying linearly from `eta_max` to `eta_min`.
    pub fn eta(&self, t: usize) -> f64 {
        let progress = t as f64 / self.steps as f64;
        self.eta_min + (self.eta_max - self.eta_min) * (1.0 - progress)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(format!("model: {msg}")));
        if self.tokens() == 0 {
            return fail("frames, grid_h and grid_w must be positive");
        }
        if self.channels == 0 || self.heads == 0 || self.channels % self.heads != 0 {
            return fail("channels must be a positive multiple of heads");
        }
        if self.blocks == 0 || self.ffn_mult == 0 {
            return fail("blocks and ffn_mult must be positive");
        }
        if self.steps == 0 {
            return fail("steps must be at least 1");
        }
        if !(self.eta_min >= 0.0 && self.eta_max >= self.eta_min) {
            return fail("need eta_max >= eta_min >= 0");
        }
        let finite = [
            self.eta_max,
            self.region_bias,
            self.branch_gain,
            self.query_gain,
            self.key_sink,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return fail("parameters must be finite");
        }
        Ok(())
    }
}
