//! FFN, the block stack and the iterative denoising loop.

use crate::model::attention::{cross_attention, self_attention, CrossAttnArgs};
use crate::model::kernels::{all_finite, gelu_tanh, layer_norm, Real};
use crate::model::weights::{DiTWeights, FfnWeights};
use crate::model::{Amplification, LatentShape, LatentTensor, ModelConfig, PromptEmbedding};
use crate::tgaa::FactorTable;
use crate::{Error, Result};

/// Tokenwise two-layer network with tanh-approximated GELU.
pub fn ffn<T: Real>(x: &[T], w: &FfnWeights<T>) -> Result<Vec<T>> {
    if !all_finite(x) {
        return Err(Error::NonFinite);
    }
    let mut hidden = w.up.apply_rows(x);
    hidden.iter_mut().for_each(|v| *v = gelu_tanh(*v));
    Ok(w.down.apply_rows(&hidden))
}

/// Shared-seed initial noise: standard Gaussian scaled by `1/sqrt(d)` so
/// each token has roughly unit norm.
pub fn init_noise<T: Real>(cfg: &ModelConfig) -> LatentTensor<T> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.noise_seed);
    let scale = 1.0 / (cfg.channels as f64).sqrt();
    let shape = LatentShape::of(cfg);
    let data = (0..shape.tokens() * shape.channels)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            T::lit(z * scale)
        })
        .collect();
    LatentTensor { shape, data }
}

/// Runs one denoising update on an arbitrary token subsequence.
///
/// `tokens` holds `n` rows of width `d`; `cells` gives each row's latent
/// cell. Self-attention only sees these `n` tokens. Returns the updated
/// rows `x + eta_t * (estimate - x)`, where the clean estimate is the mean
/// per-block residual update of the block stack.
pub fn step_tokens<T: Real>(
    tokens: &[T],
    cells: &[usize],
    prompt: &PromptEmbedding<T>,
    t: usize,
    factors: Amplification,
    cfg: &ModelConfig,
    weights: &DiTWeights<T>,
) -> Result<Vec<T>> {
    if !all_finite(tokens) {
        return Err(Error::NonFinite);
    }
    if tokens.is_empty() {
        return Ok(Vec::new());
    }
    let d = cfg.channels;
    let gain = T::lit(cfg.branch_gain);
    let mut h = tokens.to_vec();
    let mut residual = vec![T::zero(); tokens.len()];
    let mut add = |h: &mut [T], delta: &[T], scale: T| {
        for ((hi, ri), di) in h.iter_mut().zip(residual.iter_mut()).zip(delta) {
            let v = scale * *di;
            *hi = *hi + v;
            *ri = *ri + v;
        }
    };
    for block in &weights.blocks {
        let sa = self_attention(&layer_norm(&h, d), &block.self_attn, cfg.heads)?;
        add(&mut h, &sa, gain);
        let args = CrossAttnArgs {
            prompt,
            cells,
            factors,
            heads: cfg.heads,
            region_bias: cfg.region_bias,
        };
        let ca = cross_attention(&layer_norm(&h, d), &block.cross_attn, args)?;
        add(&mut h, &ca, T::one());
        let ff = ffn(&layer_norm(&h, d), &block.ffn)?;
        add(&mut h, &ff, gain);
    }
    let inv_blocks = T::lit(1.0 / cfg.blocks as f64);
    let eta = T::lit(cfg.eta(t));
    let out = tokens
        .iter()
        .zip(&residual)
        .map(|(x, r)| *x + eta * (*r * inv_blocks - *x))
        .collect();
    Ok(out)
}

/// One step over every latent token.
pub fn denoise_step_full<T: Real>(
    x: &LatentTensor<T>,
    prompt: &PromptEmbedding<T>,
    t: usize,
    factors: Amplification,
    cfg: &ModelConfig,
    weights: &DiTWeights<T>,
) -> Result<LatentTensor<T>> {
    if t >= cfg.steps {
        return Err(Error::Config(format!("step {t} outside 0..{}", cfg.steps)));
    }
    let cells: Vec<usize> = (0..x.tokens()).collect();
    let data = step_tokens(&x.data, &cells, prompt, t, factors, cfg, weights)?;
    Ok(LatentTensor { shape: x.shape, data })
}

/// Latents `0..=N` of one generation; index 0 is the initial noise.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    pub latents: Vec<LatentTensor<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn final_latent(&self) -> &LatentTensor<T> {
        self.latents.last().expect("trajectory is never empty")
    }

    pub fn steps(&self) -> usize {
        self.latents.len() - 1
    }
}

/// Full generation from the shared initial noise. Steps outside the factor
/// table (or all steps when `factors` is `None`) run with neutral factors.
pub fn full_denoise<T: Real>(
    prompt: &PromptEmbedding<T>,
    cfg: &ModelConfig,
    weights: &DiTWeights<T>,
    factors: Option<&FactorTable>,
) -> Result<Trajectory<T>> {
    let mut latents = Vec::with_capacity(cfg.steps + 1);
    latents.push(init_noise(cfg));
    for t in 0..cfg.steps {
        let amp = factors.map_or(Amplification::NEUTRAL, |f| f.at(t));
        let next = denoise_step_full(&latents[t], prompt, t, amp, cfg, weights)?;
        latents.push(next);
    }
    Ok(Trajectory { latents })
}
