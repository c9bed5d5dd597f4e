//! The gathered sparse step and its cost ratio.

use crate::model::{mac_count, step_tokens, Amplification, DiTWeights, LatentTensor, MacKind, ModelConfig, PromptEmbedding, Real};
use crate::srd::mask::{GatherMap, MaskSet};
use crate::{Error, Result};

/// One selective step.
///
/// Tokens under `see` are gathered and run through the block stack on
/// their own (self-attention only among themselves). Cells under `edit`
/// take the recomputed value; every other cell is copied from `sl`, the
/// source trajectory's latent after the same step. An empty `see` mask
/// returns `sl` unchanged.
#[allow(clippy::too_many_arguments)]
pub fn srd_step<T: Real>(
    x: &LatentTensor<T>,
    sl: &LatentTensor<T>,
    masks: &MaskSet,
    prompt: &PromptEmbedding<T>,
    t: usize,
    factors: Amplification,
    cfg: &ModelConfig,
    weights: &DiTWeights<T>,
) -> Result<LatentTensor<T>> {
    if t >= cfg.steps {
        return Err(Error::Config(format!("step {t} outside 0..{}", cfg.steps)));
    }
    if x.shape != sl.shape || masks.see.len() != x.tokens() || !masks.see.same_shape(&masks.edit) {
        return Err(Error::Shape("latent, source latent and masks must share the latent grid".into()));
    }
    if !sl.is_finite() {
        return Err(Error::NonFinite);
    }
    let mut out = sl.clone();
    let gather = GatherMap::new(&masks.see);
    if gather.is_empty() {
        return Ok(out);
    }
    let d = x.shape.channels;
    let rows = gather.gather(&x.data, d);
    let updated = step_tokens(&rows, &gather.indices, prompt, t, factors, cfg, weights)?;
    for cell in masks.edit.set_indices() {
        let k = gather.position(cell).expect("edit is contained in see");
        out.data[cell * d..(cell + 1) * d].copy_from_slice(&updated[k * d..(k + 1) * d]);
    }
    Ok(out)
}

/// MACs of `steps` selective steps over `|see|` tokens divided by the MACs
/// of the same number of full steps. Zero steps give 0.
pub fn stage2_mac_fraction(masks: &MaskSet, cfg: &ModelConfig, prompt_len: usize, steps: usize) -> f64 {
    if steps == 0 {
        return 0.0;
    }
    let sparse = mac_count(MacKind::Step, masks.see.count(), prompt_len, cfg) * steps as u64;
    let full = mac_count(MacKind::Step, masks.see.len(), prompt_len, cfg) * steps as u64;
    sparse as f64 / full as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{denoise_step_full, init_noise, init_weights};
    use crate::srd::mask::{build_mask_set, BinaryMask, MaskSpace};
    use rand::{Rng, SeedableRng};

    fn cfg() -> ModelConfig {
        ModelConfig {
            frames: 2,
            grid_h: 6,
            grid_w: 6,
            channels: 8,
            heads: 2,
            ..ModelConfig::default()
        }
    }

    fn prompt(c: &ModelConfig) -> PromptEmbedding<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let l = 4;
        let keys = (0..l * c.channels).map(|_| rng.random_range(-1.0..1.0)).collect();
        let paints = (0..l * c.channels).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cells = (0..c.frames * c.grid_h * c.grid_w).map(|i| if i % 3 == 0 { 0b0110 } else { 1 }).collect();
        PromptEmbedding::new(c.channels, keys, paints, cells).unwrap().with_diff_indices(&[1]).unwrap()
    }

    fn random_base(c: &ModelConfig, seed: u64) -> BinaryMask {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let bits = (0..c.frames * c.grid_h * c.grid_w).map(|_| rng.random_bool(0.08)).collect();
        BinaryMask::from_bits(c.frames, c.grid_h, c.grid_w, MaskSpace::Latent, bits).unwrap()
    }

    #[test]
    fn full_masks_equal_full_step() {
        let c = cfg();
        let w = init_weights::<f64>(&c);
        let p = prompt(&c);
        let x = init_noise::<f64>(&c);
        let ones = BinaryMask::ones(c.frames, c.grid_h, c.grid_w, MaskSpace::Latent);
        let masks = build_mask_set(&ones, 1, 2).unwrap();
        let sl = init_noise::<f64>(&ModelConfig { noise_seed: 77, ..c.clone() });
        let amp = Amplification { key: 2.0, output: 1.5 };
        let sparse = srd_step(&x, &sl, &masks, &p, 1, amp, &c, &w).unwrap();
        let full = denoise_step_full(&x, &p, 1, amp, &c, &w).unwrap();
        assert_eq!(sparse, full);
    }

    #[test]
    fn empty_edit_is_pure_reuse() {
        let c = cfg();
        let w = init_weights::<f64>(&c);
        let x = init_noise::<f64>(&c);
        let sl = init_noise::<f64>(&ModelConfig { noise_seed: 5, ..c.clone() });
        let zeros = BinaryMask::zeros(c.frames, c.grid_h, c.grid_w, MaskSpace::Latent);
        let masks = build_mask_set(&zeros, 0, 0).unwrap();
        let out = srd_step(&x, &sl, &masks, &prompt(&c), 0, Amplification::NEUTRAL, &c, &w).unwrap();
        assert_eq!(out, sl);
    }

    #[test]
    fn non_edit_cells_are_bit_equal_to_source() {
        let c = cfg();
        let w = init_weights::<f32>(&c);
        let p = prompt(&c).cast::<f32>();
        let x = init_noise::<f32>(&c);
        let sl = init_noise::<f32>(&ModelConfig { noise_seed: 5, ..c.clone() });
        for seed in 0..20 {
            let masks = build_mask_set(&random_base(&c, seed), 1, 2).unwrap();
            let out = srd_step(&x, &sl, &masks, &p, 2, Amplification::NEUTRAL, &c, &w).unwrap();
            for cell in 0..out.tokens() {
                if !masks.edit.bits()[cell] {
                    assert_eq!(
                        out.token(cell).iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                        sl.token(cell).iter().map(|v| v.to_bits()).collect::<Vec<_>>()
                    );
                }
            }
        }
    }

    #[test]
    fn mac_fraction_bounds() {
        let c = cfg();
        let ones = build_mask_set(&BinaryMask::ones(2, 6, 6, MaskSpace::Latent), 0, 0).unwrap();
        let zeros = build_mask_set(&BinaryMask::zeros(2, 6, 6, MaskSpace::Latent), 0, 0).unwrap();
        assert_eq!(stage2_mac_fraction(&ones, &c, 4, 2), 1.0);
        assert_eq!(stage2_mac_fraction(&zeros, &c, 4, 2), 0.0);
    }
}
