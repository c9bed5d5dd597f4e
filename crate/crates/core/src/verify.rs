//! Built-in invariant checks behind the `verify` command.
//!
//! Every check runs in memory on small configurations; nothing touches the
//! filesystem.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cache::{Cache, CacheEntry};
use crate::model::{
    denoise_step_full, full_denoise, init_noise, init_weights, mac_count, macs::self_attn_terms, Amplification,
    MacKind, ModelConfig, PromptEmbedding, Trajectory,
};
use crate::scheduler::{plan_stages, Mode, SchedulerParams};
use crate::srd::{build_mask_set_with, dilate, project_to_latent, srd_step, BinaryMask, DilateFn, MaskSpace};
use crate::tgaa::{schedule, FactorTable, TgaaParams};
use crate::world::{embed::normalize, PromptTokens, Scene};
use crate::Result;

#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    /// Dilation under test; replaced by tests to inject faults.
    pub dilate_fn: DilateFn,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { dilate_fn: dilate }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, outcome: Result<std::result::Result<String, String>>) -> CheckResult {
    match outcome {
        Ok(Ok(detail)) => CheckResult {
            name,
            passed: true,
            detail,
        },
        Ok(Err(detail)) => CheckResult {
            name,
            passed: false,
            detail,
        },
        Err(e) => CheckResult {
            name,
            passed: false,
            detail: e.to_string(),
        },
    }
}

fn random_mask(rng: &mut ChaCha8Rng, frames: usize, h: usize, w: usize, space: MaskSpace) -> BinaryMask {
    let density = rng.random_range(0.0..0.3);
    let bits = (0..frames * h * w).map(|_| rng.random_bool(density)).collect();
    BinaryMask::from_bits(frames, h, w, space, bits).expect("sizes match")
}

/// Neighborhood scan straight from the definition.
pub fn naive_dilate(m: &BinaryMask, r: usize) -> BinaryMask {
    let mut out = BinaryMask::zeros(m.frames, m.height, m.width, m.space);
    let r = r as isize;
    for f in 0..m.frames {
        for row in 0..m.height as isize {
            for col in 0..m.width as isize {
                let mut any = false;
                for dr in -r..=r {
                    for dc in -r..=r {
                        let (rr, cc) = (row + dr, col + dc);
                        if rr >= 0 && cc >= 0 && rr < m.height as isize && cc < m.width as isize {
                            any |= m.get(f, rr as usize, cc as usize);
                        }
                    }
                }
                out.set(f, row as usize, col as usize, any);
            }
        }
    }
    out
}

/// Per-block OR straight from the definition.
pub fn naive_project(pixels: &BinaryMask, pool: usize) -> BinaryMask {
    let (h, w) = (pixels.height / pool, pixels.width / pool);
    let mut out = BinaryMask::zeros(pixels.frames, h, w, MaskSpace::Latent);
    for f in 0..pixels.frames {
        for r in 0..h {
            for c in 0..w {
                let any = (0..pool).any(|i| (0..pool).any(|j| pixels.get(f, r * pool + i, c * pool + j)));
                out.set(f, r, c, any);
            }
        }
    }
    out
}

fn tiny_model() -> ModelConfig {
    ModelConfig {
        frames: 2,
        grid_h: 6,
        grid_w: 6,
        channels: 8,
        heads: 2,
        ..ModelConfig::distilled()
    }
}

fn random_prompt(cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Result<PromptEmbedding<f64>> {
    let l = 4;
    let keys = (0..l * cfg.channels).map(|_| rng.random_range(-1.0..1.0)).collect();
    let paints = (0..l * cfg.channels).map(|_| rng.random_range(-1.0..1.0)).collect();
    let cells = (0..cfg.tokens()).map(|_| rng.random_range(0..16u16)).collect();
    PromptEmbedding::new(cfg.channels, keys, paints, cells)?.with_diff_indices(&[1, 2])
}

fn oracle_dilation(opts: &VerifyOptions) -> Result<std::result::Result<String, String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..100 {
        let m = random_mask(&mut rng, 3, 16, 16, MaskSpace::Latent);
        let r = case % 4;
        if (opts.dilate_fn)(&m, r) != naive_dilate(&m, r) {
            return Ok(Err(format!("case {case} (r = {r}) differs from the brute-force oracle")));
        }
        let p = random_mask(&mut rng, 2, 16, 16, MaskSpace::Pixel { pool: 2 });
        if project_to_latent(&p, 2)? != naive_project(&p, 2) {
            return Ok(Err(format!("case {case}: projection differs from the brute-force oracle")));
        }
    }
    Ok(Ok("100 random masks match".into()))
}

fn containment(opts: &VerifyOptions) -> Result<std::result::Result<String, String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for case in 0..100 {
        let base = random_mask(&mut rng, 2, 12, 12, MaskSpace::Latent);
        let r = rng.random_range(0..3);
        let r_prime = r + rng.random_range(0..3);
        if let Err(e) = build_mask_set_with(&base, r, r_prime, opts.dilate_fn) {
            return Ok(Err(format!("case {case}: {e}")));
        }
    }
    Ok(Ok("base <= edit <= see on 100 cases".into()))
}

fn fusion_exactness(opts: &VerifyOptions) -> Result<std::result::Result<String, String>> {
    let cfg = tiny_model();
    let w = init_weights::<f32>(&cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let x = init_noise::<f32>(&cfg);
    let sl = init_noise::<f32>(&ModelConfig { noise_seed: 99, ..cfg.clone() });
    for case in 0..20 {
        let prompt = random_prompt(&cfg, &mut rng)?.cast::<f32>();
        let base = random_mask(&mut rng, cfg.frames, cfg.grid_h, cfg.grid_w, MaskSpace::Latent);
        let masks = build_mask_set_with(&base, 1, 2, opts.dilate_fn)?;
        let out = srd_step(&x, &sl, &masks, &prompt, case % cfg.steps, Amplification::NEUTRAL, &cfg, &w)?;
        for cell in 0..out.tokens() {
            if !masks.edit.bits()[cell] && out.token(cell).iter().zip(sl.token(cell)).any(|(a, b)| a.to_bits() != b.to_bits()) {
                return Ok(Err(format!("case {case}: non-edit cell {cell} differs from the source latent")));
            }
        }
    }
    let prompt = random_prompt(&cfg, &mut rng)?;
    let wd = init_weights::<f64>(&cfg);
    let xd = x.cast::<f64>();
    let ones = BinaryMask::ones(cfg.frames, cfg.grid_h, cfg.grid_w, MaskSpace::Latent);
    let masks = build_mask_set_with(&ones, 1, 2, opts.dilate_fn)?;
    let amp = Amplification { key: 2.0, output: 1.5 };
    let sparse = srd_step(&xd, &sl.cast(), &masks, &prompt, 1, amp, &cfg, &wd)?;
    if sparse != denoise_step_full(&xd, &prompt, 1, amp, &cfg, &wd)? {
        return Ok(Err("all-ones masks do not reproduce the full step".into()));
    }
    Ok(Ok("20 sparse steps exact, full-mask step identical".into()))
}

fn tgaa_neutrality() -> Result<std::result::Result<String, String>> {
    let cfg = tiny_model();
    let w = init_weights::<f64>(&cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let prompt = random_prompt(&cfg, &mut rng)?;
    let plan = plan_stages(0.9, cfg.steps, &SchedulerParams::default(), Mode::Chorus);
    let table = schedule(&plan, 0.9, 0.75, &TgaaParams::disabled());
    if !table.is_neutral() {
        return Ok(Err("disabled amplification produced non-neutral factors".into()));
    }
    let with = full_denoise(&prompt, &cfg, &w, Some(&table))?;
    let without = full_denoise(&prompt, &cfg, &w, Some(&FactorTable::neutral()))?;
    if with != without || with != full_denoise(&prompt, &cfg, &w, None)? {
        return Ok(Err("neutral factors changed the trajectory".into()));
    }
    Ok(Ok("neutral factors are bit-identical to the baseline".into()))
}

fn scheduler_monotone() -> Result<std::result::Result<String, String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for set in 0..10 {
        let k1_frac = rng.random_range(0.0..0.5);
        let params = SchedulerParams {
            tau: rng.random_range(0.3..0.95),
            k1_frac,
            k2_frac: rng.random_range(k1_frac..1.0),
            stage3_min: rng.random_range(0..3),
        };
        let steps = rng.random_range(1..60);
        let mut prev = (0, 0);
        for i in 0..=1000 {
            let m = -1.0 + 2.0 * i as f64 / 1000.0;
            let p = plan_stages(m, steps, &params, Mode::Chorus);
            let ok = p.k1 >= prev.0
                && p.k2 >= prev.1
                && p.k1 <= p.k2
                && (m < params.tau) <= (p.k1 == 0 && p.k2 == 0)
                && (m < params.tau || p.k2 <= steps.saturating_sub(params.stage3_min));
            if !ok {
                return Ok(Err(format!("parameter set {set}: violation at m = {m}")));
            }
            prev = (p.k1, p.k2);
        }
    }
    Ok(Ok("10 parameter sets x 1001 points".into()))
}

fn cache_round_trip() -> Result<std::result::Result<String, String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let cfg = tiny_model();
    let mut cache = Cache::new();
    let unit = |rng: &mut ChaCha8Rng| {
        let mut v: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        normalize(&mut v);
        v
    };
    for id in 0..8 {
        let latents = (0..=cfg.steps)
            .map(|k| init_noise::<f32>(&ModelConfig { noise_seed: id * 10 + k as u64, ..cfg.clone() }))
            .collect();
        cache.insert(CacheEntry {
            id,
            seq: 0,
            tokens: PromptTokens(vec![0, 9, 21, 35]),
            embedding: unit(&mut rng),
            scene: Scene {
                background: 0,
                objects: vec![],
            },
            trajectory: Trajectory { latents },
        })?;
    }
    let files = cache.encode()?;
    let back = Cache::decode(|rel| files.get(rel).cloned().ok_or(crate::Error::IncompatibleFormat))?;
    if back != cache {
        return Ok(Err("decoded cache differs".into()));
    }
    for _ in 0..100 {
        let q = unit(&mut rng);
        if back.lookup(&q, 0.5) != cache.lookup(&q, 0.5) {
            return Ok(Err("lookup differs after round trip".into()));
        }
    }
    Ok(Ok("8 entries, 100 lookups identical".into()))
}

fn mac_law() -> Result<std::result::Result<String, String>> {
    let cfg = ModelConfig::distilled();
    let l = 4096u64;
    let (_, full) = self_attn_terms(l, cfg.channels as u64);
    let (_, half) = self_attn_terms(l / 2, cfg.channels as u64);
    let step = |n| mac_count(MacKind::Step, n, 7, &cfg) as f64;
    let ratio = step(2048) / step(4096);
    if 4 * half != full || ratio >= 0.65 {
        return Ok(Err(format!("quadratic ratio {} / step ratio {ratio}", half as f64 / full as f64)));
    }
    Ok(Ok(format!("quadratic ratio 0.25, step ratio {ratio:.4}")))
}

/// Runs every check in a fixed order.
pub fn run_checks(opts: &VerifyOptions) -> Vec<CheckResult> {
    vec![
        check("oracle dilation and projection", oracle_dilation(opts)),
        check("mask containment", containment(opts)),
        check("fusion exactness", fusion_exactness(opts)),
        check("amplification neutrality", tgaa_neutrality()),
        check("scheduler monotonicity", scheduler_monotone()),
        check("cache round trip", cache_round_trip()),
        check("compute-fraction law", mac_law()),
    ]
}
