//! Request pipeline and stream simulation.
//!
//! A request is embedded and matched against the cache. A miss runs the
//! full denoiser and is cached. A hit is planned into three stages: adopt
//! the source trajectory up to `K1`, recompute only divergent regions with
//! amplified conditioning for `[K1, K2)`, and run full steps for the rest.

pub mod aggregate;
pub mod record;

use std::time::Instant;

pub use aggregate::{aggregate, windows_csv, Summary, WindowRow};
pub use record::{read_records, write_records, RequestRecord, StageMacs};

use crate::cache::{Cache, CacheEntry};
use crate::config::RunConfig;
use crate::model::{
    denoise_step_full, full_denoise, init_weights, mac_count, Amplification, DiTWeights, LatentTensor, MacKind,
    PromptEmbedding, Trajectory,
};
use crate::scheduler::{plan_stages, Mode, StagePlan};
use crate::srd::{build_mask_set_with, dilate, masks_for_objects, srd_step, BinaryMask, DilateFn, MaskSet, MaskSpace};
use crate::tgaa::{schedule, TgaaParams};
use crate::world::{
    absent_tokens, alignment_score, build_prompt, condition, embed_prompt, token_diff, GridDims, PromptTokens, Request,
    Scene, Vocabulary, Workload,
};
use crate::{Error, Result};

/// Everything a hit produced.
#[derive(Clone, Debug)]
pub struct HitOutcome {
    pub latent: LatentTensor<f32>,
    /// Latents `0..=N`: the source's up to `K1`, then this request's.
    pub trajectory: Trajectory<f32>,
    /// State handed to the selective stage (the source latent at `K1`).
    pub stage2_input: LatentTensor<f32>,
    pub masks: MaskSet,
    pub diff_indices: Vec<usize>,
    pub fallback: bool,
    pub macs: StageMacs,
}

/// Output of [`Pipeline::run_stream`].
#[derive(Clone, Debug)]
pub struct StreamOutput {
    pub records: Vec<RequestRecord>,
    pub cache: Cache,
}

/// Weights, vocabulary and configuration shared by every request.
pub struct Pipeline {
    pub config: RunConfig,
    pub vocab: Vocabulary,
    pub weights: DiTWeights<f32>,
    /// Dilation operator used for mask construction (swappable for fault
    /// injection).
    pub dilate_fn: DilateFn,
}

impl Pipeline {
    /// Builds the pipeline for a (resolved) configuration.
    pub fn new(config: &RunConfig, vocab: Vocabulary) -> Result<Self> {
        let config = config.resolved();
        config.validate()?;
        let weights = init_weights(&config.model);
        Ok(Self {
            config,
            vocab,
            weights,
            dilate_fn: dilate,
        })
    }

    /// Pipeline with the vocabulary implied by `config.workload.vocab_seed`.
    pub fn with_default_vocab(config: &RunConfig) -> Result<Self> {
        let seed = config.resolved().workload.vocab_seed;
        Self::new(config, Vocabulary::new(seed))
    }

    pub fn dims(&self) -> GridDims {
        GridDims::of(&self.config.model)
    }

    fn tokens(&self) -> usize {
        self.config.model.tokens()
    }

    fn full_macs(&self, prompt_len: usize) -> u64 {
        self.config.model.steps as u64 * mac_count(MacKind::Step, self.tokens(), prompt_len, &self.config.model)
    }

    pub fn condition(&self, scene: &Scene) -> Result<PromptEmbedding<f32>> {
        scene.validate(&self.vocab, self.dims())?;
        condition(scene, &self.vocab, &self.config.model)
    }

    /// No-reuse generation for a scene.
    pub fn compute_reference(&self, scene: &Scene) -> Result<LatentTensor<f32>> {
        Ok(self.full_trajectory(scene)?.final_latent().clone())
    }

    pub fn full_trajectory(&self, scene: &Scene) -> Result<Trajectory<f32>> {
        full_denoise(&self.condition(scene)?, &self.config.model, &self.weights, None)
    }

    fn entry(&self, id: u64, scene: &Scene, trajectory: Trajectory<f32>) -> CacheEntry {
        let tokens = build_prompt(scene);
        CacheEntry {
            id,
            seq: 0,
            embedding: embed_prompt(&tokens, &self.vocab),
            tokens,
            scene: scene.clone(),
            trajectory,
        }
    }

    /// Runs full generation for every request and caches the results.
    pub fn warm_start<'a>(&self, requests: impl IntoIterator<Item = &'a Request>, cache: &mut Cache) -> Result<()> {
        for r in requests {
            let trajectory = self.full_trajectory(&r.scene)?;
            cache.insert(self.entry(r.index as u64, &r.scene, trajectory))?;
        }
        Ok(())
    }

    /// Masks and differential tokens for reusing `source` to serve `target`.
    /// Prompts that share no template fall back to recomputing every cell
    /// with the target tokens missing from the source as differential.
    pub fn plan_masks(&self, target: &Scene, source: &Scene) -> Result<(MaskSet, Vec<usize>, bool)> {
        let (t, s) = (build_prompt(target), build_prompt(source));
        let srd = &self.config.srd;
        match token_diff(&t, &s) {
            Ok(report) => {
                let masks = masks_for_objects(source, &report.divergent_objects, self.dims(), srd, self.dilate_fn)?;
                Ok((masks, report.diff_indices, false))
            }
            Err(Error::IncomparablePrompts) => {
                let d = self.dims();
                let all = BinaryMask::ones(d.frames, d.grid_h, d.grid_w, MaskSpace::Latent);
                let masks = build_mask_set_with(&all, srd.r, srd.r_prime, self.dilate_fn)?;
                Ok((masks, absent_tokens(&t, &s), true))
            }
            Err(e) => Err(e),
        }
    }

    /// Executes a stage plan against a cached source entry.
    ///
    /// `plan.m` drives the amplification schedule; `tgaa` selects which
    /// factors are active. Stage 3 always runs with neutral factors.
    pub fn serve_hit(&self, scene: &Scene, source: &CacheEntry, plan: &StagePlan, tgaa: &TgaaParams) -> Result<HitOutcome> {
        let cfg = &self.config.model;
        let n = cfg.steps;
        if plan.k1 > plan.k2 || plan.k2 > n || plan.steps != n || source.trajectory.latents.len() != n + 1 {
            return Err(Error::Config(format!("stage plan ({}, {}) does not fit {n} steps", plan.k1, plan.k2)));
        }
        let (masks, diff_indices, fallback) = self.plan_masks(scene, &source.scene)?;
        let prompt = self.condition(scene)?.with_diff_indices(&diff_indices)?;
        let factors = schedule(plan, plan.m, self.config.scheduler.tau, tgaa);
        let src = &source.trajectory.latents;

        let mut latents: Vec<LatentTensor<f32>> = src[..=plan.k1].to_vec();
        let stage2_input = src[plan.k1].clone();
        let mut x = stage2_input.clone();
        for t in plan.k1..plan.k2 {
            x = srd_step(&x, &src[t + 1], &masks, &prompt, t, factors.at(t), cfg, &self.weights)?;
            latents.push(x.clone());
        }
        for t in plan.k2..n {
            x = denoise_step_full(&x, &prompt, t, Amplification::NEUTRAL, cfg, &self.weights)?;
            latents.push(x.clone());
        }

        let len = prompt.len();
        let macs = StageMacs {
            stage1: 0,
            stage2: (plan.k2 - plan.k1) as u64 * mac_count(MacKind::Step, masks.see.count(), len, cfg),
            stage3: (n - plan.k2) as u64 * mac_count(MacKind::Step, self.tokens(), len, cfg),
            full: self.full_macs(len),
        };
        Ok(HitOutcome {
            latent: x,
            trajectory: Trajectory { latents },
            stage2_input,
            masks,
            diff_indices,
            fallback,
            macs,
        })
    }

    /// Serves one request, updating the cache per the insertion policy.
    pub fn process_request(&self, request: &Request, cache: &mut Cache) -> Result<(LatentTensor<f32>, RequestRecord)> {
        let started = Instant::now();
        let mode = self.config.mode;
        let scene = &request.scene;
        let tokens: PromptTokens = build_prompt(scene);
        let embedding = embed_prompt(&tokens, &self.vocab);
        let tau = match mode {
            Mode::Baseline => f64::INFINITY,
            _ => self.config.scheduler.tau,
        };
        let found = cache.lookup(&embedding, tau);
        let m = found.m.is_finite().then_some(found.m);
        let steps = self.config.model.steps;

        let mut record = RequestRecord {
            index: request.index,
            cluster: request.cluster,
            mode,
            prompt: tokens.render(&self.vocab),
            tokens: tokens.0.clone(),
            m,
            hit: found.hit,
            source: None,
            k1: 0,
            k2: 0,
            diff_indices: Vec::new(),
            fallback: false,
            see_cells: 0,
            edit_cells: 0,
            macs: StageMacs::default(),
            compute_fraction: 1.0,
            alignment: None,
            reference_distance: None,
            wall_time_s: 0.0,
        };

        let latent = match found.entry.filter(|_| found.hit) {
            None => {
                let trajectory = self.full_trajectory(scene)?;
                let latent = trajectory.final_latent().clone();
                record.macs = StageMacs {
                    stage3: self.full_macs(tokens.len()),
                    full: self.full_macs(tokens.len()),
                    ..StageMacs::default()
                };
                if self.config.reference_oracle {
                    record.reference_distance = Some(0.0);
                }
                if !cache.frozen {
                    cache.insert(self.entry(request.index as u64, scene, trajectory))?;
                }
                latent
            }
            Some(pos) => {
                let source = cache.entry(pos);
                let plan = plan_stages(found.m, steps, &self.config.scheduler, mode);
                let tgaa = match mode {
                    Mode::Chorus => self.config.tgaa.clone(),
                    _ => TgaaParams::disabled(),
                };
                let out = self.serve_hit(scene, source, &plan, &tgaa)?;
                record.source = Some(source.id);
                record.k1 = plan.k1;
                record.k2 = plan.k2;
                record.diff_indices = out.diff_indices.clone();
                record.fallback = out.fallback;
                if plan.k2 > plan.k1 {
                    record.see_cells = out.masks.see.count();
                    record.edit_cells = out.masks.edit.count();
                }
                record.macs = out.macs;
                record.alignment = match alignment_score(&out.latent, scene, &source.scene, None, &self.vocab, &self.config.model) {
                    Ok(a) => Some(a),
                    Err(Error::EmptyRegion | Error::IncomparablePrompts) => None,
                    Err(e) => return Err(e),
                };
                if self.config.reference_oracle {
                    let reference = self.compute_reference(scene)?;
                    record.reference_distance = Some(out.latent.mean_sq_distance(&reference));
                }
                if self.config.cache.insert_on_hit && !cache.frozen {
                    cache.insert(self.entry(request.index as u64, scene, out.trajectory))?;
                }
                out.latent
            }
        };
        record.compute_fraction = record.macs.fraction();
        record.wall_time_s = started.elapsed().as_secs_f64();
        Ok((latent, record))
    }

    /// Warm-starts on the workload's warm section (freezing the cache when
    /// that section is non-empty and the config asks for it), then serves
    /// the test section in order.
    pub fn run_stream(&self, workload: &Workload) -> Result<StreamOutput> {
        let mut cache = Cache::new();
        self.warm_start(workload.warm(), &mut cache)?;
        if !cache.is_empty() && self.config.cache.freeze_after_warm {
            cache.frozen = true;
        }
        let mut records = Vec::new();
        for r in workload.test() {
            let (_, record) = self.process_request(r, &mut cache)?;
            records.push(record);
        }
        Ok(StreamOutput { records, cache })
    }
}
