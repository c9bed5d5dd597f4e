//! Inter-request latent reuse for video diffusion transformer serving.
//!
//! A deterministic, desk-scale simulator of a three-stage caching pipeline:
//! requests whose prompt is close to a cached one adopt the cached latent
//! trajectory for the first denoising steps, recompute only the divergent
//! regions during the middle steps (with amplified conditioning on the
//! tokens that changed), and fall back to full computation for the final
//! steps.
//!
//! The crate is organized by subsystem:
//!
//! - [`model`]: a toy video DiT (self-attention, cross-attention, FFN) with
//!   an exact multiply-accumulate cost model.
//! - [`world`]: synthetic prompts, scene layouts, reference fields, token
//!   diffs, prompt embeddings and workload generation.
//! - [`tgaa`]: per-step key/output amplification factors.
//! - [`srd`]: hierarchical region masks and the gathered sparse step.
//! - [`scheduler`]: similarity score to stage boundaries.
//! - [`cache`]: top-1 cosine retrieval with trajectory storage.
//! - [`serving`]: request pipeline, stream simulation and aggregation.
//! - [`config`], [`cli`], [`verify`]: run configuration and the command line.

pub mod cache;
pub mod cli;
pub mod config;
pub mod error;
pub mod model;
pub mod scheduler;
pub mod serving;
pub mod srd;
pub mod tgaa;
pub mod verify;
pub mod world;

pub use error::{Error, Result};
