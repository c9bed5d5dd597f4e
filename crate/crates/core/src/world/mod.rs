//! Synthetic prompts, scenes and the oracles that stand in for external
//! models (text encoder, segmentation, prompt comparison, quality metric).

pub mod diff;
pub mod embed;
pub mod reference;
pub mod scene;
pub mod vocab;
pub mod workload;

pub use diff::{absent_tokens, region_oracle, token_diff, DiffReport, DivergentObject, MatchKind};
pub use embed::{cosine, embed_prompt, EMBED_DIM};
pub use reference::{alignment_score, condition, divergent_region, render_reference, AlignmentScore};
pub use scene::{build_prompt, GridDims, Motion, PromptTokens, Rect, Scene, SceneObject};
pub use vocab::{TokenClass, TokenId, Vocabulary};
pub use workload::{gen_workload, read_workload, write_workload, Request, Section, Workload, WorkloadParams};
