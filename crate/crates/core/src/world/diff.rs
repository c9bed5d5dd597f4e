use serde::{Deserialize, Serialize};

use crate::srd::mask::{BinaryMask, MaskSpace};
use crate::world::scene::{attribute_position, object_position, GridDims, PromptTokens, Scene};
use crate::world::vocab::TokenId;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchKind {
    ObjectChanged,
    AttributeChanged,
    Unchanged,
}

/// Salient phrase of a source object slot whose object or attribute changed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivergentObject {
    pub slot: usize,
    pub attribute: TokenId,
    pub object: TokenId,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffReport {
    /// Target positions whose token differs from the source.
    pub diff_indices: Vec<usize>,
    pub divergent_objects: Vec<DivergentObject>,
    /// One entry per object slot.
    pub match_kinds: Vec<MatchKind>,
}

fn is_template_length(n: usize) -> bool {
    n >= 1 && (n - 1) % 3 == 0
}

/// Positional comparison over the shared template.
pub fn token_diff(target: &PromptTokens, source: &PromptTokens) -> Result<DiffReport> {
    if target.len() != source.len() || !is_template_length(target.len()) {
        return Err(Error::IncomparablePrompts);
    }
    let diff_indices = (0..target.len()).filter(|&i| target.0[i] != source.0[i]).collect();
    let slots = (target.len() - 1) / 3;
    let mut divergent_objects = Vec::new();
    let mut match_kinds = Vec::with_capacity(slots);
    for slot in 0..slots {
        let (a, o) = (attribute_position(slot), object_position(slot));
        let kind = if target.0[o] != source.0[o] {
            MatchKind::ObjectChanged
        } else if target.0[a] != source.0[a] {
            MatchKind::AttributeChanged
        } else {
            MatchKind::Unchanged
        };
        if kind != MatchKind::Unchanged {
            divergent_objects.push(DivergentObject {
                slot,
                attribute: source.0[a],
                object: source.0[o],
            });
        }
        match_kinds.push(kind);
    }
    Ok(DiffReport {
        diff_indices,
        divergent_objects,
        match_kinds,
    })
}

/// Target positions holding a token that appears nowhere in the source.
/// Used when the two prompts do not share a template.
pub fn absent_tokens(target: &PromptTokens, source: &PromptTokens) -> Vec<usize> {
    (0..target.len()).filter(|&i| !source.0.contains(&target.0[i])).collect()
}

/// Pixel-space masks of the divergent objects' per-frame regions in the
/// source scene, at `pool` pixels per latent cell.
pub fn region_oracle(source: &Scene, divergent: &[DivergentObject], dims: GridDims, pool: usize) -> BinaryMask {
    let mut mask = BinaryMask::zeros(dims.frames, dims.grid_h * pool, dims.grid_w * pool, MaskSpace::Pixel { pool });
    for d in divergent {
        let Some(obj) = source.objects.get(d.slot) else { continue };
        for f in 0..dims.frames {
            let (rows, cols) = obj.region_at(f, dims);
            for r in rows.start * pool..rows.end * pool {
                for c in cols.start * pool..cols.end * pool {
                    mask.set(f, r, c, true);
                }
            }
        }
    }
    mask
}
