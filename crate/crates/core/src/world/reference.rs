//! Reference latent fields, prompt conditioning and the alignment proxy.

use serde::{Deserialize, Serialize};

use crate::model::{LatentShape, LatentTensor, ModelConfig, PromptEmbedding, Real};
use crate::srd::mask::{BinaryMask, MaskSpace};
use crate::world::diff::token_diff;
use crate::world::embed::normalize;
use crate::world::scene::{attribute_position, build_prompt, object_position, GridDims, Scene};
use crate::world::vocab::Vocabulary;
use crate::{Error, Result};

/// Content vector of an object cell: `normalize(paint(object) + paint(attribute))`.
fn object_paint(scene: &Scene, slot: usize, vocab: &Vocabulary, d: usize) -> Vec<f64> {
    let o = &scene.objects[slot];
    let mut v: Vec<f64> = vocab
        .paint(o.object, d)
        .iter()
        .zip(vocab.paint(o.attribute, d))
        .map(|(a, b)| a + b)
        .collect();
    normalize(&mut v);
    v
}

/// Analytic target field: background paint outside every object region,
/// object+attribute paint inside. Later objects win overlaps.
pub fn render_reference<T: Real>(scene: &Scene, vocab: &Vocabulary, cfg: &ModelConfig) -> LatentTensor<T> {
    let dims = GridDims::of(cfg);
    let d = cfg.channels;
    let background = vocab.paint(scene.background, d);
    let objects: Vec<Vec<f64>> = (0..scene.objects.len()).map(|i| object_paint(scene, i, vocab, d)).collect();
    let mut out = LatentTensor::zeros(LatentShape::of(cfg));
    for f in 0..dims.frames {
        for r in 0..dims.grid_h {
            for c in 0..dims.grid_w {
                let src = match scene.owner(f, r, c, dims) {
                    Some(i) => &objects[i],
                    None => &background,
                };
                let cell = dims.cell(f, r, c);
                for (dst, v) in out.token_mut(cell).iter_mut().zip(src) {
                    *dst = T::lit(*v);
                }
            }
        }
    }
    out
}

/// Cross-attention conditioning for a scene's prompt.
///
/// The background token is bound to every cell outside the objects; an
/// object's attribute and object tokens are bound to the cells it owns in
/// each frame. Verbs are unbound. Differential indices start empty.
pub fn condition<T: Real>(scene: &Scene, vocab: &Vocabulary, cfg: &ModelConfig) -> Result<PromptEmbedding<T>> {
    let d = cfg.channels;
    let dims = GridDims::of(cfg);
    let tokens = build_prompt(scene);
    let mut keys = Vec::with_capacity(tokens.len() * d);
    let mut paints = Vec::with_capacity(tokens.len() * d);
    for &t in &tokens.0 {
        keys.extend(vocab.key(t, d).into_iter().map(T::lit));
        paints.extend(vocab.paint(t, d).into_iter().map(T::lit));
    }
    let mut cell_tokens = vec![0u16; dims.cells()];
    for f in 0..dims.frames {
        for r in 0..dims.grid_h {
            for c in 0..dims.grid_w {
                cell_tokens[dims.cell(f, r, c)] = match scene.owner(f, r, c, dims) {
                    Some(slot) => (1 << attribute_position(slot)) | (1 << object_position(slot)),
                    None => 1,
                };
            }
        }
    }
    PromptEmbedding::new(d, keys, paints, cell_tokens)
}

/// Latent cells owned (per frame) by the given object slots of a scene.
pub fn slot_cells(scene: &Scene, slots: &[usize], dims: GridDims) -> BinaryMask {
    let mut m = BinaryMask::zeros(dims.frames, dims.grid_h, dims.grid_w, MaskSpace::Latent);
    for &slot in slots {
        let Some(o) = scene.objects.get(slot) else { continue };
        for f in 0..dims.frames {
            let (rows, cols) = o.region_at(f, dims);
            for r in rows {
                for c in cols.clone() {
                    m.set(f, r, c, true);
                }
            }
        }
    }
    m
}

/// Cells of the object slots that differ between the two scenes, in either
/// scene's layout.
pub fn divergent_region(target: &Scene, source: &Scene, dims: GridDims) -> Result<BinaryMask> {
    let diff = token_diff(&build_prompt(target), &build_prompt(source))?;
    let slots: Vec<usize> = diff.divergent_objects.iter().map(|d| d.slot).collect();
    let mut m = slot_cells(source, &slots, dims);
    m.union_with(&slot_cells(target, &slots, dims));
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentScore {
    pub d_target: f64,
    pub d_source: f64,
    /// `(d_source - d_target) / (d_source + d_target)`; positive means
    /// closer to the target's reference.
    pub normalized: f64,
}

/// Mean squared cell distance to each scene's reference over `region`
/// (default: the divergent object cells).
pub fn alignment_score<T: Real>(
    x: &LatentTensor<T>,
    target: &Scene,
    source: &Scene,
    region: Option<&BinaryMask>,
    vocab: &Vocabulary,
    cfg: &ModelConfig,
) -> Result<AlignmentScore> {
    let default;
    let region = match region {
        Some(r) => r,
        None => {
            default = divergent_region(target, source, GridDims::of(cfg))?;
            &default
        }
    };
    let cells = region.set_indices();
    if cells.is_empty() {
        return Err(Error::EmptyRegion);
    }
    if region.len() != x.tokens() {
        return Err(Error::Shape("alignment region does not match latent grid".into()));
    }
    let t_ref = render_reference::<f64>(target, vocab, cfg);
    let s_ref = render_reference::<f64>(source, vocab, cfg);
    let dist = |reference: &LatentTensor<f64>| -> f64 {
        let total: f64 = cells
            .iter()
            .map(|&c| {
                x.token(c)
                    .iter()
                    .zip(reference.token(c))
                    .map(|(a, b)| {
                        let diff = a.to_f64().unwrap() - b;
                        diff * diff
                    })
                    .sum::<f64>()
            })
            .sum();
        total / cells.len() as f64
    };
    let (d_target, d_source) = (dist(&t_ref), dist(&s_ref));
    let denom = d_source + d_target;
    let normalized = if denom > 0.0 { (d_source - d_target) / denom } else { 0.0 };
    Ok(AlignmentScore {
        d_target,
        d_source,
        normalized,
    })
}
