//! Selective region denoising: mask hierarchy construction and the
//! gathered sparse step fused with the cached source trajectory.

pub mod mask;
pub mod step;

use serde::{Deserialize, Serialize};

pub use mask::{
    build_mask_set, build_mask_set_with, dilate, keyframe_propagate, project_to_latent, BinaryMask, DilateFn,
    GatherMap, MaskSet, MaskSpace,
};
pub use step::{srd_step, stage2_mac_fraction};

use crate::world::{region_oracle, DivergentObject, GridDims, Scene};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SrdParams {
    /// Update-region dilation radius in latent cells.
    pub r: usize,
    /// Attention-context dilation radius in latent cells.
    pub r_prime: usize,
    /// Frames per key-frame group.
    pub keyframe_group: usize,
    /// Pixels per latent cell along each axis.
    pub pool: usize,
}

impl Default for SrdParams {
    fn default() -> Self {
        Self {
            r: 2,
            r_prime: 4,
            keyframe_group: 2,
            pool: 2,
        }
    }
}

impl SrdParams {
    pub fn validate(&self) -> Result<()> {
        if self.r_prime < self.r {
            return Err(Error::Config(format!("srd: r_prime ({}) < r ({})", self.r_prime, self.r)));
        }
        if self.keyframe_group == 0 || self.pool == 0 {
            return Err(Error::Config("srd: keyframe_group and pool must be >= 1".into()));
        }
        Ok(())
    }
}

/// Region oracle on the source scene, key-frame propagation, max-pool
/// projection and dilation, in that order.
pub fn masks_for_objects(
    source: &Scene,
    divergent: &[DivergentObject],
    dims: GridDims,
    params: &SrdParams,
    dilate_fn: DilateFn,
) -> Result<MaskSet> {
    let pixels = region_oracle(source, divergent, dims, params.pool);
    let propagated = keyframe_propagate(&pixels, params.keyframe_group);
    let base = project_to_latent(&propagated, params.pool)?;
    build_mask_set_with(&base, params.r, params.r_prime, dilate_fn)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{Motion, Rect, SceneObject, Vocabulary};

    #[test]
    fn pipeline_follows_keyframes() {
        let v = Vocabulary::new(0);
        let dims = GridDims {
            frames: 4,
            grid_h: 8,
            grid_w: 8,
        };
        let scene = Scene {
            background: v.lookup("beach").unwrap(),
            objects: vec![SceneObject {
                object: v.lookup("dog").unwrap(),
                attribute: v.lookup("spotted").unwrap(),
                verb: v.lookup("running").unwrap(),
                region: Rect {
                    row: 0,
                    col: 0,
                    rows: 2,
                    cols: 2,
                },
                motion: Motion { rows: 0, cols: 1 },
            }],
        };
        let divergent = [DivergentObject {
            slot: 0,
            attribute: scene.objects[0].attribute,
            object: scene.objects[0].object,
        }];
        let params = SrdParams {
            r: 0,
            r_prime: 0,
            ..SrdParams::default()
        };
        let m = masks_for_objects(&scene, &divergent, dims, &params, dilate).unwrap();
        assert_eq!(m.base.space, MaskSpace::Latent);
        for f in 0..4 {
            let key = f - f % 2;
            for c in 0..8 {
                assert_eq!(m.base.get(f, 0, c), (key..key + 2).contains(&c), "f={f} c={c}");
            }
        }
        let none = masks_for_objects(&scene, &[], dims, &SrdParams::default(), dilate).unwrap();
        assert_eq!(none.see.count(), 0);
    }
}
