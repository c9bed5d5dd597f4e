//! Build the base/edit/see mask hierarchy for an attribute swap and print it.
//!
//! cargo run --example region_masks

use dit_reuse::srd::{masks_for_objects, SrdParams};
use dit_reuse::world::{build_prompt, token_diff, GridDims, Motion, Rect, Scene, SceneObject, Vocabulary};

fn main() -> dit_reuse::Result<()> {
    let vocab = Vocabulary::new(11);
    let dims = GridDims { frames: 4, grid_h: 12, grid_w: 16 };
    let source = Scene {
        background: vocab.lookup("street")?,
        objects: vec![SceneObject {
            object: vocab.lookup("car")?,
            attribute: vocab.lookup("red")?,
            verb: vocab.lookup("turning")?,
            region: Rect { row: 3, col: 2, rows: 4, cols: 5 },
            motion: Motion { rows: 0, cols: 2 },
        }],
    };
    let mut target = source.clone();
    target.objects[0].attribute = vocab.lookup("black")?;

    let diff = token_diff(&build_prompt(&target), &build_prompt(&source))?;
    println!("divergent tokens: {:?}", diff.diff_indices);
    let masks = masks_for_objects(&source, &diff.divergent_objects, dims, &SrdParams::default(), dit_reuse::srd::dilate)?;
    print!("{}", masks.debug_dump());
    Ok(())
}
