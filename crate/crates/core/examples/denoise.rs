//! Denoise one scene from noise and compare it with the scene's reference field.
//!
//! cargo run --example denoise

use dit_reuse::model::{full_denoise, init_weights, ModelConfig};
use dit_reuse::world::{build_prompt, condition, render_reference, Motion, Rect, Scene, SceneObject, Vocabulary};

fn main() -> dit_reuse::Result<()> {
    let cfg = ModelConfig::distilled();
    let vocab = Vocabulary::new(11);
    let scene = Scene {
        background: vocab.lookup("forest")?,
        objects: vec![SceneObject {
            object: vocab.lookup("fox")?,
            attribute: vocab.lookup("golden")?,
            verb: vocab.lookup("running")?,
            region: Rect { row: 4, col: 2, rows: 6, cols: 5 },
            motion: Motion { rows: 0, cols: 2 },
        }],
    };
    println!("prompt: {}", build_prompt(&scene).render(&vocab));

    let prompt = condition::<f32>(&scene, &vocab, &cfg)?;
    let weights = init_weights::<f32>(&cfg);
    let reference = render_reference::<f32>(&scene, &vocab, &cfg);
    let trajectory = full_denoise(&prompt, &cfg, &weights, None)?;
    for (t, x) in trajectory.latents.iter().enumerate() {
        println!("step {t}: mean squared distance to reference {:.5}", x.mean_sq_distance(&reference));
    }
    Ok(())
}
