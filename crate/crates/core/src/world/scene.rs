use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::model::ModelConfig;
use crate::world::vocab::{TokenClass, TokenId, Vocabulary};
use crate::{Error, Result};

/// Latent grid dimensions a scene is laid out on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridDims {
    pub frames: usize,
    pub grid_h: usize,
    pub grid_w: usize,
}

impl GridDims {
    pub fn of(cfg: &ModelConfig) -> Self {
        Self {
            frames: cfg.frames,
            grid_h: cfg.grid_h,
            grid_w: cfg.grid_w,
        }
    }

    pub fn cells(&self) -> usize {
        self.frames * self.grid_h * self.grid_w
    }

    pub fn cell(&self, frame: usize, row: usize, col: usize) -> usize {
        (frame * self.grid_h + row) * self.grid_w + col
    }
}

/// Frame-0 rectangle in latent cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub row: usize,
    pub col: usize,
    pub rows: usize,
    pub cols: usize,
}

/// Drift in cells per frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Motion {
    pub rows: i32,
    pub cols: i32,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SceneObject {
    pub object: TokenId,
    pub attribute: TokenId,
    pub verb: TokenId,
    pub region: Rect,
    #[serde(default)]
    pub motion: Motion,
}

fn shifted(start: usize, len: usize, shift: i64, limit: usize) -> Range<usize> {
    let lo = (start as i64 + shift).clamp(0, limit as i64) as usize;
    let hi = (start as i64 + len as i64 + shift).clamp(0, limit as i64) as usize;
    lo..hi
}

impl SceneObject {
    /// Rows and columns covered in `frame`: the frame-0 rectangle shifted by
    /// `motion * frame` and clipped to the grid.
    pub fn region_at(&self, frame: usize, dims: GridDims) -> (Range<usize>, Range<usize>) {
        let f = frame as i64;
        (
            shifted(self.region.row, self.region.rows, self.motion.rows as i64 * f, dims.grid_h),
            shifted(self.region.col, self.region.cols, self.motion.cols as i64 * f, dims.grid_w),
        )
    }

    pub fn covers(&self, frame: usize, row: usize, col: usize, dims: GridDims) -> bool {
        let (rows, cols) = self.region_at(frame, dims);
        rows.contains(&row) && cols.contains(&col)
    }
}

/// Most objects a prompt template can hold (`1 + 3k <= 16`).
pub const MAX_OBJECTS: usize = 5;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scene {
    pub background: TokenId,
    pub objects: Vec<SceneObject>,
}

impl Scene {
    pub fn validate(&self, vocab: &Vocabulary, dims: GridDims) -> Result<()> {
        let class = |id: TokenId, want: TokenClass| {
            if vocab.class_of(id) == Some(want) {
                Ok(())
            } else {
                Err(Error::Parse(format!("token {id} is not a {want:?}")))
            }
        };
        class(self.background, TokenClass::Background)?;
        if self.objects.len() > MAX_OBJECTS {
            return Err(Error::Parse(format!("at most {MAX_OBJECTS} objects per scene")));
        }
        for o in &self.objects {
            class(o.object, TokenClass::Object)?;
            class(o.attribute, TokenClass::Attribute)?;
            class(o.verb, TokenClass::Verb)?;
            let r = o.region;
            if r.rows == 0 || r.cols == 0 || r.row + r.rows > dims.grid_h || r.col + r.cols > dims.grid_w {
                return Err(Error::Parse(format!("region {r:?} outside {}x{} grid", dims.grid_h, dims.grid_w)));
            }
        }
        Ok(())
    }

    /// Index of the object owning a cell; later objects win overlaps.
    pub fn owner(&self, frame: usize, row: usize, col: usize, dims: GridDims) -> Option<usize> {
        self.objects.iter().rposition(|o| o.covers(frame, row, col, dims))
    }
}

/// Token sequence in the canonical template
/// `[background, (attribute, object, verb)*]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptTokens(pub Vec<TokenId>);

impl PromptTokens {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn render(&self, vocab: &Vocabulary) -> String {
        self.0.iter().map(|&t| vocab.name(t)).collect::<Vec<_>>().join(" ")
    }
}

/// Template position of an object slot's attribute token.
pub fn attribute_position(slot: usize) -> usize {
    1 + 3 * slot
}

pub fn object_position(slot: usize) -> usize {
    2 + 3 * slot
}

pub fn verb_position(slot: usize) -> usize {
    3 + 3 * slot
}

pub fn build_prompt(scene: &Scene) -> PromptTokens {
    let mut tokens = vec![scene.background];
    for o in &scene.objects {
        tokens.extend([o.attribute, o.object, o.verb]);
    }
    PromptTokens(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims() -> GridDims {
        GridDims {
            frames: 4,
            grid_h: 8,
            grid_w: 8,
        }
    }

    fn dog(vocab: &Vocabulary) -> SceneObject {
        SceneObject {
            object: vocab.lookup("dog").unwrap(),
            attribute: vocab.lookup("spotted").unwrap(),
            verb: vocab.lookup("running").unwrap(),
            region: Rect {
                row: 2,
                col: 1,
                rows: 3,
                cols: 2,
            },
            motion: Motion { rows: 0, cols: 1 },
        }
    }

    #[test]
    fn template_arithmetic() {
        let v = Vocabulary::new(0);
        let scene = Scene {
            background: v.lookup("beach").unwrap(),
            objects: vec![dog(&v)],
        };
        let p = build_prompt(&scene);
        assert_eq!(p.len(), 4);
        assert_eq!(p.render(&v), "beach spotted dog running");
        assert_eq!(build_prompt(&scene), p);
        scene.validate(&v, dims()).unwrap();
    }

    #[test]
    fn one_attribute_change_one_position() {
        let v = Vocabulary::new(0);
        let a = Scene {
            background: v.lookup("beach").unwrap(),
            objects: vec![dog(&v), dog(&v)],
        };
        let mut b = a.clone();
        b.objects[1].attribute = v.lookup("wild").unwrap();
        let (pa, pb) = (build_prompt(&a), build_prompt(&b));
        let differing: Vec<usize> = (0..pa.len()).filter(|&i| pa.0[i] != pb.0[i]).collect();
        assert_eq!(differing, vec![attribute_position(1)]);
    }

    #[test]
    fn motion_shifts_and_clips() {
        let v = Vocabulary::new(0);
        let o = dog(&v);
        assert_eq!(o.region_at(0, dims()), (2..5, 1..3));
        assert_eq!(o.region_at(3, dims()), (2..5, 4..6));
        let far = SceneObject {
            motion: Motion { rows: 0, cols: 3 },
            ..o
        };
        assert_eq!(far.region_at(3, dims()).1, 8..8);
    }

    #[test]
    fn rejects_out_of_grid_and_wrong_class() {
        let v = Vocabulary::new(0);
        let mut o = dog(&v);
        o.region.col = 7;
        let s = Scene {
            background: v.lookup("beach").unwrap(),
            objects: vec![o],
        };
        assert!(s.validate(&v, dims()).is_err());
        let s = Scene {
            background: v.lookup("dog").unwrap(),
            objects: vec![],
        };
        assert!(s.validate(&v, dims()).is_err());
    }
}
