//! Binary masks over the latent grid (or its pixel-space upsampling) and
//! the operators that build the hierarchical region masks.

use std::fmt::Write as _;

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaskSpace {
    Latent,
    /// Pixel space at `pool` pixels per latent cell along each axis.
    Pixel { pool: usize },
}

/// One bit per (frame, row, col), frame-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub space: MaskSpace,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn zeros(frames: usize, height: usize, width: usize, space: MaskSpace) -> Self {
        Self {
            frames,
            height,
            width,
            space,
            bits: vec![false; frames * height * width],
        }
    }

    pub fn ones(frames: usize, height: usize, width: usize, space: MaskSpace) -> Self {
        Self {
            bits: vec![true; frames * height * width],
            ..Self::zeros(frames, height, width, space)
        }
    }

    pub fn from_bits(frames: usize, height: usize, width: usize, space: MaskSpace, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != frames * height * width {
            return Err(Error::Shape(format!(
                "{} bits for a {frames}x{height}x{width} mask",
                bits.len()
            )));
        }
        Ok(Self {
            frames,
            height,
            width,
            space,
            bits,
        })
    }

    #[inline]
    pub fn index(&self, frame: usize, row: usize, col: usize) -> usize {
        (frame * self.height + row) * self.width + col
    }

    #[inline]
    pub fn get(&self, frame: usize, row: usize, col: usize) -> bool {
        self.bits[self.index(frame, row, col)]
    }

    #[inline]
    pub fn set(&mut self, frame: usize, row: usize, col: usize, value: bool) {
        let i = self.index(frame, row, col);
        self.bits[i] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        (self.frames, self.height, self.width) == (other.frames, other.height, other.width)
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.same_shape(other) && self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }

    pub fn union_with(&mut self, other: &Self) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= *b;
        }
    }

    /// Indices of set bits, increasing.
    pub fn set_indices(&self) -> Vec<usize> {
        (0..self.bits.len()).filter(|&i| self.bits[i]).collect()
    }

    fn frame_bits(&self, frame: usize) -> &[bool] {
        let n = self.height * self.width;
        &self.bits[frame * n..(frame + 1) * n]
    }

    /// Per-frame `.`/`#` grid with popcounts.
    pub fn debug_dump(&self) -> String {
        let mut out = String::new();
        for f in 0..self.frames {
            let pop = self.frame_bits(f).iter().filter(|b| **b).count();
            let _ = writeln!(out, "frame {f} ({pop} set)");
            for r in 0..self.height {
                let line: String = (0..self.width).map(|c| if self.get(f, r, c) { '#' } else { '.' }).collect();
                let _ = writeln!(out, "{line}");
            }
        }
        out
    }
}

/// Every frame takes the mask of the first frame of its group of `group`
/// consecutive frames.
pub fn keyframe_propagate(mask: &BinaryMask, group: usize) -> BinaryMask {
    let group = group.max(1);
    let n = mask.height * mask.width;
    let mut out = mask.clone();
    for f in 0..mask.frames {
        let key = f - f % group;
        if key != f {
            out.bits[f * n..(f + 1) * n].copy_from_slice(&mask.bits[key * n..(key + 1) * n]);
        }
    }
    out
}

/// Max-pools a pixel-space mask by `pool` to the latent grid: a latent cell
/// is set iff any pixel of its `pool × pool` block is set.
pub fn project_to_latent(pixels: &BinaryMask, pool: usize) -> Result<BinaryMask> {
    if pool == 0 || pixels.height % pool != 0 || pixels.width % pool != 0 {
        return Err(Error::Shape(format!(
            "{}x{} pixel mask is not divisible by pool factor {pool}",
            pixels.height, pixels.width
        )));
    }
    if let MaskSpace::Pixel { pool: p } = pixels.space {
        if p != pool {
            return Err(Error::Shape(format!("mask was rendered at pool {p}, asked for {pool}")));
        }
    }
    let (h, w) = (pixels.height / pool, pixels.width / pool);
    let mut out = BinaryMask::zeros(pixels.frames, h, w, MaskSpace::Latent);
    for f in 0..pixels.frames {
        for pr in 0..pixels.height {
            for pc in 0..pixels.width {
                if pixels.get(f, pr, pc) {
                    out.set(f, pr / pool, pc / pool, true);
                }
            }
        }
    }
    Ok(out)
}

/// Spatial dilation by a `(2r+1) × (2r+1)` all-ones kernel with zero
/// padding, thresholded at `> 0`. Computed separably (row max then column
/// max), which is exact for a square kernel.
pub fn dilate(mask: &BinaryMask, r: usize) -> BinaryMask {
    if r == 0 {
        return mask.clone();
    }
    let (h, w) = (mask.height, mask.width);
    let mut out = mask.clone();
    let mut tmp = vec![false; h * w];
    for f in 0..mask.frames {
        let src = mask.frame_bits(f);
        for row in 0..h {
            for col in 0..w {
                let lo = col.saturating_sub(r);
                let hi = (col + r).min(w - 1);
                tmp[row * w + col] = src[row * w + lo..=row * w + hi].iter().any(|b| *b);
            }
        }
        for row in 0..h {
            let lo = row.saturating_sub(r);
            let hi = (row + r).min(h - 1);
            for col in 0..w {
                let v = (lo..=hi).any(|rr| tmp[rr * w + col]);
                out.set(f, row, col, v);
            }
        }
    }
    out
}

/// `base ⊆ edit ⊆ see` over the latent grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskSet {
    pub base: BinaryMask,
    pub edit: BinaryMask,
    pub see: BinaryMask,
    pub r: usize,
    pub r_prime: usize,
}

pub type DilateFn = fn(&BinaryMask, usize) -> BinaryMask;

pub fn build_mask_set(base: &BinaryMask, r: usize, r_prime: usize) -> Result<MaskSet> {
    build_mask_set_with(base, r, r_prime, dilate)
}

/// [`build_mask_set`] with a caller-supplied dilation operator; the
/// containment hierarchy is checked rather than assumed.
pub fn build_mask_set_with(base: &BinaryMask, r: usize, r_prime: usize, dilate_fn: DilateFn) -> Result<MaskSet> {
    if r_prime < r {
        return Err(Error::Config(format!("need r_prime >= r, got r={r} r_prime={r_prime}")));
    }
    let edit = dilate_fn(base, r);
    let see = dilate_fn(base, r_prime);
    if !base.is_subset_of(&edit) || !edit.is_subset_of(&see) {
        return Err(Error::Shape("mask containment violated: need base <= edit <= see".into()));
    }
    Ok(MaskSet {
        base: base.clone(),
        edit,
        see,
        r,
        r_prime,
    })
}

impl MaskSet {
    pub fn gather_map(&self) -> GatherMap {
        GatherMap::new(&self.see)
    }

    pub fn debug_dump(&self) -> String {
        let mut out = String::new();
        for (name, m) in [("base", &self.base), ("edit", &self.edit), ("see", &self.see)] {
            let _ = writeln!(out, "== {name}: {} of {} cells", m.count(), m.len());
            out.push_str(&m.debug_dump());
        }
        out
    }
}

/// Latent token indices selected for computation, with inverse lookup.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GatherMap {
    pub indices: Vec<usize>,
    inverse: Vec<Option<usize>>,
}

impl GatherMap {
    pub fn new(see: &BinaryMask) -> Self {
        let indices = see.set_indices();
        let mut inverse = vec![None; see.len()];
        for (k, &i) in indices.iter().enumerate() {
            inverse[i] = Some(k);
        }
        Self { indices, inverse }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn position(&self, cell: usize) -> Option<usize> {
        self.inverse.get(cell).copied().flatten()
    }

    /// Copies the selected `d`-wide rows out of `data`.
    pub fn gather<T: Copy>(&self, data: &[T], d: usize) -> Vec<T> {
        let mut out = Vec::with_capacity(self.indices.len() * d);
        for &i in &self.indices {
            out.extend_from_slice(&data[i * d..(i + 1) * d]);
        }
        out
    }

    /// Writes gathered rows back into `data` at their original positions.
    pub fn scatter<T: Copy>(&self, rows: &[T], data: &mut [T], d: usize) {
        for (k, &i) in self.indices.iter().enumerate() {
            data[i * d..(i + 1) * d].copy_from_slice(&rows[k * d..(k + 1) * d]);
        }
    }
}
