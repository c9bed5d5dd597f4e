use crate::model::kernels::Real;
use crate::{Error, Result};

/// Longest prompt the conditioning supports (one bit per token per cell).
pub const MAX_PROMPT_TOKENS: usize = 16;

/// Prompt conditioning consumed by cross-attention.
///
/// `keys` and `paints` are `len × channels` row-major. `cell_tokens[c]` has
/// bit `j` set when latent cell `c` belongs to token `j`'s region.
#[derive(Clone, Debug, PartialEq)]
pub struct PromptEmbedding<T> {
    pub channels: usize,
    pub keys: Vec<T>,
    pub paints: Vec<T>,
    diff: Vec<bool>,
    pub cell_tokens: Vec<u16>,
}

impl<T: Real> PromptEmbedding<T> {
    pub fn new(channels: usize, keys: Vec<T>, paints: Vec<T>, cell_tokens: Vec<u16>) -> Result<Self> {
        let len = keys.len() / channels.max(1);
        if len == 0 || len > MAX_PROMPT_TOKENS {
            return Err(Error::Shape(format!("prompt length {len} outside 1..={MAX_PROMPT_TOKENS}")));
        }
        if keys.len() != len * channels || paints.len() != keys.len() {
            return Err(Error::Shape("keys and paints must both be len x channels".into()));
        }
        Ok(Self {
            channels,
            keys,
            paints,
            diff: vec![false; len],
            cell_tokens,
        })
    }

    pub fn len(&self) -> usize {
        self.diff.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diff.is_empty()
    }

    pub fn key(&self, j: usize) -> &[T] {
        &self.keys[j * self.channels..(j + 1) * self.channels]
    }

    pub fn paint(&self, j: usize) -> &[T] {
        &self.paints[j * self.channels..(j + 1) * self.channels]
    }

    pub fn is_diff(&self, j: usize) -> bool {
        self.diff[j]
    }

    pub fn diff_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.diff[j]).collect()
    }

    pub fn set_diff_indices(&mut self, indices: &[usize]) -> Result<()> {
        if let Some(&bad) = indices.iter().find(|&&j| j >= self.len()) {
            return Err(Error::Shape(format!("diff index {bad} out of range")));
        }
        self.diff.iter_mut().for_each(|b| *b = false);
        for &j in indices {
            self.diff[j] = true;
        }
        Ok(())
    }

    pub fn with_diff_indices(mut self, indices: &[usize]) -> Result<Self> {
        self.set_diff_indices(indices)?;
        Ok(self)
    }

    /// Latent cells bound to token `j`.
    pub fn region_of_token(&self, j: usize) -> Vec<usize> {
        let bit = 1u16 << j;
        (0..self.cell_tokens.len())
            .filter(|&c| self.cell_tokens[c] & bit != 0)
            .collect()
    }

    #[inline]
    pub fn in_region(&self, cell: usize, token: usize) -> bool {
        self.cell_tokens
            .get(cell)
            .is_some_and(|bits| bits & (1u16 << token) != 0)
    }

    pub fn cast<U: Real>(&self) -> PromptEmbedding<U> {
        let conv = |v: &Vec<T>| v.iter().map(|x| U::lit(x.to_f64().unwrap())).collect();
        PromptEmbedding {
            channels: self.channels,
            keys: conv(&self.keys),
            paints: conv(&self.paints),
            diff: self.diff.clone(),
            cell_tokens: self.cell_tokens.clone(),
        }
    }
}
