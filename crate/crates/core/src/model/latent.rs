use std::io::{Read, Write};

use crate::model::kernels::Real;
use crate::model::ModelConfig;
use crate::{Error, Result};

pub const CHRL_MAGIC: &[u8; 4] = b"CHRL";
pub const CHRL_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LatentShape {
    pub frames: usize,
    pub grid_h: usize,
    pub grid_w: usize,
    pub channels: usize,
}

impl LatentShape {
    pub fn of(cfg: &ModelConfig) -> Self {
        Self {
            frames: cfg.frames,
            grid_h: cfg.grid_h,
            grid_w: cfg.grid_w,
            channels: cfg.channels,
        }
    }

    pub fn tokens(&self) -> usize {
        self.frames * self.grid_h * self.grid_w
    }

    pub fn cell(&self, frame: usize, row: usize, col: usize) -> usize {
        (frame * self.grid_h + row) * self.grid_w + col
    }
}

/// Denoising state: one `channels`-wide vector per (frame, row, col) cell,
/// frame-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentTensor<T> {
    pub shape: LatentShape,
    pub data: Vec<T>,
}

impl<T: Real> LatentTensor<T> {
    pub fn zeros(shape: LatentShape) -> Self {
        Self {
            shape,
            data: vec![T::zero(); shape.tokens() * shape.channels],
        }
    }

    pub fn from_vec(shape: LatentShape, data: Vec<T>) -> Result<Self> {
        if data.len() != shape.tokens() * shape.channels {
            return Err(Error::Shape(format!(
                "expected {} values, got {}",
                shape.tokens() * shape.channels,
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn tokens(&self) -> usize {
        self.shape.tokens()
    }

    pub fn token(&self, i: usize) -> &[T] {
        let d = self.shape.channels;
        &self.data[i * d..(i + 1) * d]
    }

    pub fn token_mut(&mut self, i: usize) -> &mut [T] {
        let d = self.shape.channels;
        &mut self.data[i * d..(i + 1) * d]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Real>(&self) -> LatentTensor<U> {
        LatentTensor {
            shape: self.shape,
            data: self.data.iter().map(|v| U::lit(v.to_f64().unwrap())).collect(),
        }
    }

    /// Mean over cells of the squared distance between token vectors.
    pub fn mean_sq_distance(&self, other: &Self) -> f64 {
        let sum: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| {
                let diff = a.to_f64().unwrap() - b.to_f64().unwrap();
                diff * diff
            })
            .sum();
        sum / self.tokens() as f64
    }

    /// Largest absolute elementwise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.to_f64().unwrap() - b.to_f64().unwrap()).abs())
            .fold(0.0, f64::max)
    }
}

/// Writes one latent in the `CHRL` binary layout: magic, version, frames,
/// grid_h, grid_w, channels (u32 LE each), then every value as f32 LE.
pub fn write_chrl<W: Write>(w: &mut W, latent: &LatentTensor<f32>) -> std::io::Result<()> {
    let s = latent.shape;
    let mut buf = Vec::with_capacity(24 + latent.data.len() * 4);
    buf.extend_from_slice(CHRL_MAGIC);
    for v in [CHRL_VERSION, s.frames as u32, s.grid_h as u32, s.grid_w as u32, s.channels as u32] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in &latent.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

/// Reads one `CHRL` latent. Returns `Ok(None)` at a clean end of stream.
pub fn read_chrl<R: Read>(r: &mut R) -> Result<Option<LatentTensor<f32>>> {
    let mut magic = [0u8; 4];
    match read_exact_or_eof(r, &mut magic)? {
        false => return Ok(None),
        true if &magic != CHRL_MAGIC => return Err(Error::IncompatibleFormat),
        true => {}
    }
    let mut header = [0u8; 20];
    r.read_exact(&mut header).map_err(|_| Error::IncompatibleFormat)?;
    let field = |i: usize| u32::from_le_bytes(header[i * 4..i * 4 + 4].try_into().unwrap());
    if field(0) != CHRL_VERSION {
        return Err(Error::IncompatibleFormat);
    }
    let shape = LatentShape {
        frames: field(1) as usize,
        grid_h: field(2) as usize,
        grid_w: field(3) as usize,
        channels: field(4) as usize,
    };
    let n = shape.tokens() * shape.channels;
    let mut raw = vec![0u8; n * 4];
    r.read_exact(&mut raw).map_err(|_| Error::IncompatibleFormat)?;
    let data = raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Ok(Some(LatentTensor { shape, data }))
}

fn read_exact_or_eof<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) if filled == 0 => return Ok(false),
            Ok(0) => return Err(Error::IncompatibleFormat),
            Ok(k) => filled += k,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(_) => return Err(Error::IncompatibleFormat),
        }
    }
    Ok(true)
}
