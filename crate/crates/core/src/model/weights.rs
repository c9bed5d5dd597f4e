use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::model::kernels::{Matrix, Real};
use crate::model::ModelConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct SelfAttnWeights<T> {
    pub query: Matrix<T>,
    pub key: Matrix<T>,
    pub value: Matrix<T>,
    pub output: Matrix<T>,
}

/// Cross-attention projections. Values are the prompt's paint vectors, so
/// there is no value projection; `output` starts as the identity because
/// paint vectors already live in latent space.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossAttnWeights<T> {
    pub query: Matrix<T>,
    pub key: Matrix<T>,
    pub output: Matrix<T>,
    /// Shared component added to every query and key; each head's slice has
    /// norm `key_sink`.
    pub sink: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FfnWeights<T> {
    pub up: Matrix<T>,
    pub down: Matrix<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockWeights<T> {
    pub self_attn: SelfAttnWeights<T>,
    pub cross_attn: CrossAttnWeights<T>,
    pub ffn: FfnWeights<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiTWeights<T> {
    pub blocks: Vec<BlockWeights<T>>,
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix<f64> {
    let data = (0..rows * cols)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z * scale
        })
        .collect();
    Matrix { rows, cols, data }
}

/// Draws every projection from `weight_seed`: Gaussian entries scaled by
/// `1/sqrt(fan_in)`. Sampling happens in f64 so f32 and f64 weights agree.
pub fn init_weights<T: Real>(cfg: &ModelConfig) -> DiTWeights<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.weight_seed);
    let d = cfg.channels;
    let hidden = cfg.ffn_hidden();
    let unit = 1.0 / (d as f64).sqrt();
    let dh = cfg.head_dim();

    let blocks = (0..cfg.blocks)
        .map(|_| {
            let sq = gaussian(&mut rng, d, d, unit);
            let sk = gaussian(&mut rng, d, d, unit);
            let sv = gaussian(&mut rng, d, d, unit);
            let so = gaussian(&mut rng, d, d, unit);
            let cq = gaussian(&mut rng, d, d, unit * cfg.query_gain);
            let ck = gaussian(&mut rng, d, d, unit);
            let mut sink = gaussian(&mut rng, 1, d, 1.0).data;
            for head in sink.chunks_exact_mut(dh) {
                let norm = head.iter().map(|v| v * v).sum::<f64>().sqrt();
                head.iter_mut().for_each(|v| *v *= cfg.key_sink / norm);
            }
            let up = gaussian(&mut rng, hidden, d, unit);
            let down = gaussian(&mut rng, d, hidden, 1.0 / (hidden as f64).sqrt());
            BlockWeights {
                self_attn: SelfAttnWeights {
                    query: sq.cast(),
                    key: sk.cast(),
                    value: sv.cast(),
                    output: so.cast(),
                },
                cross_attn: CrossAttnWeights {
                    query: cq.cast(),
                    key: ck.cast(),
                    output: Matrix::identity(d),
                    sink: sink.into_iter().map(T::lit).collect(),
                },
                ffn: FfnWeights {
                    up: up.cast(),
                    down: down.cast(),
                },
            }
        })
        .collect();
    DiTWeights { blocks }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ModelConfig {
        ModelConfig {
            channels: 8,
            heads: 2,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn same_seed_same_weights() {
        let a = init_weights::<f32>(&small());
        let b = init_weights::<f32>(&small());
        assert_eq!(a, b);
    }

    #[test]
    fn different_seed_differs() {
        let a = init_weights::<f64>(&small());
        let b = init_weights::<f64>(&ModelConfig {
            weight_seed: 2,
            ..small()
        });
        assert_ne!(a.blocks[0].self_attn.query, b.blocks[0].self_attn.query);
    }

    #[test]
    fn shapes_and_finiteness() {
        let w = init_weights::<f64>(&small());
        assert_eq!(w.blocks.len(), 2);
        for b in &w.blocks {
            for m in [
                &b.self_attn.query,
                &b.self_attn.key,
                &b.self_attn.value,
                &b.self_attn.output,
                &b.cross_attn.query,
                &b.cross_attn.key,
                &b.cross_attn.output,
            ] {
                assert_eq!((m.rows, m.cols), (8, 8));
                assert!(m.data.iter().all(|v| v.is_finite()));
            }
            assert_eq!((b.ffn.up.rows, b.ffn.up.cols), (32, 8));
            assert_eq!((b.ffn.down.rows, b.ffn.down.cols), (8, 32));
            for head in b.cross_attn.sink.chunks(4) {
                let n = head.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!((n - 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn f32_weights_are_rounded_f64_weights() {
        let a = init_weights::<f64>(&small());
        let b = init_weights::<f32>(&small());
        let x = a.blocks[1].ffn.down.data[5];
        assert_eq!(b.blocks[1].ffn.down.data[5], x as f32);
    }
}
