//! Multi-head self-attention over an arbitrary token subsequence and
//! prompt cross-attention with key/output amplification.

use crate::model::kernels::{all_finite, axpy, dot, softmax_in_place, Real};
use crate::model::weights::{CrossAttnWeights, SelfAttnWeights};
use crate::model::{Amplification, PromptEmbedding};
use crate::{Error, Result};

/// Scaled dot-product attention among exactly the `n` tokens of `x`
/// (`n × d`, row-major). Returns the projected attention output; the caller
/// adds the residual.
pub fn self_attention<T: Real>(x: &[T], w: &SelfAttnWeights<T>, heads: usize) -> Result<Vec<T>> {
    if !all_finite(x) {
        return Err(Error::NonFinite);
    }
    let d = w.query.cols;
    let n = x.len() / d;
    if n == 0 {
        return Ok(Vec::new());
    }
    let dh = d / heads;
    let scale = T::lit(1.0 / (dh as f64).sqrt());

    let q = w.query.apply_rows(x);
    let k = w.key.apply_rows(x);
    let v = w.value.apply_rows(x);

    // Per head, keys and values transposed to `dh × n` so each query row is
    // a sequence of contiguous axpy/dot passes over the n tokens.
    let mut mixed = vec![T::zero(); n * d];
    let mut kt = vec![T::zero(); dh * n];
    let mut vt = vec![T::zero(); dh * n];
    let mut row = vec![T::zero(); n];
    for h in 0..heads {
        let off = h * dh;
        for j in 0..n {
            for c in 0..dh {
                kt[c * n + j] = k[j * d + off + c];
                vt[c * n + j] = v[j * d + off + c];
            }
        }
        for i in 0..n {
            row.iter_mut().for_each(|r| *r = T::zero());
            for c in 0..dh {
                axpy(q[i * d + off + c] * scale, &kt[c * n..(c + 1) * n], &mut row);
            }
            softmax_in_place(&mut row);
            for c in 0..dh {
                mixed[i * d + off + c] = dot(&row, &vt[c * n..(c + 1) * n]);
            }
        }
    }
    Ok(w.output.apply_rows(&mixed))
}

/// Inputs of one cross-attention call besides the latent tokens.
#[derive(Clone, Copy, Debug)]
pub struct CrossAttnArgs<'a, T> {
    pub prompt: &'a PromptEmbedding<T>,
    /// Latent cell index of every query token (for the region bias).
    pub cells: &'a [usize],
    pub factors: Amplification,
    pub heads: usize,
    pub region_bias: f64,
}

/// Cross-attention from latent queries to prompt tokens.
///
/// Keys of differential tokens are multiplied by `factors.key` before the
/// logit product, bound (cell, token) pairs receive `region_bias` on their
/// logits, values are the prompt paint vectors, and the projected result
/// is multiplied by `factors.output`.
pub fn cross_attention<T: Real>(x: &[T], w: &CrossAttnWeights<T>, args: CrossAttnArgs<'_, T>) -> Result<Vec<T>> {
    let d = w.query.cols;
    let n = x.len() / d;
    let probs = cross_attention_probs(x, w, args)?;
    let plen = args.prompt.len();
    let dh = d / args.heads;

    let mut mixed = vec![T::zero(); n * d];
    for i in 0..n {
        for h in 0..args.heads {
            let off = h * dh;
            let p = &probs[(i * args.heads + h) * plen..(i * args.heads + h + 1) * plen];
            let out = &mut mixed[i * d + off..i * d + off + dh];
            for (j, &a) in p.iter().enumerate() {
                axpy(a, &args.prompt.paint(j)[off..off + dh], out);
            }
        }
    }
    let mut y = w.output.apply_rows(&mixed);
    let gamma_o = T::lit(args.factors.output);
    y.iter_mut().for_each(|v| *v = *v * gamma_o);
    Ok(y)
}

/// Attention rows of [`cross_attention`], laid out `n × heads × prompt_len`.
pub fn cross_attention_probs<T: Real>(x: &[T], w: &CrossAttnWeights<T>, args: CrossAttnArgs<'_, T>) -> Result<Vec<T>> {
    if !all_finite(x) || !all_finite(&args.prompt.keys) {
        return Err(Error::NonFinite);
    }
    let d = w.query.cols;
    let n = x.len() / d;
    if args.cells.len() != n {
        return Err(Error::Shape(format!("{} cell ids for {n} tokens", args.cells.len())));
    }
    let heads = args.heads;
    let dh = d / heads;
    let plen = args.prompt.len();
    let scale = T::lit(1.0 / (dh as f64).sqrt());
    let gamma_k = T::lit(args.factors.key);
    let beta = T::lit(args.region_bias);

    let mut keys = w.key.apply_rows(&args.prompt.keys);
    for (j, key) in keys.chunks_exact_mut(d).enumerate() {
        for (k, s) in key.iter_mut().zip(&w.sink) {
            *k = *k + *s;
        }
        if args.prompt.is_diff(j) {
            key.iter_mut().for_each(|k| *k = *k * gamma_k);
        }
    }
    let mut queries = w.query.apply_rows(x);
    for q in queries.chunks_exact_mut(d) {
        for (v, s) in q.iter_mut().zip(&w.sink) {
            *v = *v + *s;
        }
    }

    let mut probs = vec![T::zero(); n * heads * plen];
    for i in 0..n {
        let cell = args.cells[i];
        for h in 0..heads {
            let off = h * dh;
            let q = &queries[i * d + off..i * d + off + dh];
            let row = &mut probs[(i * heads + h) * plen..(i * heads + h + 1) * plen];
            for (j, r) in row.iter_mut().enumerate() {
                let mut logit = dot(q, &keys[j * d + off..j * d + off + dh]) * scale;
                if args.prompt.in_region(cell, j) {
                    logit = logit + beta;
                }
                *r = logit;
            }
            softmax_in_place(row);
        }
    }
    Ok(probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::kernels::Matrix;
    use crate::model::{init_weights, ModelConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> ModelConfig {
        ModelConfig {
            channels: 8,
            heads: 2,
            ..ModelConfig::default()
        }
    }

    fn random(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.5..1.5)).collect()
    }

    /// Textbook dense attention: materializes Q, K, V and the full score
    /// matrix per head.
    fn naive_self_attention(x: &[f64], w: &SelfAttnWeights<f64>, heads: usize) -> Vec<f64> {
        let d = w.query.cols;
        let n = x.len() / d;
        let dh = d / heads;
        let proj = |m: &Matrix<f64>, t: &[f64]| -> Vec<f64> {
            (0..d).map(|r| (0..d).map(|c| m.data[r * d + c] * t[c]).sum()).collect()
        };
        let q: Vec<Vec<f64>> = x.chunks(d).map(|t| proj(&w.query, t)).collect();
        let k: Vec<Vec<f64>> = x.chunks(d).map(|t| proj(&w.key, t)).collect();
        let v: Vec<Vec<f64>> = x.chunks(d).map(|t| proj(&w.value, t)).collect();
        let mut out = vec![0.0; n * d];
        for i in 0..n {
            let mut concat = vec![0.0; d];
            for h in 0..heads {
                let r = h * dh..(h + 1) * dh;
                let scores: Vec<f64> = (0..n)
                    .map(|j| {
                        q[i][r.clone()].iter().zip(&k[j][r.clone()]).map(|(a, b)| a * b).sum::<f64>()
                            / (dh as f64).sqrt()
                    })
                    .collect();
                let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
                let z: f64 = e.iter().sum();
                for c in r.clone() {
                    concat[c] = (0..n).map(|j| e[j] / z * v[j][c]).sum();
                }
            }
            out[i * d..(i + 1) * d].copy_from_slice(&proj(&w.output, &concat));
        }
        out
    }

    #[test]
    fn matches_dense_reference() {
        let w = init_weights::<f64>(&cfg());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1usize, 5, 16, 32] {
            let x = random(&mut rng, n * 8);
            let fast = self_attention(&x, &w.blocks[0].self_attn, 2).unwrap();
            let slow = naive_self_attention(&x, &w.blocks[0].self_attn, 2);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-9, "n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn single_token_attends_to_itself() {
        let w = init_weights::<f64>(&cfg());
        let sa = &w.blocks[0].self_attn;
        let x = random(&mut ChaCha8Rng::seed_from_u64(3), 8);
        let out = self_attention(&x, sa, 2).unwrap();
        let mut vx = vec![0.0; 8];
        sa.value.apply(&x, &mut vx);
        let mut expected = vec![0.0; 8];
        sa.output.apply(&vx, &mut expected);
        for (a, b) in out.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicated_tokens_give_identical_outputs() {
        let w = init_weights::<f32>(&cfg());
        let tok: Vec<f32> = (0..8).map(|i| i as f32 * 0.3 - 1.0).collect();
        let x: Vec<f32> = tok.iter().cycle().take(32).copied().collect();
        let out = self_attention(&x, &w.blocks[0].self_attn, 2).unwrap();
        for i in 1..4 {
            assert_eq!(&out[..8], &out[i * 8..(i + 1) * 8]);
        }
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let w = init_weights::<f32>(&cfg());
        let mut x = vec![0.5f32; 16];
        x[3] = f32::NAN;
        assert!(matches!(self_attention(&x, &w.blocks[0].self_attn, 2), Err(Error::NonFinite)));
    }

    fn prompt(rng: &mut ChaCha8Rng, plen: usize, cells: usize) -> PromptEmbedding<f64> {
        PromptEmbedding::new(8, random(rng, plen * 8), random(rng, plen * 8), vec![0b10; cells]).unwrap()
    }

    /// Plain cross-attention without amplification, bias or sink handling
    /// beyond adding the sink to both sides.
    fn naive_cross(x: &[f64], w: &CrossAttnWeights<f64>, p: &PromptEmbedding<f64>, heads: usize) -> Vec<f64> {
        let d = 8;
        let dh = d / heads;
        let mut out = Vec::new();
        for t in x.chunks(d) {
            let mut q = vec![0.0; d];
            w.query.apply(t, &mut q);
            let q: Vec<f64> = q.iter().zip(&w.sink).map(|(a, b)| a + b).collect();
            let mut concat = vec![0.0; d];
            for h in 0..heads {
                let r = h * dh..(h + 1) * dh;
                let scores: Vec<f64> = (0..p.len())
                    .map(|j| {
                        let mut k = vec![0.0; d];
                        w.key.apply(p.key(j), &mut k);
                        r.clone().map(|c| q[c] * (k[c] + w.sink[c])).sum::<f64>() / (dh as f64).sqrt()
                    })
                    .collect();
                let z: f64 = scores.iter().map(|s| s.exp()).sum();
                for c in r.clone() {
                    concat[c] = (0..p.len()).map(|j| scores[j].exp() / z * p.paint(j)[c]).sum();
                }
            }
            let mut y = vec![0.0; d];
            w.output.apply(&concat, &mut y);
            out.extend(y);
        }
        out
    }

    #[test]
    fn neutral_cross_attention_is_standard() {
        let w = init_weights::<f64>(&cfg());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = prompt(&mut rng, 4, 6);
        let x = random(&mut rng, 6 * 8);
        let cells: Vec<usize> = (0..6).collect();
        let args = CrossAttnArgs {
            prompt: &p,
            cells: &cells,
            factors: Amplification::NEUTRAL,
            heads: 2,
            region_bias: 0.0,
        };
        let fast = cross_attention(&x, &w.blocks[0].cross_attn, args).unwrap();
        let slow = naive_cross(&x, &w.blocks[0].cross_attn, &p, 2);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn key_amplification_concentrates_monotonically() {
        let w = init_weights::<f64>(&cfg());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = prompt(&mut rng, 4, 10).with_diff_indices(&[2]).unwrap();
        let x = random(&mut rng, 10 * 8);
        let cells: Vec<usize> = (0..10).collect();
        let weight_on_diff = |gk: f64| -> Vec<f64> {
            let args = CrossAttnArgs {
                prompt: &p,
                cells: &cells,
                factors: Amplification { key: gk, output: 1.0 },
                heads: 2,
                region_bias: 2.0,
            };
            let probs = cross_attention_probs(&x, &w.blocks[0].cross_attn, args).unwrap();
            probs.chunks(4).map(|row| row[2]).collect()
        };
        let levels: Vec<Vec<f64>> = [1.0, 2.0, 5.0, 50.0].iter().map(|&g| weight_on_diff(g)).collect();
        for pair in levels.windows(2) {
            for (lo, hi) in pair[0].iter().zip(&pair[1]) {
                assert!(hi > lo);
            }
        }
        assert!(levels[3].iter().all(|&a| a > 0.999));
    }

    #[test]
    fn output_factor_scales_exactly() {
        let w = init_weights::<f32>(&cfg());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = prompt(&mut rng, 3, 4).cast::<f32>().with_diff_indices(&[0]).unwrap();
        let x: Vec<f32> = random(&mut rng, 32).into_iter().map(|v| v as f32).collect();
        let cells = [0, 1, 2, 3];
        let run = |go: f64| {
            let args = CrossAttnArgs {
                prompt: &p,
                cells: &cells,
                factors: Amplification { key: 1.7, output: go },
                heads: 2,
                region_bias: 2.0,
            };
            cross_attention(&x, &w.blocks[1].cross_attn, args).unwrap()
        };
        let one = run(1.0);
        let two = run(2.0);
        for (a, b) in one.iter().zip(&two) {
            assert_eq!(*b, 2.0 * a);
        }
    }

    #[test]
    fn softmax_rows_normalized() {
        let w = init_weights::<f64>(&cfg());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = prompt(&mut rng, 5, 3).with_diff_indices(&[1, 4]).unwrap();
        let x = random(&mut rng, 24);
        let args = CrossAttnArgs {
            prompt: &p,
            cells: &[0, 1, 2],
            factors: Amplification { key: 3.0, output: 2.0 },
            heads: 2,
            region_bias: 2.0,
        };
        let probs = cross_attention_probs(&x, &w.blocks[0].cross_attn, args).unwrap();
        for row in probs.chunks(5) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
