use crate::world::scene::PromptTokens;
use crate::world::vocab::Vocabulary;

/// Retrieval embedding width.
pub const EMBED_DIM: usize = 64;

/// Sum of the tokens' unit hash vectors, L2-normalized.
pub fn embed_prompt(tokens: &PromptTokens, vocab: &Vocabulary) -> Vec<f64> {
    let mut acc = vec![0.0; EMBED_DIM];
    for &t in &tokens.0 {
        for (a, h) in acc.iter_mut().zip(vocab.hash_vector(t, EMBED_DIM)) {
            *a += h;
        }
    }
    normalize(&mut acc);
    acc
}

pub fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::vocab::TokenId;

    #[test]
    fn identical_prompts_cosine_one() {
        let v = Vocabulary::new(1);
        let p = PromptTokens(vec![0, 20, 8, 32]);
        let e = embed_prompt(&p, &v);
        assert!((cosine(&e, &e) - 1.0).abs() < 1e-7);
        assert!((e.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_token_is_its_hash_vector() {
        let v = Vocabulary::new(1);
        let e = embed_prompt(&PromptTokens(vec![7]), &v);
        let h = v.hash_vector(7, EMBED_DIM);
        for (a, b) in e.iter().zip(&h) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn shared_tokens_raise_similarity_on_average() {
        // Monte Carlo over vocabulary seeds: 3 of 4 shared vs 0 of 4 shared.
        let (mut three, mut none) = (0.0, 0.0);
        let draws = 200;
        for seed in 0..draws {
            let v = Vocabulary::new(seed);
            let ids = |xs: [TokenId; 4]| PromptTokens(xs.to_vec());
            let base = embed_prompt(&ids([0, 20, 8, 32]), &v);
            three += cosine(&base, &embed_prompt(&ids([0, 21, 8, 32]), &v));
            none += cosine(&base, &embed_prompt(&ids([1, 22, 9, 33]), &v));
        }
        assert!(three / draws as f64 > none / draws as f64 + 0.5);
    }
}
