use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type TokenId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenClass {
    Background,
    Object,
    Attribute,
    Verb,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub id: TokenId,
    pub name: String,
    pub class: TokenClass,
}

const BACKGROUNDS: &[&str] = &[
    "beach", "forest", "street", "desert", "snowfield", "kitchen", "stadium", "lakeshore",
];
const OBJECTS: &[&str] = &[
    "dog", "cat", "horse", "car", "bicycle", "robot", "bird", "boat", "fox", "elephant", "drone", "skater",
];
const ATTRIBUTES: &[&str] = &[
    "spotted", "wild", "red", "golden", "striped", "black", "white", "tiny", "giant", "fluffy", "metallic",
    "glowing",
];
const VERBS: &[&str] = &[
    "running", "jumping", "sleeping", "flying", "turning", "swimming", "walking", "spinning",
];

/// Vector kinds derived from a token id.
#[derive(Clone, Copy)]
enum Stream {
    Paint = 1,
    Key = 2,
    Embed = 3,
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Four disjoint token classes with deterministic per-token vectors.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub seed: u64,
    pub tokens: Vec<Token>,
    #[serde(skip)]
    by_name: HashMap<String, TokenId>,
}

impl Vocabulary {
    pub fn new(seed: u64) -> Self {
        let mut tokens = Vec::new();
        for (class, names) in [
            (TokenClass::Background, BACKGROUNDS),
            (TokenClass::Object, OBJECTS),
            (TokenClass::Attribute, ATTRIBUTES),
            (TokenClass::Verb, VERBS),
        ] {
            for name in names.iter() {
                tokens.push(Token {
                    id: tokens.len() as TokenId,
                    name: name.to_string(),
                    class,
                });
            }
        }
        Self::from_tokens(seed, tokens).expect("built-in vocabulary is valid")
    }

    pub fn from_tokens(seed: u64, tokens: Vec<Token>) -> Result<Self> {
        let mut by_name = HashMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if t.id as usize != i {
                return Err(Error::Parse(format!("vocabulary ids must be 0..n, got {} at {i}", t.id)));
            }
            if by_name.insert(t.name.clone(), t.id).is_some() {
                return Err(Error::Parse(format!("duplicate token name {:?}", t.name)));
            }
        }
        Ok(Self { seed, tokens, by_name })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, id: TokenId) -> &Token {
        &self.tokens[id as usize]
    }

    pub fn class_of(&self, id: TokenId) -> Option<TokenClass> {
        self.tokens.get(id as usize).map(|t| t.class)
    }

    pub fn name(&self, id: TokenId) -> &str {
        &self.tokens[id as usize].name
    }

    pub fn lookup(&self, name: &str) -> Result<TokenId> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| Error::Parse(format!("unknown token {name:?}")))
    }

    pub fn ids_of(&self, class: TokenClass) -> Vec<TokenId> {
        self.tokens.iter().filter(|t| t.class == class).map(|t| t.id).collect()
    }

    pub fn pick(&self, class: TokenClass, rng: &mut impl Rng) -> TokenId {
        let ids = self.ids_of(class);
        ids[rng.random_range(0..ids.len())]
    }

    /// A token of the same class different from `current`.
    pub fn substitute(&self, current: TokenId, rng: &mut impl Rng) -> TokenId {
        let class = self.token(current).class;
        let others: Vec<TokenId> = self.ids_of(class).into_iter().filter(|&i| i != current).collect();
        others[rng.random_range(0..others.len())]
    }

    fn unit_vector(&self, id: TokenId, stream: Stream, dim: usize) -> Vec<f64> {
        let key = splitmix64(self.seed ^ splitmix64(((id as u64) << 4) | stream as u64));
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        v
    }

    /// Unit "paint" vector: the latent content a token contributes.
    pub fn paint(&self, id: TokenId, dim: usize) -> Vec<f64> {
        self.unit_vector(id, Stream::Paint, dim)
    }

    /// Unit key embedding used by cross-attention.
    pub fn key(&self, id: TokenId, dim: usize) -> Vec<f64> {
        self.unit_vector(id, Stream::Key, dim)
    }

    /// Unit hash vector used for retrieval embeddings.
    pub fn hash_vector(&self, id: TokenId, dim: usize) -> Vec<f64> {
        self.unit_vector(id, Stream::Embed, dim)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Vocabulary = serde_json::from_str(text)?;
        Self::from_tokens(raw.seed, raw.tokens)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_unique_and_classes_disjoint() {
        let v = Vocabulary::new(0);
        let total: usize = [TokenClass::Background, TokenClass::Object, TokenClass::Attribute, TokenClass::Verb]
            .iter()
            .map(|c| v.ids_of(*c).len())
            .sum();
        assert_eq!(total, v.len());
        assert_eq!(v.lookup("spotted").unwrap(), v.ids_of(TokenClass::Attribute)[0]);
    }

    #[test]
    fn vectors_are_deterministic_unit_and_distinct() {
        let v = Vocabulary::new(5);
        let a = v.paint(3, 32);
        assert_eq!(a, Vocabulary::new(5).paint(3, 32));
        assert!((a.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        assert_ne!(a, v.key(3, 32));
        assert_ne!(a, Vocabulary::new(6).paint(3, 32));
    }

    #[test]
    fn json_round_trip() {
        let v = Vocabulary::new(42);
        let back = Vocabulary::from_json(&v.to_json().unwrap()).unwrap();
        assert_eq!(back.lookup("fox").unwrap(), v.lookup("fox").unwrap());
        assert_eq!(back.seed, 42);
    }
}
