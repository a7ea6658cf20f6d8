//! Frozen bag-of-tokens instruction encoder.
//!
//! Every token maps to a fixed Gaussian vector drawn from a generator seeded
//! by the token's hash; a prompt is the normalized sum of its token vectors.
//! Filler words are dropped unless nothing else remains.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_EMBED_DIM: usize = 64;

const TOKEN_SALT: u64 = 0x6c61_7374_6d69_6c65;

const FILLER: &[&str] = &[
    "a", "an", "the", "go", "to", "of", "one", "thing", "next", "near", "by", "please", "toward",
    "towards", "that", "this", "over", "there", "in", "on", "at", "and", "with",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InstructionEmbedding(Vec<f64>);

impl InstructionEmbedding {
    /// Wraps an arbitrary vector, normalizing it. Fails on zero or non-finite input.
    pub fn from_vec(mut v: Vec<f64>) -> Result<Self> {
        let n = norm(&v);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::domain("embedding must be finite and non-zero"));
        }
        v.iter_mut().for_each(|x| *x /= n);
        Ok(Self(v))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn cosine(&self, other: &InstructionEmbedding) -> f64 {
        cosine(&self.0, &other.0)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine similarity; zero when either vector vanishes.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn token_vector(token: &str, dim: usize, acc: &mut [f64]) {
    let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(token.as_bytes()) ^ TOKEN_SALT);
    for slot in acc.iter_mut().take(dim) {
        let z: f64 = StandardNormal.sample(&mut rng);
        *slot += z;
    }
}

pub fn encode_instruction(text: &str, dim: usize) -> Result<InstructionEmbedding> {
    if dim == 0 {
        return Err(Error::config("embedding dimension must be positive"));
    }
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(Error::domain("empty prompt"));
    }
    let content: Vec<&String> = tokens
        .iter()
        .filter(|t| !FILLER.contains(&t.as_str()))
        .collect();
    let used: Vec<&String> = if content.is_empty() {
        tokens.iter().collect()
    } else {
        content
    };
    let mut acc = vec![0.0; dim];
    for t in used {
        token_vector(t, dim, &mut acc);
    }
    InstructionEmbedding::from_vec(acc)
}
