//! Text embeddings: a lookup table loaded from disk with a deterministic
//! hashed fallback, and cosine similarity.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::scalar::Scalar;

pub const DEFAULT_DIM: usize = 512;

/// Dense embedding of one word or sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent, bound = "T: Scalar")]
pub struct EmbeddingVector<T>(pub Vec<T>);

impl<T: Scalar> EmbeddingVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Argument("embedding must have at least one dimension".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding contains NaN or infinity".into()));
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }
}

impl<T> AsRef<[T]> for EmbeddingVector<T> {
    fn as_ref(&self) -> &[T] {
        &self.0
    }
}

fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn hashed_gaussian(key: &str, dim: usize, acc: &mut [f64]) {
    let seed: [u8; 32] = Sha256::digest(key.as_bytes()).into();
    let mut rng = ChaCha8Rng::from_seed(seed);
    for a in acc.iter_mut().take(dim) {
        let v: f64 = StandardNormal.sample(&mut rng);
        *a += v;
    }
}

/// Pseudo-embedding used when no encoder output is available.
///
/// Each lower-cased alphanumeric token is hashed (SHA-256) into a ChaCha
/// seed that draws an isotropic Gaussian vector; the token vectors are
/// summed and scaled to unit length. Texts sharing tokens therefore share
/// direction. Text without any alphanumeric token is hashed whole.
pub fn deterministic_embed<T: Scalar>(text: &str, dim: usize) -> Result<EmbeddingVector<T>> {
    if dim == 0 {
        return Err(Error::Argument("embedding dimension must be >= 1".into()));
    }
    let mut acc = vec![0.0f64; dim];
    let toks = tokens(text);
    if toks.is_empty() {
        hashed_gaussian(text, dim, &mut acc);
    } else {
        for t in &toks {
            hashed_gaussian(t, dim, &mut acc);
        }
    }
    let mut n = norm(&acc);
    if n == 0.0 {
        // Only reachable for dim == 1 with cancelling tokens.
        acc[0] = 1.0;
        n = 1.0;
    }
    Ok(EmbeddingVector(acc.into_iter().map(|v| T::lit(v / n)).collect()))
}

/// `aᵀb / (‖a‖‖b‖)`, clamped to `[-1, 1]`.
pub fn cosine_similarity<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "cosine of vectors with dimensions {} and {}",
            a.len(),
            b.len()
        )));
    }
    let na = norm(a);
    let nb = norm(b);
    if na == T::zero() || nb == T::zero() {
        return Err(Error::Degenerate("cosine similarity of a zero vector".into()));
    }
    Ok((dot(a, b) / (na * nb)).max(-T::one()).min(T::one()))
}

#[derive(Serialize, Deserialize)]
struct TableHeader {
    dimension: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct TableRecord<T> {
    text: String,
    vector: Vec<T>,
}

/// Text-to-vector map with a deterministic fallback for unseen texts.
#[derive(Debug)]
pub struct EmbeddingTable<T> {
    dim: usize,
    vectors: HashMap<String, EmbeddingVector<T>>,
    fallbacks: AtomicUsize,
}

impl<T: Scalar> EmbeddingTable<T> {
    /// A table with no entries; every lookup uses the fallback embedder.
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            vectors: HashMap::new(),
            fallbacks: AtomicUsize::new(0),
        }
    }

    pub fn insert(&mut self, text: impl Into<String>, v: EmbeddingVector<T>) -> Result<()> {
        if v.dim() != self.dim {
            return Err(Error::Shape(format!(
                "vector of dimension {} in a table of dimension {}",
                v.dim(),
                self.dim
            )));
        }
        self.vectors.insert(text.into(), v);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Number of lookups so far that missed the table.
    pub fn fallback_count(&self) -> usize {
        self.fallbacks.load(Ordering::Relaxed)
    }

    pub fn lookup(&self, text: &str) -> EmbeddingVector<T> {
        match self.vectors.get(text) {
            Some(v) => v.clone(),
            None => {
                self.fallbacks.fetch_add(1, Ordering::Relaxed);
                deterministic_embed(text, self.dim).expect("table dimension is positive")
            }
        }
    }

    /// Parse the line-delimited table format: a `{"dimension": d}` header
    /// line, then one `{"text": ..., "vector": [...]}` object per line.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing dimension header".into()))?;
        let header: TableHeader =
            serde_json::from_str(header).map_err(|e| parse_err(1, e.to_string()))?;
        if header.dimension == 0 {
            return Err(parse_err(1, "dimension must be positive".into()));
        }
        let mut table = Self::empty(header.dimension);
        for (i, line) in lines {
            let rec: TableRecord<T> =
                serde_json::from_str(line).map_err(|e| parse_err(i + 1, e.to_string()))?;
            let v = EmbeddingVector::new(rec.vector).map_err(|e| parse_err(i + 1, e.to_string()))?;
            table
                .insert(rec.text, v)
                .map_err(|e| parse_err(i + 1, e.to_string()))?;
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Serialize in the table file format, entries sorted by text.
    pub fn to_text(&self) -> String {
        let mut out = serde_json::to_string(&TableHeader { dimension: self.dim }).unwrap();
        out.push('\n');
        let mut keys: Vec<&String> = self.vectors.keys().collect();
        keys.sort();
        for k in keys {
            let rec = TableRecord {
                text: k.clone(),
                vector: self.vectors[k].0.clone(),
            };
            out.push_str(&serde_json::to_string(&rec).unwrap());
            out.push('\n');
        }
        out
    }
}
