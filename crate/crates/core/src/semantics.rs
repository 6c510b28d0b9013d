//! Text encoding and segmentation.
//!
//! The default encoder is a feature-hashing bag of tokens. A token's vector is
//! built by hashing the token bytes with FNV-1a, mixing the result with the
//! encoder seed through SplitMix64, and then expanding it in counter mode:
//! component `j` is `splitmix64(base + j * 0x9E3779B97F4A7C15)` mapped to
//! `[-1, 1)` from its top 53 bits. Token vectors are summed in lexicographic
//! token order so that the sum is bit-identical for any token permutation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeding::splitmix64;
use crate::vector::SemanticVector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemanticsError {
    #[error("task text contains no tokens")]
    EmptyTask,
    #[error("token vectors cancel out (norm {0:e})")]
    DegenerateSum(f64),
    #[error("invalid encoder config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub dim: usize,
    pub seed: u64,
    pub window: usize,
    pub stride: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self { dim: 64, seed: 0, window: 8, stride: 8 }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), SemanticsError> {
        if self.dim < 2 {
            return Err(SemanticsError::InvalidConfig(format!("dim must be >= 2, got {}", self.dim)));
        }
        if self.window == 0 || self.stride == 0 {
            return Err(SemanticsError::InvalidConfig("window and stride must be >= 1".into()));
        }
        Ok(())
    }
}

/// Lowercases and splits on Unicode whitespace and ASCII punctuation.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| c.is_whitespace() || c.is_ascii_punctuation())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Anything that maps text to a unit vector deterministically.
pub trait TextEncoder: Send + Sync {
    fn dim(&self) -> usize;

    fn encode_tokens(&self, tokens: &[String]) -> Result<SemanticVector, SemanticsError>;

    fn encode(&self, text: &str) -> Result<SemanticVector, SemanticsError> {
        self.encode_tokens(&tokenize(text))
    }
}

#[derive(Clone, Debug)]
pub struct HashingEncoder {
    cfg: EncoderConfig,
}

const FNV_OFFSET: u64 = 0xCBF2_9CE4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01B3;
const COUNTER_STEP: u64 = 0x9E37_79B9_7F4A_7C15;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

impl HashingEncoder {
    pub fn new(cfg: EncoderConfig) -> Result<Self, SemanticsError> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.cfg
    }

    pub fn token_hash(&self, token: &str) -> u64 {
        splitmix64(fnv1a(token.as_bytes()) ^ splitmix64(self.cfg.seed))
    }

    /// The raw (unnormalized) vector for one token, components in [-1, 1).
    pub fn token_vector(&self, token: &str) -> Vec<f64> {
        let base = self.token_hash(token);
        (0..self.cfg.dim as u64)
            .map(|j| {
                let bits = splitmix64(base.wrapping_add(j.wrapping_mul(COUNTER_STEP))) >> 11;
                (bits as f64) * (2.0 / (1u64 << 53) as f64) - 1.0
            })
            .collect()
    }

    pub fn segment(&self, text: &str) -> Result<SegmentMatrix, SemanticsError> {
        segment(self, text, self.cfg.window, self.cfg.stride)
    }
}

impl TextEncoder for HashingEncoder {
    fn dim(&self) -> usize {
        self.cfg.dim
    }

    fn encode_tokens(&self, tokens: &[String]) -> Result<SemanticVector, SemanticsError> {
        if tokens.is_empty() {
            return Err(SemanticsError::EmptyTask);
        }
        let mut sorted: Vec<&str> = tokens.iter().map(String::as_str).collect();
        sorted.sort_unstable();
        let mut sum = vec![0.0; self.cfg.dim];
        for token in sorted {
            for (acc, x) in sum.iter_mut().zip(self.token_vector(token)) {
                *acc += x;
            }
        }
        let norm = crate::vector::norm(&sum);
        SemanticVector::from_raw(sum).ok_or(SemanticsError::DegenerateSum(norm))
    }
}

/// Per-window embeddings of a text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentMatrix {
    pub rows: Vec<SemanticVector>,
    pub segment_texts: Vec<String>,
    pub window: usize,
    pub stride: usize,
}

impl SegmentMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Number of windows for `tokens` tokens.
pub fn window_count(tokens: usize, window: usize, stride: usize) -> usize {
    tokens.saturating_sub(window).div_ceil(stride) + 1
}

/// Splits `text` into windows of `window` tokens advanced by `stride`,
/// keeping the final partial window, and encodes each window.
pub fn segment<E: TextEncoder + ?Sized>(
    encoder: &E,
    text: &str,
    window: usize,
    stride: usize,
) -> Result<SegmentMatrix, SemanticsError> {
    if window == 0 || stride == 0 {
        return Err(SemanticsError::InvalidConfig("window and stride must be >= 1".into()));
    }
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(SemanticsError::EmptyTask);
    }
    let count = window_count(tokens.len(), window, stride);
    let mut rows = Vec::with_capacity(count);
    let mut segment_texts = Vec::with_capacity(count);
    for m in 0..count {
        // With stride > window the last start can overshoot; it then covers the final token.
        let start = (m * stride).min(tokens.len() - 1);
        let end = (start + window).min(tokens.len());
        let text = tokens[start..end].join(" ");
        rows.push(encoder.encode(&text)?);
        segment_texts.push(text);
    }
    Ok(SegmentMatrix { rows, segment_texts, window, stride })
}
