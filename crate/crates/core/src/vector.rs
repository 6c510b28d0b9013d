//! Unit-norm embedding vectors shared by every stage of the pipeline.

use serde::{Deserialize, Serialize};

/// Norm below which a vector is treated as having no direction.
pub const DEGENERATE_NORM: f64 = 1e-9;

/// A d-dimensional embedding with unit L2 norm.
///
/// The all-zero vector is the only permitted exception and is used as a
/// "no message" sentinel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SemanticVector(Vec<f64>);

impl SemanticVector {
    /// Normalizes `raw`, returning `None` when its norm is below [`DEGENERATE_NORM`].
    pub fn from_raw(raw: Vec<f64>) -> Option<Self> {
        normalize(raw).map(Self)
    }

    pub fn zero(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn dot(&self, other: &Self) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|x| -x).collect())
    }
}

impl AsRef<[f64]> for SemanticVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Scales `v` to unit length, or `None` if it is too short to carry a direction.
pub fn normalize(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let n = norm(&v);
    if !n.is_finite() || n < DEGENERATE_NORM {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= n);
    Some(v)
}

/// Inner product of two unit vectors, clamped to [-1, 1].
pub fn cosine(a: &SemanticVector, b: &SemanticVector) -> f64 {
    a.dot(b).clamp(-1.0, 1.0)
}

/// Cosine for arbitrary non-zero vectors; 0 when either side has no direction.
pub fn cosine_raw(a: &[f64], b: &[f64]) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na < DEGENERATE_NORM || nb < DEGENERATE_NORM {
        return 0.0;
    }
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

/// Accumulates `weight * v` into `acc`.
pub fn axpy(acc: &mut [f64], weight: f64, v: &[f64]) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a += weight * x;
    }
}

/// Softmax with max-subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
