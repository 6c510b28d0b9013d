//! Relevance-weighted fusion of agent outputs and the pairwise consistency term.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vector::{axpy, cosine_raw, norm, softmax, SemanticVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AggregateError {
    #[error("no outputs to fuse")]
    NoOutputs,
    #[error("weighted outputs cancel (norm {0:e})")]
    DegenerateFusion(f64),
    #[error("invalid aggregate config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AggregateConfig {
    /// Softmax temperature on task relevance.
    pub kappa: f64,
    /// Step toward the mean per projection round.
    pub eta: f64,
    pub rounds: usize,
    /// Apply the consistency projection before fusion.
    pub projection: bool,
}

impl Default for AggregateConfig {
    fn default() -> Self {
        Self { kappa: 4.0, eta: 0.25, rounds: 1, projection: true }
    }
}

impl AggregateConfig {
    pub fn validate(&self) -> Result<(), AggregateError> {
        if !self.kappa.is_finite() {
            return Err(AggregateError::InvalidConfig("kappa must be finite".into()));
        }
        if !(0.0..1.0).contains(&self.eta) {
            return Err(AggregateError::InvalidConfig(format!("eta must be in [0,1), got {}", self.eta)));
        }
        Ok(())
    }
}

/// softmax over `kappa * cosine(o_i, task)`.
pub fn fusion_weights<V: AsRef<[f64]>>(outputs: &[V], task: &SemanticVector, kappa: f64) -> Vec<f64> {
    let logits: Vec<f64> = outputs.iter().map(|o| kappa * cosine_raw(o.as_ref(), task.as_slice())).collect();
    softmax(&logits)
}

/// Normalized weighted sum of outputs.
pub fn fuse<V: AsRef<[f64]>>(outputs: &[V], weights: &[f64]) -> Result<SemanticVector, AggregateError> {
    let first = outputs.first().ok_or(AggregateError::NoOutputs)?;
    let mut sum = vec![0.0; first.as_ref().len()];
    for (o, w) in outputs.iter().zip(weights) {
        axpy(&mut sum, *w, o.as_ref());
    }
    let n = norm(&sum);
    SemanticVector::from_raw(sum).ok_or(AggregateError::DegenerateFusion(n))
}

pub fn mean<V: AsRef<[f64]>>(outputs: &[V]) -> Vec<f64> {
    let dim = outputs.first().map_or(0, |o| o.as_ref().len());
    let mut sum = vec![0.0; dim];
    for o in outputs {
        axpy(&mut sum, 1.0, o.as_ref());
    }
    let n = outputs.len() as f64;
    sum.iter_mut().for_each(|x| *x /= n);
    sum
}

/// Sum of squared distances over unordered pairs i < j.
pub fn consistency_loss<V: AsRef<[f64]>>(outputs: &[V]) -> f64 {
    let mut total = 0.0;
    for i in 0..outputs.len() {
        for j in (i + 1)..outputs.len() {
            total += outputs[i]
                .as_ref()
                .iter()
                .zip(outputs[j].as_ref())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        }
    }
    total
}

/// Moves every output a fraction `eta` toward the mean, `rounds` times.
pub fn consistency_project<V: AsRef<[f64]>>(outputs: &[V], eta: f64, rounds: usize) -> Vec<Vec<f64>> {
    let mut current: Vec<Vec<f64>> = outputs.iter().map(|o| o.as_ref().to_vec()).collect();
    for _ in 0..rounds {
        let centre = mean(&current);
        for o in current.iter_mut() {
            for (x, c) in o.iter_mut().zip(&centre) {
                *x = (1.0 - eta) * *x + eta * c;
            }
        }
    }
    current
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionResult {
    pub weights: Vec<f64>,
    pub global_output: SemanticVector,
    /// Consistency loss of the outputs before any projection.
    pub consistency: f64,
    pub raw_outputs: Vec<Vec<f64>>,
}

/// Optional projection, relevance weighting and fusion in one pass.
pub fn aggregate(outputs: &[SemanticVector], task: &SemanticVector, cfg: &AggregateConfig) -> Result<FusionResult, AggregateError> {
    if outputs.is_empty() {
        return Err(AggregateError::NoOutputs);
    }
    let consistency = consistency_loss(outputs);
    let raw_outputs = if cfg.projection {
        consistency_project(outputs, cfg.eta, cfg.rounds)
    } else {
        outputs.iter().map(|o| o.as_slice().to_vec()).collect()
    };
    let weights = fusion_weights(&raw_outputs, task, cfg.kappa);
    let global_output = fuse(&raw_outputs, &weights)?;
    Ok(FusionResult { weights, global_output, consistency, raw_outputs })
}
