//! Success rate, decomposition SPL, subtask F1 and load balancing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vector::{cosine, SemanticVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("batch has no episodes")]
    EmptyBatch,
    #[error("no agent executed any step")]
    ZeroWork,
    #[error("optimal cost must be positive, got {0}")]
    NonPositiveOptimum(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub success: bool,
    pub actual_cost: f64,
    pub optimal_cost: f64,
    pub generated: Vec<SemanticVector>,
    pub reference: Vec<SemanticVector>,
    pub steps: Vec<u64>,
}

impl EpisodeOutcome {
    pub fn spl(&self) -> f64 {
        if self.success {
            self.optimal_cost / self.actual_cost.max(self.optimal_cost)
        } else {
            0.0
        }
    }
}

pub fn success_rate(outcomes: &[EpisodeOutcome]) -> Result<f64, MetricsError> {
    if outcomes.is_empty() {
        return Err(MetricsError::EmptyBatch);
    }
    let hits = outcomes.iter().filter(|o| o.success).count();
    Ok(hits as f64 / outcomes.len() as f64)
}

/// Mean of success weighted by optimal over actual step cost.
pub fn decomposition_spl(outcomes: &[EpisodeOutcome]) -> Result<f64, MetricsError> {
    if outcomes.is_empty() {
        return Err(MetricsError::EmptyBatch);
    }
    let mut total = 0.0;
    for o in outcomes {
        if o.optimal_cost.is_nan() || o.optimal_cost <= 0.0 {
            return Err(MetricsError::NonPositiveOptimum(o.optimal_cost));
        }
        total += o.spl();
    }
    Ok(total / outcomes.len() as f64)
}

/// Greedy one-to-one matching: repeatedly take the most similar unmatched
/// pair whose cosine reaches `tau`. Returns (generated, reference) index pairs.
pub fn greedy_matching(generated: &[SemanticVector], reference: &[SemanticVector], tau: f64) -> Vec<(usize, usize)> {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, g) in generated.iter().enumerate() {
        for (j, r) in reference.iter().enumerate() {
            let c = cosine(g, r);
            if c >= tau {
                candidates.push((c, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_g = vec![false; generated.len()];
    let mut used_r = vec![false; reference.len()];
    let mut matches = Vec::new();
    for (_, i, j) in candidates {
        if !used_g[i] && !used_r[j] {
            used_g[i] = true;
            used_r[j] = true;
            matches.push((i, j));
        }
    }
    matches
}

pub fn subtask_f1(generated: &[SemanticVector], reference: &[SemanticVector], tau: f64) -> f64 {
    if reference.is_empty() {
        return 0.0;
    }
    let matched = greedy_matching(generated, reference, tau).len() as f64;
    let precision = if generated.is_empty() { 0.0 } else { matched / generated.len() as f64 };
    let recall = matched / reference.len() as f64;
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Pairwise Gini coefficient: sum of |x_i - x_j| over ordered pairs / (2 N sum x).
pub fn gini(values: &[f64]) -> Result<f64, MetricsError> {
    let total: f64 = values.iter().sum();
    if values.is_empty() || total <= 0.0 {
        return Err(MetricsError::ZeroWork);
    }
    let mut diff = 0.0;
    for x in values {
        for y in values {
            diff += (x - y).abs();
        }
    }
    Ok(diff / (2.0 * values.len() as f64 * total))
}

/// One minus the Gini coefficient of executed steps.
pub fn load_balancing(steps: &[u64]) -> Result<f64, MetricsError> {
    let values: Vec<f64> = steps.iter().map(|&s| s as f64).collect();
    Ok(1.0 - gini(&values)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub episodes: usize,
    pub sr: f64,
    pub dspl: f64,
    pub subtask_f1: f64,
    pub load_balancing: f64,
    /// Mean pre-projection consistency loss.
    pub consistency: f64,
    pub messages: u64,
    pub ticks: u64,
}

impl MetricsReport {
    /// Arithmetic mean of the four headline metrics.
    pub fn composite(&self) -> f64 {
        (self.sr + self.dspl + self.subtask_f1 + self.load_balancing) / 4.0
    }
}
