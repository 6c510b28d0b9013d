//! Attention-based decomposition of a task into subtask embeddings.
//!
//! Each query is the task direction perturbed by a seeded random unit vector
//! scaled by `beta`. A query attends over the task's segment matrix and the
//! attention-weighted sum of segment rows becomes the subtask embedding.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeding::{self, stream};
use crate::semantics::{segment, tokenize, SegmentMatrix, SemanticsError, TextEncoder};
use crate::vector::{argmax, axpy, normalize, softmax, SemanticVector};

const MAX_QUERY_RETRIES: usize = 8;
const COVER_MASS: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecomposeError {
    #[error("query {index} stayed degenerate after {MAX_QUERY_RETRIES} retries")]
    DegenerateQuery { index: usize },
    #[error("subtask {index} has a degenerate attention-weighted sum")]
    DegenerateSubtask { index: usize },
    #[error("invalid decomposition config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecomposeConfig {
    /// Number of subtasks (modules) produced per level.
    pub modules: usize,
    /// Diversity coefficient for query perturbation.
    pub beta: f64,
    pub depth: usize,
    pub child_k: usize,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        Self { modules: 5, beta: 1.0, depth: 1, child_k: 2 }
    }
}

impl DecomposeConfig {
    pub fn validate(&self) -> Result<(), DecomposeError> {
        if self.modules == 0 {
            return Err(DecomposeError::InvalidConfig("modules must be >= 1".into()));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(DecomposeError::InvalidConfig(format!("beta must be finite and >= 0, got {}", self.beta)));
        }
        if self.depth == 0 {
            return Err(DecomposeError::InvalidConfig("depth must be >= 1".into()));
        }
        if self.depth > 1 && self.child_k == 0 {
            return Err(DecomposeError::InvalidConfig("child_k must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuerySet {
    pub queries: Vec<SemanticVector>,
    pub diversity_beta: f64,
}

fn random_unit(rng: &mut impl rand::Rng, dim: usize) -> Vec<f64> {
    loop {
        let draw: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        if let Some(unit) = normalize(draw) {
            return unit;
        }
    }
}

/// Builds `k` queries `normalize(task + beta * u_i)` from a seeded stream of unit directions.
pub fn make_queries(task: &SemanticVector, k: usize, beta: f64, seed: u64) -> Result<QuerySet, DecomposeError> {
    if k == 0 {
        return Err(DecomposeError::InvalidConfig("modules must be >= 1".into()));
    }
    if beta == 0.0 {
        return Ok(QuerySet { queries: vec![task.clone(); k], diversity_beta: beta });
    }
    let mut rng = seeding::rng(seed);
    let mut queries = Vec::with_capacity(k);
    for index in 0..k {
        let mut query = None;
        for _ in 0..=MAX_QUERY_RETRIES {
            let mut raw = task.as_slice().to_vec();
            axpy(&mut raw, beta, &random_unit(&mut rng, task.dim()));
            if let Some(q) = SemanticVector::from_raw(raw) {
                query = Some(q);
                break;
            }
        }
        queries.push(query.ok_or(DecomposeError::DegenerateQuery { index })?);
    }
    Ok(QuerySet { queries, diversity_beta: beta })
}

/// Scaled dot-product attention of `query` over the segment rows.
pub fn attention_weights(query: &SemanticVector, segs: &SegmentMatrix) -> Vec<f64> {
    let scale = (query.dim() as f64).sqrt();
    let logits: Vec<f64> = segs.rows.iter().map(|row| query.dot(row) / scale).collect();
    softmax(&logits)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Subtask {
    pub id: usize,
    pub parent: Option<usize>,
    pub attention: Vec<f64>,
    pub embedding: SemanticVector,
    pub extracted_text: String,
    /// Index of the most attended segment.
    pub focus: usize,
    /// Embedding of the most attended segment.
    pub focus_embedding: SemanticVector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubtaskPlan {
    pub subtasks: Vec<Subtask>,
    pub depth: usize,
}

impl SubtaskPlan {
    pub fn len(&self) -> usize {
        self.subtasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subtasks.is_empty()
    }

    pub fn embeddings(&self) -> Vec<SemanticVector> {
        self.subtasks.iter().map(|s| s.embedding.clone()).collect()
    }
}

/// Smallest set of segments, taken by descending weight, whose mass reaches
/// one half. Returned in original segment order.
pub fn attention_cover(weights: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let mut mass = 0.0;
    let mut chosen = Vec::new();
    for m in order {
        chosen.push(m);
        mass += weights[m];
        if mass >= COVER_MASS {
            break;
        }
    }
    chosen.sort_unstable();
    chosen
}

fn subtask_from_query(id: usize, query: &SemanticVector, segs: &SegmentMatrix) -> Result<Subtask, DecomposeError> {
    let attention = attention_weights(query, segs);
    let mut sum = vec![0.0; query.dim()];
    for (w, row) in attention.iter().zip(&segs.rows) {
        axpy(&mut sum, *w, row.as_slice());
    }
    let embedding = SemanticVector::from_raw(sum).ok_or(DecomposeError::DegenerateSubtask { index: id })?;
    let extracted_text = attention_cover(&attention)
        .into_iter()
        .map(|m| segs.segment_texts[m].as_str())
        .collect::<Vec<_>>()
        .join(" ");
    let focus = argmax(&attention);
    Ok(Subtask {
        id,
        parent: None,
        focus_embedding: segs.rows[focus].clone(),
        focus,
        attention,
        embedding,
        extracted_text,
    })
}

/// Flat decomposition into `cfg.modules` subtasks.
pub fn decompose(
    task: &SemanticVector,
    segs: &SegmentMatrix,
    cfg: &DecomposeConfig,
    seed: u64,
) -> Result<SubtaskPlan, DecomposeError> {
    decompose_k(task, segs, cfg.modules, cfg.beta, seed)
}

fn decompose_k(
    task: &SemanticVector,
    segs: &SegmentMatrix,
    k: usize,
    beta: f64,
    seed: u64,
) -> Result<SubtaskPlan, DecomposeError> {
    let queries = make_queries(task, k, beta, seed)?;
    let subtasks = queries
        .queries
        .iter()
        .enumerate()
        .map(|(id, q)| subtask_from_query(id, q, segs))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SubtaskPlan { subtasks, depth: 1 })
}

/// Seed used to decompose the extracted text of subtask `parent`.
pub fn child_seed(seed: u64, parent: usize) -> u64 {
    seeding::derive(seeding::derive(seed, stream::CHILD_QUERIES), parent as u64)
}

/// Re-decomposes each subtask's extracted text until `depth` levels exist and
/// returns the leaves in parent order with fresh ids.
pub fn decompose_hierarchical<E: TextEncoder + ?Sized>(
    plan: &SubtaskPlan,
    depth: usize,
    encoder: &E,
    window: usize,
    stride: usize,
    cfg: &DecomposeConfig,
    seed: u64,
) -> Result<SubtaskPlan, DecomposeError> {
    if depth == 0 {
        return Err(DecomposeError::InvalidConfig("depth must be >= 1".into()));
    }
    if depth == 1 {
        return Ok(plan.clone());
    }
    let mut leaves = Vec::new();
    for parent in &plan.subtasks {
        if tokenize(&parent.extracted_text).is_empty() {
            leaves.push(parent.clone());
            continue;
        }
        let task = encoder.encode(&parent.extracted_text)?;
        let segs = segment(encoder, &parent.extracted_text, window, stride)?;
        let sub_seed = child_seed(seed, parent.id);
        let children = decompose_k(&task, &segs, cfg.child_k, cfg.beta, sub_seed)?;
        let children = decompose_hierarchical(&children, depth - 1, encoder, window, stride, cfg, sub_seed)?;
        for mut child in children.subtasks {
            child.parent = Some(parent.id);
            leaves.push(child);
        }
    }
    for (id, leaf) in leaves.iter_mut().enumerate() {
        leaf.id = id;
    }
    Ok(SubtaskPlan { subtasks: leaves, depth: plan.depth + depth - 1 })
}
