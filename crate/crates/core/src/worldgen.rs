//! Synthetic task worlds with known reference decompositions, and JSONL
//! corpus ingestion.
//!
//! A generated task is a shared context sentence followed by one sentence per
//! reference subtask, each drawn from its own disjoint synthetic vocabulary.
//! Subtask targets mix the shared sentence's embedding into each local
//! embedding, so an agent following only its local signal falls short of
//! its target.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::runtime::{convergence_ticks, DEFAULT_RHO};
use crate::seeding::{self, stream};
use crate::semantics::{EncoderConfig, HashingEncoder, SemanticsError, TextEncoder};
use crate::vector::{axpy, cosine, SemanticVector};

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("invalid world spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error("subtask targets cancel out")]
    DegenerateTarget,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: malformed JSON: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: field `{field}` {problem}")]
    Schema { line: usize, field: &'static str, problem: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldSpec {
    pub seed: u64,
    pub k_ref: usize,
    pub vocab_per_subtask: usize,
    /// Share of the context embedding mixed into every subtask target.
    pub gamma: f64,
    /// How many times each context word occurs in the shared sentence.
    pub context_repeat: usize,
    pub dim: usize,
    pub encoder_seed: u64,
    pub window: usize,
    pub stride: usize,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            k_ref: 5,
            vocab_per_subtask: 12,
            gamma: 0.4,
            context_repeat: 2,
            dim: 64,
            encoder_seed: 0,
            window: 12,
            stride: 12,
        }
    }
}

impl WorldSpec {
    pub fn encoder_config(&self) -> EncoderConfig {
        EncoderConfig { dim: self.dim, seed: self.encoder_seed, window: self.window, stride: self.stride }
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        if self.k_ref == 0 {
            return Err(WorldError::Spec("k_ref must be >= 1".into()));
        }
        if self.vocab_per_subtask == 0 {
            return Err(WorldError::Spec("vocab_per_subtask must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(WorldError::Spec(format!("gamma must be in [0,1], got {}", self.gamma)));
        }
        if self.context_repeat == 0 {
            return Err(WorldError::Spec("context_repeat must be >= 1".into()));
        }
        self.encoder_config().validate()?;
        Ok(())
    }
}

/// A task with its ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub task_text: String,
    pub reference_texts: Vec<String>,
    /// Embedding of each reference subtask text.
    pub local_targets: Vec<SemanticVector>,
    /// Embedding of the shared context sentence; absent for ingested corpora.
    pub shared: Option<SemanticVector>,
    pub targets: Vec<SemanticVector>,
    pub global_target: SemanticVector,
    pub optimal_cost: f64,
    pub gamma: f64,
}

/// Step-cost lower bound: each reference subtask needs the ticks an isolated
/// agent takes to close 90% of the gap at the default update rate.
pub fn optimal_cost(k_ref: usize) -> f64 {
    (k_ref * convergence_ticks(DEFAULT_RHO)) as f64
}

/// `normalize(gamma * shared + (1 - gamma) * local)` with exact endpoints.
pub fn mix_target(shared: &SemanticVector, local: &SemanticVector, gamma: f64) -> SemanticVector {
    if gamma == 0.0 {
        return local.clone();
    }
    if gamma == 1.0 {
        return shared.clone();
    }
    let mut raw = vec![0.0; local.dim()];
    axpy(&mut raw, gamma, shared.as_slice());
    axpy(&mut raw, 1.0 - gamma, local.as_slice());
    SemanticVector::from_raw(raw).unwrap_or_else(|| local.clone())
}

fn global_target(targets: &[SemanticVector]) -> Result<SemanticVector, WorldError> {
    let mut sum = vec![0.0; targets[0].dim()];
    for t in targets {
        axpy(&mut sum, 1.0, t.as_slice());
    }
    SemanticVector::from_raw(sum).ok_or(WorldError::DegenerateTarget)
}

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

fn pseudo_word(rng: &mut impl Rng) -> String {
    let syllables = rng.gen_range(2..=3);
    let mut w = String::with_capacity(2 * syllables);
    for _ in 0..syllables {
        w.push(CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char);
        w.push(VOWELS[rng.gen_range(0..VOWELS.len())] as char);
    }
    w
}

fn fresh_words(rng: &mut impl Rng, used: &mut HashSet<String>, count: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let w = pseudo_word(rng);
        if used.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

/// Generates one task instance. Deterministic in `spec`.
pub fn generate(spec: &WorldSpec) -> Result<TaskInstance, WorldError> {
    spec.validate()?;
    let encoder = HashingEncoder::new(spec.encoder_config())?;
    let mut rng = seeding::rng(seeding::derive(spec.seed, stream::WORLD));
    let mut used = HashSet::new();

    let distinct = spec.vocab_per_subtask.div_ceil(spec.context_repeat);
    let context_words = fresh_words(&mut rng, &mut used, distinct);
    let shared_text = (0..spec.vocab_per_subtask)
        .map(|i| context_words[i % distinct].as_str())
        .collect::<Vec<_>>()
        .join(" ");
    let shared = encoder.encode(&shared_text)?;

    let mut reference_texts = Vec::with_capacity(spec.k_ref);
    let mut local_targets = Vec::with_capacity(spec.k_ref);
    for _ in 0..spec.k_ref {
        loop {
            let text = fresh_words(&mut rng, &mut used, spec.vocab_per_subtask).join(" ");
            let local = encoder.encode(&text)?;
            if cosine(&local, &shared).abs() < 1.0 - 1e-9 {
                reference_texts.push(text);
                local_targets.push(local);
                break;
            }
        }
    }

    let mut order: Vec<usize> = (0..spec.k_ref).collect();
    order.shuffle(&mut rng);
    let mut sentences = vec![shared_text];
    sentences.extend(order.iter().map(|&i| reference_texts[i].clone()));
    let task_text = sentences.join(". ") + ".";

    let targets: Vec<SemanticVector> = local_targets.iter().map(|l| mix_target(&shared, l, spec.gamma)).collect();
    let global = global_target(&targets)?;
    Ok(TaskInstance {
        task_text,
        reference_texts,
        local_targets,
        shared: Some(shared),
        targets,
        global_target: global,
        optimal_cost: optimal_cost(spec.k_ref),
        gamma: spec.gamma,
    })
}

/// One externally prepared task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub task_text: String,
    pub reference_subtasks: Vec<String>,
    #[serde(default)]
    pub metadata: Map<String, Value>,
}

impl CorpusRecord {
    /// Builds a task whose targets are the reference embeddings themselves:
    /// external data carries no shared component.
    pub fn to_task<E: TextEncoder + ?Sized>(&self, encoder: &E) -> Result<TaskInstance, WorldError> {
        let local_targets = self
            .reference_subtasks
            .iter()
            .map(|t| encoder.encode(t))
            .collect::<Result<Vec<_>, _>>()?;
        let global = global_target(&local_targets)?;
        Ok(TaskInstance {
            task_text: self.task_text.clone(),
            reference_texts: self.reference_subtasks.clone(),
            targets: local_targets.clone(),
            local_targets,
            shared: None,
            global_target: global,
            optimal_cost: optimal_cost(self.reference_subtasks.len()),
            gamma: 0.0,
        })
    }
}

fn schema(line: usize, field: &'static str, problem: &str) -> IngestError {
    IngestError::Schema { line, field, problem: problem.to_owned() }
}

fn parse_record(line: usize, text: &str) -> Result<CorpusRecord, IngestError> {
    let value: Value = serde_json::from_str(text).map_err(|e| IngestError::Parse { line, message: e.to_string() })?;
    let Value::Object(mut obj) = value else {
        return Err(IngestError::Parse { line, message: "expected a JSON object".into() });
    };
    let id = match obj.remove("id") {
        Some(Value::String(s)) => s,
        Some(_) => return Err(schema(line, "id", "must be a string")),
        None => return Err(schema(line, "id", "is missing")),
    };
    let task_text = match obj.remove("task_text") {
        Some(Value::String(s)) if !s.trim().is_empty() => s,
        Some(Value::String(_)) => return Err(schema(line, "task_text", "must not be empty")),
        Some(_) => return Err(schema(line, "task_text", "must be a string")),
        None => return Err(schema(line, "task_text", "is missing")),
    };
    let reference_subtasks = match obj.remove("reference_subtasks") {
        Some(Value::Array(items)) => items
            .into_iter()
            .map(|v| match v {
                Value::String(s) => Ok(s),
                _ => Err(schema(line, "reference_subtasks", "must contain only strings")),
            })
            .collect::<Result<Vec<_>, _>>()?,
        Some(_) => return Err(schema(line, "reference_subtasks", "must be an array")),
        None => return Err(schema(line, "reference_subtasks", "is missing")),
    };
    if reference_subtasks.is_empty() {
        return Err(schema(line, "reference_subtasks", "must not be empty"));
    }
    let metadata = match obj.remove("metadata") {
        Some(Value::Object(m)) => m,
        Some(_) => return Err(schema(line, "metadata", "must be an object")),
        None => Map::new(),
    };
    Ok(CorpusRecord { id, task_text, reference_subtasks, metadata })
}

/// Reads validated records from JSONL. Blank lines are skipped; line numbers
/// in errors are 1-based.
pub fn ingest_reader<R: BufRead>(reader: R, path: &str) -> Result<Vec<CorpusRecord>, IngestError> {
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| IngestError::Io { path: path.to_owned(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(parse_record(idx + 1, &line)?);
    }
    Ok(records)
}

pub fn ingest(path: &std::path::Path) -> Result<Vec<CorpusRecord>, IngestError> {
    let shown = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io { path: shown.clone(), source })?;
    ingest_reader(std::io::BufReader::new(file), &shown)
}

pub fn export<W: Write>(records: &[CorpusRecord], mut out: W) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
