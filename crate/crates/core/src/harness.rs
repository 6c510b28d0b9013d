//! Episode pipeline, batches, sweeps and artifact emission.
//!
//! Episode `i` of a batch seeded with `s` uses seed `s + i`. Every sweep cell
//! reuses the same episode seeds, so cells differ only in the swept knob.

use std::fmt;
use std::path::{Path, PathBuf};

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::aggregate::{aggregate, AggregateConfig, AggregateError};
use crate::decompose::{decompose, decompose_hierarchical, DecomposeConfig, DecomposeError, SubtaskPlan};
use crate::metrics::{
    decomposition_spl, load_balancing, subtask_f1, success_rate, EpisodeOutcome, MetricsError, MetricsReport,
};
use crate::runtime::{run_episode as run_rounds, AgentState, EpisodeSetup, RuntimeConfig, RuntimeError, WorkItem};
use crate::schedule::{
    assign, random_routing_table, routing_table, AgentProfile, RoutingPolicy, ScheduleConfig, ScheduleError,
};
use crate::seeding::{self, stream};
use crate::semantics::{HashingEncoder, SemanticsError, TextEncoder};
use crate::trace::TraceEvent;
use crate::vector::{argmax, cosine, SemanticVector};
use crate::worldgen::{generate, CorpusRecord, TaskInstance, WorldError, WorldSpec};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    Decompose(#[from] DecomposeError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error(transparent)]
    Aggregate(#[from] AggregateError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("cell {axis}={value}: {source}")]
    Cell { axis: SweepAxis, value: usize, source: Box<HarnessError> },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    /// Cosine between fused output and global target needed for success.
    pub theta_global: f64,
    /// Cosine needed to match a generated subtask with a reference one.
    pub tau_match: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { theta_global: 0.85, tau_match: 0.4 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub world: WorldSpec,
    pub decompose: DecomposeConfig,
    pub schedule: ScheduleConfig,
    pub runtime: RuntimeConfig,
    pub aggregate: AggregateConfig,
    pub metrics: MetricsConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let wrap = |e: String| HarnessError::Config(e);
        self.world.validate().map_err(|e| wrap(e.to_string()))?;
        self.decompose.validate().map_err(|e| wrap(e.to_string()))?;
        self.schedule.validate().map_err(|e| wrap(e.to_string()))?;
        self.runtime.validate().map_err(|e| wrap(e.to_string()))?;
        self.aggregate.validate().map_err(|e| wrap(e.to_string()))?;
        for (name, v) in [("theta_global", self.metrics.theta_global), ("tau_match", self.metrics.tau_match)] {
            if !(-1.0..=1.0).contains(&v) {
                return Err(wrap(format!("{name} must be in [-1,1], got {v}")));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.into(), source })?;
        serde_json::from_str(&text).map_err(|source| HarnessError::Json { path: path.into(), source })
    }
}

/// Where an episode's task comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EpisodeSource {
    /// Generated from the configured world with the episode seed.
    Synthetic,
    Corpus { record: CorpusRecord },
}

/// Per-episode counters beyond the metric inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub consistency: f64,
    pub messages: u64,
    pub ticks: u64,
    pub rounds: usize,
    pub global_cosine: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub outcome: EpisodeOutcome,
    pub summary: EpisodeSummary,
    pub trace: Option<Vec<TraceEvent>>,
}

/// Agents with seeded random unit skills.
pub fn agent_pool(cfg: &ScheduleConfig, dim: usize, seed: u64) -> Vec<AgentProfile> {
    let mut rng = seeding::rng(seeding::derive(seed, stream::AGENTS));
    (0..cfg.agents)
        .map(|id| {
            let skill = loop {
                let raw: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                if let Some(v) = SemanticVector::from_raw(raw) {
                    break v;
                }
            };
            AgentProfile { id, skill, capacity: cfg.capacity }
        })
        .collect()
}

/// Binds each subtask to the world. The most attended segment is the signal
/// the owner follows; the target belongs to whichever ground-truth anchor
/// (the shared context, or one reference subtask) that segment resembles most.
pub fn ground_subtasks(plan: &SubtaskPlan, task: &TaskInstance, owners: &[usize]) -> Vec<WorkItem> {
    let mut anchors: Vec<(&SemanticVector, &SemanticVector)> = Vec::new();
    if let Some(shared) = &task.shared {
        anchors.push((shared, shared));
    }
    anchors.extend(task.local_targets.iter().zip(&task.targets));
    plan.subtasks
        .iter()
        .map(|s| {
            let sims: Vec<f64> = anchors.iter().map(|(a, _)| cosine(&s.focus_embedding, a)).collect();
            let (_, target) = anchors[argmax(&sims)];
            WorkItem { subtask: s.id, owner: owners[s.id], drive: s.focus_embedding.clone(), target: target.clone() }
        })
        .collect()
}

fn load_task(cfg: &ExperimentConfig, source: &EpisodeSource, seed: u64, encoder: &HashingEncoder) -> Result<TaskInstance, HarnessError> {
    Ok(match source {
        EpisodeSource::Synthetic => generate(&WorldSpec { seed, ..cfg.world.clone() })?,
        EpisodeSource::Corpus { record } => record.to_task(encoder)?,
    })
}

/// Runs one full episode: task, decomposition, scheduling, rounds, fusion, outcome.
pub fn run_episode(
    cfg: &ExperimentConfig,
    source: &EpisodeSource,
    seed: u64,
    record_trace: bool,
) -> Result<EpisodeRecord, HarnessError> {
    let encoder = HashingEncoder::new(cfg.world.encoder_config())?;
    let task = load_task(cfg, source, seed, &encoder)?;
    let task_vec = encoder.encode(&task.task_text)?;
    let segs = encoder.segment(&task.task_text)?;
    let query_seed = seeding::derive(seed, stream::QUERIES);
    let mut plan = decompose(&task_vec, &segs, &cfg.decompose, query_seed)?;
    if cfg.decompose.depth > 1 {
        let ec = cfg.world.encoder_config();
        plan = decompose_hierarchical(&plan, cfg.decompose.depth, &encoder, ec.window, ec.stride, &cfg.decompose, query_seed)?;
    }

    let profiles = agent_pool(&cfg.schedule, encoder.dim(), seed);
    let assignment = assign(&profiles, &plan, cfg.schedule.lambda_load)?;
    let routing = match cfg.schedule.routing {
        RoutingPolicy::Similarity => routing_table(&assignment, &plan, cfg.runtime.fanout),
        RoutingPolicy::Random => {
            random_routing_table(&assignment, cfg.runtime.fanout, seeding::derive(seed, stream::ROUTING))
        }
    };
    let owners: Vec<usize> = assignment.pairs.iter().map(|p| p.agent).collect();
    let work = ground_subtasks(&plan, &task, &owners);
    let agents: Vec<AgentState> = profiles
        .iter()
        .map(|p| AgentState::new(p.id, p.skill.clone(), assignment.subtasks_of(p.id)))
        .collect();

    let mut trace = record_trace.then(Vec::new);
    if let Some(t) = trace.as_mut() {
        t.push(TraceEvent::Header { seed, source: source.clone(), config: Box::new(cfg.clone()) });
        t.extend(plan.subtasks.iter().map(|s| TraceEvent::Subtask {
            id: s.id,
            parent: s.parent,
            attention: s.attention.clone(),
            embedding: s.embedding.clone(),
            extracted_text: s.extracted_text.clone(),
        }));
        t.extend(assignment.pairs.iter().map(|p| TraceEvent::Assign {
            subtask: p.subtask,
            agent: p.agent,
            score: p.score,
            round: 0,
        }));
        t.extend(routing.recipients.iter().enumerate().map(|(agent, r)| TraceEvent::Route {
            agent,
            recipients: r.clone(),
        }));
    }

    let setup = EpisodeSetup { agents, work, routing };
    let run = run_rounds(&setup, &cfg.runtime, trace.as_mut())?;

    let active: Vec<usize> = (0..profiles.len()).filter(|&a| assignment.is_active(a)).collect();
    let outputs: Vec<SemanticVector> = active.iter().map(|&a| run.agents[a].state.clone()).collect();
    let fusion = match aggregate(&outputs, &task_vec, &cfg.aggregate) {
        Ok(f) => Some(f),
        Err(AggregateError::DegenerateFusion(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let consistency = crate::aggregate::consistency_loss(&outputs);
    let global_cosine = fusion.as_ref().map(|f| cosine(&f.global_output, &task.global_target));
    let success = run.all_done() && global_cosine.is_some_and(|c| c >= cfg.metrics.theta_global);
    let actual_cost = run.actual_cost(cfg.runtime.message_cost);

    if let Some(t) = trace.as_mut() {
        t.push(TraceEvent::Fusion {
            agents: active.clone(),
            weights: fusion.as_ref().map(|f| f.weights.clone()).unwrap_or_default(),
            consistency,
            output: fusion.as_ref().map(|f| f.global_output.clone()),
        });
        t.push(TraceEvent::Outcome {
            success,
            global_cosine,
            actual_cost,
            optimal_cost: task.optimal_cost,
            ticks: run.total_ticks(),
            messages: run.messages,
            rounds: run.rounds,
        });
    }

    Ok(EpisodeRecord {
        seed,
        outcome: EpisodeOutcome {
            success,
            actual_cost,
            optimal_cost: task.optimal_cost,
            generated: plan.embeddings(),
            reference: task.local_targets.clone(),
            steps: run.agents.iter().map(|a| a.ticks_used).collect(),
        },
        summary: EpisodeSummary {
            consistency,
            messages: run.messages,
            ticks: run.total_ticks(),
            rounds: run.rounds,
            global_cosine,
        },
        trace,
    })
}

/// Folds episodes, in the given order, into a report. Episodes in which no
/// agent worked contribute a load balancing score of 0.
pub fn summarize(records: &[EpisodeRecord], tau_match: f64) -> Result<MetricsReport, HarnessError> {
    let outcomes: Vec<EpisodeOutcome> = records.iter().map(|r| r.outcome.clone()).collect();
    let sr = success_rate(&outcomes)?;
    let dspl = decomposition_spl(&outcomes)?;
    let n = records.len() as f64;
    let mut f1 = 0.0;
    let mut lb = 0.0;
    let mut consistency = 0.0;
    for o in &outcomes {
        f1 += subtask_f1(&o.generated, &o.reference, tau_match);
        lb += match load_balancing(&o.steps) {
            Ok(v) => v,
            Err(MetricsError::ZeroWork) => 0.0,
            Err(e) => return Err(e.into()),
        };
    }
    for r in records {
        consistency += r.summary.consistency;
    }
    Ok(MetricsReport {
        episodes: records.len(),
        sr,
        dspl,
        subtask_f1: f1 / n,
        load_balancing: lb / n,
        consistency: consistency / n,
        messages: records.iter().map(|r| r.summary.messages).sum(),
        ticks: records.iter().map(|r| r.summary.ticks).sum(),
    })
}

fn with_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T, HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    Ok(pool.install(job))
}

#[derive(Clone, Debug)]
pub struct BatchOptions {
    pub workers: usize,
    pub traces: bool,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self { workers: 1, traces: false }
    }
}

pub struct BatchResult {
    pub report: MetricsReport,
    pub episodes: Vec<EpisodeRecord>,
}

/// `episodes` synthetic episodes with seeds `seed + i`.
pub fn run_batch(cfg: &ExperimentConfig, episodes: usize, seed: u64, opts: &BatchOptions) -> Result<BatchResult, HarnessError> {
    let sources = vec![EpisodeSource::Synthetic; episodes];
    run_sources(cfg, &sources, seed, opts)
}

/// One episode per corpus record, record `i` with seed `seed + i`.
pub fn run_corpus(cfg: &ExperimentConfig, records: &[CorpusRecord], seed: u64, opts: &BatchOptions) -> Result<BatchResult, HarnessError> {
    let sources: Vec<EpisodeSource> = records.iter().map(|r| EpisodeSource::Corpus { record: r.clone() }).collect();
    run_sources(cfg, &sources, seed, opts)
}

fn run_sources(cfg: &ExperimentConfig, sources: &[EpisodeSource], seed: u64, opts: &BatchOptions) -> Result<BatchResult, HarnessError> {
    cfg.validate()?;
    if sources.is_empty() {
        return Err(HarnessError::Metrics(MetricsError::EmptyBatch));
    }
    let episodes = with_pool(opts.workers, || {
        sources
            .par_iter()
            .enumerate()
            .map(|(i, src)| run_episode(cfg, src, seed.wrapping_add(i as u64), opts.traces))
            .collect::<Result<Vec<_>, _>>()
    })??;
    let report = summarize(&episodes, cfg.metrics.tau_match)?;
    Ok(BatchResult { report, episodes })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Number of subtasks the decomposer produces.
    Modules,
    /// Maximum recipients per agent per round.
    Threshold,
    /// Reference subtask count, with the module count tracking it.
    Subtasks,
}

impl SweepAxis {
    pub fn apply(self, base: &ExperimentConfig, value: usize) -> ExperimentConfig {
        let mut cfg = base.clone();
        match self {
            SweepAxis::Modules => cfg.decompose.modules = value,
            SweepAxis::Threshold => cfg.runtime.fanout = value,
            SweepAxis::Subtasks => {
                cfg.world.k_ref = value;
                cfg.decompose.modules = value;
            }
        }
        cfg
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Modules => "modules",
            SweepAxis::Threshold => "threshold",
            SweepAxis::Subtasks => "subtasks",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "modules" => Ok(SweepAxis::Modules),
            "threshold" => Ok(SweepAxis::Threshold),
            "subtasks" => Ok(SweepAxis::Subtasks),
            other => Err(format!("unknown axis `{other}` (expected modules, threshold or subtasks)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<usize>,
    pub episodes_per_cell: usize,
    pub base: ExperimentConfig,
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.values.is_empty() {
            return Err(HarnessError::Config("sweep values must not be empty".into()));
        }
        if self.values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HarnessError::Config("sweep values must be strictly increasing".into()));
        }
        if self.episodes_per_cell == 0 {
            return Err(HarnessError::Config("episodes_per_cell must be >= 1".into()));
        }
        for &v in &self.values {
            self.axis.apply(&self.base, v).validate().map_err(|e| HarnessError::Cell {
                axis: self.axis,
                value: v,
                source: Box::new(e),
            })?;
        }
        Ok(())
    }
}

pub struct SweepCell {
    pub value: usize,
    pub config: ExperimentConfig,
    pub batch: BatchResult,
}

/// Runs every cell of the sweep. Cells are evaluated in value order.
pub fn sweep(spec: &SweepSpec, opts: &BatchOptions) -> Result<Vec<SweepCell>, HarnessError> {
    spec.validate()?;
    spec.values
        .iter()
        .map(|&value| {
            let config = spec.axis.apply(&spec.base, value);
            let batch = run_batch(&config, spec.episodes_per_cell, spec.seed, opts).map_err(|e| HarnessError::Cell {
                axis: spec.axis,
                value,
                source: Box::new(e),
            })?;
            Ok(SweepCell { value, config, batch })
        })
        .collect()
}

/// `%g`-style formatting with `digits` significant digits.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        format!("{}e{}{:02}", trim_fraction(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_fraction(&format!("{:.*}", decimals, x)).to_owned()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub const CSV_COLUMNS: [&str; 16] = [
    "axis",
    "value",
    "episodes",
    "seed",
    "modules",
    "fanout",
    "k_ref",
    "routing",
    "sr",
    "dspl",
    "subtask_f1",
    "load_balancing",
    "composite",
    "consistency",
    "messages",
    "ticks",
];

/// One CSV row: the cell coordinates, key knobs, metrics and counters.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub axis: String,
    pub value: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub report: MetricsReport,
}

impl ReportRow {
    fn fields(&self) -> Vec<String> {
        let r = &self.report;
        let routing = match self.config.schedule.routing {
            RoutingPolicy::Similarity => "similarity",
            RoutingPolicy::Random => "random",
        };
        vec![
            self.axis.clone(),
            self.value.clone(),
            r.episodes.to_string(),
            self.seed.to_string(),
            self.config.decompose.modules.to_string(),
            self.config.runtime.fanout.to_string(),
            self.config.world.k_ref.to_string(),
            routing.to_string(),
            format_sig(r.sr, 6),
            format_sig(r.dspl, 6),
            format_sig(r.subtask_f1, 6),
            format_sig(r.load_balancing, 6),
            format_sig(r.composite(), 6),
            format_sig(r.consistency, 6),
            r.messages.to_string(),
            r.ticks.to_string(),
        ]
    }
}

/// Writes the rows as CSV with a fixed header and a trailing newline.
pub fn write_csv<W: std::io::Write>(rows: &[ReportRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for row in rows {
        w.write_record(row.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(rows: &[ReportRow], path: &Path) -> Result<(), HarnessError> {
    let file = std::fs::File::create(path).map_err(|source| HarnessError::Io { path: path.into(), source })?;
    write_csv(rows, std::io::BufWriter::new(file)).map_err(|source| HarnessError::Csv { path: path.into(), source })
}

pub fn emit_trace(events: &[TraceEvent], path: &Path) -> Result<(), HarnessError> {
    let io = |source| HarnessError::Io { path: path.into(), source };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, crate::trace::to_jsonl(events)).map_err(io)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub episodes: usize,
    pub config: ExperimentConfig,
    pub artifacts: Vec<Artifact>,
    /// SHA-256 over every artifact's path and digest, in path order.
    pub content_hash: String,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Hashes the listed files (paths relative to `root`) into a manifest.
pub fn build_manifest(
    root: &Path,
    files: &[PathBuf],
    command: &str,
    seed: u64,
    episodes: usize,
    config: &ExperimentConfig,
) -> Result<RunManifest, HarnessError> {
    let mut rels: Vec<String> = files
        .iter()
        .map(|p| p.strip_prefix(root).unwrap_or(p).to_string_lossy().replace('\\', "/"))
        .collect();
    rels.sort();
    let mut artifacts = Vec::with_capacity(rels.len());
    let mut all = Sha256::new();
    for rel in rels {
        let full = root.join(&rel);
        let bytes = std::fs::read(&full).map_err(|source| HarnessError::Io { path: full.clone(), source })?;
        let digest = hex(&Sha256::digest(&bytes));
        all.update(rel.as_bytes());
        all.update([0u8]);
        all.update(digest.as_bytes());
        all.update(b"\n");
        artifacts.push(Artifact { path: rel, sha256: digest });
    }
    Ok(RunManifest {
        command: command.to_owned(),
        seed,
        episodes,
        config: config.clone(),
        artifacts,
        content_hash: hex(&all.finalize()),
    })
}

pub fn write_manifest(manifest: &RunManifest, path: &Path) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(manifest).map_err(|source| HarnessError::Json { path: path.into(), source })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|source| HarnessError::Io { path: path.into(), source })
}

/// Writes metrics.csv, per-episode traces and manifest.json under `out`.
pub fn emit_run(
    out: &Path,
    rows: &[ReportRow],
    traces: &[(PathBuf, &[TraceEvent])],
    command: &str,
    seed: u64,
    episodes: usize,
    config: &ExperimentConfig,
) -> Result<RunManifest, HarnessError> {
    std::fs::create_dir_all(out).map_err(|source| HarnessError::Io { path: out.into(), source })?;
    let metrics = out.join("metrics.csv");
    emit_csv(rows, &metrics)?;
    let mut files = vec![metrics];
    for (rel, events) in traces {
        let path = out.join(rel);
        emit_trace(events, &path)?;
        files.push(path);
    }
    let manifest = build_manifest(out, &files, command, seed, episodes, config)?;
    write_manifest(&manifest, &out.join("manifest.json"))?;
    Ok(manifest)
}

/// Relative trace path for episode `index`, optionally inside a cell directory.
pub fn trace_path(cell: Option<(SweepAxis, usize)>, index: usize) -> PathBuf {
    let mut p = PathBuf::from("traces");
    if let Some((axis, value)) = cell {
        p.push(format!("{axis}_{value}"));
    }
    p.push(format!("episode_{index:05}.jsonl"));
    p
}

/// Outcome of re-simulating a stored trace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReplayVerdict {
    Identical { events: usize },
    /// 1-based line of the first difference.
    Diverged { line: usize },
}

/// Re-runs the episode described by the trace header and compares bytes.
pub fn replay(trace_bytes: &[u8]) -> Result<ReplayVerdict, HarnessError> {
    let first = trace_bytes.split(|&b| b == b'\n').next().unwrap_or_default();
    let header: TraceEvent = serde_json::from_slice(first).map_err(|source| HarnessError::Json { path: "<trace header>".into(), source })?;
    let TraceEvent::Header { seed, source, config } = header else {
        return Err(HarnessError::Config("trace does not start with a header event".into()));
    };
    let record = run_episode(&config, &source, seed, true)?;
    let fresh = crate::trace::to_jsonl(record.trace.as_deref().unwrap_or_default());
    if fresh == trace_bytes {
        return Ok(ReplayVerdict::Identical { events: fresh.iter().filter(|&&b| b == b'\n').count() });
    }
    let mut a = fresh.split(|&b| b == b'\n');
    let mut b = trace_bytes.split(|&b| b == b'\n');
    let mut line = 1;
    loop {
        match (a.next(), b.next()) {
            (Some(x), Some(y)) if x == y => line += 1,
            _ => return Ok(ReplayVerdict::Diverged { line }),
        }
    }
}
