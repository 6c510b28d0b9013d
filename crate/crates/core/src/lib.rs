//! Deterministic simulator for language-driven task decomposition across
//! cooperating agents.
//!
//! A task's text is encoded and segmented, attention queries split it into
//! subtask embeddings, subtasks are scheduled onto agents, agents exchange
//! states over synchronous rounds, and their outputs are fused and scored.
//! Every random draw is seeded, so an `(config, seed)` pair fixes every
//! output byte.

pub mod aggregate;
pub mod decompose;
pub mod harness;
pub mod metrics;
pub mod runtime;
pub mod schedule;
pub mod seeding;
pub mod semantics;
pub mod trace;
pub mod vector;
pub mod worldgen;

pub use aggregate::{AggregateConfig, FusionResult};
pub use decompose::{DecomposeConfig, Subtask, SubtaskPlan};
pub use harness::{ExperimentConfig, HarnessError, SweepAxis, SweepSpec};
pub use metrics::{EpisodeOutcome, MetricsReport};
pub use runtime::{AgentState, Message, RuntimeConfig};
pub use schedule::{AgentProfile, Assignment, RoutingPolicy, RoutingTable, ScheduleConfig};
pub use semantics::{EncoderConfig, HashingEncoder, SegmentMatrix, TextEncoder};
pub use vector::{cosine, SemanticVector};
pub use worldgen::{CorpusRecord, TaskInstance, WorldSpec};
