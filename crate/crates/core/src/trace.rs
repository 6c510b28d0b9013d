//! Episode event log. One JSON object per line, tagged by `kind`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::harness::{EpisodeSource, ExperimentConfig};
use crate::vector::SemanticVector;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceEvent {
    Header {
        seed: u64,
        source: EpisodeSource,
        config: Box<ExperimentConfig>,
    },
    Subtask {
        id: usize,
        parent: Option<usize>,
        attention: Vec<f64>,
        embedding: SemanticVector,
        extracted_text: String,
    },
    Assign {
        subtask: usize,
        agent: usize,
        score: f64,
        round: usize,
    },
    Route {
        agent: usize,
        recipients: Vec<usize>,
    },
    Message {
        tick: usize,
        sender: usize,
        recipient: usize,
        subject: usize,
    },
    State {
        tick: usize,
        agent: usize,
        subtask: usize,
        state: SemanticVector,
    },
    Done {
        tick: usize,
        subtask: usize,
        agent: usize,
    },
    Fusion {
        agents: Vec<usize>,
        weights: Vec<f64>,
        consistency: f64,
        output: Option<SemanticVector>,
    },
    Outcome {
        success: bool,
        global_cosine: Option<f64>,
        actual_cost: f64,
        optimal_cost: f64,
        ticks: u64,
        messages: u64,
        rounds: usize,
    },
}

pub fn write_jsonl<W: Write>(events: &[TraceEvent], mut out: W) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn to_jsonl(events: &[TraceEvent]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_jsonl(events, &mut buf).expect("writing to memory cannot fail");
    buf
}
