//! Subtask-to-agent assignment and message routing preferences.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decompose::SubtaskPlan;
use crate::seeding;
use crate::vector::{cosine, cosine_raw, SemanticVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("no agents available")]
    NoAgents,
    #[error("plan has no subtasks")]
    NoSubtasks,
    #[error("invalid schedule config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub id: usize,
    pub skill: SemanticVector,
    pub capacity: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoutingPolicy {
    /// Rank peers by similarity of their assigned work.
    Similarity,
    /// Seeded uniform choice of peers, fixed for the episode.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleConfig {
    pub lambda_load: f64,
    pub agents: usize,
    pub capacity: usize,
    pub routing: RoutingPolicy,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self { lambda_load: 0.5, agents: 10, capacity: 1, routing: RoutingPolicy::Similarity }
    }
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<(), ScheduleError> {
        if !self.lambda_load.is_finite() {
            return Err(ScheduleError::InvalidConfig("lambda_load must be finite".into()));
        }
        if self.agents == 0 {
            return Err(ScheduleError::NoAgents);
        }
        if self.capacity == 0 {
            return Err(ScheduleError::InvalidConfig("capacity must be >= 1".into()));
        }
        Ok(())
    }
}

/// Similarity to the subtask minus a load penalty.
pub fn score(agent: &AgentProfile, embedding: &SemanticVector, current_load: usize, lambda_load: f64) -> f64 {
    cosine(&agent.skill, embedding) - lambda_load * current_load as f64 / agent.capacity as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignedPair {
    pub subtask: usize,
    pub agent: usize,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// One entry per subtask, in subtask id order.
    pub pairs: Vec<AssignedPair>,
    pub loads: Vec<usize>,
}

impl Assignment {
    pub fn owner(&self, subtask: usize) -> usize {
        self.pairs[subtask].agent
    }

    /// Subtask ids owned by `agent`, ascending.
    pub fn subtasks_of(&self, agent: usize) -> Vec<usize> {
        self.pairs.iter().filter(|p| p.agent == agent).map(|p| p.subtask).collect()
    }

    pub fn is_active(&self, agent: usize) -> bool {
        self.loads[agent] > 0
    }

    pub fn total_score(&self) -> f64 {
        self.pairs.iter().map(|p| p.score).sum()
    }
}

/// Greedy assignment in ascending subtask id. While any agent has spare
/// capacity only those agents compete; once all are saturated every agent
/// competes and the load term alone discourages overflow.
pub fn assign(agents: &[AgentProfile], plan: &SubtaskPlan, lambda_load: f64) -> Result<Assignment, ScheduleError> {
    if agents.is_empty() {
        return Err(ScheduleError::NoAgents);
    }
    if plan.is_empty() {
        return Err(ScheduleError::NoSubtasks);
    }
    let mut loads = vec![0usize; agents.len()];
    let mut pairs = Vec::with_capacity(plan.len());
    for sub in &plan.subtasks {
        let saturated = agents.iter().all(|a| loads[a.id] >= a.capacity);
        let mut best: Option<(usize, f64)> = None;
        for agent in agents {
            if !saturated && loads[agent.id] >= agent.capacity {
                continue;
            }
            let s = score(agent, &sub.embedding, loads[agent.id], lambda_load);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((agent.id, s));
            }
        }
        let (agent, score) = best.expect("at least one eligible agent");
        loads[agent] += 1;
        pairs.push(AssignedPair { subtask: sub.id, agent, score });
    }
    Ok(Assignment { pairs, loads })
}

/// Recipient lists, indexed by sender id.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingTable {
    pub recipients: Vec<Vec<usize>>,
}

impl RoutingTable {
    pub fn agents(&self) -> usize {
        self.recipients.len()
    }
}

/// Normalized mean of each active agent's subtask embeddings; `None` for idle agents.
pub fn work_profiles(assignment: &Assignment, plan: &SubtaskPlan) -> Vec<Option<Vec<f64>>> {
    (0..assignment.loads.len())
        .map(|agent| {
            let owned = assignment.subtasks_of(agent);
            if owned.is_empty() {
                return None;
            }
            let dim = plan.subtasks[owned[0]].embedding.dim();
            let mut mean = vec![0.0; dim];
            for id in owned {
                crate::vector::axpy(&mut mean, 1.0, plan.subtasks[id].embedding.as_slice());
            }
            Some(crate::vector::normalize(mean).unwrap_or_else(|| vec![0.0; dim]))
        })
        .collect()
}

/// Up to `fanout` recipients per active agent: other active agents by
/// descending similarity of assigned work, then idle agents by id. Idle
/// agents do not send. Ties resolve to the lowest agent id.
pub fn routing_table(assignment: &Assignment, plan: &SubtaskPlan, fanout: usize) -> RoutingTable {
    let profiles = work_profiles(assignment, plan);
    let n = profiles.len();
    let recipients = (0..n)
        .map(|a| {
            let Some(own) = &profiles[a] else { return Vec::new() };
            let mut peers: Vec<(usize, f64)> = (0..n)
                .filter(|&b| b != a)
                .filter_map(|b| profiles[b].as_ref().map(|p| (b, cosine_raw(own, p))))
                .collect();
            peers.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
            let idle = (0..n).filter(|&b| b != a && profiles[b].is_none());
            peers.into_iter().map(|(b, _)| b).chain(idle).take(fanout).collect()
        })
        .collect();
    RoutingTable { recipients }
}

/// Seeded random recipients: each active agent draws `fanout` distinct peers
/// uniformly from all other agents.
pub fn random_routing_table(assignment: &Assignment, fanout: usize, seed: u64) -> RoutingTable {
    let n = assignment.loads.len();
    let mut rng = seeding::rng(seed);
    let recipients = (0..n)
        .map(|a| {
            if !assignment.is_active(a) || n < 2 {
                return Vec::new();
            }
            let take = fanout.min(n - 1);
            let mut chosen: Vec<usize> = sample(&mut rng, n - 1, take)
                .into_iter()
                .map(|b| if b >= a { b + 1 } else { b })
                .collect();
            chosen.sort_unstable();
            chosen
        })
        .collect();
    RoutingTable { recipients }
}
