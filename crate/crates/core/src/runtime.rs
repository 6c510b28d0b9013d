//! Synchronous tick loop: state updates, message exchange and termination.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schedule::RoutingTable;
use crate::trace::TraceEvent;
use crate::vector::{axpy, cosine, SemanticVector, DEGENERATE_NORM};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RuntimeError {
    #[error("invalid runtime config: {0}")]
    InvalidConfig(String),
    #[error("work item for subtask {subtask} names unknown agent {agent}")]
    UnknownOwner { subtask: usize, agent: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuntimeConfig {
    /// Update rate toward the blended signal.
    pub rho: f64,
    /// Weight of the subtask signal against the inbox mean.
    pub mu: f64,
    /// Maximum messages an agent sends per round.
    pub fanout: usize,
    pub tick_budget: usize,
    /// Cosine to the subtask target at which a subtask counts as done.
    pub theta_sub: f64,
    /// Step-equivalent cost charged per message.
    pub message_cost: f64,
}

pub const DEFAULT_RHO: f64 = 0.3;

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self { rho: DEFAULT_RHO, mu: 0.7, fanout: 4, tick_budget: 64, theta_sub: 0.9, message_cost: 0.2 }
    }
}

impl RuntimeConfig {
    pub fn validate(&self) -> Result<(), RuntimeError> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(RuntimeError::InvalidConfig(format!("rho must be in (0,1), got {}", self.rho)));
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(RuntimeError::InvalidConfig(format!("mu must be in [0,1], got {}", self.mu)));
        }
        if !(-1.0..=1.0).contains(&self.theta_sub) {
            return Err(RuntimeError::InvalidConfig(format!("theta_sub must be in [-1,1], got {}", self.theta_sub)));
        }
        if !(self.message_cost.is_finite() && self.message_cost >= 0.0) {
            return Err(RuntimeError::InvalidConfig("message_cost must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Smallest t with (1 - rho)^t <= 0.1.
pub fn convergence_ticks(rho: f64) -> usize {
    (0.1f64.ln() / (1.0 - rho).ln()).ceil() as usize
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: usize,
    pub state: SemanticVector,
    pub subtasks: Vec<usize>,
    pub ticks_used: u64,
    /// Done flag per entry of `subtasks`.
    pub done: Vec<bool>,
    /// Round-robin position over pending subtasks.
    pub cursor: usize,
}

impl AgentState {
    pub fn new(id: usize, state: SemanticVector, subtasks: Vec<usize>) -> Self {
        let done = vec![false; subtasks.len()];
        Self { id, state, subtasks, ticks_used: 0, done, cursor: 0 }
    }

    pub fn pending(&self) -> Vec<usize> {
        self.subtasks.iter().zip(&self.done).filter(|(_, d)| !**d).map(|(s, _)| *s).collect()
    }

    /// The subtask this agent works on next, advancing the round-robin cursor.
    fn next_subtask(&mut self) -> Option<usize> {
        let pending = self.pending();
        if pending.is_empty() {
            return None;
        }
        let pick = pending[self.cursor % pending.len()];
        self.cursor += 1;
        Some(pick)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub sender: usize,
    pub recipient: usize,
    pub round: usize,
    pub payload: SemanticVector,
    /// The sender's first assigned subtask.
    pub subject: usize,
}

/// One agent update. The inbox mean stands in for collaboration; with an
/// empty (or cancelling) inbox the drive itself is used.
pub fn agent_step(agent: &AgentState, drive: &SemanticVector, inbox: &[&Message], cfg: &RuntimeConfig) -> AgentState {
    let peer_mean = inbox_mean(inbox, drive.dim()).unwrap_or_else(|| drive.as_slice().to_vec());
    // (1 - rho) s + rho (mu h + (1 - mu) m), written as a correction to s so
    // that a state already at its blend target stays bit-identical.
    let s = agent.state.as_slice();
    let blended: Vec<f64> = s
        .iter()
        .zip(drive.as_slice())
        .zip(&peer_mean)
        .map(|((&s, &h), &m)| s + cfg.rho * (cfg.mu * (h - s) + (1.0 - cfg.mu) * (m - s)))
        .collect();
    let mut next = agent.clone();
    next.ticks_used += 1;
    if blended.as_slice() == s || crate::vector::norm(&blended) < DEGENERATE_NORM {
        return next;
    }
    if let Some(state) = SemanticVector::from_raw(blended) {
        next.state = state;
    }
    next
}

fn inbox_mean(inbox: &[&Message], dim: usize) -> Option<Vec<f64>> {
    if inbox.is_empty() {
        return None;
    }
    let mut sum = vec![0.0; dim];
    for m in inbox {
        axpy(&mut sum, 1.0, m.payload.as_slice());
    }
    crate::vector::normalize(sum)
}

/// Messages for one round, ordered by (sender, recipient). Payloads are the
/// senders' current (pre-update) states.
pub fn deliver(round: usize, agents: &[AgentState], table: &RoutingTable, fanout: usize) -> Vec<Message> {
    let mut out = Vec::new();
    for agent in agents {
        let Some(recipients) = table.recipients.get(agent.id) else { continue };
        let Some(&subject) = agent.subtasks.first() else { continue };
        for &recipient in recipients.iter().take(fanout) {
            if recipient == agent.id {
                continue;
            }
            out.push(Message { sender: agent.id, recipient, round, payload: agent.state.clone(), subject });
        }
    }
    out.sort_by_key(|m| (m.sender, m.recipient));
    out
}

/// A subtask bound to its owner, the signal the owner follows and the
/// target it must reach.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkItem {
    pub subtask: usize,
    pub owner: usize,
    pub drive: SemanticVector,
    pub target: SemanticVector,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeSetup {
    /// Initial agent states, indexed by agent id.
    pub agents: Vec<AgentState>,
    /// Work items, indexed by subtask id.
    pub work: Vec<WorkItem>,
    pub routing: RoutingTable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRun {
    pub agents: Vec<AgentState>,
    pub subtask_done: Vec<bool>,
    pub messages: u64,
    pub rounds: usize,
}

impl EpisodeRun {
    pub fn total_ticks(&self) -> u64 {
        self.agents.iter().map(|a| a.ticks_used).sum()
    }

    pub fn all_done(&self) -> bool {
        self.subtask_done.iter().all(|&d| d)
    }

    /// Step-equivalent cost: executed ticks plus message overhead.
    pub fn actual_cost(&self, message_cost: f64) -> f64 {
        self.total_ticks() as f64 + message_cost * self.messages as f64
    }
}

/// Runs rounds until every subtask is done or the tick budget is spent.
/// Agents without pending work neither step nor consume ticks, but active
/// agents keep broadcasting their state to their routing list.
pub fn run_episode(
    setup: &EpisodeSetup,
    cfg: &RuntimeConfig,
    mut trace: Option<&mut Vec<TraceEvent>>,
) -> Result<EpisodeRun, RuntimeError> {
    cfg.validate()?;
    let mut agents = setup.agents.clone();
    for item in &setup.work {
        if item.owner >= agents.len() {
            return Err(RuntimeError::UnknownOwner { subtask: item.subtask, agent: item.owner });
        }
    }
    let mut subtask_done = vec![false; setup.work.len()];
    let mut messages = 0u64;
    let mut rounds = 0;
    for tick in 0..cfg.tick_budget {
        if subtask_done.iter().all(|&d| d) {
            break;
        }
        let outbox = deliver(tick, &agents, &setup.routing, cfg.fanout);
        messages += outbox.len() as u64;
        let mut inboxes: Vec<Vec<&Message>> = vec![Vec::new(); agents.len()];
        for m in &outbox {
            inboxes[m.recipient].push(m);
        }
        if let Some(t) = trace.as_deref_mut() {
            t.extend(outbox.iter().map(|m| TraceEvent::Message {
                tick,
                sender: m.sender,
                recipient: m.recipient,
                subject: m.subject,
            }));
        }
        let mut next = agents.clone();
        for (agent, slot) in agents.iter_mut().zip(next.iter_mut()) {
            let Some(subtask) = agent.next_subtask() else { continue };
            let stepped = agent_step(agent, &setup.work[subtask].drive, &inboxes[agent.id], cfg);
            *slot = stepped;
            if let Some(t) = trace.as_deref_mut() {
                t.push(TraceEvent::State { tick, agent: agent.id, subtask, state: slot.state.clone() });
            }
        }
        agents = next;
        for item in &setup.work {
            if subtask_done[item.subtask] {
                continue;
            }
            let owner = &mut agents[item.owner];
            if cosine(&owner.state, &item.target) >= cfg.theta_sub {
                subtask_done[item.subtask] = true;
                if let Some(pos) = owner.subtasks.iter().position(|&s| s == item.subtask) {
                    owner.done[pos] = true;
                }
                if let Some(t) = trace.as_deref_mut() {
                    t.push(TraceEvent::Done { tick, subtask: item.subtask, agent: item.owner });
                }
            }
        }
        rounds = tick + 1;
    }
    Ok(EpisodeRun { agents, subtask_done, messages, rounds })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(v: &[f64]) -> SemanticVector {
        SemanticVector::from_raw(v.to_vec()).unwrap()
    }

    #[test]
    fn fixed_point() {
        let h = unit(&[0.3, 0.4, -0.5, 0.2]);
        let mut a = AgentState::new(0, h.clone(), vec![0]);
        for _ in 0..100 {
            a = agent_step(&a, &h, &[], &RuntimeConfig::default());
        }
        assert_eq!(a.state, h);
        assert_eq!(a.ticks_used, 100);
    }

    #[test]
    fn antipodal_blend_keeps_state() {
        let h = unit(&[1.0, 0.0]);
        let a = AgentState::new(0, h.negated(), vec![0]);
        let cfg = RuntimeConfig { mu: 1.0, rho: 0.5, ..Default::default() };
        let next = agent_step(&a, &h, &[], &cfg);
        assert_eq!(next.state, h.negated());
        assert_eq!(next.ticks_used, 1);
    }

    #[test]
    fn convergence_tick_bound() {
        assert_eq!(convergence_ticks(0.3), 7);
    }

    #[test]
    fn zero_budget_terminates_immediately() {
        let h = unit(&[1.0, 0.0]);
        let setup = EpisodeSetup {
            agents: vec![AgentState::new(0, unit(&[0.0, 1.0]), vec![0])],
            work: vec![WorkItem { subtask: 0, owner: 0, drive: h.clone(), target: h }],
            routing: RoutingTable { recipients: vec![vec![]] },
        };
        let cfg = RuntimeConfig { tick_budget: 0, ..Default::default() };
        let run = run_episode(&setup, &cfg, None).unwrap();
        assert_eq!(run.subtask_done, vec![false]);
        assert_eq!(run.total_ticks(), 0);
        assert_eq!(run.rounds, 0);
    }

    #[test]
    fn broadcast_message_count() {
        let h = unit(&[1.0, 0.0, 0.0]);
        let far = unit(&[0.0, 0.0, 1.0]);
        let agents: Vec<_> = (0..4).map(|i| AgentState::new(i, far.clone(), vec![i])).collect();
        let work: Vec<_> = (0..4)
            .map(|i| WorkItem { subtask: i, owner: i, drive: h.clone(), target: far.negated() })
            .collect();
        let routing = RoutingTable {
            recipients: (0..4).map(|a| (0..4).filter(|&b| b != a).collect()).collect(),
        };
        let cfg = RuntimeConfig { fanout: 3, tick_budget: 10, ..Default::default() };
        let run = run_episode(&EpisodeSetup { agents, work, routing }, &cfg, None).unwrap();
        assert_eq!(run.rounds, 10);
        assert_eq!(run.messages, 12 * 10);
    }
}
