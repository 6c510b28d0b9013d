mod common;

use proptest::prelude::*;
use taskmesh::harness::{agent_pool, run_batch, run_episode as run_full, BatchOptions, EpisodeSource, ExperimentConfig};
use taskmesh::runtime::{agent_step, convergence_ticks, run_episode, AgentState, EpisodeSetup, Message, RuntimeConfig, WorkItem};
use taskmesh::schedule::{RoutingTable, ScheduleConfig};
use taskmesh::trace::TraceEvent;
use taskmesh::worldgen::{generate, WorldSpec};
use taskmesh::{cosine, SemanticVector};

use common::{random_unit, rng, ticks_to_reach};

fn message(sender: usize, payload: SemanticVector) -> Message {
    Message { sender, recipient: 0, round: 0, payload, subject: 0 }
}

#[test]
fn isolated_agents_on_local_targets_finish_within_bound() {
    let spec = WorldSpec { gamma: 0.0, ..Default::default() };
    let cfg = RuntimeConfig { mu: 1.0, fanout: 0, ..Default::default() };
    let bound = convergence_ticks(cfg.rho) + 1;
    for seed in 0..50 {
        let world = generate(&WorldSpec { seed, ..spec.clone() }).unwrap();
        let pool = agent_pool(&ScheduleConfig::default(), 64, seed);
        let k = world.targets.len();
        let setup = EpisodeSetup {
            agents: (0..k).map(|i| AgentState::new(i, pool[i].skill.clone(), vec![i])).collect(),
            work: (0..k)
                .map(|i| WorkItem { subtask: i, owner: i, drive: world.local_targets[i].clone(), target: world.targets[i].clone() })
                .collect(),
            routing: RoutingTable { recipients: vec![vec![]; k] },
        };
        let run = run_episode(&setup, &cfg, None).unwrap();
        assert!(run.all_done(), "seed {seed}");
        assert!(run.rounds <= bound, "seed {seed}: {} rounds > {bound}", run.rounds);
    }
}

#[test]
fn blend_from_orthogonal_start() {
    let cfg = RuntimeConfig { mu: 1.0, ..Default::default() };
    let h = common::unit(&[1.0, 0.0, 0.0]);
    let mut a = AgentState::new(0, common::unit(&[0.0, 1.0, 0.0]), vec![0]);
    let mut reached_sub = None;
    let mut reached_tight = None;
    for t in 1..=40 {
        a = agent_step(&a, &h, &[], &cfg);
        let c = cosine(&a.state, &h);
        if c >= cfg.theta_sub && reached_sub.is_none() {
            reached_sub = Some(t);
        }
        if c >= 0.999 && reached_tight.is_none() {
            reached_tight = Some(t);
        }
    }
    assert_eq!(reached_sub, Some(ticks_to_reach(0.0, cfg.rho, cfg.theta_sub)));
    assert!(reached_sub.unwrap() <= convergence_ticks(cfg.rho) + 1);
    // 0.999 needs more ticks than the 90% contraction bound from a right angle.
    assert_eq!(reached_tight, Some(ticks_to_reach(0.0, cfg.rho, 0.999)));
}

#[test]
fn message_volume_and_order() {
    let cfg = ExperimentConfig::default();
    for seed in 0..10 {
        let rec = run_full(&cfg, &EpisodeSource::Synthetic, seed, true).unwrap();
        let msgs: Vec<(usize, usize, usize)> = rec
            .trace
            .unwrap()
            .into_iter()
            .filter_map(|e| match e {
                TraceEvent::Message { tick, sender, recipient, .. } => Some((tick, sender, recipient)),
                _ => None,
            })
            .collect();
        assert!(msgs.windows(2).all(|w| w[0] < w[1]));
        let mut per_round = std::collections::BTreeMap::new();
        for (t, s, r) in &msgs {
            assert_ne!(s, r);
            *per_round.entry((t, s)).or_insert(0usize) += 1;
        }
        assert!(per_round.values().all(|&c| c <= cfg.runtime.fanout));
        assert_eq!(msgs.len() as u64, rec.summary.messages);
    }
}

#[test]
fn zero_fanout_sends_nothing() {
    let mut cfg = ExperimentConfig::default();
    cfg.runtime.fanout = 0;
    let batch = run_batch(&cfg, 20, 3, &BatchOptions::default()).unwrap();
    assert_eq!(batch.report.messages, 0);
}

#[test]
fn zero_budget_means_failure() {
    let mut cfg = ExperimentConfig::default();
    cfg.runtime.tick_budget = 0;
    let batch = run_batch(&cfg, 10, 0, &BatchOptions::default()).unwrap();
    assert_eq!(batch.report.sr, 0.0);
    assert_eq!(batch.report.ticks, 0);
}

#[test]
fn larger_budget_never_undoes_work() {
    let base = ExperimentConfig::default();
    for seed in 0..8 {
        let mut last = 0;
        for budget in 0..40 {
            let mut cfg = base.clone();
            cfg.runtime.tick_budget = budget;
            let rec = run_full(&cfg, &EpisodeSource::Synthetic, seed, true).unwrap();
            let done = rec.trace.unwrap().iter().filter(|e| matches!(e, TraceEvent::Done { .. })).count();
            assert!(done >= last);
            last = done;
        }
    }
}

#[test]
fn traces_do_not_depend_on_worker_count() {
    let cfg = ExperimentConfig::default();
    let one = run_batch(&cfg, 24, 11, &BatchOptions { workers: 1, traces: true }).unwrap();
    let eight = run_batch(&cfg, 24, 11, &BatchOptions { workers: 8, traces: true }).unwrap();
    for (a, b) in one.episodes.iter().zip(&eight.episodes) {
        assert_eq!(a.trace, b.trace);
    }
}

proptest! {
    #[test]
    fn states_stay_unit(seed in any::<u64>(), inbox in 0usize..5, mu in 0.0f64..=1.0, rho in 0.01f64..0.99) {
        let mut r = rng(seed);
        let cfg = RuntimeConfig { mu, rho, ..Default::default() };
        let mut a = AgentState::new(0, random_unit(&mut r, 16), vec![0]);
        let h = random_unit(&mut r, 16);
        for _ in 0..10 {
            let msgs: Vec<Message> = (0..inbox).map(|i| message(i + 1, random_unit(&mut r, 16))).collect();
            let refs: Vec<&Message> = msgs.iter().collect();
            let before = a.ticks_used;
            a = agent_step(&a, &h, &refs, &cfg);
            prop_assert!((a.state.norm() - 1.0).abs() < 1e-9);
            prop_assert_eq!(a.ticks_used, before + 1);
        }
    }

    #[test]
    fn isolated_blend_never_moves_away(seed in any::<u64>()) {
        let mut r = rng(seed);
        let cfg = RuntimeConfig { mu: 1.0, ..Default::default() };
        let h = random_unit(&mut r, 12);
        let mut s = random_unit(&mut r, 12);
        if cosine(&s, &h) < 0.0 {
            s = s.negated();
        }
        let mut a = AgentState::new(0, s, vec![0]);
        let mut prev = cosine(&a.state, &h);
        for _ in 0..15 {
            a = agent_step(&a, &h, &[], &cfg);
            let c = cosine(&a.state, &h);
            prop_assert!(c >= prev - 1e-15);
            prev = c;
        }
        prop_assert!(prev >= 0.999);
    }
}
