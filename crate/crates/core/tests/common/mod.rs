//! Reference implementations used to cross-check the library.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use taskmesh::decompose::{Subtask, SubtaskPlan};
use taskmesh::SemanticVector;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_unit(rng: &mut impl Rng, dim: usize) -> SemanticVector {
    loop {
        let raw: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if let Some(v) = SemanticVector::from_raw(raw) {
            return v;
        }
    }
}

/// Unit vectors with non-negative components, so cosines are mostly positive.
pub fn random_positive_unit(rng: &mut impl Rng, dim: usize) -> SemanticVector {
    loop {
        let raw: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect();
        if let Some(v) = SemanticVector::from_raw(raw) {
            return v;
        }
    }
}

pub fn unit(v: &[f64]) -> SemanticVector {
    SemanticVector::from_raw(v.to_vec()).expect("non-degenerate")
}

pub fn plan_of(embeddings: &[SemanticVector]) -> SubtaskPlan {
    SubtaskPlan {
        subtasks: embeddings
            .iter()
            .enumerate()
            .map(|(id, e)| Subtask {
                id,
                parent: None,
                attention: vec![1.0],
                embedding: e.clone(),
                extracted_text: String::new(),
                focus: 0,
                focus_embedding: e.clone(),
            })
            .collect(),
        depth: 1,
    }
}

/// Error-free transformation: returns (sum, rounding error).
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Compensated summation, accumulated in reverse order.
pub fn accurate_sum(values: impl DoubleEndedIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut err = 0.0;
    for v in values.rev() {
        let (s, e) = two_sum(sum, v);
        sum = s;
        err += e;
    }
    sum + err
}

pub fn accurate_dot(a: &[f64], b: &[f64]) -> f64 {
    let products: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    accurate_sum(products.into_iter())
}

/// Gini coefficient from the sorted-values formula:
/// G = (2 sum_i i x_(i)) / (n sum x) - (n + 1) / n, with 1-based ranks.
pub fn gini_sorted(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let total: f64 = v.iter().sum();
    let ranked: f64 = v.iter().enumerate().map(|(i, x)| (i as f64 + 1.0) * x).sum();
    2.0 * ranked / (n * total) - (n + 1.0) / n
}

/// Best total score over all N^K assignments. The sequential load penalty
/// of the greedy scorer sums to lambda * load (load - 1) / (2 cap) per agent,
/// which does not depend on the order subtasks are placed.
pub fn exhaustive_assignment(skills: &[SemanticVector], caps: &[usize], subs: &[SemanticVector], lambda: f64) -> f64 {
    let n = skills.len();
    let k = subs.len();
    let mut best = f64::NEG_INFINITY;
    let mut choice = vec![0usize; k];
    loop {
        let mut loads = vec![0usize; n];
        let mut total = 0.0;
        for (i, &a) in choice.iter().enumerate() {
            total += skills[a].dot(&subs[i]);
            loads[a] += 1;
        }
        for a in 0..n {
            let l = loads[a] as f64;
            total -= lambda * l * (l - 1.0) / (2.0 * caps[a] as f64);
        }
        best = best.max(total);
        let mut pos = 0;
        loop {
            if pos == k {
                return best;
            }
            choice[pos] += 1;
            if choice[pos] < n {
                break;
            }
            choice[pos] = 0;
            pos += 1;
        }
    }
}

/// Edges between generated and reference vectors whose cosine reaches `tau`.
pub fn threshold_graph(g: &[SemanticVector], r: &[SemanticVector], tau: f64) -> Vec<Vec<bool>> {
    g.iter().map(|a| r.iter().map(|b| taskmesh::cosine(a, b) >= tau).collect()).collect()
}

/// Maximum bipartite matching size by augmenting paths.
pub fn max_matching(adj: &[Vec<bool>]) -> usize {
    let right = adj.first().map_or(0, Vec::len);
    let mut owner: Vec<Option<usize>> = vec![None; right];
    fn augment(u: usize, adj: &[Vec<bool>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for v in 0..seen.len() {
            if adj[u][v] && !seen[v] {
                seen[v] = true;
                if owner[v].is_none_or(|w| augment(w, adj, seen, owner)) {
                    owner[v] = Some(u);
                    return true;
                }
            }
        }
        false
    }
    (0..adj.len())
        .filter(|&u| augment(u, adj, &mut vec![false; right], &mut owner))
        .count()
}

/// Angle-based iterate of the normalized blend toward h with no messages:
/// tan(theta') = (1 - rho) sin(theta) / ((1 - rho) cos(theta) + rho).
pub fn ticks_to_reach(cos0: f64, rho: f64, target: f64) -> usize {
    let mut theta = cos0.clamp(-1.0, 1.0).acos();
    let mut t = 0;
    while theta.cos() < target {
        theta = ((1.0 - rho) * theta.sin()).atan2((1.0 - rho) * theta.cos() + rho);
        t += 1;
    }
    t
}
