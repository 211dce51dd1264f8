//! Construction and incremental maintenance of ASAP-style abstractions on a
//! [`SearchGraph`].
//!
//! Q nodes are grouped by immediate reward and by their (pruned) sampled
//! transition distribution projected onto the next layer's state partition.
//! States are grouped when they are fully expanded and their children cover
//! the same set of abstract Q nodes; terminal states of a layer always share a
//! node and, with partial grouping, so do non-fully-expanded states.
//!
//! Grouping is representative based: a Q node joins the first abstract node of
//! its layer (ascending id) whose earliest member is compatible with it. In
//! exact mode compatibility is signature equality up to [`TOLERANCE`]; with
//! positive epsilons it is only reflexive and symmetric.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{QAbsId, QId, SearchGraph, StateAbsId, StateBootstrap, StateGroupKind, StateId};
use crate::mdp::{ActionId, StateKey};
use crate::TOLERANCE;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OgaVariant {
    /// Exact grouping over outcomes with `p > alpha * max p`.
    Pruned { alpha: f64 },
    /// Reward gap at most `eps_a`, transition divergence at most `eps_t`.
    Epsilon { eps_a: f64, eps_t: f64 },
    /// Singleton Q nodes join a random same-layer abstract node with
    /// probability `p_abs` on their K-th visit.
    Random { p_abs: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AbstractionConfig {
    pub variant: OgaVariant,
    /// Partial grouping of non-fully-expanded state nodes.
    pub pg: bool,
    /// Recency counter K: Q nodes are re-checked every K-th visit.
    pub recency: u32,
}

impl AbstractionConfig {
    pub const DEFAULT_RECENCY: u32 = 3;

    pub fn pruned(alpha: f64) -> Self {
        Self::with_variant(OgaVariant::Pruned { alpha })
    }

    pub fn epsilon(eps_a: f64, eps_t: f64) -> Self {
        Self::with_variant(OgaVariant::Epsilon { eps_a, eps_t })
    }

    pub fn random(p_abs: f64) -> Self {
        Self::with_variant(OgaVariant::Random { p_abs })
    }

    fn with_variant(variant: OgaVariant) -> Self {
        AbstractionConfig {
            variant,
            pg: false,
            recency: Self::DEFAULT_RECENCY,
        }
    }

    pub fn with_pg(mut self, pg: bool) -> Self {
        self.pg = pg;
        self
    }

    pub fn with_recency(mut self, recency: u32) -> Self {
        self.recency = recency;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.recency == 0 {
            return Err(Error::Config("recency counter K must be at least 1".into()));
        }
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} outside [0, 1]")))
            }
        };
        match self.variant {
            OgaVariant::Pruned { alpha } => unit("alpha", alpha),
            OgaVariant::Random { p_abs } => unit("p_abs", p_abs),
            OgaVariant::Epsilon { eps_a, eps_t } => {
                if eps_a.is_nan() || eps_a < 0.0 {
                    return Err(Error::Config(format!("eps_a = {eps_a} must be >= 0")));
                }
                if !(0.0..=2.0).contains(&eps_t) {
                    return Err(Error::Config(format!("eps_t = {eps_t} outside [0, 2]")));
                }
                Ok(())
            }
        }
    }

    /// `(eps_a, eps_t, alpha)` used by the compatibility test.
    fn thresholds(&self) -> (f64, f64, f64) {
        match self.variant {
            OgaVariant::Pruned { alpha } => (0.0, 0.0, alpha),
            OgaVariant::Epsilon { eps_a, eps_t } => (eps_a, eps_t, 0.0),
            OgaVariant::Random { .. } => (0.0, 0.0, 0.0),
        }
    }

    fn alpha(&self) -> f64 {
        self.thresholds().2
    }

    fn is_random(&self) -> bool {
        matches!(self.variant, OgaVariant::Random { .. })
    }

    pub fn bootstrap(&self) -> StateBootstrap {
        if self.is_random() {
            StateBootstrap::Singleton
        } else {
            StateBootstrap::Layered { pg: self.pg }
        }
    }
}

/// Action abstraction frozen ahead of the search, keyed by
/// `(layer, state, action)` relative to the decision state. Pairs sharing a
/// label share an abstract node; unlabeled pairs stay singleton.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FixedPartition {
    labels: HashMap<(usize, ActionId), HashMap<StateKey, u32>>,
}

impl FixedPartition {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, layer: usize, state: StateKey, action: ActionId, label: u32) {
        self.labels
            .entry((layer, action))
            .or_default()
            .insert(state, label);
    }

    pub fn label(&self, layer: usize, state: &StateKey, action: ActionId) -> Option<u32> {
        self.labels.get(&(layer, action))?.get(state).copied()
    }

    /// Freezes the current Q partition of a graph.
    pub fn from_graph(graph: &SearchGraph) -> Self {
        let mut out = Self::new();
        for i in 0..graph.q_count() {
            let q = graph.q(QId(i as u32));
            let key = graph.state(q.parent).key.clone();
            out.insert(q.layer, key, q.action, q.abstract_ref.0);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.labels.values().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// How a search groups its Q nodes.
#[derive(Clone, Debug, Default)]
pub enum AbstractionMode {
    /// Plain MCTS: every Q node stays singleton.
    #[default]
    None,
    Oga(AbstractionConfig),
    Fixed(Arc<FixedPartition>),
}

impl AbstractionMode {
    pub fn recency(&self) -> u32 {
        match self {
            AbstractionMode::Oga(c) => c.recency,
            _ => AbstractionConfig::DEFAULT_RECENCY,
        }
    }

    pub fn bootstrap(&self) -> StateBootstrap {
        match self {
            AbstractionMode::Oga(c) => c.bootstrap(),
            _ => StateBootstrap::Singleton,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AbstractionMode::Oga(c) => c.validate(),
            _ => Ok(()),
        }
    }
}

/// Both partitions of a graph as sorted member lists, for comparisons that
/// must not depend on abstract node ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    pub q_groups: Vec<Vec<QId>>,
    pub state_groups: Vec<Vec<StateId>>,
}

impl Partition {
    pub fn of(graph: &SearchGraph) -> Self {
        let mut q_groups: Vec<Vec<QId>> = Vec::new();
        let mut state_groups: Vec<Vec<StateId>> = Vec::new();
        for layer in 0..graph.layer_count() {
            for &g in graph.layer_q_groups(layer) {
                q_groups.push(graph.q_group(g).members.clone());
            }
            let mut seen: Vec<StateAbsId> = graph
                .layer_states(layer)
                .iter()
                .map(|&s| graph.state(s).abstract_ref)
                .collect();
            seen.sort();
            seen.dedup();
            for g in seen {
                state_groups.push(graph.s_group(g).members.clone());
            }
        }
        q_groups.sort();
        state_groups.sort();
        Partition {
            q_groups,
            state_groups,
        }
    }
}

/// Keeps outcomes with `p > alpha * max p` (strict).
pub fn prune_outcomes<T: Clone>(outcomes: &[(T, f64)], alpha: f64) -> Vec<(T, f64)> {
    let max = outcomes.iter().map(|o| o.1).fold(0.0_f64, f64::max);
    outcomes
        .iter()
        .filter(|o| o.1 > alpha * max)
        .cloned()
        .collect()
}

/// Reward plus abstracted (pruned) transition distribution of one Q node.
#[derive(Clone, Debug, PartialEq)]
pub struct QSignature {
    pub reward: f64,
    pub abstract_successors: Vec<(StateAbsId, f64)>,
}

impl QSignature {
    pub fn of(graph: &SearchGraph, q: QId, alpha: f64) -> Self {
        QSignature {
            reward: graph.q(q).reward,
            abstract_successors: class_distribution(graph, q, alpha),
        }
    }

    /// Equality up to [`TOLERANCE`].
    pub fn matches(&self, other: &QSignature) -> bool {
        (self.reward - other.reward).abs() <= TOLERANCE
            && divergence(&self.abstract_successors, &other.abstract_successors) <= TOLERANCE
    }
}

/// Pruned sampled outcomes of `q` summed per abstract successor, sorted by id.
fn class_distribution(graph: &SearchGraph, q: QId, alpha: f64) -> Vec<(StateAbsId, f64)> {
    let node = graph.q(q);
    let max = node
        .outcomes
        .iter()
        .map(|o| o.probability)
        .fold(0.0_f64, f64::max);
    let mut dist: Vec<(StateAbsId, f64)> = node
        .outcomes
        .iter()
        .filter(|o| o.probability > alpha * max)
        .map(|o| (graph.state(o.successor).abstract_ref, o.probability))
        .collect();
    dist.sort_by_key(|d| d.0);
    let mut merged: Vec<(StateAbsId, f64)> = Vec::with_capacity(dist.len());
    for (id, p) in dist {
        match merged.last_mut() {
            Some(last) if last.0 == id => last.1 += p,
            _ => merged.push((id, p)),
        }
    }
    merged
}

/// `sum_x |P1(x) - P2(x)|` over two id-sorted class distributions.
fn divergence(a: &[(StateAbsId, f64)], b: &[(StateAbsId, f64)]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut total = 0.0;
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) if x.0 == y.0 => {
                total += (x.1 - y.1).abs();
                i += 1;
                j += 1;
            }
            (Some(x), Some(y)) if x.0 < y.0 => {
                total += x.1;
                i += 1;
            }
            (Some(_), Some(y)) => {
                total += y.1;
                j += 1;
            }
            (Some(x), None) => {
                total += x.1;
                i += 1;
            }
            (None, Some(y)) => {
                total += y.1;
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    total
}

/// Transition divergence F between two Q nodes under the current partition
/// of the next layer, over outcomes surviving `alpha` pruning.
pub fn transition_divergence(graph: &SearchGraph, q1: QId, q2: QId, alpha: f64) -> f64 {
    divergence(
        &class_distribution(graph, q1, alpha),
        &class_distribution(graph, q2, alpha),
    )
}

pub fn q_compatible(graph: &SearchGraph, q1: QId, q2: QId, config: &AbstractionConfig) -> bool {
    if q1 == q2 {
        return true;
    }
    if config.is_random() {
        return false;
    }
    let d1 = class_distribution(graph, q1, config.alpha());
    compatible_with(graph, q1, &d1, q2, config)
}

fn compatible_with(
    graph: &SearchGraph,
    q: QId,
    q_dist: &[(StateAbsId, f64)],
    other: QId,
    config: &AbstractionConfig,
) -> bool {
    if q == other {
        return true;
    }
    let (eps_a, eps_t, alpha) = config.thresholds();
    let gap = (graph.q(q).reward - graph.q(other).reward).abs();
    if gap > eps_a + TOLERANCE {
        return false;
    }
    let other_dist = class_distribution(graph, other, alpha);
    divergence(q_dist, &other_dist) <= eps_t + TOLERANCE
}

/// Moves `q` into the first compatible abstract node of its layer, or a fresh
/// singleton. No propagation.
fn place_q(graph: &mut SearchGraph, q: QId, config: &AbstractionConfig) -> bool {
    let (layer, current) = {
        let n = graph.q(q);
        (n.layer, n.abstract_ref)
    };
    let dist = class_distribution(graph, q, config.alpha());
    let target = graph
        .layer_q_groups(layer)
        .iter()
        .copied()
        .find(|&g| compatible_with(graph, q, &dist, graph.q_group(g).members[0], config));
    let target = match target {
        Some(t) => t,
        None if graph.q_group(current).members == [q] => current,
        None => graph.new_q_group(layer),
    };
    if target == current {
        return false;
    }
    graph.move_q(q, target);
    true
}

fn desired_state_kind(graph: &SearchGraph, s: StateId, pg: bool) -> StateGroupKind {
    let node = graph.state(s);
    if node.terminal {
        StateGroupKind::Terminal
    } else if !node.is_fully_expanded() {
        if pg {
            StateGroupKind::Partial
        } else {
            StateGroupKind::Singleton
        }
    } else {
        let mut sig: Vec<QAbsId> = node.expanded().map(|q| graph.q(q).abstract_ref).collect();
        sig.sort();
        sig.dedup();
        StateGroupKind::Expanded(sig)
    }
}

fn place_state(graph: &mut SearchGraph, s: StateId, config: &AbstractionConfig) -> bool {
    let kind = desired_state_kind(graph, s, config.pg);
    graph.assign_state_group(s, kind)
}

/// Re-checks the abstract node of `q`. A membership change re-checks the
/// parent state, which recursively re-checks that state's parent Q nodes.
pub fn update_q_abstraction(graph: &mut SearchGraph, q: QId, config: &AbstractionConfig) -> bool {
    if config.is_random() {
        return false;
    }
    let changed = place_q(graph, q, config);
    if changed {
        let parent = graph.q(q).parent;
        update_state_abstraction(graph, parent, config);
    }
    changed
}

/// Re-checks the abstract node of a state; on change, re-checks every Q node
/// that sampled it.
pub fn update_state_abstraction(
    graph: &mut SearchGraph,
    s: StateId,
    config: &AbstractionConfig,
) -> bool {
    if config.is_random() {
        return false;
    }
    let changed = place_state(graph, s, config);
    if changed {
        let parents = graph.state(s).parents.clone();
        for p in parents {
            update_q_abstraction(graph, p, config);
        }
    }
    changed
}

/// RANDOM-OGA step for a Q node on its K-th visit: if it is alone in its
/// abstract node, with probability `p_abs` it joins another abstract node of
/// its layer chosen uniformly.
pub fn random_oga_update<R: Rng + ?Sized>(
    graph: &mut SearchGraph,
    q: QId,
    p_abs: f64,
    rng: &mut R,
) -> bool {
    let (layer, current) = {
        let n = graph.q(q);
        (n.layer, n.abstract_ref)
    };
    if graph.q_group(current).members.len() != 1 {
        return false;
    }
    let draw: f64 = rng.gen();
    if draw >= p_abs {
        return false;
    }
    let candidates: Vec<QAbsId> = graph
        .layer_q_groups(layer)
        .iter()
        .copied()
        .filter(|&g| g != current)
        .collect();
    if candidates.is_empty() {
        return false;
    }
    let target = candidates[rng.gen_range(0..candidates.len())];
    graph.move_q(q, target);
    true
}

const MAX_SWEEPS: usize = 64;

/// Rebuilds the abstraction from scratch, deepest layer first, then sweeps
/// every node until nothing moves. Random variants are left untouched.
pub fn converge_abstraction(graph: &mut SearchGraph, config: &AbstractionConfig) -> Partition {
    if config.is_random() {
        return Partition::of(graph);
    }
    for layer in (0..graph.layer_count()).rev() {
        graph.reset_q_layer(layer);
        for q in graph.layer_qnodes(layer).to_vec() {
            place_q(graph, q, config);
        }
        graph.reset_state_layer(layer);
        for s in graph.layer_states(layer).to_vec() {
            place_state(graph, s, config);
        }
    }
    for _ in 0..MAX_SWEEPS {
        let mut changed = false;
        for layer in (0..graph.layer_count()).rev() {
            for s in graph.layer_states(layer).to_vec() {
                changed |= update_state_abstraction(graph, s, config);
            }
            for q in graph.layer_qnodes(layer).to_vec() {
                changed |= update_q_abstraction(graph, q, config);
            }
        }
        if !changed {
            break;
        }
    }
    Partition::of(graph)
}
