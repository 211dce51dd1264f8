//! Layered search DAG.
//!
//! Nodes live in arenas and are addressed by small index newtypes. Each layer
//! keeps its own transposition table, so the same [`StateKey`] reached at two
//! depths yields two distinct nodes. Every Q node belongs to exactly one
//! [`QAbstractNode`] and every state node to exactly one
//! [`StateAbstractNode`]; abstract aggregates are maintained incrementally on
//! backpropagation and on membership changes.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mdp::{ActionId, MdpModel, StateKey};
use crate::policy::QStatsAccumulator;
use crate::TOLERANCE;

macro_rules! arena_id {
    ($name:ident) => {
        #[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }
    };
}

arena_id!(StateId);
arena_id!(QId);
arena_id!(QAbsId);
arena_id!(StateAbsId);

#[derive(Clone, Debug)]
pub struct StateNode {
    pub key: StateKey,
    pub layer: usize,
    pub terminal: bool,
    /// Expanded Q node per action index.
    pub children: Vec<Option<QId>>,
    pub untried: Vec<ActionId>,
    pub total_child_visits: u64,
    /// Q nodes that have sampled this node as an outcome.
    pub parents: Vec<QId>,
    pub abstract_ref: StateAbsId,
}

impl StateNode {
    /// All legal actions have a Q node. Terminal nodes are never fully expanded.
    pub fn is_fully_expanded(&self) -> bool {
        !self.terminal && self.untried.is_empty()
    }

    /// Expanded children in ascending action order.
    pub fn expanded(&self) -> impl Iterator<Item = QId> + '_ {
        self.children.iter().filter_map(|c| *c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampledOutcome {
    pub successor: StateId,
    pub probability: f64,
}

#[derive(Clone, Debug)]
pub struct QNode {
    pub parent: StateId,
    pub action: ActionId,
    pub layer: usize,
    pub reward: f64,
    pub visits: u64,
    pub return_sum: f64,
    pub outcomes: Vec<SampledOutcome>,
    pub prob_mass: f64,
    pub visits_since_check: u32,
    pub abstract_ref: QAbsId,
}

impl QNode {
    pub fn mean(&self) -> Option<f64> {
        (self.visits > 0).then(|| self.return_sum / self.visits as f64)
    }

    /// Whole support of the transition has been sampled.
    pub fn is_fully_expanded(&self) -> bool {
        (self.prob_mass - 1.0).abs() <= TOLERANCE
    }
}

#[derive(Clone, Debug, Default)]
pub struct QAbstractNode {
    pub layer: usize,
    /// Sorted ascending; the first member is the group representative.
    pub members: Vec<QId>,
    pub agg_visits: u64,
    pub agg_returns: f64,
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum StateGroupKind {
    Singleton,
    /// All terminal states of a layer.
    Terminal,
    /// Non-fully-expanded states of a layer when partial grouping is on.
    Partial,
    /// Fully expanded states whose children cover exactly this set of
    /// abstract Q nodes.
    Expanded(Vec<QAbsId>),
}

#[derive(Clone, Debug)]
pub struct StateAbstractNode {
    pub layer: usize,
    pub members: Vec<StateId>,
    pub kind: StateGroupKind,
}

/// How a freshly created state node is placed in the state abstraction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StateBootstrap {
    Singleton,
    /// Terminal states share one group per layer; non-expanded states share
    /// one group per layer iff `pg`.
    Layered {
        pg: bool,
    },
}

#[derive(Default, Debug)]
struct LayerIndex {
    transpositions: HashMap<StateKey, StateId>,
    states: Vec<StateId>,
    qnodes: Vec<QId>,
    q_groups: Vec<QAbsId>,
    terminal_group: Option<StateAbsId>,
    partial_group: Option<StateAbsId>,
    expanded_groups: HashMap<Vec<QAbsId>, StateAbsId>,
}

#[derive(Debug)]
pub struct SearchGraph {
    states: Vec<StateNode>,
    qnodes: Vec<QNode>,
    q_groups: Vec<QAbstractNode>,
    s_groups: Vec<StateAbstractNode>,
    layers: Vec<LayerIndex>,
    horizon: usize,
    bootstrap: StateBootstrap,
    /// Number of recency-triggered abstraction checks performed.
    pub recency_checks: u64,
}

impl SearchGraph {
    pub fn new(horizon: usize, bootstrap: StateBootstrap) -> Self {
        SearchGraph {
            states: Vec::new(),
            qnodes: Vec::new(),
            q_groups: Vec::new(),
            s_groups: Vec::new(),
            layers: (0..=horizon).map(|_| LayerIndex::default()).collect(),
            horizon,
            bootstrap,
            recency_checks: 0,
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn bootstrap(&self) -> StateBootstrap {
        self.bootstrap
    }

    pub fn state(&self, id: StateId) -> &StateNode {
        &self.states[id.index()]
    }

    pub fn q(&self, id: QId) -> &QNode {
        &self.qnodes[id.index()]
    }

    pub fn q_group(&self, id: QAbsId) -> &QAbstractNode {
        &self.q_groups[id.index()]
    }

    pub fn s_group(&self, id: StateAbsId) -> &StateAbstractNode {
        &self.s_groups[id.index()]
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn q_count(&self) -> usize {
        self.qnodes.len()
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn layer_states(&self, layer: usize) -> &[StateId] {
        &self.layers[layer].states
    }

    pub fn layer_qnodes(&self, layer: usize) -> &[QId] {
        &self.layers[layer].qnodes
    }

    /// Non-empty abstract Q nodes of a layer in ascending id order.
    pub fn layer_q_groups(&self, layer: usize) -> &[QAbsId] {
        &self.layers[layer].q_groups
    }

    pub fn lookup(&self, layer: usize, key: &StateKey) -> Option<StateId> {
        self.layers.get(layer)?.transpositions.get(key).copied()
    }

    /// Returns the node for `(layer, key)`, creating it on first use.
    /// The flag reports whether the node was created by this call.
    pub fn get_or_create_state_node(
        &mut self,
        model: &dyn MdpModel,
        layer: usize,
        key: &StateKey,
    ) -> Result<(StateId, bool)> {
        if layer > self.horizon {
            return Err(Error::Internal(format!(
                "layer {layer} beyond horizon {}",
                self.horizon
            )));
        }
        if let Some(&id) = self.layers[layer].transpositions.get(key) {
            return Ok((id, false));
        }
        let id = StateId(self.states.len() as u32);
        let terminal = layer >= self.horizon || model.is_terminal(key);
        let n = if terminal { 0 } else { model.action_count(key) };
        if !terminal && n == 0 {
            return Err(Error::ModelInconsistency(format!("no actions at {key}")));
        }
        let kind = match self.bootstrap {
            StateBootstrap::Singleton => StateGroupKind::Singleton,
            StateBootstrap::Layered { .. } if terminal => StateGroupKind::Terminal,
            StateBootstrap::Layered { pg: true } => StateGroupKind::Partial,
            StateBootstrap::Layered { pg: false } => StateGroupKind::Singleton,
        };
        let group = self.group_for_kind(layer, &kind);
        self.s_groups[group.index()].members.push(id);
        self.states.push(StateNode {
            key: key.clone(),
            layer,
            terminal,
            children: vec![None; n],
            untried: (0..n).map(ActionId).collect(),
            total_child_visits: 0,
            parents: Vec::new(),
            abstract_ref: group,
        });
        let index = &mut self.layers[layer];
        index.transpositions.insert(key.clone(), id);
        index.states.push(id);
        Ok((id, true))
    }

    /// Removes and returns the untried action at position `slot`.
    pub fn take_untried(&mut self, state: StateId, slot: usize) -> ActionId {
        self.states[state.index()].untried.swap_remove(slot)
    }

    /// Creates the Q node for `(state, action)`. With `group == None` it
    /// starts in a fresh singleton abstract node.
    pub fn add_qnode(
        &mut self,
        state: StateId,
        action: ActionId,
        reward: f64,
        group: Option<QAbsId>,
    ) -> Result<QId> {
        let parent = &self.states[state.index()];
        if parent.children.get(action.0).copied().flatten().is_some() {
            return Err(Error::Internal(format!(
                "action {action} already expanded at state {}",
                parent.key
            )));
        }
        if action.0 >= parent.children.len() {
            return Err(Error::IllegalAction {
                state: parent.key.clone(),
                action,
                available: parent.children.len(),
            });
        }
        let layer = parent.layer;
        let id = QId(self.qnodes.len() as u32);
        let untried = &mut self.states[state.index()].untried;
        if let Some(pos) = untried.iter().position(|&a| a == action) {
            untried.swap_remove(pos);
        }
        let group = match group {
            Some(g) => {
                if self.q_groups[g.index()].layer != layer {
                    return Err(Error::Internal("abstract node on wrong layer".into()));
                }
                g
            }
            None => self.new_q_group(layer),
        };
        self.insert_q_member(group, id, 0, 0.0);
        self.qnodes.push(QNode {
            parent: state,
            action,
            layer,
            reward,
            visits: 0,
            return_sum: 0.0,
            outcomes: Vec::new(),
            prob_mass: 0.0,
            visits_since_check: 0,
            abstract_ref: group,
        });
        self.states[state.index()].children[action.0] = Some(id);
        self.layers[layer].qnodes.push(id);
        Ok(id)
    }

    /// Registers a sampled successor of `q`. Returns whether it was new.
    pub fn record_outcome(
        &mut self,
        q: QId,
        successor: StateId,
        probability: f64,
        reward: f64,
    ) -> Result<bool> {
        let succ_layer = self.states[successor.index()].layer;
        let node = &mut self.qnodes[q.index()];
        if succ_layer != node.layer + 1 {
            return Err(Error::Internal(format!(
                "successor layer {succ_layer} does not follow Q layer {}",
                node.layer
            )));
        }
        if (node.reward - reward).abs() > TOLERANCE {
            return Err(Error::ModelInconsistency(format!(
                "reward {reward} differs from recorded {} for one state-action pair",
                node.reward
            )));
        }
        if let Some(existing) = node.outcomes.iter().find(|o| o.successor == successor) {
            if (existing.probability - probability).abs() > TOLERANCE {
                return Err(Error::ModelInconsistency(format!(
                    "successor probability changed from {} to {probability}",
                    existing.probability
                )));
            }
            return Ok(false);
        }
        node.outcomes.push(SampledOutcome {
            successor,
            probability,
        });
        node.prob_mass += probability;
        if node.prob_mass > 1.0 + TOLERANCE {
            return Err(Error::ModelInconsistency(format!(
                "sampled probability mass {} exceeds one",
                node.prob_mass
            )));
        }
        self.states[successor.index()].parents.push(q);
        Ok(true)
    }

    /// Backs up one trajectory. `rewards[i]` is the reward collected when
    /// leaving through `path[i]`; `tail` is the return accrued after the last
    /// step. Q nodes whose recency counter wraps to zero are appended to
    /// `due`, deepest first.
    pub fn backprop(
        &mut self,
        path: &[QId],
        rewards: &[f64],
        tail: f64,
        acc: &mut QStatsAccumulator,
        recency: u32,
        due: &mut Vec<QId>,
    ) {
        debug_assert_eq!(path.len(), rewards.len());
        let mut ret = tail;
        for (&q, &r) in path.iter().zip(rewards).rev() {
            ret += r;
            let node = &mut self.qnodes[q.index()];
            node.visits += 1;
            node.return_sum += ret;
            let mean = node.return_sum / node.visits as f64;
            node.visits_since_check += 1;
            if node.visits_since_check >= recency {
                node.visits_since_check = 0;
                due.push(q);
            }
            let (parent, group) = (node.parent, node.abstract_ref);
            self.states[parent.index()].total_child_visits += 1;
            let g = &mut self.q_groups[group.index()];
            g.agg_visits += 1;
            g.agg_returns += ret;
            acc.push(mean);
        }
    }

    /// Aggregated `(visits, returns)` of an abstract node.
    pub fn abstract_stats(&self, group: QAbsId) -> Result<(u64, f64)> {
        let g = &self.q_groups[group.index()];
        if g.members.is_empty() {
            return Err(Error::Internal(format!(
                "abstract node {} is empty",
                group.0
            )));
        }
        Ok((g.agg_visits, g.agg_returns))
    }

    pub fn new_q_group(&mut self, layer: usize) -> QAbsId {
        let id = QAbsId(self.q_groups.len() as u32);
        self.q_groups.push(QAbstractNode {
            layer,
            ..Default::default()
        });
        self.layers[layer].q_groups.push(id);
        id
    }

    fn insert_q_member(&mut self, group: QAbsId, q: QId, visits: u64, returns: f64) {
        let g = &mut self.q_groups[group.index()];
        let pos = g.members.binary_search(&q).unwrap_or_else(|p| p);
        g.members.insert(pos, q);
        g.agg_visits += visits;
        g.agg_returns += returns;
    }

    /// Moves `q` into `target`, carrying its statistics along.
    pub fn move_q(&mut self, q: QId, target: QAbsId) {
        let (current, visits, returns, layer) = {
            let n = &self.qnodes[q.index()];
            (n.abstract_ref, n.visits, n.return_sum, n.layer)
        };
        if current == target {
            return;
        }
        debug_assert_eq!(self.q_groups[target.index()].layer, layer);
        let g = &mut self.q_groups[current.index()];
        g.members.retain(|&m| m != q);
        if g.members.is_empty() {
            g.agg_visits = 0;
            g.agg_returns = 0.0;
            self.layers[layer].q_groups.retain(|&x| x != current);
        } else {
            g.agg_visits -= visits;
            g.agg_returns -= returns;
        }
        if self.q_groups[target.index()].members.is_empty()
            && !self.layers[layer].q_groups.contains(&target)
        {
            let list = &mut self.layers[layer].q_groups;
            let pos = list.binary_search(&target).unwrap_or_else(|p| p);
            list.insert(pos, target);
        }
        self.insert_q_member(target, q, visits, returns);
        self.qnodes[q.index()].abstract_ref = target;
    }

    fn group_for_kind(&mut self, layer: usize, kind: &StateGroupKind) -> StateAbsId {
        let existing = match kind {
            StateGroupKind::Singleton => None,
            StateGroupKind::Terminal => self.layers[layer].terminal_group,
            StateGroupKind::Partial => self.layers[layer].partial_group,
            StateGroupKind::Expanded(sig) => self.layers[layer].expanded_groups.get(sig).copied(),
        };
        if let Some(id) = existing {
            return id;
        }
        let id = StateAbsId(self.s_groups.len() as u32);
        self.s_groups.push(StateAbstractNode {
            layer,
            members: Vec::new(),
            kind: kind.clone(),
        });
        let index = &mut self.layers[layer];
        match kind {
            StateGroupKind::Singleton => {}
            StateGroupKind::Terminal => index.terminal_group = Some(id),
            StateGroupKind::Partial => index.partial_group = Some(id),
            StateGroupKind::Expanded(sig) => {
                index.expanded_groups.insert(sig.clone(), id);
            }
        }
        id
    }

    /// Places `state` in the group of the given kind on its layer. Returns
    /// whether the state's abstract node changed.
    pub fn assign_state_group(&mut self, state: StateId, kind: StateGroupKind) -> bool {
        let (current, layer) = {
            let s = &self.states[state.index()];
            (s.abstract_ref, s.layer)
        };
        let cur = &self.s_groups[current.index()];
        if cur.kind == kind && (kind != StateGroupKind::Singleton || cur.members == [state]) {
            return false;
        }
        let target = self.group_for_kind(layer, &kind);
        let g = &mut self.s_groups[current.index()];
        g.members.retain(|&m| m != state);
        if g.members.is_empty() {
            let index = &mut self.layers[layer];
            match &g.kind {
                StateGroupKind::Terminal if index.terminal_group == Some(current) => {
                    index.terminal_group = None
                }
                StateGroupKind::Partial if index.partial_group == Some(current) => {
                    index.partial_group = None
                }
                StateGroupKind::Expanded(sig)
                    if index.expanded_groups.get(sig) == Some(&current) =>
                {
                    index.expanded_groups.remove(sig);
                }
                _ => {}
            }
        }
        let t = &mut self.s_groups[target.index()];
        let pos = t.members.binary_search(&state).unwrap_or_else(|p| p);
        t.members.insert(pos, state);
        self.states[state.index()].abstract_ref = target;
        true
    }

    /// Drops every abstract Q node of `layer` and puts each Q node of the
    /// layer in a fresh singleton. Used by from-scratch rebuilds.
    pub(crate) fn reset_q_layer(&mut self, layer: usize) {
        let qs = self.layers[layer].qnodes.clone();
        for g in std::mem::take(&mut self.layers[layer].q_groups) {
            let g = &mut self.q_groups[g.index()];
            g.members.clear();
            g.agg_visits = 0;
            g.agg_returns = 0.0;
        }
        for q in qs {
            let group = self.new_q_group(layer);
            let (v, r) = {
                let n = &self.qnodes[q.index()];
                (n.visits, n.return_sum)
            };
            self.insert_q_member(group, q, v, r);
            self.qnodes[q.index()].abstract_ref = group;
        }
    }

    /// Puts every state of `layer` in a fresh singleton.
    pub(crate) fn reset_state_layer(&mut self, layer: usize) {
        let states = self.layers[layer].states.clone();
        let index = &mut self.layers[layer];
        index.terminal_group = None;
        index.partial_group = None;
        index.expanded_groups.clear();
        for s in states {
            let old = self.states[s.index()].abstract_ref;
            self.s_groups[old.index()].members.clear();
            let id = StateAbsId(self.s_groups.len() as u32);
            self.s_groups.push(StateAbstractNode {
                layer,
                members: vec![s],
                kind: StateGroupKind::Singleton,
            });
            self.states[s.index()].abstract_ref = id;
        }
    }

    /// Full consistency check of the graph and both partitions.
    pub fn audit(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Internal(msg));
        for (i, s) in self.states.iter().enumerate() {
            let id = StateId(i as u32);
            let g = &self.s_groups[s.abstract_ref.index()];
            if g.layer != s.layer || !g.members.contains(&id) {
                return fail(format!("state {i} not a member of its abstract node"));
            }
            let mut visits = 0;
            for (a, c) in s.children.iter().enumerate() {
                if let Some(c) = c {
                    let q = &self.qnodes[c.index()];
                    if q.parent != id || q.action.0 != a {
                        return fail(format!("child link broken at state {i}"));
                    }
                    if s.untried.contains(&ActionId(a)) {
                        return fail(format!("action {a} both tried and untried at state {i}"));
                    }
                    visits += q.visits;
                }
            }
            if visits != s.total_child_visits {
                return fail(format!(
                    "state {i}: child visits {visits} != {}",
                    s.total_child_visits
                ));
            }
        }
        for (i, q) in self.qnodes.iter().enumerate() {
            let g = &self.q_groups[q.abstract_ref.index()];
            if g.layer != q.layer || !g.members.contains(&QId(i as u32)) {
                return fail(format!("Q node {i} not a member of its abstract node"));
            }
            if q.layer != self.states[q.parent.index()].layer {
                return fail(format!("Q node {i} layer mismatch"));
            }
            if q.prob_mass > 1.0 + TOLERANCE {
                return fail(format!("Q node {i} mass {}", q.prob_mass));
            }
            for o in &q.outcomes {
                if self.states[o.successor.index()].layer != q.layer + 1 {
                    return fail(format!("Q node {i} has a non-layered edge"));
                }
            }
        }
        let mut q_seen = 0;
        for (i, g) in self.q_groups.iter().enumerate() {
            let mut visits = 0;
            let mut returns = 0.0;
            for &m in &g.members {
                let q = &self.qnodes[m.index()];
                if q.abstract_ref.0 as usize != i {
                    return fail(format!("abstract node {i} lists foreign member"));
                }
                visits += q.visits;
                returns += q.return_sum;
            }
            q_seen += g.members.len();
            if visits != g.agg_visits
                || (returns - g.agg_returns).abs() > TOLERANCE * returns.abs().max(1.0)
            {
                return fail(format!("abstract node {i} aggregates out of sync"));
            }
            let listed = self.layers[g.layer].q_groups.contains(&QAbsId(i as u32));
            if listed == g.members.is_empty() {
                return fail(format!("abstract node {i} layer listing out of sync"));
            }
        }
        if q_seen != self.qnodes.len() {
            return fail("Q partition does not cover every Q node exactly once".into());
        }
        let mut s_seen = 0;
        for (i, g) in self.s_groups.iter().enumerate() {
            for &m in &g.members {
                let s = &self.states[m.index()];
                if s.abstract_ref.0 as usize != i {
                    return fail(format!("state group {i} lists foreign member"));
                }
                let ok = match &g.kind {
                    StateGroupKind::Terminal => s.terminal,
                    StateGroupKind::Partial => !s.terminal && !s.is_fully_expanded(),
                    StateGroupKind::Expanded(_) => s.is_fully_expanded(),
                    StateGroupKind::Singleton => g.members.len() == 1,
                };
                if !ok {
                    return fail(format!("state group {i} mixes incompatible members"));
                }
            }
            s_seen += g.members.len();
        }
        if s_seen != self.states.len() {
            return fail("state partition does not cover every state exactly once".into());
        }
        for layer in &self.layers {
            if layer.q_groups.windows(2).any(|w| w[0] >= w[1]) {
                return fail("layer abstract-node list unsorted".into());
            }
        }
        Ok(())
    }

    /// Line-oriented dump of both partitions, one abstract node per line:
    /// `S <id> <layer> <kind> : <state keys>` and, members sorted by key,
    /// `Q <id> <layer> : <state key>/<action> ...`.
    pub fn dump_partition(&self) -> String {
        let mut out = String::new();
        for layer in 0..self.layers.len() {
            let mut sids: Vec<StateAbsId> = self.layers[layer]
                .states
                .iter()
                .map(|&s| self.states[s.index()].abstract_ref)
                .collect();
            sids.sort();
            sids.dedup();
            for g in sids {
                let node = &self.s_groups[g.index()];
                let kind = match node.kind {
                    StateGroupKind::Singleton => "singleton",
                    StateGroupKind::Terminal => "terminal",
                    StateGroupKind::Partial => "partial",
                    StateGroupKind::Expanded(_) => "expanded",
                };
                let _ = write!(out, "S {} {} {} :", g.0, layer, kind);
                let mut keys: Vec<&StateKey> = node
                    .members
                    .iter()
                    .map(|m| &self.states[m.index()].key)
                    .collect();
                keys.sort();
                for k in keys {
                    let _ = write!(out, " {k}");
                }
                out.push('\n');
            }
            for &g in &self.layers[layer].q_groups {
                let _ = write!(out, "Q {} {} :", g.0, layer);
                let mut pairs: Vec<(&StateKey, ActionId)> = self.q_groups[g.index()]
                    .members
                    .iter()
                    .map(|m| {
                        let q = &self.qnodes[m.index()];
                        (&self.states[q.parent.index()].key, q.action)
                    })
                    .collect();
                pairs.sort();
                for (k, a) in pairs {
                    let _ = write!(out, " {k}/{a}");
                }
                out.push('\n');
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{ChainFixture, FigureOneTree};

    fn graph() -> SearchGraph {
        SearchGraph::new(5, StateBootstrap::Layered { pg: false })
    }

    #[test]
    fn transposition_is_idempotent_and_layered() {
        let m = ChainFixture;
        let mut g = graph();
        let (a, new_a) = g
            .get_or_create_state_node(&m, 1, &StateKey::scalar(3))
            .unwrap();
        let (b, new_b) = g
            .get_or_create_state_node(&m, 1, &StateKey::scalar(3))
            .unwrap();
        assert!(new_a && !new_b);
        assert_eq!(a, b);
        let (c, _) = g
            .get_or_create_state_node(&m, 1, &StateKey::scalar(4))
            .unwrap();
        let (d, _) = g
            .get_or_create_state_node(&m, 2, &StateKey::scalar(3))
            .unwrap();
        assert_ne!(a, c);
        assert_ne!(a, d);
        g.audit().unwrap();
    }

    #[test]
    fn layer_beyond_horizon_is_rejected() {
        let mut g = graph();
        assert!(g
            .get_or_create_state_node(&ChainFixture, 6, &StateKey::scalar(1))
            .is_err());
    }

    #[test]
    fn record_outcome_has_set_semantics() {
        let m = crate::envs::RandomMdp::generate(3, &crate::envs::RandomMdpConfig::default());
        let mut g = graph();
        let (root, _) = g
            .get_or_create_state_node(&m, 0, &StateKey::scalar(0))
            .unwrap();
        let (s1, _) = g
            .get_or_create_state_node(&m, 1, &StateKey::scalar(1))
            .unwrap();
        let (s2, _) = g
            .get_or_create_state_node(&m, 1, &StateKey::scalar(2))
            .unwrap();
        let q = g.add_qnode(root, ActionId(0), 0.0, None).unwrap();
        assert!(g.record_outcome(q, s1, 0.3, 0.0).unwrap());
        assert!((g.q(q).prob_mass - 0.3).abs() < 1e-12);
        assert!(!g.record_outcome(q, s1, 0.3, 0.0).unwrap());
        assert!((g.q(q).prob_mass - 0.3).abs() < 1e-12);
        assert!(g.record_outcome(q, s2, 0.7, 0.0).unwrap());
        assert!((g.q(q).prob_mass - 1.0).abs() < 1e-9);
        assert!(g.q(q).is_fully_expanded());
        assert!(g.record_outcome(q, s1, 0.4, 0.0).is_err());
        assert!(g.record_outcome(q, s1, 0.3, 1.0).is_err());
        let (deep, _) = g
            .get_or_create_state_node(&m, 3, &StateKey::scalar(1))
            .unwrap();
        assert!(g.record_outcome(q, deep, 0.1, 0.0).is_err());
    }

    #[test]
    fn backprop_accumulates_suffix_returns() {
        let m = FigureOneTree::default();
        let mut g = graph();
        let root_key = m.initial_state();
        let (root, _) = g.get_or_create_state_node(&m, 0, &root_key).unwrap();
        let q = g.add_qnode(root, ActionId(3), 1.1, None).unwrap();
        let mut acc = QStatsAccumulator::default();
        let mut due = Vec::new();
        g.backprop(&[q], &[1.1], 0.0, &mut acc, 3, &mut due);
        assert_eq!(g.q(q).visits, 1);
        assert!((g.q(q).return_sum - 1.1).abs() < 1e-12);
        assert!(due.is_empty());
        for _ in 0..4 {
            g.backprop(&[q], &[1.1], 0.0, &mut acc, 3, &mut due);
        }
        assert_eq!(g.q(q).visits, 5);
        assert_eq!(due, vec![q]);
        assert_eq!(g.state(root).total_child_visits, 5);
        assert_eq!(acc.count, 5);
        g.audit().unwrap();
    }

    #[test]
    fn abstract_stats_sum_members() {
        let m = FigureOneTree::default();
        let mut g = graph();
        let (root, _) = g
            .get_or_create_state_node(&m, 0, &m.initial_state())
            .unwrap();
        let a = g.add_qnode(root, ActionId(2), 1.0, None).unwrap();
        let group = g.q(a).abstract_ref;
        let b = g.add_qnode(root, ActionId(3), 1.1, Some(group)).unwrap();
        let mut acc = QStatsAccumulator::default();
        let mut due = Vec::new();
        for _ in 0..10 {
            g.backprop(&[a], &[1.0], 0.0, &mut acc, 3, &mut due);
            g.backprop(&[b], &[1.1], 0.0, &mut acc, 3, &mut due);
        }
        let (n, v) = g.abstract_stats(group).unwrap();
        assert_eq!(n, 20);
        assert!((v - 21.0).abs() < 1e-9);
        // moving a member out carries its statistics
        let fresh = g.new_q_group(0);
        g.move_q(a, fresh);
        assert_eq!(g.abstract_stats(group).unwrap().0, 10);
        assert_eq!(g.abstract_stats(fresh).unwrap().0, 10);
        g.move_q(b, fresh);
        assert!(g.abstract_stats(group).is_err());
        assert_eq!(g.layer_q_groups(0), &[fresh]);
        g.audit().unwrap();
    }
}
