//! The MCTS loop and the episode driver.
//!
//! Each decision builds a fresh [`SearchGraph`] rooted at the current state.
//! An iteration descends with the tree policy until it expands one new Q
//! node (or reaches a terminal), finishes with a uniformly random rollout to
//! the horizon, backs the return up, and then lets the abstraction catch up
//! with the Q nodes whose recency counter wrapped.
//!
//! Random draws happen in a fixed order, which the plain-MCTS equivalence
//! tests rely on: expansion slot, transition sample, rollout action and
//! transition pairs, and tie-breaks only when a tie exists.

use std::collections::{HashMap, VecDeque};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::abstraction::{self, AbstractionMode, OgaVariant};
use crate::error::{Error, Result};
use crate::graph::{QAbsId, QId, SearchGraph, StateId};
use crate::mdp::{ActionId, EpisodeReturn, MdpModel, StateKey};
use crate::policy::{self, exploration_factor, IntraPolicy, QStatsAccumulator, TreePolicyCounters};

#[derive(Clone, Debug)]
pub struct SearchConfig {
    /// MCTS iterations per decision.
    pub budget: usize,
    /// Exploration constant C of the Global-Std factor `C * sigma`.
    pub exploration_c: f64,
    pub policy: IntraPolicy,
    pub abstraction: AbstractionMode,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            budget: 100,
            exploration_c: 2.0,
            policy: IntraPolicy::Random,
            abstraction: AbstractionMode::None,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::Config("iteration budget must be at least 1".into()));
        }
        if !(self.exploration_c.is_finite() && self.exploration_c > 0.0) {
            return Err(Error::Config(format!(
                "exploration constant C = {} must be positive",
                self.exploration_c
            )));
        }
        self.abstraction.validate()
    }
}

#[derive(Debug)]
pub struct SearchResult {
    pub action: ActionId,
    pub counters: TreePolicyCounters,
    pub graph: SearchGraph,
    pub root: StateId,
}

impl SearchResult {
    /// Share of root visits that went to the given actions.
    pub fn root_visit_fraction(&self, actions: &[ActionId]) -> f64 {
        let root = self.graph.state(self.root);
        if root.total_child_visits == 0 {
            return 0.0;
        }
        let hits: u64 = root
            .expanded()
            .map(|q| self.graph.q(q))
            .filter(|q| actions.contains(&q.action))
            .map(|q| q.visits)
            .sum();
        hits as f64 / root.total_child_visits as f64
    }
}

struct Search<'a, R> {
    model: &'a dyn MdpModel,
    config: &'a SearchConfig,
    graph: SearchGraph,
    acc: QStatsAccumulator,
    counters: TreePolicyCounters,
    fixed_groups: HashMap<(usize, u32), QAbsId>,
    rng: &'a mut R,
    path: Vec<QId>,
    rewards: Vec<f64>,
    due: Vec<QId>,
}

impl<R: Rng> Search<'_, R> {
    fn iterate(&mut self, root: StateId) -> Result<()> {
        let lambda = exploration_factor(&self.acc, self.config.exploration_c);
        self.path.clear();
        self.rewards.clear();
        let mut node = root;
        let mut completed = None;
        loop {
            let state = self.graph.state(node);
            if state.terminal {
                break;
            }
            let layer = state.layer;
            let expanding = !state.untried.is_empty();
            let (q, outcome) = if expanding {
                let slot = self.rng.gen_range(0..state.untried.len());
                let action = self.graph.take_untried(node, slot);
                let key = &self.graph.state(node).key;
                let outcome = self.model.sample_transition(key, action, self.rng)?;
                let group = self.fixed_group(node, action);
                let q = self
                    .graph
                    .add_qnode(node, action, outcome.reward, group.1)?;
                if let (Some(label), None) = group {
                    let g = self.graph.q(q).abstract_ref;
                    self.fixed_groups.insert((layer, label), g);
                }
                if self.graph.state(node).untried.is_empty() {
                    completed = Some(node);
                }
                (q, outcome)
            } else {
                let q = policy::select_child(
                    &self.graph,
                    node,
                    lambda,
                    self.config.policy,
                    &mut self.counters,
                    self.rng,
                )?;
                let action = self.graph.q(q).action;
                let key = &self.graph.state(node).key;
                (q, self.model.sample_transition(key, action, self.rng)?)
            };
            let (succ, _) =
                self.graph
                    .get_or_create_state_node(self.model, layer + 1, &outcome.successor)?;
            self.graph
                .record_outcome(q, succ, outcome.probability, outcome.reward)?;
            self.path.push(q);
            self.rewards.push(outcome.reward);
            node = succ;
            if expanding {
                break;
            }
        }
        let tail = self.rollout(node)?;
        self.due.clear();
        self.graph.backprop(
            &self.path,
            &self.rewards,
            tail,
            &mut self.acc,
            self.config.abstraction.recency(),
            &mut self.due,
        );
        self.maintain_abstraction(completed);
        Ok(())
    }

    /// Label and existing abstract node for a pair under a fixed partition.
    fn fixed_group(&self, node: StateId, action: ActionId) -> (Option<u32>, Option<QAbsId>) {
        let AbstractionMode::Fixed(partition) = &self.config.abstraction else {
            return (None, None);
        };
        let state = self.graph.state(node);
        match partition.label(state.layer, &state.key, action) {
            Some(label) => (
                Some(label),
                self.fixed_groups.get(&(state.layer, label)).copied(),
            ),
            None => (None, None),
        }
    }

    fn rollout(&mut self, node: StateId) -> Result<f64> {
        let start = self.graph.state(node);
        if start.terminal {
            return Ok(0.0);
        }
        let horizon = self.graph.horizon();
        let mut state = start.key.clone();
        let mut layer = start.layer;
        let mut total = 0.0;
        while layer < horizon && !self.model.is_terminal(&state) {
            let n = self.model.action_count(&state);
            let action = ActionId(self.rng.gen_range(0..n));
            let outcome = self.model.sample_transition(&state, action, self.rng)?;
            total += outcome.reward;
            state = outcome.successor;
            layer += 1;
        }
        Ok(total)
    }

    fn maintain_abstraction(&mut self, completed: Option<StateId>) {
        let AbstractionMode::Oga(config) = &self.config.abstraction else {
            return;
        };
        if let OgaVariant::Random { p_abs } = config.variant {
            for &q in &self.due {
                if self.graph.q(q).visits == u64::from(config.recency) {
                    abstraction::random_oga_update(&mut self.graph, q, p_abs, self.rng);
                }
            }
            return;
        }
        if let Some(s) = completed {
            abstraction::update_state_abstraction(&mut self.graph, s, config);
        }
        for &q in &self.due {
            self.graph.recency_checks += 1;
            abstraction::update_q_abstraction(&mut self.graph, q, config);
        }
    }
}

/// Runs one MCTS decision from `root` with `horizon` remaining steps.
pub fn search<R: Rng>(
    model: &dyn MdpModel,
    root: &StateKey,
    horizon: usize,
    config: &SearchConfig,
    rng: &mut R,
) -> Result<SearchResult> {
    config.validate()?;
    if horizon == 0 || model.is_terminal(root) {
        return Err(Error::TerminalState(root.clone()));
    }
    let mut graph = SearchGraph::new(horizon, config.abstraction.bootstrap());
    let (root_id, _) = graph.get_or_create_state_node(model, 0, root)?;
    let mut search = Search {
        model,
        config,
        graph,
        acc: QStatsAccumulator::default(),
        counters: TreePolicyCounters::default(),
        fixed_groups: HashMap::new(),
        rng,
        path: Vec::new(),
        rewards: Vec::new(),
        due: Vec::new(),
    };
    for _ in 0..config.budget {
        search.iterate(root_id)?;
    }
    let action = policy::root_decision(&search.graph, root_id, config.policy, search.rng)?;
    Ok(SearchResult {
        action,
        counters: search.counters,
        graph: search.graph,
        root: root_id,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeResult {
    pub total_return: f64,
    pub actions: Vec<ActionId>,
    pub counters: TreePolicyCounters,
    /// Mean wall time per decision in milliseconds.
    pub decision_ms: f64,
}

impl EpisodeResult {
    pub fn query_ratio(&self) -> f64 {
        self.counters.ratio()
    }
}

/// Plays one episode of at most `horizon` steps from the model's initial
/// state. Planner and environment share one ChaCha8 stream seeded by `seed`.
pub fn play_episode(
    model: &dyn MdpModel,
    config: &SearchConfig,
    horizon: usize,
    seed: u64,
) -> Result<EpisodeResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = model.initial_state();
    let mut ret = EpisodeReturn::default();
    let mut actions = Vec::new();
    let mut counters = TreePolicyCounters::default();
    let mut elapsed = 0.0;
    for t in 0..horizon {
        if model.is_terminal(&state) {
            break;
        }
        let start = Instant::now();
        let result = search(model, &state, horizon - t, config, &mut rng)?;
        elapsed += start.elapsed().as_secs_f64() * 1e3;
        counters.merge(result.counters);
        let outcome = model.sample_transition(&state, result.action, &mut rng)?;
        ret.add(outcome.reward);
        actions.push(result.action);
        state = outcome.successor;
    }
    let decision_ms = if actions.is_empty() {
        0.0
    } else {
        elapsed / actions.len() as f64
    };
    Ok(EpisodeResult {
        total_return: ret.0,
        actions,
        counters,
        decision_ms,
    })
}

/// Builds the complete layered graph below `roots` (all actions, all
/// outcomes) up to the graph's horizon. Meant for small instances.
pub fn expand_fully(
    model: &dyn MdpModel,
    graph: &mut SearchGraph,
    roots: &[StateKey],
) -> Result<()> {
    let mut frontier = VecDeque::new();
    for root in roots {
        let (id, created) = graph.get_or_create_state_node(model, 0, root)?;
        if created {
            frontier.push_back(id);
        }
    }
    while let Some(s) = frontier.pop_front() {
        let (key, layer, n) = {
            let node = graph.state(s);
            if node.terminal {
                continue;
            }
            (node.key.clone(), node.layer, node.children.len())
        };
        for a in 0..n {
            let action = ActionId(a);
            let outcomes = model.enumerate_outcomes(&key, action)?;
            let q = graph.add_qnode(s, action, outcomes[0].reward, None)?;
            for o in outcomes {
                let (succ, created) =
                    graph.get_or_create_state_node(model, layer + 1, &o.successor)?;
                graph.record_outcome(q, succ, o.probability, o.reward)?;
                if created {
                    frontier.push_back(succ);
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::{AbstractionConfig, FixedPartition};
    use crate::envs::{FigureOneTree, Navigation, NavigationConfig};
    use std::sync::Arc;

    fn figure_one_fixed() -> AbstractionMode {
        let m = FigureOneTree::default();
        let mut p = FixedPartition::new();
        for (a, label) in [(0, 0), (1, 0), (2, 1), (3, 1)] {
            p.insert(0, m.initial_state(), ActionId(a), label);
        }
        AbstractionMode::Fixed(Arc::new(p))
    }

    #[test]
    fn fixed_partition_with_uct_finds_optimum() {
        let m = FigureOneTree::default();
        let cfg = SearchConfig {
            budget: 2000,
            policy: IntraPolicy::Uct,
            abstraction: figure_one_fixed(),
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let res = search(&m, &m.initial_state(), 1, &cfg, &mut rng).unwrap();
        assert_eq!(res.action, ActionId(3));
        // every post-expansion selection queries the intra policy
        assert_eq!(res.counters.steps, 2000 - 4);
        assert_eq!(res.counters.queried, res.counters.steps);
        res.graph.audit().unwrap();
    }

    #[test]
    fn singleton_search_never_queries() {
        let m = FigureOneTree::default();
        let cfg = SearchConfig {
            budget: 200,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let res = search(&m, &m.initial_state(), 1, &cfg, &mut rng).unwrap();
        assert_eq!(res.counters.queried, 0);
        assert_eq!(res.action, ActionId(3));
    }

    #[test]
    fn recency_checks_fire_once_per_k_visits() {
        let m = Navigation::new(NavigationConfig {
            width: 4,
            height: 4,
            disappear: 0.1,
            ..Default::default()
        })
        .unwrap();
        for k in [1, 3, 5] {
            let cfg = SearchConfig {
                budget: 300,
                abstraction: AbstractionMode::Oga(AbstractionConfig::pruned(0.0).with_recency(k)),
                ..Default::default()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
            let res = search(&m, &m.initial_state(), 8, &cfg, &mut rng).unwrap();
            let expected: u64 = (0..res.graph.q_count())
                .map(|i| res.graph.q(QId(i as u32)).visits / u64::from(k))
                .sum();
            assert_eq!(res.graph.recency_checks, expected);
            res.graph.audit().unwrap();
        }
    }

    #[test]
    fn episodes_are_deterministic_per_seed() {
        let m = Navigation::new(NavigationConfig::default()).unwrap();
        let cfg = SearchConfig {
            budget: 50,
            abstraction: AbstractionMode::Oga(AbstractionConfig::epsilon(0.0, 0.8).with_pg(true)),
            ..Default::default()
        };
        let a = play_episode(&m, &cfg, 10, 77).unwrap();
        let b = play_episode(&m, &cfg, 10, 77).unwrap();
        assert_eq!(a.actions, b.actions);
        assert_eq!(a.total_return.to_bits(), b.total_return.to_bits());
        assert_eq!(a.counters, b.counters);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let m = FigureOneTree::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let bad = SearchConfig {
            budget: 0,
            ..Default::default()
        };
        assert!(search(&m, &m.initial_state(), 1, &bad, &mut rng).is_err());
        let bad = SearchConfig {
            exploration_c: -1.0,
            ..Default::default()
        };
        assert!(search(&m, &m.initial_state(), 1, &bad, &mut rng).is_err());
        assert!(search(
            &m,
            &m.initial_state(),
            0,
            &SearchConfig::default(),
            &mut rng
        )
        .is_err());
    }
}
