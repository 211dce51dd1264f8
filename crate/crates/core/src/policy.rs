//! Tree and decision policies.
//!
//! The tree policy first picks an abstract action by UCB over aggregated
//! statistics, then, when several children of the current state share that
//! abstract node, resolves the tie with an [`IntraPolicy`].

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{QAbsId, QId, SearchGraph, StateId};
use crate::mdp::ActionId;
use crate::TOLERANCE;

/// Rule for choosing a ground action among same-parent members of the
/// selected abstract node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IntraPolicy {
    Random,
    First,
    RandomGreedy,
    LeastVisits,
    LeastOutcomes,
    Greedy,
    MostVisits,
    Uct,
}

impl IntraPolicy {
    pub const ALL: [IntraPolicy; 8] = [
        IntraPolicy::Random,
        IntraPolicy::First,
        IntraPolicy::RandomGreedy,
        IntraPolicy::LeastVisits,
        IntraPolicy::LeastOutcomes,
        IntraPolicy::Greedy,
        IntraPolicy::MostVisits,
        IntraPolicy::Uct,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            IntraPolicy::Random => "RANDOM",
            IntraPolicy::First => "FIRST",
            IntraPolicy::RandomGreedy => "RANDOM_GREEDY",
            IntraPolicy::LeastVisits => "LEAST_VISITS",
            IntraPolicy::LeastOutcomes => "LEAST_OUTCOMES",
            IntraPolicy::Greedy => "GREEDY",
            IntraPolicy::MostVisits => "MOST_VISITS",
            IntraPolicy::Uct => "UCT",
        }
    }
}

impl fmt::Display for IntraPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IntraPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        IntraPolicy::ALL
            .into_iter()
            .find(|p| p.as_str() == upper)
            .ok_or_else(|| Error::Config(format!("unknown intra-abstraction policy '{s}'")))
    }
}

/// Running moments of Q-value snapshots taken at every backup.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct QStatsAccumulator {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl QStatsAccumulator {
    pub fn push(&mut self, q: f64) {
        self.count += 1;
        self.sum += q;
        self.sum_sq += q * q;
    }

    /// Population variance, clamped at zero.
    pub fn variance(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        let n = self.count as f64;
        let mean = self.sum / n;
        (self.sum_sq / n - mean * mean).max(0.0)
    }
}

/// Global-Std exploration factor `C * sigma`; zero below two samples.
pub fn exploration_factor(acc: &QStatsAccumulator, c: f64) -> f64 {
    if acc.count < 2 {
        return 0.0;
    }
    c * acc.variance().sqrt()
}

#[inline]
pub fn ucb_value(visits: u64, returns: f64, parent_total: u64, lambda: f64) -> f64 {
    debug_assert!(visits > 0, "UCB evaluated on an unvisited action");
    let n = visits as f64;
    returns / n + lambda * ((parent_total as f64).ln() / n).sqrt()
}

/// Uniform choice among the items whose score is within `tol` of the best.
/// Draws from `rng` only when there is more than one candidate.
fn argmax_by<T: Copy, R: Rng + ?Sized>(
    items: impl IntoIterator<Item = T>,
    score: impl Fn(T) -> f64,
    tol: f64,
    rng: &mut R,
) -> Option<T> {
    let scored: Vec<(T, f64)> = items.into_iter().map(|t| (t, score(t))).collect();
    let best = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<T> = scored
        .iter()
        .filter(|s| s.1 >= best - tol)
        .map(|s| s.0)
        .collect();
    match ties.len() {
        0 => None,
        1 => Some(ties[0]),
        n => Some(ties[rng.gen_range(0..n)]),
    }
}

fn uniform<T: Copy, R: Rng + ?Sized>(items: &[T], rng: &mut R) -> T {
    items[rng.gen_range(0..items.len())]
}

/// Distinct abstract nodes of a state's expanded children, in order of first
/// appearance by action id.
pub fn child_groups(graph: &SearchGraph, state: StateId) -> Vec<QAbsId> {
    let mut groups: Vec<QAbsId> = Vec::new();
    for q in graph.state(state).expanded() {
        let g = graph.q(q).abstract_ref;
        if !groups.contains(&g) {
            groups.push(g);
        }
    }
    groups
}

/// Children of `state` that belong to `group`, sorted by action id.
pub fn members_under(graph: &SearchGraph, state: StateId, group: QAbsId) -> Vec<QId> {
    graph
        .state(state)
        .expanded()
        .filter(|&q| graph.q(q).abstract_ref == group)
        .collect()
}

/// UCB over the abstract nodes represented among the children of `state`,
/// using aggregated statistics and the state's own child-visit total.
pub fn select_abstract_action<R: Rng + ?Sized>(
    graph: &SearchGraph,
    state: StateId,
    lambda: f64,
    rng: &mut R,
) -> Result<QAbsId> {
    let total = graph.state(state).total_child_visits;
    argmax_by(
        child_groups(graph, state),
        |g| {
            let a = graph.q_group(g);
            ucb_value(a.agg_visits, a.agg_returns, total, lambda)
        },
        0.0,
        rng,
    )
    .ok_or_else(|| Error::Internal("selection at a state without children".into()))
}

/// Tree-policy choice among same-parent members of one abstract node.
/// `members` must be sorted by action id.
pub fn intra_select_tree<R: Rng + ?Sized>(
    graph: &SearchGraph,
    policy: IntraPolicy,
    members: &[QId],
    lambda: f64,
    rng: &mut R,
) -> Result<QId> {
    match members {
        [] => return Err(Error::Internal("intra policy over no members".into())),
        [only] => return Ok(*only),
        _ => {}
    }
    let node = |q: QId| graph.q(q);
    let pick = |score: &dyn Fn(QId) -> f64, tol: f64, rng: &mut R| {
        argmax_by(members.iter().copied(), score, tol, rng).expect("members non-empty")
    };
    let unvisited: Vec<QId> = members
        .iter()
        .copied()
        .filter(|&q| node(q).visits == 0)
        .collect();
    let q = match policy {
        IntraPolicy::Random | IntraPolicy::RandomGreedy => uniform(members, rng),
        IntraPolicy::First => members[0],
        IntraPolicy::LeastVisits => pick(&|q| -(node(q).visits as f64), 0.0, rng),
        IntraPolicy::LeastOutcomes => pick(&|q| -node(q).prob_mass, TOLERANCE, rng),
        IntraPolicy::MostVisits => pick(&|q| node(q).visits as f64, 0.0, rng),
        IntraPolicy::Greedy | IntraPolicy::Uct if !unvisited.is_empty() => uniform(&unvisited, rng),
        IntraPolicy::Greedy => pick(&|q| node(q).return_sum / node(q).visits as f64, 0.0, rng),
        IntraPolicy::Uct => {
            let total = graph.state(node(members[0]).parent).total_child_visits;
            pick(
                &|q| ucb_value(node(q).visits, node(q).return_sum, total, lambda),
                0.0,
                rng,
            )
        }
    };
    Ok(q)
}

/// Decision-time choice among same-parent members of one abstract node.
pub fn intra_select_decision<R: Rng + ?Sized>(
    graph: &SearchGraph,
    policy: IntraPolicy,
    members: &[QId],
    rng: &mut R,
) -> Result<QId> {
    match members {
        [] => return Err(Error::Internal("intra policy over no members".into())),
        [only] => return Ok(*only),
        _ => {}
    }
    let q = match policy {
        IntraPolicy::Random => uniform(members, rng),
        IntraPolicy::First => members[0],
        _ => {
            let visited: Vec<QId> = members
                .iter()
                .copied()
                .filter(|&q| graph.q(q).visits > 0)
                .collect();
            if visited.is_empty() {
                uniform(members, rng)
            } else {
                argmax_by(
                    visited,
                    |q| graph.q(q).mean().unwrap_or(f64::NEG_INFINITY),
                    0.0,
                    rng,
                )
                .expect("visited non-empty")
            }
        }
    };
    Ok(q)
}

/// Tree-policy step counters used for the intra-policy query ratio.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TreePolicyCounters {
    /// UCB selections at fully expanded states.
    pub steps: u64,
    /// Selections where the chosen abstract node had several members under
    /// the current state.
    pub queried: u64,
}

impl TreePolicyCounters {
    pub fn ratio(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.queried as f64 / self.steps as f64
        }
    }

    pub fn merge(&mut self, other: TreePolicyCounters) {
        self.steps += other.steps;
        self.queried += other.queried;
    }
}

/// Selection at a fully expanded state: abstract UCB, then the intra policy
/// when the abstract node has several members under `state`.
pub fn select_child<R: Rng + ?Sized>(
    graph: &SearchGraph,
    state: StateId,
    lambda: f64,
    policy: IntraPolicy,
    counters: &mut TreePolicyCounters,
    rng: &mut R,
) -> Result<QId> {
    let group = select_abstract_action(graph, state, lambda, rng)?;
    let members = members_under(graph, state, group);
    counters.steps += 1;
    if members.len() >= 2 {
        counters.queried += 1;
        intra_select_tree(graph, policy, &members, lambda, rng)
    } else {
        members
            .first()
            .copied()
            .ok_or_else(|| Error::Internal("selected abstract node has no member here".into()))
    }
}

/// Greedy abstract choice at the root followed by the intra decision rule.
/// Falls back to a uniformly random legal action when nothing was visited.
pub fn root_decision<R: Rng + ?Sized>(
    graph: &SearchGraph,
    root: StateId,
    policy: IntraPolicy,
    rng: &mut R,
) -> Result<ActionId> {
    let groups: Vec<QAbsId> = child_groups(graph, root)
        .into_iter()
        .filter(|&g| graph.q_group(g).agg_visits > 0)
        .collect();
    if groups.is_empty() {
        let n = graph.state(root).children.len();
        if n == 0 {
            return Err(Error::TerminalState(graph.state(root).key.clone()));
        }
        return Ok(ActionId(rng.gen_range(0..n)));
    }
    let group = argmax_by(
        groups,
        |g| {
            let a = graph.q_group(g);
            a.agg_returns / a.agg_visits as f64
        },
        0.0,
        rng,
    )
    .expect("groups non-empty");
    let members = members_under(graph, root, group);
    let q = intra_select_decision(graph, policy, &members, rng)?;
    Ok(graph.q(q).action)
}
