//! Exact finite-horizon values by memoized expectimax.
//!
//! Only meant for small instances: the reachable layered state space is
//! enumerated outright, bounded by a node budget.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::mdp::{ActionId, MdpModel, StateKey};
use crate::TOLERANCE;

pub const DEFAULT_NODE_BUDGET: usize = 1_000_000;

/// Optimal values over the layered MDP. Terminal entries have `V* = 0` and
/// no Q-values.
#[derive(Clone, Debug, Default)]
pub struct ValueTable {
    horizon: usize,
    v: HashMap<(usize, StateKey), f64>,
    q: HashMap<(usize, StateKey), Vec<f64>>,
}

impl ValueTable {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn value(&self, layer: usize, state: &StateKey) -> Option<f64> {
        self.v.get(&(layer, state.clone())).copied()
    }

    pub fn q_values(&self, layer: usize, state: &StateKey) -> Option<&[f64]> {
        self.q.get(&(layer, state.clone())).map(Vec::as_slice)
    }

    pub fn q_value(&self, layer: usize, state: &StateKey, action: ActionId) -> Option<f64> {
        self.q_values(layer, state)?.get(action.0).copied()
    }

    /// Number of solved (layer, state) entries.
    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }
}

struct Solver<'a> {
    model: &'a dyn MdpModel,
    budget: usize,
    table: ValueTable,
}

impl Solver<'_> {
    fn value(&mut self, layer: usize, state: &StateKey) -> Result<f64> {
        if let Some(&v) = self.table.v.get(&(layer, state.clone())) {
            return Ok(v);
        }
        if self.table.v.len() >= self.budget {
            return Err(Error::OracleBudgetExceeded {
                budget: self.budget,
            });
        }
        if layer >= self.table.horizon || self.model.is_terminal(state) {
            self.table.v.insert((layer, state.clone()), 0.0);
            return Ok(0.0);
        }
        let mut qs = Vec::new();
        for a in self.model.enumerate_actions(state)? {
            let mut q = 0.0;
            for o in self.model.enumerate_outcomes(state, a)? {
                q += o.probability * (o.reward + self.value(layer + 1, &o.successor)?);
            }
            qs.push(q);
        }
        let v = qs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.table.v.insert((layer, state.clone()), v);
        self.table.q.insert((layer, state.clone()), qs);
        Ok(v)
    }
}

/// Solves from the model's initial state with the default node budget.
pub fn solve(model: &dyn MdpModel, horizon: usize) -> Result<ValueTable> {
    solve_from(
        model,
        &[model.initial_state()],
        horizon,
        DEFAULT_NODE_BUDGET,
    )
}

/// Solves every (layer, state) reachable from `roots` placed at layer 0.
pub fn solve_from(
    model: &dyn MdpModel,
    roots: &[StateKey],
    horizon: usize,
    budget: usize,
) -> Result<ValueTable> {
    let mut solver = Solver {
        model,
        budget,
        table: ValueTable {
            horizon,
            ..Default::default()
        },
    };
    for root in roots {
        solver.value(0, root)?;
    }
    Ok(solver.table)
}

/// Actions whose Q* is within tolerance of V*; empty for terminal or
/// unsolved entries.
pub fn optimal_actions(table: &ValueTable, layer: usize, state: &StateKey) -> Vec<ActionId> {
    let Some(qs) = table.q_values(layer, state) else {
        return Vec::new();
    };
    let best = qs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    qs.iter()
        .enumerate()
        .filter(|(_, &q)| q >= best - TOLERANCE)
        .map(|(a, _)| ActionId(a))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{ChainFixture, FigureOneTree, Navigation, NavigationConfig};

    #[test]
    fn figure_one_values() {
        let m = FigureOneTree::default();
        let t = solve(&m, 1).unwrap();
        let root = m.initial_state();
        assert_eq!(t.q_values(0, &root).unwrap(), &[0.5, 0.55, 1.0, 1.1]);
        assert_eq!(t.value(0, &root), Some(1.1));
        assert_eq!(optimal_actions(&t, 0, &root), vec![ActionId(3)]);
    }

    #[test]
    fn ties_and_single_actions() {
        let m = FigureOneTree::with_rewards(vec![1.0, 0.2, 1.0]).unwrap();
        let t = solve(&m, 1).unwrap();
        assert_eq!(
            optimal_actions(&t, 0, &m.initial_state()),
            vec![ActionId(0), ActionId(2)]
        );
        let t = solve_from(&ChainFixture, &ChainFixture::roots(), 3, 100).unwrap();
        for root in ChainFixture::roots() {
            assert_eq!(t.value(0, &root), Some(0.0));
            assert_eq!(optimal_actions(&t, 0, &root), vec![ActionId(0)]);
        }
        assert!(optimal_actions(&t, 2, &StateKey::scalar(5)).is_empty());
    }

    /// Shortest path by breadth-first search over deterministic moves.
    fn shortest_path(m: &Navigation) -> usize {
        let mut frontier = vec![m.initial_state()];
        let mut seen = frontier.clone();
        for d in 0.. {
            if frontier.iter().any(|s| m.is_terminal(s)) {
                return d;
            }
            let mut next = Vec::new();
            for s in &frontier {
                for a in m.enumerate_actions(s).unwrap() {
                    let succ = m.transitions(s, a)[0].successor.clone();
                    if !seen.contains(&succ) {
                        seen.push(succ.clone());
                        next.push(succ);
                    }
                }
            }
            frontier = next;
        }
        unreachable!()
    }

    #[test]
    fn deterministic_navigation_matches_shortest_path() {
        let m = Navigation::new(NavigationConfig {
            width: 3,
            height: 3,
            disappear: 0.0,
            ..Default::default()
        })
        .unwrap();
        let t = solve(&m, 6).unwrap();
        assert_eq!(shortest_path(&m), 4);
        assert!((t.value(0, &m.initial_state()).unwrap() + 4.0).abs() < 1e-12);
    }

    #[test]
    fn bellman_consistency_on_stochastic_navigation() {
        let m = Navigation::new(NavigationConfig {
            width: 3,
            height: 3,
            disappear: 0.3,
            ..Default::default()
        })
        .unwrap();
        let t = solve(&m, 5).unwrap();
        for ((layer, s), v) in &t.v {
            let Some(qs) = t.q_values(*layer, s) else {
                assert_eq!(*v, 0.0);
                continue;
            };
            for (a, q) in qs.iter().enumerate() {
                let backup: f64 = m
                    .transitions(s, ActionId(a))
                    .iter()
                    .map(|o| o.probability * (o.reward + t.value(layer + 1, &o.successor).unwrap()))
                    .sum();
                assert!((backup - q).abs() < 1e-9);
            }
            assert!((qs.iter().copied().fold(f64::MIN, f64::max) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn budget_is_enforced() {
        let m = Navigation::new(NavigationConfig::default()).unwrap();
        let err = solve_from(&m, &[m.initial_state()], 20, 50).unwrap_err();
        assert!(matches!(err, Error::OracleBudgetExceeded { budget: 50 }));
    }
}
