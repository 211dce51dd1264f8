//! The environment contract shared by every model the planner can search.
//!
//! Models are declarative: besides sampling they expose the full outcome
//! distribution of every state-action pair, which the abstraction engine and
//! the `LEAST_OUTCOMES` policy depend on. Rewards belong to the pair `(s, a)`
//! and are repeated on every outcome for convenience.

use std::fmt;

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::TOLERANCE;

/// Opaque encoding of a domain state. Equal keys denote equal states.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
pub struct StateKey(pub Vec<i64>);

impl StateKey {
    pub fn new(parts: impl Into<Vec<i64>>) -> Self {
        StateKey(parts.into())
    }

    pub fn scalar(v: i64) -> Self {
        StateKey(vec![v])
    }

    pub fn parts(&self) -> &[i64] {
        &self.0
    }
}

impl fmt::Display for StateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "]")
    }
}

/// Index into a state's legal-action list.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct ActionId(pub usize);

impl ActionId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct Outcome {
    pub successor: StateKey,
    pub probability: f64,
    pub reward: f64,
}

/// A state paired with its depth in the layered MDP.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct LayeredState {
    pub state: StateKey,
    pub layer: usize,
}

impl LayeredState {
    pub fn new(state: StateKey, layer: usize) -> Self {
        LayeredState { state, layer }
    }

    /// Terminal in the layered MDP: either a model terminal or the horizon layer.
    pub fn is_terminal(&self, model: &dyn MdpModel, horizon: usize) -> bool {
        self.layer >= horizon || model.is_terminal(&self.state)
    }
}

/// Undiscounted episode return.
#[derive(Clone, Copy, PartialEq, Debug, Default)]
pub struct EpisodeReturn(pub f64);

impl EpisodeReturn {
    pub fn add(&mut self, reward: f64) {
        self.0 += reward;
    }
}

/// A finite MDP with known transition probabilities.
///
/// Implementors provide the unchecked primitives (`action_count`,
/// `transitions`); callers should go through the checked wrappers
/// (`enumerate_actions`, `enumerate_outcomes`, `sample_transition`).
/// Models must be immutable and cheap to share across threads.
pub trait MdpModel: Send + Sync {
    fn name(&self) -> &str;

    fn initial_state(&self) -> StateKey;

    fn is_terminal(&self, state: &StateKey) -> bool;

    /// Number of legal actions in a non-terminal state.
    fn action_count(&self, state: &StateKey) -> usize;

    /// Full support of `P(.|s,a)` with distinct successors in a fixed order.
    fn transitions(&self, state: &StateKey, action: ActionId) -> Vec<Outcome>;

    fn enumerate_actions(&self, state: &StateKey) -> Result<Vec<ActionId>> {
        if self.is_terminal(state) {
            return Err(Error::TerminalState(state.clone()));
        }
        Ok((0..self.action_count(state)).map(ActionId).collect())
    }

    fn enumerate_outcomes(&self, state: &StateKey, action: ActionId) -> Result<Vec<Outcome>> {
        self.check_action(state, action)?;
        Ok(self.transitions(state, action))
    }

    /// Draws one successor. The default walks the cumulative distribution of
    /// `transitions` with a single uniform draw; models with large supports
    /// override this but must report the exact enumerated probability.
    fn sample_transition(
        &self,
        state: &StateKey,
        action: ActionId,
        rng: &mut dyn RngCore,
    ) -> Result<Outcome> {
        self.check_action(state, action)?;
        let mut outcomes = self.transitions(state, action);
        let u: f64 = rng.gen();
        let mut cumulative = 0.0;
        for i in 0..outcomes.len() {
            cumulative += outcomes[i].probability;
            if u < cumulative {
                return Ok(outcomes.swap_remove(i));
            }
        }
        outcomes
            .pop()
            .ok_or_else(|| Error::ModelInconsistency(format!("empty support at {state}")))
    }

    fn check_action(&self, state: &StateKey, action: ActionId) -> Result<()> {
        if self.is_terminal(state) {
            return Err(Error::TerminalState(state.clone()));
        }
        let available = self.action_count(state);
        if action.0 >= available {
            return Err(Error::IllegalAction {
                state: state.clone(),
                action,
                available,
            });
        }
        Ok(())
    }
}

/// Checks the declarative contract for one state: non-empty action list,
/// normalized distinct-successor supports, pair-level rewards.
pub fn audit_state(model: &dyn MdpModel, state: &StateKey) -> Result<()> {
    if model.is_terminal(state) {
        return Ok(());
    }
    let actions = model.enumerate_actions(state)?;
    if actions.is_empty() {
        return Err(Error::ModelInconsistency(format!("no actions at {state}")));
    }
    for a in actions {
        let outcomes = model.enumerate_outcomes(state, a)?;
        let first = outcomes
            .first()
            .ok_or_else(|| Error::ModelInconsistency(format!("empty support at {state}/{a}")))?;
        let mut total = 0.0;
        for (i, o) in outcomes.iter().enumerate() {
            if !(o.probability > 0.0 && o.probability <= 1.0 + TOLERANCE) {
                return Err(Error::ModelInconsistency(format!(
                    "probability {} out of range at {state}/{a}",
                    o.probability
                )));
            }
            if (o.reward - first.reward).abs() > TOLERANCE {
                return Err(Error::ModelInconsistency(format!(
                    "reward differs across outcomes at {state}/{a}"
                )));
            }
            if outcomes[..i].iter().any(|p| p.successor == o.successor) {
                return Err(Error::ModelInconsistency(format!(
                    "duplicate successor {} at {state}/{a}",
                    o.successor
                )));
            }
            total += o.probability;
        }
        if (total - 1.0).abs() > TOLERANCE {
            return Err(Error::ModelInconsistency(format!(
                "probabilities sum to {total} at {state}/{a}"
            )));
        }
    }
    Ok(())
}

/// Audits every state reachable from the initial state within `depth` steps,
/// visiting at most `limit` distinct states. Returns the number audited.
pub fn audit_reachable(model: &dyn MdpModel, depth: usize, limit: usize) -> Result<usize> {
    use std::collections::HashSet;
    let mut seen: HashSet<StateKey> = HashSet::new();
    let mut frontier = vec![model.initial_state()];
    seen.insert(model.initial_state());
    for _ in 0..=depth {
        let mut next = Vec::new();
        for s in frontier {
            audit_state(model, &s)?;
            if model.is_terminal(&s) {
                continue;
            }
            for a in model.enumerate_actions(&s)? {
                for o in model.enumerate_outcomes(&s, a)? {
                    if seen.len() < limit && seen.insert(o.successor.clone()) {
                        next.push(o.successor);
                    }
                }
            }
        }
        frontier = next;
    }
    Ok(seen.len())
}
