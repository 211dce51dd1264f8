use thiserror::Error;

use crate::mdp::{ActionId, StateKey};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("state {0} is terminal and has no actions")]
    TerminalState(StateKey),

    #[error("action {action} is not legal in state {state} ({available} actions available)")]
    IllegalAction {
        state: StateKey,
        action: ActionId,
        available: usize,
    },

    #[error("inconsistent model: {0}")]
    ModelInconsistency(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("oracle infeasible: more than {budget} layered states reachable")]
    OracleBudgetExceeded { budget: usize },

    #[error("state {state} at layer {layer} was not solved by the oracle")]
    Unsolved { layer: usize, state: StateKey },

    #[error("internal invariant violated: {0}")]
    Internal(String),
}
