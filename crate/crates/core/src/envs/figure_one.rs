use crate::error::{Error, Result};
use crate::mdp::{ActionId, MdpModel, Outcome, StateKey};

/// Deterministic depth-1 tree: every root action leads to the same terminal
/// leaf and pays its fixed reward.
#[derive(Clone, Debug, PartialEq)]
pub struct FigureOneTree {
    pub rewards: Vec<f64>,
}

impl Default for FigureOneTree {
    fn default() -> Self {
        FigureOneTree {
            rewards: vec![0.5, 0.55, 1.0, 1.1],
        }
    }
}

impl FigureOneTree {
    pub fn with_rewards(rewards: Vec<f64>) -> Result<Self> {
        if rewards.is_empty() || rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::Config(
                "depth-1 tree needs at least one finite reward".into(),
            ));
        }
        Ok(FigureOneTree { rewards })
    }

    pub fn root() -> StateKey {
        StateKey::scalar(0)
    }

    pub fn leaf() -> StateKey {
        StateKey::scalar(1)
    }
}

impl MdpModel for FigureOneTree {
    fn name(&self) -> &str {
        "figure1"
    }

    fn initial_state(&self) -> StateKey {
        Self::root()
    }

    fn is_terminal(&self, state: &StateKey) -> bool {
        *state != Self::root()
    }

    fn action_count(&self, _state: &StateKey) -> usize {
        self.rewards.len()
    }

    fn transitions(&self, _state: &StateKey, action: ActionId) -> Vec<Outcome> {
        vec![Outcome {
            successor: Self::leaf(),
            probability: 1.0,
            reward: self.rewards[action.0],
        }]
    }
}
