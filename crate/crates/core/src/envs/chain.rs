use crate::mdp::{ActionId, MdpModel, Outcome, StateKey};

/// Five-state deterministic fixture: 1 -> 3 -> 5 and 2 -> 4 -> 5, one action
/// per state, all rewards zero, 5 terminal.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ChainFixture;

impl ChainFixture {
    /// The two entry states. Search the fixture from both at layer 0.
    pub fn roots() -> Vec<StateKey> {
        vec![StateKey::scalar(1), StateKey::scalar(2)]
    }
}

impl MdpModel for ChainFixture {
    fn name(&self) -> &str {
        "chain"
    }

    fn initial_state(&self) -> StateKey {
        StateKey::scalar(1)
    }

    fn is_terminal(&self, state: &StateKey) -> bool {
        state.parts() == [5]
    }

    fn action_count(&self, _state: &StateKey) -> usize {
        1
    }

    fn transitions(&self, state: &StateKey, _action: ActionId) -> Vec<Outcome> {
        let next = match state.parts() {
            [1] => 3,
            [2] => 4,
            _ => 5,
        };
        vec![Outcome {
            successor: StateKey::scalar(next),
            probability: 1.0,
            reward: 0.0,
        }]
    }
}
