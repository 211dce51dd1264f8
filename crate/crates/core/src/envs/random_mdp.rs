use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mdp::{ActionId, MdpModel, Outcome, StateKey};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RandomMdpConfig {
    pub states: usize,
    pub max_actions: usize,
    /// The highest-numbered states are terminal.
    pub terminal_states: usize,
}

impl Default for RandomMdpConfig {
    fn default() -> Self {
        RandomMdpConfig {
            states: 6,
            max_actions: 3,
            terminal_states: 1,
        }
    }
}

type Row = (f64, Vec<(usize, f64)>);

/// Small random MDP with coarse rewards and probabilities, so that exact
/// ties (and therefore exact abstractions) are common.
#[derive(Clone, Debug)]
pub struct RandomMdp {
    table: Vec<Vec<Row>>,
}

const SHAPES: [&[f64]; 3] = [&[1.0], &[0.5, 0.5], &[0.25, 0.75]];

impl RandomMdp {
    /// Sizes are clamped into a usable range: at least two states, one
    /// action and one non-terminal state.
    pub fn generate(seed: u64, config: &RandomMdpConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = config.states.max(2);
        let terminal = config.terminal_states.min(n - 1);
        let max_actions = config.max_actions.max(1);
        let table = (0..n)
            .map(|s| {
                if s >= n - terminal {
                    return Vec::new();
                }
                let k = rng.gen_range(1..=max_actions);
                (0..k)
                    .map(|_| {
                        let reward = rng.gen_range(0..2) as f64;
                        let shape = SHAPES[rng.gen_range(0..SHAPES.len())];
                        let succ = sample(&mut rng, n, shape.len());
                        (reward, succ.iter().zip(shape.iter().copied()).collect())
                    })
                    .collect()
            })
            .collect();
        RandomMdp { table }
    }

    pub fn state_count(&self) -> usize {
        self.table.len()
    }
}

impl MdpModel for RandomMdp {
    fn name(&self) -> &str {
        "random"
    }

    fn initial_state(&self) -> StateKey {
        StateKey::scalar(0)
    }

    fn is_terminal(&self, state: &StateKey) -> bool {
        self.table[state.parts()[0] as usize].is_empty()
    }

    fn action_count(&self, state: &StateKey) -> usize {
        self.table[state.parts()[0] as usize].len()
    }

    fn transitions(&self, state: &StateKey, action: ActionId) -> Vec<Outcome> {
        let (reward, row) = &self.table[state.parts()[0] as usize][action.0];
        row.iter()
            .map(|&(s, p)| Outcome {
                successor: StateKey::scalar(s as i64),
                probability: p,
                reward: *reward,
            })
            .collect()
    }
}
