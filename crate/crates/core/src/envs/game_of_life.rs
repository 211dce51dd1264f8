use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::mdp::{ActionId, MdpModel, Outcome, StateKey};

#[derive(Clone, Debug, PartialEq)]
pub struct GameOfLifeConfig {
    pub size: usize,
    /// Probability that a cell not being sustained ends up flipped.
    pub noise: f64,
    /// Indices (row-major) of initially live cells.
    pub initial: Vec<usize>,
}

impl Default for GameOfLifeConfig {
    fn default() -> Self {
        GameOfLifeConfig {
            size: 3,
            noise: 0.1,
            initial: vec![3, 4, 5],
        }
    }
}

/// Conway's rules on a bounded n x n board with per-cell noise. Each action
/// keeps one cell alive; the reward is the number of live cells.
#[derive(Clone, Debug)]
pub struct GameOfLife {
    n: usize,
    noise: f64,
    initial: i64,
}

const MAX_SIZE: usize = 6;

impl GameOfLife {
    pub fn new(config: GameOfLifeConfig) -> Result<Self> {
        if !(2..=MAX_SIZE).contains(&config.size) {
            return Err(Error::Config(format!(
                "board size must be in 2..={MAX_SIZE}"
            )));
        }
        if !(0.0..=1.0).contains(&config.noise) {
            return Err(Error::Config(format!(
                "noise {} not in [0, 1]",
                config.noise
            )));
        }
        let cells = config.size * config.size;
        let mut initial = 0i64;
        for &c in &config.initial {
            if c >= cells {
                return Err(Error::Config(format!("initial cell {c} is off the board")));
            }
            initial |= 1 << c;
        }
        Ok(GameOfLife {
            n: config.size,
            noise: config.noise,
            initial,
        })
    }

    fn cells(&self) -> usize {
        self.n * self.n
    }

    /// Noise-free successor with `sustain` forced alive.
    pub fn step(&self, board: i64, sustain: usize) -> i64 {
        let n = self.n as i64;
        let mut next = 0i64;
        for c in 0..self.cells() {
            let (r, col) = ((c / self.n) as i64, (c % self.n) as i64);
            let mut live = 0;
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (nr, nc) = (r + dr, col + dc);
                    if (dr, dc) != (0, 0) && (0..n).contains(&nr) && (0..n).contains(&nc) {
                        live += (board >> (nr * n + nc)) & 1;
                    }
                }
            }
            let alive = (board >> c) & 1 == 1;
            if live == 3 || (alive && live == 2) {
                next |= 1 << c;
            }
        }
        next | 1 << sustain
    }

    fn probability(&self, flips: u32, noisy: u32) -> f64 {
        self.noise.powi(flips as i32) * (1.0 - self.noise).powi((noisy - flips) as i32)
    }
}

impl MdpModel for GameOfLife {
    fn name(&self) -> &str {
        "game_of_life"
    }

    fn initial_state(&self) -> StateKey {
        StateKey::scalar(self.initial)
    }

    fn is_terminal(&self, _state: &StateKey) -> bool {
        false
    }

    fn action_count(&self, _state: &StateKey) -> usize {
        self.cells()
    }

    fn transitions(&self, state: &StateKey, action: ActionId) -> Vec<Outcome> {
        let board = state.parts()[0];
        let reward = board.count_ones() as f64;
        let base = self.step(board, action.0);
        let outcome = |b: i64, probability| Outcome {
            successor: StateKey::scalar(b),
            probability,
            reward,
        };
        let noisy: Vec<usize> = (0..self.cells()).filter(|&c| c != action.0).collect();
        if self.noise == 0.0 || self.noise == 1.0 {
            let flip = if self.noise == 1.0 {
                noisy.iter().fold(0, |m, &c| m | 1 << c)
            } else {
                0
            };
            return vec![outcome(base ^ flip, 1.0)];
        }
        let k = noisy.len() as u32;
        (0..1u64 << k)
            .map(|subset| {
                let mut flip = 0i64;
                for (i, &c) in noisy.iter().enumerate() {
                    if subset >> i & 1 == 1 {
                        flip |= 1 << c;
                    }
                }
                outcome(base ^ flip, self.probability(subset.count_ones(), k))
            })
            .collect()
    }

    fn sample_transition(
        &self,
        state: &StateKey,
        action: ActionId,
        rng: &mut dyn RngCore,
    ) -> Result<Outcome> {
        self.check_action(state, action)?;
        let board = state.parts()[0];
        let mut next = self.step(board, action.0);
        let mut flips = 0;
        let noisy = self.cells() as u32 - 1;
        for c in (0..self.cells()).filter(|&c| c != action.0) {
            if rng.gen::<f64>() < self.noise {
                next ^= 1 << c;
                flips += 1;
            }
        }
        Ok(Outcome {
            successor: StateKey::scalar(next),
            probability: self.probability(flips, noisy),
            reward: board.count_ones() as f64,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn blinker_oscillates() {
        let m = GameOfLife::new(GameOfLifeConfig::default()).unwrap();
        // middle row -> middle column (sustaining the centre is a no-op)
        assert_eq!(m.step(0b000_111_000, 4), 0b010_010_010);
        assert_eq!(m.step(0b010_010_010, 4), 0b000_111_000);
    }

    #[test]
    fn sampled_probability_matches_enumeration() {
        let m = GameOfLife::new(GameOfLifeConfig::default()).unwrap();
        let s = m.initial_state();
        let all = m.transitions(&s, ActionId(0));
        assert_eq!(all.len(), 256);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let o = m.sample_transition(&s, ActionId(0), &mut rng).unwrap();
            let e = all.iter().find(|e| e.successor == o.successor).unwrap();
            assert!((e.probability - o.probability).abs() < 1e-15);
            assert_eq!(o.reward, 3.0);
        }
    }

    #[test]
    fn noiseless_board_is_deterministic() {
        let m = GameOfLife::new(GameOfLifeConfig {
            noise: 0.0,
            ..Default::default()
        })
        .unwrap();
        let out = m.transitions(&m.initial_state(), ActionId(0));
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].successor, StateKey::scalar(0b010_010_011));
    }
}
