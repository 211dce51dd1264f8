use crate::error::{Error, Result};
use crate::mdp::{ActionId, MdpModel, Outcome, StateKey};

#[derive(Clone, Debug, PartialEq)]
pub struct TireworldConfig {
    /// Rows of the triangle; row `r` holds `r + 1` locations.
    pub size: usize,
    pub p_flat: f64,
}

impl Default for TireworldConfig {
    fn default() -> Self {
        TireworldConfig {
            size: 3,
            p_flat: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Act {
    Drive(usize),
    Load,
    Change,
    Wait,
}

/// Triangle tireworld. The car drives from the left to the right corner of
/// the base; every drive may leave it with a flat tire. Spares lie on every
/// location off the base row. Reaching the goal pays 1; a flat car without a
/// spare can only wait.
///
/// State: `[location, flat, carrying spare, mask of remaining spares]`.
#[derive(Clone, Debug)]
pub struct Tireworld {
    rows: usize,
    p_flat: f64,
    coords: Vec<(usize, usize)>,
    neighbours: Vec<Vec<usize>>,
}

fn index(r: usize, c: usize) -> usize {
    r * (r + 1) / 2 + c
}

impl Tireworld {
    pub fn new(config: TireworldConfig) -> Result<Self> {
        if !(2..=8).contains(&config.size) {
            return Err(Error::Config("tireworld size must be in 2..=8".into()));
        }
        if !(0.0..1.0).contains(&config.p_flat) {
            return Err(Error::Config(format!(
                "p_flat {} not in [0, 1)",
                config.p_flat
            )));
        }
        let rows = config.size;
        let coords: Vec<(usize, usize)> = (0..rows)
            .flat_map(|r| (0..=r).map(move |c| (r, c)))
            .collect();
        let neighbours = coords
            .iter()
            .map(|&(r, c)| {
                let (r, c) = (r as i64, c as i64);
                let mut n: Vec<usize> = [(0, -1), (0, 1), (-1, -1), (-1, 0), (1, 0), (1, 1)]
                    .iter()
                    .map(|(dr, dc)| (r + dr, c + dc))
                    .filter(|&(nr, nc)| nr >= 0 && nr < rows as i64 && nc >= 0 && nc <= nr)
                    .map(|(nr, nc)| index(nr as usize, nc as usize))
                    .collect();
                n.sort_unstable();
                n
            })
            .collect();
        Ok(Tireworld {
            rows,
            p_flat: config.p_flat,
            coords,
            neighbours,
        })
    }

    fn start(&self) -> usize {
        index(self.rows - 1, 0)
    }

    fn goal(&self) -> usize {
        index(self.rows - 1, self.rows - 1)
    }

    /// Spare bit of a location; locations on the base carry none.
    fn spare_bit(&self, loc: usize) -> Option<usize> {
        (self.coords[loc].0 < self.rows - 1).then_some(loc)
    }

    fn actions(&self, state: &[i64]) -> Vec<Act> {
        let [loc, flat, carrying, spares] = *state else {
            unreachable!("tireworld state has four parts")
        };
        let loc = loc as usize;
        let mut acts = Vec::new();
        if flat == 0 {
            acts.extend(self.neighbours[loc].iter().map(|&n| Act::Drive(n)));
        }
        let spare_here = self.spare_bit(loc).is_some_and(|b| spares >> b & 1 == 1);
        if spare_here && carrying == 0 {
            acts.push(Act::Load);
        }
        if flat == 1 && carrying == 1 {
            acts.push(Act::Change);
        }
        if acts.is_empty() {
            acts.push(Act::Wait);
        }
        acts
    }
}

impl MdpModel for Tireworld {
    fn name(&self) -> &str {
        "tireworld"
    }

    fn initial_state(&self) -> StateKey {
        let spares = (0..self.coords.len())
            .filter_map(|l| self.spare_bit(l))
            .fold(0i64, |m, b| m | 1 << b);
        StateKey::new([self.start() as i64, 0, 0, spares])
    }

    fn is_terminal(&self, state: &StateKey) -> bool {
        state.parts()[0] == self.goal() as i64
    }

    fn action_count(&self, state: &StateKey) -> usize {
        self.actions(state.parts()).len()
    }

    fn transitions(&self, state: &StateKey, action: ActionId) -> Vec<Outcome> {
        let s = state.parts();
        let [loc, flat, carrying, spares] = *s else {
            unreachable!("tireworld state has four parts")
        };
        let det = |key: [i64; 4], reward| {
            vec![Outcome {
                successor: StateKey::new(key),
                probability: 1.0,
                reward,
            }]
        };
        match self.actions(s)[action.0] {
            Act::Drive(to) if to == self.goal() => det([to as i64, flat, carrying, spares], 1.0),
            Act::Drive(to) => {
                let ok = [to as i64, 0, carrying, spares];
                if self.p_flat == 0.0 {
                    return det(ok, 0.0);
                }
                vec![
                    Outcome {
                        successor: StateKey::new(ok),
                        probability: 1.0 - self.p_flat,
                        reward: 0.0,
                    },
                    Outcome {
                        successor: StateKey::new([to as i64, 1, carrying, spares]),
                        probability: self.p_flat,
                        reward: 0.0,
                    },
                ]
            }
            Act::Load => {
                let bit = self.spare_bit(loc as usize).expect("load needs a spare");
                det([loc, flat, 1, spares & !(1 << bit)], 0.0)
            }
            Act::Change => det([loc, 0, 0, spares], 0.0),
            Act::Wait => det([loc, flat, carrying, spares], 0.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn driving_gives_even_flat_split() {
        let m = Tireworld::new(TireworldConfig::default()).unwrap();
        let s = m.initial_state();
        let out = m.transitions(&s, ActionId(0));
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].probability, 0.5);
        assert_eq!(out[1].probability, 0.5);
        assert_eq!(out[1].successor.parts()[1], 1);
    }

    #[test]
    fn stuck_car_waits_and_spares_fix_flats() {
        let m = Tireworld::new(TireworldConfig::default()).unwrap();
        // flat on the base with no spare: only waiting is possible
        let stuck = StateKey::new([index(2, 1) as i64, 1, 0, 0]);
        assert_eq!(m.action_count(&stuck), 1);
        assert_eq!(m.transitions(&stuck, ActionId(0))[0].successor, stuck);
        // flat off the base with a spare lying there: load, then change
        let spare = index(1, 0);
        let s = StateKey::new([spare as i64, 1, 0, 1 << spare]);
        assert_eq!(m.action_count(&s), 1);
        let loaded = m.transitions(&s, ActionId(0))[0].successor.clone();
        assert_eq!(loaded, StateKey::new([spare as i64, 1, 1, 0]));
        let fixed = m.transitions(&loaded, ActionId(0))[0].successor.clone();
        assert_eq!(fixed, StateKey::new([spare as i64, 0, 0, 0]));
    }

    #[test]
    fn reaching_the_goal_pays_one() {
        let m = Tireworld::new(TireworldConfig::default()).unwrap();
        let s = StateKey::new([index(2, 1) as i64, 0, 0, 0]);
        let acts = m.actions(s.parts());
        let a = acts
            .iter()
            .position(|&x| x == Act::Drive(m.goal()))
            .unwrap();
        let out = m.transitions(&s, ActionId(a));
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].reward, 1.0);
        assert!(m.is_terminal(&out[0].successor));
    }
}
