use crate::error::{Error, Result};
use crate::mdp::{ActionId, MdpModel, Outcome, StateKey};

/// Grid navigation. Each move costs 1; entering a cell other than the start
/// or goal makes the agent disappear with the configured probability, after
/// which it sits in an absorbing dead state paying 1 per step.
#[derive(Clone, Debug, PartialEq)]
pub struct NavigationConfig {
    pub width: usize,
    pub height: usize,
    pub disappear: f64,
    pub start: (usize, usize),
    /// Defaults to the corner opposite the origin.
    pub goal: Option<(usize, usize)>,
}

impl Default for NavigationConfig {
    fn default() -> Self {
        NavigationConfig {
            width: 5,
            height: 5,
            disappear: 0.1,
            start: (0, 0),
            goal: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Navigation {
    width: i64,
    height: i64,
    start: (i64, i64),
    goal: (i64, i64),
    disappear: Vec<f64>,
}

const DEAD: i64 = -1;
// N, E, S, W
const MOVES: [(i64, i64); 4] = [(0, 1), (1, 0), (0, -1), (-1, 0)];

impl Navigation {
    pub fn new(config: NavigationConfig) -> Result<Self> {
        let (w, h) = (config.width, config.height);
        let goal = config
            .goal
            .unwrap_or((w.saturating_sub(1), h.saturating_sub(1)));
        if w == 0 || h == 0 || w * h < 2 {
            return Err(Error::Config(format!(
                "navigation grid {w}x{h} is too small"
            )));
        }
        if !(0.0..1.0).contains(&config.disappear) {
            return Err(Error::Config(format!(
                "disappear probability {} must be in [0, 1)",
                config.disappear
            )));
        }
        for (what, (x, y)) in [("start", config.start), ("goal", goal)] {
            if x >= w || y >= h {
                return Err(Error::Config(format!("{what} ({x},{y}) is off the grid")));
            }
        }
        if config.start == goal {
            return Err(Error::Config("start and goal coincide".into()));
        }
        let mut disappear = vec![config.disappear; w * h];
        disappear[config.start.1 * w + config.start.0] = 0.0;
        disappear[goal.1 * w + goal.0] = 0.0;
        Ok(Navigation {
            width: w as i64,
            height: h as i64,
            start: (config.start.0 as i64, config.start.1 as i64),
            goal: (goal.0 as i64, goal.1 as i64),
            disappear,
        })
    }

    pub fn cell(x: i64, y: i64) -> StateKey {
        StateKey::new([x, y])
    }

    pub fn dead() -> StateKey {
        StateKey::scalar(DEAD)
    }

    fn moves(&self, x: i64, y: i64) -> impl Iterator<Item = (i64, i64)> + '_ {
        MOVES
            .iter()
            .map(move |(dx, dy)| (x + dx, y + dy))
            .filter(|&(nx, ny)| nx >= 0 && ny >= 0 && nx < self.width && ny < self.height)
    }
}

impl MdpModel for Navigation {
    fn name(&self) -> &str {
        "navigation"
    }

    fn initial_state(&self) -> StateKey {
        Self::cell(self.start.0, self.start.1)
    }

    fn is_terminal(&self, state: &StateKey) -> bool {
        state.parts() == [self.goal.0, self.goal.1]
    }

    fn action_count(&self, state: &StateKey) -> usize {
        match *state.parts() {
            [x, y] => self.moves(x, y).count(),
            _ => 1,
        }
    }

    fn transitions(&self, state: &StateKey, action: ActionId) -> Vec<Outcome> {
        let outcome = |successor, probability| Outcome {
            successor,
            probability,
            reward: -1.0,
        };
        let [x, y] = *state.parts() else {
            return vec![outcome(Self::dead(), 1.0)];
        };
        let (nx, ny) = self.moves(x, y).nth(action.0).expect("checked action");
        let p = self.disappear[(ny * self.width + nx) as usize];
        if p == 0.0 {
            vec![outcome(Self::cell(nx, ny), 1.0)]
        } else {
            vec![
                outcome(Self::cell(nx, ny), 1.0 - p),
                outcome(Self::dead(), p),
            ]
        }
    }
}
