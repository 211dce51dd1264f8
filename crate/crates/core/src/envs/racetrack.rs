use crate::error::{Error, Result};
use crate::mdp::{ActionId, MdpModel, Outcome, StateKey};

/// `#` wall, `.` track, `S` start, `F` finish. Rows top to bottom.
pub const DEFAULT_TRACK: [&str; 7] = [
    "##########",
    "#S.......#",
    "#S.......#",
    "#######..#",
    "#######..#",
    "#######FF#",
    "##########",
];

#[derive(Clone, Debug, PartialEq)]
pub struct RacetrackConfig {
    pub track: Vec<String>,
    /// Probability that the chosen acceleration is ignored for a step.
    pub p_slip: f64,
    pub max_speed: i64,
}

impl Default for RacetrackConfig {
    fn default() -> Self {
        RacetrackConfig {
            track: DEFAULT_TRACK.iter().map(|r| r.to_string()).collect(),
            p_slip: 0.2,
            max_speed: 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Cell {
    Wall,
    Track,
    Finish,
}

/// Classic racetrack: state is position and velocity, actions are the nine
/// accelerations in {-1,0,1}^2. Leaving the track resets the car to the
/// first start cell at rest; crossing a finish cell ends the episode.
#[derive(Clone, Debug)]
pub struct Racetrack {
    cells: Vec<Vec<Cell>>,
    start: (i64, i64),
    p_slip: f64,
    max_speed: i64,
}

enum Step {
    Crash,
    Finish,
    At(i64, i64),
}

impl Racetrack {
    pub fn new(config: RacetrackConfig) -> Result<Self> {
        if !(0.0..=1.0).contains(&config.p_slip) {
            return Err(Error::Config(format!(
                "p_slip {} not in [0, 1]",
                config.p_slip
            )));
        }
        if config.max_speed < 1 {
            return Err(Error::Config("max_speed must be at least 1".into()));
        }
        let mut cells = Vec::new();
        let mut starts = Vec::new();
        for (y, row) in config.track.iter().enumerate() {
            let mut line = Vec::new();
            for (x, ch) in row.chars().enumerate() {
                line.push(match ch {
                    '#' => Cell::Wall,
                    '.' => Cell::Track,
                    'F' => Cell::Finish,
                    'S' => {
                        starts.push((x as i64, y as i64));
                        Cell::Track
                    }
                    other => {
                        return Err(Error::Config(format!("unexpected track symbol '{other}'")))
                    }
                });
            }
            cells.push(line);
        }
        let Some(&start) = starts.first() else {
            return Err(Error::Config("track has no start cell".into()));
        };
        let track = Racetrack {
            cells,
            start,
            p_slip: config.p_slip,
            max_speed: config.max_speed,
        };
        if !track.finish_reachable() {
            return Err(Error::Config(
                "no finish cell reachable from the start".into(),
            ));
        }
        Ok(track)
    }

    pub fn state(x: i64, y: i64, vx: i64, vy: i64) -> StateKey {
        StateKey::new([x, y, vx, vy])
    }

    pub fn finished() -> StateKey {
        StateKey::scalar(-1)
    }

    fn at(&self, x: i64, y: i64) -> Cell {
        if x < 0 || y < 0 {
            return Cell::Wall;
        }
        self.cells
            .get(y as usize)
            .and_then(|row| row.get(x as usize))
            .copied()
            .unwrap_or(Cell::Wall)
    }

    fn finish_reachable(&self) -> bool {
        let mut seen = vec![self.start];
        let mut stack = vec![self.start];
        while let Some((x, y)) = stack.pop() {
            match self.at(x, y) {
                Cell::Finish => return true,
                Cell::Wall => continue,
                Cell::Track => {}
            }
            for (dx, dy) in [(0, 1), (1, 0), (0, -1), (-1, 0)] {
                let n = (x + dx, y + dy);
                if !seen.contains(&n) {
                    seen.push(n);
                    stack.push(n);
                }
            }
        }
        false
    }

    /// Moves along the straight segment cell by cell.
    fn drive(&self, x: i64, y: i64, vx: i64, vy: i64) -> Step {
        let steps = vx.abs().max(vy.abs());
        for k in 1..=steps {
            let t = k as f64 / steps as f64;
            let px = x + (vx as f64 * t).round() as i64;
            let py = y + (vy as f64 * t).round() as i64;
            match self.at(px, py) {
                Cell::Wall => return Step::Crash,
                Cell::Finish => return Step::Finish,
                Cell::Track => {}
            }
        }
        Step::At(x + vx, y + vy)
    }

    fn successor(&self, state: &[i64], ax: i64, ay: i64) -> StateKey {
        let [x, y, vx, vy] = state[..] else {
            unreachable!("racetrack state has four parts")
        };
        let vx = (vx + ax).clamp(-self.max_speed, self.max_speed);
        let vy = (vy + ay).clamp(-self.max_speed, self.max_speed);
        match self.drive(x, y, vx, vy) {
            Step::Crash => Self::state(self.start.0, self.start.1, 0, 0),
            Step::Finish => Self::finished(),
            Step::At(nx, ny) => Self::state(nx, ny, vx, vy),
        }
    }
}

fn acceleration(action: ActionId) -> (i64, i64) {
    (action.0 as i64 % 3 - 1, action.0 as i64 / 3 - 1)
}

impl MdpModel for Racetrack {
    fn name(&self) -> &str {
        "racetrack"
    }

    fn initial_state(&self) -> StateKey {
        Self::state(self.start.0, self.start.1, 0, 0)
    }

    fn is_terminal(&self, state: &StateKey) -> bool {
        state.parts().len() == 1
    }

    fn action_count(&self, _state: &StateKey) -> usize {
        9
    }

    fn transitions(&self, state: &StateKey, action: ActionId) -> Vec<Outcome> {
        let (ax, ay) = acceleration(action);
        let applied = self.successor(state.parts(), ax, ay);
        let outcome = |successor, probability| Outcome {
            successor,
            probability,
            reward: -1.0,
        };
        if self.p_slip == 0.0 {
            return vec![outcome(applied, 1.0)];
        }
        let slipped = self.successor(state.parts(), 0, 0);
        if slipped == applied {
            vec![outcome(applied, 1.0)]
        } else if self.p_slip == 1.0 {
            vec![outcome(slipped, 1.0)]
        } else {
            vec![
                outcome(applied, 1.0 - self.p_slip),
                outcome(slipped, self.p_slip),
            ]
        }
    }
}
