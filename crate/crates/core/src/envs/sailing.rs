use crate::error::{Error, Result};
use crate::mdp::{ActionId, MdpModel, Outcome, StateKey};

// Headings clockwise from north.
const HEADINGS: [(i64, i64); 8] = [
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
];

#[derive(Clone, Debug, PartialEq)]
pub struct SailingConfig {
    pub size: usize,
    /// Row-stochastic 8x8 matrix: next wind direction given the current one.
    pub wind_change: Vec<Vec<f64>>,
    /// Cost by angle to the wind for angles 1..=4 (45 to 180 degrees).
    /// Sailing straight into the wind is not allowed.
    pub costs: Vec<f64>,
    pub start_wind: usize,
}

impl SailingConfig {
    /// Wind keeps its direction with `stay` and turns one step either way
    /// with `turn` each.
    pub fn banded_wind(stay: f64, turn: f64) -> Vec<Vec<f64>> {
        (0..8)
            .map(|w| {
                let mut row = vec![0.0; 8];
                row[w] += stay;
                row[(w + 1) % 8] += turn;
                row[(w + 7) % 8] += turn;
                row
            })
            .collect()
    }
}

impl Default for SailingConfig {
    fn default() -> Self {
        SailingConfig {
            size: 5,
            wind_change: Self::banded_wind(0.4, 0.3),
            costs: vec![4.0, 3.0, 2.0, 1.0],
            start_wind: 0,
        }
    }
}

/// Sailing on a square lake from the south-west to the north-east corner.
/// State is (x, y, wind direction); the wind direction is the one it blows
/// from and changes stochastically every step.
#[derive(Clone, Debug)]
pub struct Sailing {
    size: i64,
    wind: Vec<Vec<f64>>,
    costs: Vec<f64>,
    start_wind: i64,
}

fn angle(heading: usize, wind: usize) -> usize {
    let d = heading.abs_diff(wind);
    d.min(8 - d)
}

impl Sailing {
    pub fn new(config: SailingConfig) -> Result<Self> {
        if config.size < 2 {
            return Err(Error::Config("sailing lake must be at least 2x2".into()));
        }
        if config.wind_change.len() != 8 {
            return Err(Error::Config("wind matrix must have 8 rows".into()));
        }
        for (w, row) in config.wind_change.iter().enumerate() {
            let total: f64 = row.iter().sum();
            if row.len() != 8
                || row.iter().any(|&p| !(0.0..=1.0).contains(&p))
                || (total - 1.0).abs() > 1e-9
            {
                return Err(Error::Config(format!("wind row {w} is not a distribution")));
            }
        }
        if config.costs.len() != 4 || config.costs.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::Config(
                "sailing needs four non-negative costs".into(),
            ));
        }
        if config.start_wind >= 8 {
            return Err(Error::Config(format!(
                "start wind {} not in 0..8",
                config.start_wind
            )));
        }
        Ok(Sailing {
            size: config.size as i64,
            wind: config.wind_change,
            costs: config.costs,
            start_wind: config.start_wind as i64,
        })
    }

    pub fn state(x: i64, y: i64, wind: i64) -> StateKey {
        StateKey::new([x, y, wind])
    }

    /// Headings that stay on the lake and do not point into the wind.
    fn headings(&self, state: &StateKey) -> impl Iterator<Item = usize> + '_ {
        let [x, y, w] = *state.parts() else {
            unreachable!("sailing state has three parts")
        };
        (0..8).filter(move |&h| {
            let (nx, ny) = (x + HEADINGS[h].0, y + HEADINGS[h].1);
            angle(h, w as usize) > 0 && nx >= 0 && ny >= 0 && nx < self.size && ny < self.size
        })
    }
}

impl MdpModel for Sailing {
    fn name(&self) -> &str {
        "sailing"
    }

    fn initial_state(&self) -> StateKey {
        Self::state(0, 0, self.start_wind)
    }

    fn is_terminal(&self, state: &StateKey) -> bool {
        state.parts()[..2] == [self.size - 1, self.size - 1]
    }

    fn action_count(&self, state: &StateKey) -> usize {
        self.headings(state).count()
    }

    fn transitions(&self, state: &StateKey, action: ActionId) -> Vec<Outcome> {
        let [x, y, w] = *state.parts() else {
            unreachable!("sailing state has three parts")
        };
        let h = self.headings(state).nth(action.0).expect("checked action");
        let reward = -self.costs[angle(h, w as usize) - 1];
        let (nx, ny) = (x + HEADINGS[h].0, y + HEADINGS[h].1);
        self.wind[w as usize]
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(nw, &p)| Outcome {
                successor: Self::state(nx, ny, nw as i64),
                probability: p,
                reward,
            })
            .collect()
    }
}
