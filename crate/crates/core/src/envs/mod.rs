//! Environments and fixtures.
//!
//! Every model here is declarative (full outcome supports are available) and
//! immutable after construction. [`build_environment`] is the catalogue used
//! by the experiment harness; the fixtures are also constructible directly.

mod chain;
mod figure_one;
mod game_of_life;
mod navigation;
mod racetrack;
mod random_mdp;
mod sailing;
mod tireworld;

use std::collections::BTreeMap;
use std::str::FromStr;
use std::sync::Arc;

pub use chain::ChainFixture;
pub use figure_one::FigureOneTree;
pub use game_of_life::{GameOfLife, GameOfLifeConfig};
pub use navigation::{Navigation, NavigationConfig};
pub use racetrack::{Racetrack, RacetrackConfig, DEFAULT_TRACK};
pub use random_mdp::{RandomMdp, RandomMdpConfig};
pub use sailing::{Sailing, SailingConfig};
pub use tireworld::{Tireworld, TireworldConfig};

use crate::error::{Error, Result};
use crate::mdp::MdpModel;

pub const CATALOGUE: [&str; 8] = [
    "figure1",
    "chain",
    "navigation",
    "racetrack",
    "sailing",
    "game_of_life",
    "tireworld",
    "random",
];

/// String-valued environment parameters as read from a config section.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EnvParams(BTreeMap<String, String>);

impl EnvParams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.insert(key, value);
        self
    }

    pub fn insert(&mut self, key: &str, value: impl ToString) {
        self.0
            .insert(key.trim().to_string(), value.to_string().trim().to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Parses `key` if present, otherwise returns `default`.
    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|_| Error::Config(format!("cannot parse {key} = '{raw}'"))),
        }
    }

    /// Parses a comma-separated list.
    pub fn list_or<T: FromStr>(&self, key: &str, default: Vec<T>) -> Result<Vec<T>> {
        match self.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("cannot parse {key} = '{raw}'")))
                })
                .collect(),
        }
    }

    fn expect_only(&self, env: &str, known: &[&str]) -> Result<()> {
        for key in self.0.keys() {
            if !known.contains(&key.as_str()) {
                return Err(Error::Config(format!(
                    "unknown parameter '{key}' for environment '{env}' (expected one of: {})",
                    known.join(", ")
                )));
            }
        }
        Ok(())
    }
}

/// Parses "x,y" into a cell.
fn parse_cell(params: &EnvParams, key: &str) -> Result<Option<(usize, usize)>> {
    let Some(raw) = params.get(key) else {
        return Ok(None);
    };
    let parts: Vec<usize> = params.list_or(key, vec![])?;
    match parts[..] {
        [x, y] => Ok(Some((x, y))),
        _ => Err(Error::Config(format!("{key} = '{raw}' is not an x,y cell"))),
    }
}

pub fn build_environment(name: &str, params: &EnvParams) -> Result<Arc<dyn MdpModel>> {
    let model: Arc<dyn MdpModel> = match name {
        "figure1" => {
            params.expect_only(name, &["rewards"])?;
            let rewards = params.list_or("rewards", FigureOneTree::default().rewards)?;
            Arc::new(FigureOneTree::with_rewards(rewards)?)
        }
        "chain" => {
            params.expect_only(name, &[])?;
            Arc::new(ChainFixture)
        }
        "navigation" => {
            params.expect_only(name, &["width", "height", "disappear", "start", "goal"])?;
            let d = NavigationConfig::default();
            Arc::new(Navigation::new(NavigationConfig {
                width: params.parse_or("width", d.width)?,
                height: params.parse_or("height", d.height)?,
                disappear: params.parse_or("disappear", d.disappear)?,
                start: parse_cell(params, "start")?.unwrap_or(d.start),
                goal: parse_cell(params, "goal")?.or(d.goal),
            })?)
        }
        "racetrack" => {
            params.expect_only(name, &["track", "p_slip", "max_speed"])?;
            let d = RacetrackConfig::default();
            let track = match params.get("track") {
                Some(raw) => raw
                    .split(['/', '\n'])
                    .map(str::trim)
                    .filter(|r| !r.is_empty())
                    .map(String::from)
                    .collect(),
                None => d.track,
            };
            Arc::new(Racetrack::new(RacetrackConfig {
                track,
                p_slip: params.parse_or("p_slip", d.p_slip)?,
                max_speed: params.parse_or("max_speed", d.max_speed)?,
            })?)
        }
        "sailing" => {
            params.expect_only(
                name,
                &["size", "wind_stay", "wind_turn", "costs", "start_wind"],
            )?;
            let d = SailingConfig::default();
            let stay: f64 = params.parse_or("wind_stay", 0.4)?;
            let turn: f64 = params.parse_or("wind_turn", 0.3)?;
            Arc::new(Sailing::new(SailingConfig {
                size: params.parse_or("size", d.size)?,
                wind_change: SailingConfig::banded_wind(stay, turn),
                costs: params.list_or("costs", d.costs)?,
                start_wind: params.parse_or("start_wind", d.start_wind)?,
            })?)
        }
        "game_of_life" => {
            params.expect_only(name, &["size", "noise", "initial"])?;
            let d = GameOfLifeConfig::default();
            Arc::new(GameOfLife::new(GameOfLifeConfig {
                size: params.parse_or("size", d.size)?,
                noise: params.parse_or("noise", d.noise)?,
                initial: params.list_or("initial", d.initial)?,
            })?)
        }
        "tireworld" => {
            params.expect_only(name, &["size", "p_flat"])?;
            let d = TireworldConfig::default();
            Arc::new(Tireworld::new(TireworldConfig {
                size: params.parse_or("size", d.size)?,
                p_flat: params.parse_or("p_flat", d.p_flat)?,
            })?)
        }
        "random" => {
            params.expect_only(name, &["seed", "states", "max_actions", "terminal_states"])?;
            let d = RandomMdpConfig::default();
            let cfg = RandomMdpConfig {
                states: params.parse_or("states", d.states)?,
                max_actions: params.parse_or("max_actions", d.max_actions)?,
                terminal_states: params.parse_or("terminal_states", d.terminal_states)?,
            };
            Arc::new(RandomMdp::generate(params.parse_or("seed", 0u64)?, &cfg))
        }
        other => {
            return Err(Error::Config(format!(
                "unknown environment '{other}' (catalogue: {})",
                CATALOGUE.join(", ")
            )))
        }
    };
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::{converge_abstraction, AbstractionConfig};
    use crate::graph::SearchGraph;
    use crate::mdp::audit_reachable;
    use crate::planner::expand_fully;

    #[test]
    fn catalogue_builds_and_audits() {
        for name in CATALOGUE {
            let m = build_environment(name, &EnvParams::new()).unwrap();
            let n = audit_reachable(m.as_ref(), 6, 5_000).unwrap();
            assert!(n >= 2, "{name}");
        }
    }

    #[test]
    fn unknown_names_and_keys_fail() {
        let Err(err) = build_environment("traffic", &EnvParams::new()) else {
            panic!("unknown name accepted");
        };
        assert!(err.to_string().contains("traffic"));
        let bad = EnvParams::new().with("widht", 4);
        assert!(build_environment("navigation", &bad).is_err());
        let bad = EnvParams::new().with("width", "four");
        assert!(build_environment("navigation", &bad).is_err());
    }

    #[test]
    fn params_reach_the_model() {
        let p = EnvParams::new()
            .with("width", 3)
            .with("height", 3)
            .with("disappear", 0.0)
            .with("goal", "2,0");
        let m = build_environment("navigation", &p).unwrap();
        let actions = m.enumerate_actions(&m.initial_state()).unwrap();
        assert_eq!(actions.len(), 2);
        let p = EnvParams::new().with("track", "####/#SF#/####");
        assert!(build_environment("racetrack", &p).is_ok());
    }

    fn has_grouped_pair_at_root(model: &dyn MdpModel) -> bool {
        let cfg = AbstractionConfig::pruned(0.0);
        let mut g = SearchGraph::new(3, cfg.bootstrap());
        expand_fully(model, &mut g, &[model.initial_state()]).unwrap();
        converge_abstraction(&mut g, &cfg);
        g.audit().unwrap();
        g.layer_q_groups(0)
            .iter()
            .any(|&a| g.q_group(a).members.len() >= 2)
    }

    #[test]
    fn grid_domains_admit_symmetric_pairs() {
        // wind from the south-west makes N and E equally costly at the start
        let cases = [
            ("navigation", EnvParams::new()),
            ("racetrack", EnvParams::new()),
            ("sailing", EnvParams::new().with("start_wind", 5)),
        ];
        for (name, params) in cases {
            let m = build_environment(name, &params).unwrap();
            assert!(has_grouped_pair_at_root(m.as_ref()), "{name}");
        }
    }
}
