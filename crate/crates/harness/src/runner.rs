use std::sync::Arc;

use anyhow::Context;
use oga_core::envs::build_environment;
use oga_core::{play_episode, MdpModel};
use rayon::prelude::*;

use crate::config::{AgentSpec, Cell, ExperimentConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub cell_id: usize,
    pub env: String,
    pub agent: AgentSpec,
    pub seed: u64,
    pub total_return: f64,
    pub query_ratio: f64,
    pub decision_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellFailure {
    pub cell_id: usize,
    pub episodes_failed: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentOutput {
    pub records: Vec<RunRecord>,
    pub failures: Vec<CellFailure>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Per-episode seed: the base seed mixed with a hash of (cell, episode).
pub fn episode_seed(base: u64, cell: usize, episode: usize) -> u64 {
    base ^ splitmix64(splitmix64(cell as u64) ^ episode as u64)
}

/// Plays one episode and packages it as a record.
pub fn run_episode(
    model: &dyn MdpModel,
    cell: &Cell,
    env_name: &str,
    horizon: usize,
    recency: u32,
    seed: u64,
) -> oga_core::Result<RunRecord> {
    let result = play_episode(model, &cell.agent.search_config(recency), horizon, seed)?;
    Ok(RunRecord {
        cell_id: cell.id,
        env: env_name.to_string(),
        agent: cell.agent,
        seed,
        total_return: result.total_return,
        query_ratio: result.query_ratio(),
        decision_ms: result.decision_ms,
    })
}

/// Runs every (cell, episode) pair on a pool of `cfg.workers` threads.
/// Records come back in cell-then-episode order whatever the scheduling;
/// failing episodes are dropped and summarised per cell.
pub fn run_experiment(cfg: &ExperimentConfig) -> anyhow::Result<ExperimentOutput> {
    let models: Vec<Arc<dyn MdpModel>> = cfg
        .environments
        .iter()
        .map(|e| build_environment(&e.name, &e.params))
        .collect::<Result<_, _>>()?;
    let cells = cfg.cells();
    let items: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.episodes).map(move |e| (c, e)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .context("building the worker pool")?;
    let results: Vec<oga_core::Result<RunRecord>> = pool.install(|| {
        items
            .par_iter()
            .map(|&(c, e)| {
                let cell = &cells[c];
                let seed = episode_seed(cfg.seed, cell.id, e);
                let env = &cfg.environments[cell.env];
                let mut rec = run_episode(
                    models[cell.env].as_ref(),
                    cell,
                    &env.name,
                    cfg.horizon,
                    cfg.recency,
                    seed,
                )?;
                if !cfg.record_timing {
                    rec.decision_ms = 0.0;
                }
                Ok(rec)
            })
            .collect()
    });

    let mut out = ExperimentOutput::default();
    for ((c, _), result) in items.iter().zip(results) {
        match result {
            Ok(rec) => out.records.push(rec),
            Err(err) => match out.failures.last_mut() {
                Some(f) if f.cell_id == cells[*c].id => f.episodes_failed += 1,
                _ => out.failures.push(CellFailure {
                    cell_id: cells[*c].id,
                    episodes_failed: 1,
                    message: err.to_string(),
                }),
            },
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_differ_across_cells_and_episodes() {
        let mut seen = std::collections::HashSet::new();
        for c in 0..20 {
            for e in 0..50 {
                assert!(seen.insert(episode_seed(42, c, e)));
            }
        }
        assert_ne!(episode_seed(1, 0, 0), episode_seed(2, 0, 0));
    }

    #[test]
    fn one_cell_three_episodes() {
        let cfg = ExperimentConfig::parse(
            r#"
[experiment]
episodes = 3
horizon = 5
record_timing = false
[[environment]]
name = "navigation"
[agents]
variants = "pruned"
budget = 20
"#,
        )
        .unwrap();
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.records.len(), 3);
        assert!(out.failures.is_empty());
        assert!(out
            .records
            .iter()
            .all(|r| r.decision_ms == 0.0 && r.cell_id == 0));
    }
}
