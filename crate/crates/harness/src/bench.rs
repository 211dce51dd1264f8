//! Decision-time overhead of the UCT intra policy relative to RANDOM.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use oga_core::{
    search, AbstractionConfig, AbstractionMode, ActionId, IntraPolicy, MdpModel, SearchConfig,
    StateKey,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::BenchConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub env: String,
    pub budget: usize,
    pub random_ms: f64,
    pub uct_ms: f64,
}

impl BenchRow {
    /// Relative overhead of UCT over RANDOM.
    pub fn overhead(&self) -> f64 {
        self.uct_ms / self.random_ms - 1.0
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

impl BenchReport {
    pub fn median_overhead(&self, budget: usize) -> Option<f64> {
        let mut o: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.budget == budget)
            .map(BenchRow::overhead)
            .collect();
        median(&mut o)
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "{:<14} {:>7} {:>12} {:>12} {:>9}\n",
            "env", "budget", "RANDOM ms", "UCT ms", "overhead"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<14} {:>7} {:>12.3} {:>12.3} {:>8.2}%",
                r.env,
                r.budget,
                r.random_ms,
                r.uct_ms,
                100.0 * r.overhead()
            );
        }
        let mut budgets: Vec<usize> = self.rows.iter().map(|r| r.budget).collect();
        budgets.sort_unstable();
        budgets.dedup();
        for b in budgets {
            if let Some(m) = self.median_overhead(b) {
                let _ = writeln!(out, "median overhead at {b} iterations: {:.2}%", 100.0 * m);
            }
        }
        out
    }
}

/// Non-terminal states reached by uniformly random walks of `walk` steps.
pub fn decision_states(
    model: &dyn MdpModel,
    count: usize,
    walk: usize,
    seed: u64,
) -> Vec<StateKey> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = Vec::with_capacity(count);
    while states.len() < count {
        let mut s = model.initial_state();
        for _ in 0..walk {
            if model.is_terminal(&s) {
                break;
            }
            let a = ActionId(rng.gen_range(0..model.action_count(&s)));
            let next = model
                .sample_transition(&s, a, &mut rng)
                .expect("legal action")
                .successor;
            if model.is_terminal(&next) {
                break;
            }
            s = next;
        }
        states.push(s);
    }
    states
}

/// Times (0, 0.8)-OGA searches with the UCT and RANDOM intra policies on the
/// same decision states and seeds, interleaving the two to share drift.
pub fn benchmark_overhead(
    envs: &[(String, Arc<dyn MdpModel>)],
    cfg: &BenchConfig,
    horizon: usize,
    recency: u32,
    seed: u64,
) -> oga_core::Result<BenchReport> {
    let abstraction =
        AbstractionMode::Oga(AbstractionConfig::epsilon(0.0, 0.8).with_recency(recency));
    let mut report = BenchReport::default();
    for (name, model) in envs {
        let states = decision_states(model.as_ref(), cfg.states, cfg.walk, seed);
        for &budget in &cfg.budgets {
            let config = |policy| SearchConfig {
                budget,
                policy,
                abstraction: abstraction.clone(),
                ..Default::default()
            };
            let (random_cfg, uct_cfg) = (config(IntraPolicy::Random), config(IntraPolicy::Uct));
            let mut elapsed = [0.0f64; 2];
            // one untimed pass to warm caches and the allocator
            for rep in 0..=cfg.repeats {
                for (i, s) in states.iter().enumerate() {
                    let order = if (rep + i) % 2 == 0 { [0, 1] } else { [1, 0] };
                    for which in order {
                        let c = if which == 0 { &random_cfg } else { &uct_cfg };
                        let mut rng =
                            ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9e37_79b9));
                        let start = Instant::now();
                        let res = search(model.as_ref(), s, horizon, c, &mut rng)?;
                        let t = start.elapsed().as_secs_f64() * 1e3;
                        std::hint::black_box(res.action);
                        if rep > 0 {
                            elapsed[which] += t;
                        }
                    }
                }
            }
            let n = (cfg.repeats * states.len()) as f64;
            report.rows.push(BenchRow {
                env: name.clone(),
                budget,
                random_ms: elapsed[0] / n,
                uct_ms: elapsed[1] / n,
            });
        }
    }
    Ok(report)
}
