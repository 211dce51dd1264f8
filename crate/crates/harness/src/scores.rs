//! Cross-task agent scores.
//!
//! `perf[i][k]` is the performance of agent `i` on task `k`. Both scores build
//! an antisymmetric agent-vs-agent matrix, normalised by `1/(m-1)` over the
//! `m` tasks, and score agent `i` by the mean of its row over the other
//! `n-1` agents.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::csvio::CsvRow;

#[derive(Debug, Error, PartialEq)]
pub enum ScoreError {
    #[error("need at least 2 agents, got {0}")]
    TooFewAgents(usize),
    #[error("need at least 2 tasks, got {0}")]
    TooFewTasks(usize),
    #[error("agent {0} has {1} task entries, expected {2}")]
    Ragged(usize, usize, usize),
    #[error("performance of agent {0} on task {1} is not finite")]
    NonFinite(usize, usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMatrix {
    pub matrix: Vec<Vec<f64>>,
    pub scores: Vec<f64>,
}

fn score_with(
    perf: &[Vec<f64>],
    term: impl Fn(f64, f64) -> f64,
) -> Result<ScoreMatrix, ScoreError> {
    let n = perf.len();
    if n < 2 {
        return Err(ScoreError::TooFewAgents(n));
    }
    let m = perf[0].len();
    for (i, row) in perf.iter().enumerate() {
        if row.len() != m {
            return Err(ScoreError::Ragged(i, row.len(), m));
        }
        if let Some(k) = row.iter().position(|p| !p.is_finite()) {
            return Err(ScoreError::NonFinite(i, k));
        }
    }
    if m < 2 {
        return Err(ScoreError::TooFewTasks(m));
    }
    let mut matrix = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let s: f64 = (0..m).map(|k| term(perf[i][k], perf[j][k])).sum::<f64>() / (m - 1) as f64;
            matrix[i][j] = s;
            matrix[j][i] = -s;
        }
    }
    let scores = matrix
        .iter()
        .map(|row| row.iter().sum::<f64>() / (n - 1) as f64)
        .collect();
    Ok(ScoreMatrix { matrix, scores })
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Signed win counts per task.
pub fn pairings_score(perf: &[Vec<f64>]) -> Result<ScoreMatrix, ScoreError> {
    score_with(perf, |a, b| sgn(a - b))
}

/// Relative improvements `(a - b) / max(|a|, |b|)`, zero when both are zero.
pub fn relative_improvement_score(perf: &[Vec<f64>]) -> Result<ScoreMatrix, ScoreError> {
    score_with(perf, |a, b| {
        let scale = a.abs().max(b.abs());
        if scale == 0.0 {
            0.0
        } else {
            (a - b) / scale
        }
    })
}

/// Mean returns arranged as agents x tasks.
#[derive(Clone, Debug, PartialEq)]
pub struct PerfTable {
    pub agents: Vec<String>,
    pub tasks: Vec<String>,
    pub perf: Vec<Vec<f64>>,
}

fn describe(row: &CsvRow) -> String {
    let params = match row.variant.as_str() {
        "pruned" => format!("alpha={}", row.alpha),
        "epsilon" => format!("eps_a={},eps_t={}", row.eps_a, row.eps_t),
        "random" => format!("p_abs={}", row.p_abs),
        _ => String::new(),
    };
    format!("{}({params}) pg={} C={}", row.variant, row.pg, row.c)
}

/// Groups rows into a performance table. By default an agent is the full
/// parameter set and a task is (environment, budget). With `by_policy`, the
/// agent is the intra policy alone and every other parameter becomes part of
/// the task. Tasks not covered by every agent are dropped.
pub fn perf_table(rows: &[CsvRow], by_policy: bool) -> PerfTable {
    let mut sums: BTreeMap<(String, String), (f64, usize)> = BTreeMap::new();
    for r in rows {
        let (agent, task) = if by_policy {
            (
                r.policy.clone(),
                format!("{}@{} {}", r.env, r.budget, describe(r)),
            )
        } else {
            (
                format!("{} {}", describe(r), r.policy),
                format!("{}@{}", r.env, r.budget),
            )
        };
        let e = sums.entry((agent, task)).or_insert((0.0, 0));
        e.0 += r.total_return;
        e.1 += 1;
    }
    let mut agents: Vec<String> = sums.keys().map(|k| k.0.clone()).collect();
    agents.dedup();
    let mut tasks: Vec<String> = sums.keys().map(|k| k.1.clone()).collect();
    tasks.sort();
    tasks.dedup();
    tasks.retain(|t| {
        agents
            .iter()
            .all(|a| sums.contains_key(&(a.clone(), t.clone())))
    });
    let perf = agents
        .iter()
        .map(|a| {
            tasks
                .iter()
                .map(|t| {
                    let (s, n) = sums[&(a.clone(), t.clone())];
                    s / n as f64
                })
                .collect()
        })
        .collect();
    PerfTable {
        agents,
        tasks,
        perf,
    }
}

/// Both scores per agent, best pairings score first.
pub fn render_scores(table: &PerfTable) -> Result<String, ScoreError> {
    let pairings = pairings_score(&table.perf)?;
    let rel = relative_improvement_score(&table.perf)?;
    let mut order: Vec<usize> = (0..table.agents.len()).collect();
    order.sort_by(|&a, &b| {
        pairings.scores[b]
            .total_cmp(&pairings.scores[a])
            .then(a.cmp(&b))
    });
    let width = table
        .agents
        .iter()
        .map(String::len)
        .max()
        .unwrap_or(5)
        .max(5);
    let mut out = format!(
        "{} agents over {} tasks\n{:<width$}  {:>9}  {:>9}\n",
        table.agents.len(),
        table.tasks.len(),
        "agent",
        "pairings",
        "rel",
    );
    for i in order {
        let _ = writeln!(
            out,
            "{:<width$}  {:>9.4}  {:>9.4}",
            table.agents[i], pairings.scores[i], rel.scores[i]
        );
    }
    Ok(out)
}
