//! Experiment configuration files.
//!
//! A config is a TOML document with one `[experiment]` table, one or more
//! `[[environment]]` tables, an `[agents]` grid and an optional `[bench]`
//! table. Grid axes take a scalar or a list; `inf` is a valid `eps_a`.

use std::fmt;
use std::path::Path;

use anyhow::{bail, Context};
use oga_core::envs::EnvParams;
use oga_core::{AbstractionConfig, AbstractionMode, IntraPolicy, SearchConfig};
use serde::Deserialize;

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(untagged)]
enum Flag {
    Bool(bool),
    Int(u8),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    episodes: Option<usize>,
    seed: Option<u64>,
    horizon: Option<usize>,
    recency: Option<u32>,
    workers: Option<usize>,
    record_timing: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAgents {
    variants: OneOrMany<String>,
    alpha: Option<OneOrMany<f64>>,
    eps_a: Option<OneOrMany<f64>>,
    eps_t: Option<OneOrMany<f64>>,
    p_abs: Option<OneOrMany<f64>>,
    pg: Option<OneOrMany<Flag>>,
    policy: Option<OneOrMany<String>>,
    #[serde(rename = "C")]
    c: Option<OneOrMany<f64>>,
    budget: Option<OneOrMany<usize>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBench {
    budgets: Option<OneOrMany<usize>>,
    states: Option<usize>,
    repeats: Option<usize>,
    walk: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: RawExperiment,
    environment: Vec<toml::Table>,
    agents: RawAgents,
    bench: Option<RawBench>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VariantKind {
    None,
    Pruned,
    Epsilon,
    Random,
}

impl VariantKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VariantKind::None => "none",
            VariantKind::Pruned => "pruned",
            VariantKind::Epsilon => "epsilon",
            VariantKind::Random => "random",
        }
    }

    pub fn parse(s: &str) -> anyhow::Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "none" => VariantKind::None,
            "pruned" => VariantKind::Pruned,
            "epsilon" => VariantKind::Epsilon,
            "random" => VariantKind::Random,
            other => bail!("unknown abstraction variant '{other}' (none, pruned, epsilon, random)"),
        })
    }
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One agent of the grid. Parameters that do not apply to the variant are 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AgentSpec {
    pub variant: VariantKind,
    pub alpha: f64,
    pub eps_a: f64,
    pub eps_t: f64,
    pub p_abs: f64,
    pub pg: bool,
    pub policy: IntraPolicy,
    pub c: f64,
    pub budget: usize,
}

impl AgentSpec {
    pub fn abstraction(&self, recency: u32) -> AbstractionMode {
        let cfg = match self.variant {
            VariantKind::None => return AbstractionMode::None,
            VariantKind::Pruned => AbstractionConfig::pruned(self.alpha),
            VariantKind::Epsilon => AbstractionConfig::epsilon(self.eps_a, self.eps_t),
            VariantKind::Random => AbstractionConfig::random(self.p_abs),
        };
        AbstractionMode::Oga(cfg.with_pg(self.pg).with_recency(recency))
    }

    pub fn search_config(&self, recency: u32) -> SearchConfig {
        SearchConfig {
            budget: self.budget,
            exploration_c: self.c,
            policy: self.policy,
            abstraction: self.abstraction(recency),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvSpec {
    pub name: String,
    pub params: EnvParams,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentGrid {
    pub variants: Vec<VariantKind>,
    pub alpha: Vec<f64>,
    pub eps_a: Vec<f64>,
    pub eps_t: Vec<f64>,
    pub p_abs: Vec<f64>,
    pub pg: Vec<bool>,
    pub policy: Vec<IntraPolicy>,
    pub c: Vec<f64>,
    pub budget: Vec<usize>,
}

impl AgentGrid {
    /// All agents in canonical order. PG is only varied for variants with
    /// state abstraction, and the abstraction-free baseline has no intra
    /// policy axis (it never queries one).
    pub fn agents(&self) -> Vec<AgentSpec> {
        let mut out = Vec::new();
        for &variant in &self.variants {
            let params: Vec<(f64, f64, f64, f64)> = match variant {
                VariantKind::None => vec![(0.0, 0.0, 0.0, 0.0)],
                VariantKind::Pruned => self.alpha.iter().map(|&a| (a, 0.0, 0.0, 0.0)).collect(),
                VariantKind::Epsilon => self
                    .eps_a
                    .iter()
                    .flat_map(|&ea| self.eps_t.iter().map(move |&et| (0.0, ea, et, 0.0)))
                    .collect(),
                VariantKind::Random => self.p_abs.iter().map(|&p| (0.0, 0.0, 0.0, p)).collect(),
            };
            let pgs: &[bool] = match variant {
                VariantKind::Pruned | VariantKind::Epsilon => &self.pg,
                _ => &[false],
            };
            let policies: &[IntraPolicy] = match variant {
                VariantKind::None => &[IntraPolicy::Random],
                _ => &self.policy,
            };
            for &(alpha, eps_a, eps_t, p_abs) in &params {
                for &pg in pgs {
                    for &policy in policies {
                        for &c in &self.c {
                            for &budget in &self.budget {
                                out.push(AgentSpec {
                                    variant,
                                    alpha,
                                    eps_a,
                                    eps_t,
                                    p_abs,
                                    pg,
                                    policy,
                                    c,
                                    budget,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub budgets: Vec<usize>,
    /// Decision states sampled per environment.
    pub states: usize,
    /// Timed passes over the sampled states.
    pub repeats: usize,
    /// Length of the random walk used to sample decision states.
    pub walk: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            budgets: vec![100, 2000],
            states: 8,
            repeats: 3,
            walk: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub episodes: usize,
    pub seed: u64,
    pub horizon: usize,
    pub recency: u32,
    /// Worker threads; 0 means one per core.
    pub workers: usize,
    /// When false, `decision_ms` is written as 0 so output is reproducible.
    pub record_timing: bool,
    pub environments: Vec<EnvSpec>,
    pub agents: AgentGrid,
    pub bench: BenchConfig,
}

/// One (environment, agent) combination.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub id: usize,
    pub env: usize,
    pub agent: AgentSpec,
}

fn param_string(key: &str, value: &toml::Value) -> anyhow::Result<String> {
    Ok(match value {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        toml::Value::Array(items) => items
            .iter()
            .map(|v| param_string(key, v))
            .collect::<anyhow::Result<Vec<_>>>()?
            .join(","),
        other => bail!("environment parameter {key} has unsupported value {other}"),
    })
}

fn non_empty<T>(name: &str, v: Vec<T>) -> anyhow::Result<Vec<T>> {
    if v.is_empty() {
        bail!("grid axis '{name}' is empty");
    }
    Ok(v)
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let raw: RawConfig = toml::from_str(text)?;
        let e = raw.experiment;
        let episodes = e.episodes.unwrap_or(2000);
        if episodes == 0 {
            bail!("episodes must be at least 1");
        }
        let horizon = e.horizon.unwrap_or(50);
        if horizon == 0 {
            bail!("horizon must be at least 1");
        }

        let mut environments = Vec::new();
        for table in raw.environment {
            let mut params = EnvParams::new();
            let mut name = None;
            for (key, value) in &table {
                if key == "name" {
                    name = Some(param_string(key, value)?);
                } else {
                    params.insert(key, param_string(key, value)?);
                }
            }
            let Some(name) = name else {
                bail!("an [[environment]] table is missing its name");
            };
            oga_core::envs::build_environment(&name, &params)?;
            environments.push(EnvSpec { name, params });
        }
        let environments = non_empty("environment", environments)?;

        let a = raw.agents;
        let list =
            |v: Option<OneOrMany<f64>>, default: f64| v.map_or(vec![default], OneOrMany::into_vec);
        let variants = a
            .variants
            .into_vec()
            .iter()
            .map(|v| VariantKind::parse(v))
            .collect::<anyhow::Result<Vec<_>>>()?;
        let policy = a
            .policy
            .map_or(vec!["RANDOM".to_string()], OneOrMany::into_vec)
            .iter()
            .map(|p| p.parse::<IntraPolicy>())
            .collect::<Result<Vec<_>, _>>()?;
        let pg =
            a.pg.map_or(vec![Flag::Bool(false)], OneOrMany::into_vec)
                .into_iter()
                .map(|f| match f {
                    Flag::Bool(b) => Ok(b),
                    Flag::Int(0) => Ok(false),
                    Flag::Int(1) => Ok(true),
                    Flag::Int(other) => bail!("pg must be 0 or 1, got {other}"),
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
        let agents = AgentGrid {
            variants: non_empty("variants", variants)?,
            alpha: non_empty("alpha", list(a.alpha, 0.0))?,
            eps_a: non_empty("eps_a", list(a.eps_a, 0.0))?,
            eps_t: non_empty("eps_t", list(a.eps_t, 0.0))?,
            p_abs: non_empty("p_abs", list(a.p_abs, 0.5))?,
            pg: non_empty("pg", pg)?,
            policy: non_empty("policy", policy)?,
            c: non_empty("C", list(a.c, 2.0))?,
            budget: non_empty("budget", a.budget.map_or(vec![100], OneOrMany::into_vec))?,
        };

        let recency = e.recency.unwrap_or(AbstractionConfig::DEFAULT_RECENCY);
        for agent in agents.agents() {
            agent
                .search_config(recency)
                .validate()
                .with_context(|| format!("agent {agent:?}"))?;
        }

        let bench = match raw.bench {
            None => BenchConfig::default(),
            Some(b) => {
                let d = BenchConfig::default();
                BenchConfig {
                    budgets: non_empty(
                        "bench.budgets",
                        b.budgets.map_or(d.budgets, OneOrMany::into_vec),
                    )?,
                    states: b.states.unwrap_or(d.states).max(1),
                    repeats: b.repeats.unwrap_or(d.repeats).max(1),
                    walk: b.walk.unwrap_or(d.walk),
                }
            }
        };

        Ok(ExperimentConfig {
            episodes,
            seed: e.seed.unwrap_or(0),
            horizon,
            recency,
            workers: e.workers.unwrap_or(0),
            record_timing: e.record_timing.unwrap_or(true),
            environments,
            agents,
            bench,
        })
    }

    /// Cells in canonical order: environments outermost, then agents.
    pub fn cells(&self) -> Vec<Cell> {
        let agents = self.agents.agents();
        (0..self.environments.len())
            .flat_map(|env| agents.iter().map(move |&agent| (env, agent)))
            .enumerate()
            .map(|(id, (env, agent))| Cell { id, env, agent })
            .collect()
    }
}
