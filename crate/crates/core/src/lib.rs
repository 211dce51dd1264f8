//! Monte Carlo Tree Search over layered MDPs with on-the-go state/action-pair
//! abstractions and pluggable intra-abstraction policies.
//!
//! The crate is split along the lines of the search pipeline:
//!
//! - [`mdp`]: the environment contract ([`MdpModel`]) and layered-state helpers.
//! - [`graph`]: the layered search DAG with transpositions and abstract nodes.
//! - [`abstraction`]: building and maintaining ASAP-style abstractions
//!   (pruned, epsilon-relaxed and random variants, partial grouping).
//! - [`policy`]: UCB selection over abstract actions, intra-abstraction
//!   policies and the root decision rule.
//! - [`planner`]: the MCTS loop and the episode driver.
//! - [`envs`]: desk-scale environments and hand-built fixtures.
//! - [`oracle`]: exact backward induction for small instances.

pub mod abstraction;
pub mod envs;
pub mod error;
pub mod graph;
pub mod mdp;
pub mod oracle;
pub mod planner;
pub mod policy;

pub use abstraction::{AbstractionConfig, AbstractionMode, FixedPartition, OgaVariant, Partition};
pub use error::{Error, Result};
pub use graph::{QAbsId, QId, SearchGraph, StateAbsId, StateId};
pub use mdp::{ActionId, LayeredState, MdpModel, Outcome, StateKey};
pub use planner::{play_episode, search, EpisodeResult, SearchConfig, SearchResult};
pub use policy::{IntraPolicy, QStatsAccumulator};

/// Absolute tolerance used for comparing probabilities and rewards.
pub const TOLERANCE: f64 = 1e-9;
