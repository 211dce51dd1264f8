//! The depth-1 demonstration: with the two best actions forced into one
//! abstract node, RANDOM settles for their average while UCT finds the best.

use std::sync::Arc;

use oga_core::envs::FigureOneTree;
use oga_core::oracle::{optimal_actions, solve};
use oga_core::{
    search, AbstractionMode, ActionId, FixedPartition, IntraPolicy, MdpModel, SearchConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bench::median;

/// Root partition giving action `a` the label `labels[a]`.
pub fn root_partition(model: &FigureOneTree, labels: &[u32]) -> FixedPartition {
    let mut p = FixedPartition::new();
    for (a, &label) in labels.iter().enumerate() {
        p.insert(0, model.initial_state(), ActionId(a), label);
    }
    p
}

/// `{{0,1},{2,3}}` over the default rewards.
pub fn paired_partition() -> FixedPartition {
    root_partition(&FigureOneTree::default(), &[0, 0, 1, 1])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decision {
    pub action: ActionId,
    pub reward: f64,
    /// Share of root visits spent on optimal actions.
    pub optimal_fraction: f64,
}

pub fn decide(
    model: &FigureOneTree,
    partition: Arc<FixedPartition>,
    policy: IntraPolicy,
    budget: usize,
    seed: u64,
) -> oga_core::Result<Decision> {
    let cfg = SearchConfig {
        budget,
        policy,
        abstraction: AbstractionMode::Fixed(partition),
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let res = search(model, &model.initial_state(), 1, &cfg, &mut rng)?;
    let table = solve(model, 1)?;
    let best = optimal_actions(&table, 0, &model.initial_state());
    Ok(Decision {
        action: res.action,
        reward: model.rewards[res.action.0],
        optimal_fraction: res.root_visit_fraction(&best),
    })
}

/// Median optimal-action visit fraction over `seeds` searches per budget.
pub fn visit_fraction_table(
    policy: IntraPolicy,
    budgets: &[usize],
    seeds: usize,
    base_seed: u64,
) -> oga_core::Result<Vec<(usize, f64)>> {
    let model = FigureOneTree::default();
    let partition = Arc::new(paired_partition());
    budgets
        .iter()
        .map(|&budget| {
            let mut fractions = (0..seeds as u64)
                .map(|s| {
                    Ok(
                        decide(&model, partition.clone(), policy, budget, base_seed + s)?
                            .optimal_fraction,
                    )
                })
                .collect::<oga_core::Result<Vec<f64>>>()?;
            Ok((budget, median(&mut fractions).unwrap_or(0.0)))
        })
        .collect()
}
