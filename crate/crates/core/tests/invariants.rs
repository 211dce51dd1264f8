use oga_core::abstraction::{converge_abstraction, prune_outcomes, q_compatible, Partition};
use oga_core::envs::{Navigation, NavigationConfig, RandomMdp, RandomMdpConfig};
use oga_core::graph::SearchGraph;
use oga_core::{
    search, AbstractionConfig, AbstractionMode, IntraPolicy, MdpModel, QId, SearchConfig,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn variant() -> impl Strategy<Value = AbstractionConfig> {
    prop_oneof![
        (0.0..=1.0f64).prop_map(AbstractionConfig::pruned),
        (
            prop_oneof![Just(0.0), Just(0.5), Just(f64::INFINITY)],
            0.0..=2.0f64
        )
            .prop_map(|(a, t)| AbstractionConfig::epsilon(a, t)),
        (0.0..=1.0f64).prop_map(AbstractionConfig::random),
    ]
}

fn config() -> impl Strategy<Value = AbstractionConfig> {
    (variant(), any::<bool>(), 1u32..6).prop_map(|(c, pg, k)| c.with_pg(pg).with_recency(k))
}

fn policy() -> impl Strategy<Value = IntraPolicy> {
    (0..IntraPolicy::ALL.len()).prop_map(|i| IntraPolicy::ALL[i])
}

fn navigation() -> Navigation {
    Navigation::new(NavigationConfig {
        width: 4,
        height: 4,
        disappear: 0.2,
        ..Default::default()
    })
    .unwrap()
}

fn all_qs(g: &SearchGraph) -> Vec<QId> {
    (0..g.q_count() as u32).map(QId).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn searches_keep_partitions_and_aggregates_consistent(
        cfg in config(),
        policy in policy(),
        seed in any::<u64>(),
        mdp_seed in 0u64..1000,
        budget in 1usize..400,
    ) {
        let models: [Box<dyn MdpModel>; 2] = [
            Box::new(navigation()),
            Box::new(RandomMdp::generate(mdp_seed, &RandomMdpConfig::default())),
        ];
        for m in &models {
            let sc = SearchConfig {
                budget,
                policy,
                abstraction: AbstractionMode::Oga(cfg),
                ..Default::default()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let res = search(m.as_ref(), &m.initial_state(), 6, &sc, &mut rng).unwrap();
            res.graph.audit().unwrap();
            let root = res.graph.state(res.root);
            prop_assert_eq!(root.total_child_visits, budget as u64);
            prop_assert!(res.counters.queried <= res.counters.steps);
            prop_assert!(res.counters.steps <= (budget * 6) as u64);
        }
    }

    #[test]
    fn recency_checks_count_every_kth_visit(
        alpha in 0.0..=1.0f64,
        k in 1u32..6,
        seed in any::<u64>(),
        budget in 1usize..300,
    ) {
        let m = navigation();
        let sc = SearchConfig {
            budget,
            abstraction: AbstractionMode::Oga(AbstractionConfig::pruned(alpha).with_recency(k)),
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let res = search(&m, &m.initial_state(), 6, &sc, &mut rng).unwrap();
        let expected: u64 = all_qs(&res.graph)
            .into_iter()
            .map(|q| res.graph.q(q).visits / u64::from(k))
            .sum();
        prop_assert_eq!(res.graph.recency_checks, expected);
    }

    #[test]
    fn compatibility_is_symmetric_and_reflexive(
        eps_a in prop_oneof![Just(0.0), 0.0..2.0f64, Just(f64::INFINITY)],
        eps_t in 0.0..=2.0f64,
        seed in any::<u64>(),
    ) {
        let m = navigation();
        let cfg = AbstractionConfig::epsilon(eps_a, eps_t);
        let sc = SearchConfig {
            budget: 200,
            abstraction: AbstractionMode::Oga(cfg),
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = search(&m, &m.initial_state(), 5, &sc, &mut rng).unwrap().graph;
        for layer in 0..g.horizon() {
            let qs = g.layer_qnodes(layer);
            for &a in qs {
                prop_assert!(q_compatible(&g, a, a, &cfg));
                for &b in qs {
                    prop_assert_eq!(q_compatible(&g, a, b, &cfg), q_compatible(&g, b, a, &cfg));
                }
            }
        }
    }

    #[test]
    fn convergence_is_idempotent(
        cfg in config().prop_filter("deterministic variants", |c| {
            !matches!(c.variant, oga_core::OgaVariant::Random { .. })
        }),
        seed in any::<u64>(),
    ) {
        let m = navigation();
        let sc = SearchConfig {
            budget: 150,
            abstraction: AbstractionMode::Oga(cfg),
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = search(&m, &m.initial_state(), 5, &sc, &mut rng).unwrap().graph;
        let first = converge_abstraction(&mut g, &cfg);
        g.audit().unwrap();
        let second = converge_abstraction(&mut g, &cfg);
        prop_assert_eq!(&first, &second);
        prop_assert_eq!(first, Partition::of(&g));
    }

    #[test]
    fn pruning_keeps_exactly_the_heavy_outcomes(
        probs in proptest::collection::vec(0.001..1.0f64, 1..8),
        alpha in 0.0..=1.0f64,
    ) {
        let total: f64 = probs.iter().sum();
        let outcomes: Vec<(usize, f64)> = probs.iter().map(|p| p / total).enumerate().collect();
        let kept = prune_outcomes(&outcomes, alpha);
        let max = outcomes.iter().map(|o| o.1).fold(0.0, f64::max);
        for o in &outcomes {
            prop_assert_eq!(kept.contains(o), o.1 > alpha * max);
        }
        if alpha < 1.0 {
            prop_assert!(!kept.is_empty());
        }
    }
}
