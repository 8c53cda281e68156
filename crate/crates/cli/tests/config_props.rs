#![allow(clippy::field_reassign_with_default)]

use proptest::prelude::*;
use seqrpf_cli::config::{MapSpec, ObservableSpec};
use seqrpf_cli::RunConfig;

fn map_spec() -> impl Strategy<Value = MapSpec> {
    prop_oneof![
        (2u32..6, any::<bool>()).prop_map(|(m, interval)| MapSpec::Linear { m, interval }),
        (0.05f64..0.95).prop_map(|beta| MapSpec::Mp { beta }),
    ]
}

fn observable() -> impl Strategy<Value = ObservableSpec> {
    prop_oneof![
        Just(ObservableSpec::Identity),
        (1u32..5).prop_map(|k| ObservableSpec::Cos { k }),
        (1u32..5).prop_map(|k| ObservableSpec::Sin { k }),
        (1u32..5).prop_map(|k| ObservableSpec::Coboundary { k }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn toml_round_trip(
        seed in 0u64..=i64::MAX as u64,
        log_n in 3u32..14,
        map in map_spec(),
        obs in observable(),
        scale in -1.0f64..1.0,
        ladder in proptest::collection::btree_set(1usize..5000, 1..6),
        gamma in 0.51f64..0.99,
    ) {
        let mut cfg = RunConfig::default();
        cfg.seed = seed;
        cfg.grid.n = 1 << log_n;
        cfg.system.map = map;
        cfg.system.observable = obs;
        cfg.system.potential.scale = scale;
        cfg.sim.ladder = ladder.into_iter().collect();
        cfg.sim.mdp.get_or_insert_with(Default::default).gamma = gamma;
        let text = cfg.to_toml().unwrap();
        let back = RunConfig::from_toml(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_toml().unwrap(), text);
    }

    #[test]
    fn non_power_of_two_grid_is_rejected(n in 8usize..100_000) {
        prop_assume!(!n.is_power_of_two());
        let mut cfg = RunConfig::default();
        cfg.grid.n = n;
        prop_assert!(cfg.validate().is_err());
    }
}
