use hdlog_core::Mode;
use hdlog_testkit::checks::{check_operators, check_update};
use hdlog_testkit::random_instance;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn operators_meet_contracts(seed in any::<u64>()) {
        let inst = random_instance(&mut ChaCha8Rng::seed_from_u64(seed), 4, 60);
        prop_assert_eq!(check_operators(&inst, true), Ok(()));
    }

    #[test]
    fn updates_match_recomputation(seed in any::<u64>()) {
        let inst = random_instance(&mut ChaCha8Rng::seed_from_u64(seed), 6, 60);
        for mode in [Mode::Standard, Mode::Hd, Mode::Combined] {
            prop_assert!(check_update(&inst, mode).is_ok(), "{:?}: {:?}", mode, check_update(&inst, mode).err());
        }
    }
}
