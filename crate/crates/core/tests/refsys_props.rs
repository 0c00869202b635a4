use std::collections::BTreeMap;

use proptest::prelude::*;

use univfb::refsys::{
    collapsed_entropy, iterated_mapping_eval, prefix_suffix_build, redundancy_experiment,
    testchannel_entropy_exact, testchannel_entropy_lower_bound, BlockCode, BlockDecoder, EvalMode,
};
use univfb::scheme::SchemeConfig;
use univfb::srccode::Metric;
use univfb::{Alphabet, NoiseSpec, SymbolSeq};

proptest! {
    #[test]
    fn collapsed_entropy_matches_histogram(q in 2u32..6, k in 1usize..5, z in prop::collection::vec(0u8..6, 1..200)) {
        let a = Alphabet::new(q).unwrap();
        let z: Vec<u8> = z.into_iter().map(|s| s % q as u8).collect();
        let b = z.len() / k;
        prop_assume!(b >= 1);
        let mut hist = BTreeMap::<&[u8], f64>::new();
        for blk in z.chunks_exact(k).take(b) {
            *hist.entry(blk).or_default() += 1.0;
        }
        let oracle: f64 = hist.values().map(|&c| -(c / b as f64) * (c / b as f64).log2()).sum();
        let seq = SymbolSeq::new(a, z.clone()).unwrap();
        let h = collapsed_entropy(&seq, k, b).unwrap();
        prop_assert_eq!(h, oracle);
        prop_assert!(h >= 0.0 && h <= k as f64 * a.log2() + 1e-12);
        prop_assert!(collapsed_entropy(&seq, k, b + 1).is_err());
    }

    #[test]
    fn prefix_suffix_is_error_free(seed: u64, k in 2usize..7, d_pick: usize, q in 2u32..5, blocks in 1usize..80) {
        let d = 1 + d_pick % (k - 1);
        let a = Alphabet::new(q).unwrap();
        let z = NoiseSpec::TestChannel { k, d, seed: None }.generate(a, k * blocks, seed).unwrap();
        let (code, registry) = prefix_suffix_build(k, d, &z).unwrap();
        prop_assert_eq!(iterated_mapping_eval(&code, &z, blocks, EvalMode::Exhaustive).unwrap(), 0.0);
        prop_assert!(registry.len() <= blocks.min((q as usize).pow((k - d) as u32)));
        prop_assert!((code.rate() - d as f64 / k as f64 * a.log2()).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_tracks_exhaustive(seed: u64, table in prop::collection::vec(0u32..3, 4), z in prop::collection::vec(0u8..2, 6)) {
        let a = Alphabet::binary();
        let code = BlockCode::new(a, 2, vec![vec![0, 0], vec![1, 1], vec![1, 0]], BlockDecoder::Table { table }).unwrap();
        let z = SymbolSeq::new(a, z).unwrap();
        let exact = iterated_mapping_eval(&code, &z, 3, EvalMode::Exhaustive).unwrap();
        let trials = 2000;
        let mc = iterated_mapping_eval(&code, &z, 3, EvalMode::MonteCarlo { trials, seed }).unwrap();
        // per-block draws are independent, so the variance is at most 1/(4 b trials)
        let sigma = (0.25 / (3 * trials) as f64).sqrt();
        prop_assert!((mc - exact).abs() <= 4.0 * sigma, "mc={} exact={}", mc, exact);
    }
}

#[test]
fn entropy_dominates_bound_including_ternary() {
    for (q, k, d, i) in [
        (2, 2, 1, 1),
        (2, 3, 1, 3),
        (2, 4, 2, 3),
        (3, 2, 1, 3),
        (3, 3, 1, 2),
        (3, 3, 2, 2),
    ] {
        let a = Alphabet::new(q).unwrap();
        let h = testchannel_entropy_exact(a, k, d, i).unwrap();
        let lb = testchannel_entropy_lower_bound(a, k, d, i);
        assert!(h >= lb - 1e-12, "q={q} k={k} d={d} i={i}: {h} < {lb}");
        assert!(h <= (i * k) as f64 * a.log2() + 1e-12);
    }
}

#[test]
fn redundancy_reference_column() {
    let a = Alphabet::binary();
    for (k, d) in [(4, 3), (6, 2)] {
        let config = SchemeConfig::new(2048, a, 6, 0.05, 8, Metric::Lz78);
        let r = redundancy_experiment(k, d, &config).unwrap();
        assert_eq!(r.r_star_ifb, d as f64 / k as f64);
        assert_eq!(r.gap, r.r_star_ifb - r.r_star_universal);
        if d == k - 1 {
            // nearly incompressible noise at a short horizon
            assert!(r.gap > 0.0, "gap {}", r.gap);
        }
    }
    let bad = SchemeConfig::new(2048, a, 6, 0.05, 8, Metric::Lz78);
    assert!(redundancy_experiment(4, 4, &bad).is_err());
}
