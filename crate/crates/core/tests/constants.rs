use decoupling_core::constants::{
    embed_labels, evaluate_spec, replay, search_worst_case, witness_labels, witness_spec, Direction, Family, Labels,
    SearchConfig,
};
use decoupling_core::inequalities::Method;
use decoupling_core::SpaceDescriptor;

// Exhaustive depth-3 sign patterns on SupNorm(2) and SupNorm(3) at p = 2, v_1 fixed.
const GARLING_DEPTH3: f64 = 1.118_033_988_749_895;

fn sign_labels(mut bits: u32, dim: usize) -> Labels {
    let mut next = || {
        let s = if bits & 1 == 1 { -1.0 } else { 1.0 };
        bits >>= 1;
        s
    };
    let first = vec![vec![1.0; dim]];
    let mut labels = vec![first];
    for n in 1..3 {
        labels.push((0..1 << n).map(|_| (0..dim).map(|_| next()).collect()).collect());
    }
    labels
}

#[test]
fn brute_force_depth3_sign_patterns() {
    let space = SpaceDescriptor::sup_norm(2).unwrap();
    let mut best = 0.0f64;
    for bits in 0..1u32 << 12 {
        let spec = witness_spec(Family::GarlingLinf, &space, &sign_labels(bits, 2));
        let r = evaluate_spec(&spec, 2.0, Direction::DecoupleUpper, u64::MAX, 1, 0).unwrap().ratio;
        best = best.max(r);
    }
    assert!((best - GARLING_DEPTH3).abs() < 1e-12, "{best}");
}

#[test]
fn garling_search_beats_euclid() {
    let run = |space: &str| {
        let mut cfg = SearchConfig::new(space.parse().unwrap(), 2.0, Direction::DecoupleUpper, Family::GarlingLinf);
        cfg.budget = 400;
        cfg.restarts = 8;
        cfg.seed = 1;
        search_worst_case(&cfg).unwrap()
    };
    let linf = run("linf:4");
    let l2 = run("l2:4");
    assert_eq!(linf.method, Method::Exact);
    assert!(l2.ratio <= 1.0 + 1e-9);
    assert!(linf.ratio >= GARLING_DEPTH3 - 1e-12, "{}", linf.ratio);
    assert!((replay(&linf).unwrap().ratio - linf.ratio).abs() <= 1e-9);
}

#[test]
fn wider_sup_norm_does_at_least_as_well() {
    let base = |space: &str| {
        let mut cfg = SearchConfig::new(space.parse().unwrap(), 2.0, Direction::DecoupleUpper, Family::GarlingLinf);
        cfg.budget = 120;
        cfg.seed = 4;
        cfg
    };
    let small = search_worst_case(&base("linf:2")).unwrap();
    let mut wide = base("linf:16");
    wide.warm_start = Some(embed_labels(witness_labels(&small.witness).unwrap(), 16));
    assert!(search_worst_case(&wide).unwrap().ratio >= small.ratio);
}

#[test]
fn randomized_and_decoupled_coincide_on_dyadic_witnesses() {
    for depth in 1..=4 {
        let mut cfg =
            SearchConfig::new("linf:3".parse().unwrap(), 1.5, Direction::DecoupleUpper, Family::PaleyWalshMultipliers);
        cfg.depth = depth;
        cfg.budget = 10;
        cfg.seed = depth as u64;
        let est = search_worst_case(&cfg).unwrap();
        let minus = evaluate_spec(&est.witness, 1.5, Direction::RandomizedMinus, u64::MAX, 1, 0).unwrap();
        assert!((minus.ratio - est.ratio).abs() < 1e-12);
        let lower = evaluate_spec(&est.witness, 1.5, Direction::DecoupleLower, u64::MAX, 1, 0).unwrap();
        let plus = evaluate_spec(&est.witness, 1.5, Direction::RandomizedPlus, u64::MAX, 1, 0).unwrap();
        assert!((lower.ratio - plus.ratio).abs() < 1e-12);
    }
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]

    #[test]
    fn lifting_into_one_coordinate_keeps_the_ratio(seed in 0u64..1000, dim in 2usize..5, p in 1.0f64..4.0) {
        let mut cfg = SearchConfig::new(SpaceDescriptor::euclid(1).unwrap(), p, Direction::DecoupleUpper, Family::PaleyWalshMultipliers);
        cfg.seed = seed;
        cfg.budget = 0;
        cfg.restarts = 1;
        let scalar = search_worst_case(&cfg).unwrap();
        let lifted: Labels = witness_labels(&scalar.witness)
            .unwrap()
            .iter()
            .map(|lvl| lvl.iter().map(|v| (0..dim).map(|i| if i == 0 { v[0] } else { 0.0 }).collect()).collect())
            .collect();
        let space = SpaceDescriptor::seq_lp(p, dim).unwrap();
        let r = evaluate_spec(&witness_spec(Family::PaleyWalshMultipliers, &space, &lifted), p, Direction::DecoupleUpper, u64::MAX, 1, 0)
            .unwrap()
            .ratio;
        proptest::prop_assert!((r - scalar.ratio).abs() < 1e-12);
    }
}
