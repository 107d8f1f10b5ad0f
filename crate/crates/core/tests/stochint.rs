use decoupling_core::stochint::{
    bdg_experiment, bdg_sweep, type2_embedding_check, BdgConfig, BrownianDriver, ProcessFamily,
};
use decoupling_core::SpaceDescriptor;

fn euclid4(paths: usize, family: ProcessFamily) -> BdgConfig {
    BdgConfig::new(SpaceDescriptor::euclid(4).unwrap(), family, BrownianDriver::new(4, 64, 2024).unwrap(), paths)
}

fn deterministic() -> ProcessFamily {
    let values = (0..8)
        .map(|n| {
            (0..2).map(|m| (0..4).map(|i| ((n + 2 * m + i) % 3) as f64 - 1.0 + 0.25 * m as f64).collect()).collect()
        })
        .collect();
    ProcessFamily::Deterministic { values }
}

#[test]
fn ito_isometry_and_doob() {
    let cfg = euclid4(100_000, deterministic());
    let r = bdg_experiment(&cfg, 2.0).unwrap();
    let term = r.terminal_ratio.unwrap();
    assert!((term.mean - 1.0).abs() < 0.05, "{term:?}");
    assert!((term.mean - 1.0).abs() < 4.0 * term.std_error, "{term:?}");
    let sup = r.sup_ratio.unwrap();
    assert!(sup.mean <= 4.0 * (1.0 + 3.0 * sup.std_error), "{sup:?}");
}

#[test]
fn adapted_integrand_isometry() {
    let cfg = euclid4(20_000, ProcessFamily::CosineFeedback { intervals: 16, rank: 3, scale: 1.0 });
    let r = bdg_experiment(&cfg, 2.0).unwrap();
    let term = r.terminal_ratio.unwrap();
    assert!((term.mean - 1.0).abs() < 4.0 * term.std_error, "{term:?}");
}

#[test]
fn kappa_sweep_is_finite() {
    let cfg = euclid4(5_000, ProcessFamily::SignFeedback { intervals: 8, rank: 2, scale: 1.0 });
    for r in bdg_sweep(&cfg, &[1.0, 2.0, 4.0, 8.0]).unwrap() {
        assert!(r.kappa_over_p.unwrap().is_finite() && r.kappa.unwrap() > 0.0);
    }
}

#[test]
fn type2_ratio_is_stable_in_sample_size() {
    let space = SpaceDescriptor::seq_lp(3.0, 4).unwrap();
    let fam = ProcessFamily::SignFeedback { intervals: 4, rank: 2, scale: 1.0 };
    let run = |paths| {
        let mut cfg = BdgConfig::new(space.clone(), fam.clone(), BrownianDriver::new(2, 16, 9).unwrap(), paths);
        cfg.inner = 64;
        let r = type2_embedding_check(&cfg, 2.0, None).unwrap();
        (r.params["ratio"].as_f64().unwrap(), r.params["ratio_se"].as_f64().unwrap())
    };
    let (a, sa) = run(2_000);
    let (b, sb) = run(4_000);
    assert!(a.is_finite() && b.is_finite());
    // 95% interval width of the smaller run
    let width = 2.0 * 1.96 * sa;
    assert!((a - b).abs() < 2.0 * width, "{a} ± {sa} vs {b} ± {sb}");
}
