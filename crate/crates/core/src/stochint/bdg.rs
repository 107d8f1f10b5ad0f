//! Burkholder–Davis–Gundy ratio experiments for step-process integrals.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::driver::BrownianDriver;
use super::integral::{integrate, l2_gamma_norm, path_stats, PathStats, GAMMA_INNER};
use super::process::ProcessFamily;
use crate::error::{Error, Result};
use crate::inequalities::IneqReport;
use crate::parallel::{chunked_reduce, ordered_map};
use crate::rng::{purpose, stream};
use crate::scalar::Vector;
use crate::spaces::SpaceDescriptor;
use crate::stats::{Moments, RatioMoments};

fn default_inner() -> usize {
    GAMMA_INNER
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BdgConfig {
    pub space: SpaceDescriptor,
    pub family: ProcessFamily,
    pub driver: BrownianDriver,
    pub paths: usize,
    /// Gaussian draws per γ-norm when `X` is not Hilbert.
    #[serde(default = "default_inner")]
    pub inner: usize,
}

impl BdgConfig {
    pub fn new(space: SpaceDescriptor, family: ProcessFamily, driver: BrownianDriver, paths: usize) -> Self {
        Self { space, family, driver, paths, inner: GAMMA_INNER }
    }

    pub fn stats(&self) -> Result<Vec<PathStats>> {
        if self.paths < 2 {
            return Err(Error::InvalidParameter("need at least two paths".into()));
        }
        let psi = self.family.build::<f64>(&self.space, self.driver.steps)?;
        path_stats(&psi, &self.driver, self.paths, self.inner)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Moment estimates at one `p`; `kappa = (E sup‖∫Ψ dW‖^p / E‖Ψ‖^p_γ)^{1/p}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BdgReport {
    pub p: f64,
    pub paths: usize,
    pub seed: u64,
    pub steps: usize,
    pub horizon: f64,
    pub gamma_exact: bool,
    pub sup_moment: Estimate,
    pub terminal_moment: Estimate,
    pub gamma_moment: Estimate,
    /// `E sup‖·‖^p / E‖Ψ‖^p_γ`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sup_ratio: Option<Estimate>,
    /// `E‖∫_0^T Ψ dW‖^p / E‖Ψ‖^p_γ`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terminal_ratio: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_over_p: Option<f64>,
    pub vacuous: bool,
}

fn moments(stats: &[PathStats], f: impl Fn(&PathStats) -> f64) -> Moments {
    stats.iter().fold(Moments::default(), |mut m, s| {
        m.push(f(s));
        m
    })
}

fn ratio(stats: &[PathStats], top: impl Fn(&PathStats) -> f64, bottom: impl Fn(&PathStats) -> f64) -> Estimate {
    let r = stats.iter().fold(RatioMoments::default(), |mut r, s| {
        r.push(top(s), bottom(s));
        r
    });
    Estimate { mean: r.ratio(), std_error: r.ratio_std_error() }
}

fn estimate(m: &Moments) -> Estimate {
    Estimate { mean: m.mean(), std_error: m.std_error() }
}

/// Summarizes precomputed path statistics at exponent `p`.
pub fn bdg_report(cfg: &BdgConfig, stats: &[PathStats], p: f64) -> Result<BdgReport> {
    if !(p > 0.0) {
        return Err(Error::InvalidParameter(format!("p = {p} must be positive")));
    }
    let sup = moments(stats, |s| s.sup_norm.powf(p));
    let term = moments(stats, |s| s.terminal_norm.powf(p));
    let gam = moments(stats, |s| s.gamma.powf(p));
    let vacuous = gam.mean() == 0.0;
    if vacuous && sup.mean() != 0.0 {
        return Err(Error::NotApplicable("zero γ-norm moment with a nonzero integral".into()));
    }
    let (sup_ratio, terminal_ratio) = if vacuous {
        (None, None)
    } else {
        (
            Some(ratio(stats, |s| s.sup_norm.powf(p), |s| s.gamma.powf(p))),
            Some(ratio(stats, |s| s.terminal_norm.powf(p), |s| s.gamma.powf(p))),
        )
    };
    let kappa = sup_ratio.map(|r| r.mean.powf(1.0 / p));
    Ok(BdgReport {
        p,
        paths: stats.len(),
        seed: cfg.driver.seed,
        steps: cfg.driver.steps,
        horizon: cfg.driver.horizon,
        gamma_exact: cfg.space.is_hilbert(),
        sup_moment: estimate(&sup),
        terminal_moment: estimate(&term),
        gamma_moment: estimate(&gam),
        sup_ratio,
        terminal_ratio,
        kappa,
        kappa_over_p: kappa.map(|k| k / p),
        vacuous,
    })
}

pub fn bdg_experiment(cfg: &BdgConfig, p: f64) -> Result<BdgReport> {
    bdg_report(cfg, &cfg.stats()?, p)
}

/// One simulation, reported at every `p` (common random numbers).
pub fn bdg_sweep(cfg: &BdgConfig, ps: &[f64]) -> Result<Vec<BdgReport>> {
    let stats = cfg.stats()?;
    ps.iter().map(|&p| bdg_report(cfg, &stats, p)).collect()
}

/// Predictable integrands `v_{i−1}` for the discrete Gaussian sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum CoreRule {
    /// `v_{i−1} = values[(i−1) mod len]`.
    Deterministic { values: Vec<Vec<f64>> },
    /// `v_{i−1} = sign(g_{i−lag}) · x`, and `x` while `i ≤ lag`.
    /// `lag = 0` reads the current Gaussian and is rejected.
    SignFeedback { x: Vec<f64>, lag: usize },
}

/// `‖sup_j ‖Σ_{i≤j} g_i v_{i−1}‖‖_p ≤ c_p ‖Σ_i g̃_i v_{i−1}‖_p`, with `g̃` from a disjoint stream.
pub fn bdg_core_check(
    space: &SpaceDescriptor,
    p: f64,
    rule: &CoreRule,
    n: usize,
    samples: usize,
    seed: u64,
    reference: Option<f64>,
) -> Result<IneqReport> {
    let dim = space.dim();
    let check =
        |v: &[f64]| if v.len() == dim { Ok(()) } else { Err(Error::DimensionMismatch { expected: dim, got: v.len() }) };
    match rule {
        CoreRule::Deterministic { values } => {
            if values.is_empty() {
                return Err(Error::InvalidParameter("no values".into()));
            }
            values.iter().try_for_each(|v| check(v))?;
            bdg_core_check_with(space, p, n, samples, seed, reference, |k, _| values[k % values.len()].clone())
        }
        CoreRule::SignFeedback { x, lag } => {
            check(x)?;
            if *lag == 0 {
                return Err(Error::Precondition("v_{i−1} = sign(g_i)·x is adapted but not predictable".into()));
            }
            let lag = *lag;
            bdg_core_check_with(space, p, n, samples, seed, reference, move |k, past| {
                // v_k uses g_{k+1−lag}, i.e. past[k − lag]
                match k.checked_sub(lag) {
                    Some(j) if past[j] < 0.0 => x.iter().map(|a| -a).collect(),
                    _ => x.clone(),
                }
            })
        }
    }
}

/// As [`bdg_core_check`] with `v(k, g_1..g_k)` giving `v_k`; the slice holds
/// only the Gaussians already revealed.
pub fn bdg_core_check_with(
    space: &SpaceDescriptor,
    p: f64,
    n: usize,
    samples: usize,
    seed: u64,
    reference: Option<f64>,
    v: impl Fn(usize, &[f64]) -> Vec<f64> + Sync,
) -> Result<IneqReport> {
    if !(p > 0.0) || n == 0 || samples < 2 {
        return Err(Error::InvalidParameter(format!("need p > 0, n ≥ 1, samples ≥ 2; got {p}, {n}, {samples}")));
    }
    let dim = space.dim();
    let acc = chunked_reduce(
        samples,
        |range| {
            let mut acc = RatioMoments::default();
            for s in range {
                let mut rng = stream(seed, purpose::DRIVER, s as u64);
                let mut rng_copy = stream(seed, purpose::DRIVER_COPY, s as u64);
                let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                let (mut sum, mut copy) = (Vector::<f64>::zeros(dim), Vector::<f64>::zeros(dim));
                let mut sup = 0.0f64;
                for k in 0..n {
                    let vk = v(k, &g[..k]);
                    let gt: f64 = StandardNormal.sample(&mut rng_copy);
                    sum.add_scaled(g[k], &vk);
                    copy.add_scaled(gt, &vk);
                    sup = sup.max(space.norm_unchecked(sum.as_slice()));
                }
                acc.push(sup.powf(p), space.norm_unchecked(copy.as_slice()).powf(p));
            }
            acc
        },
        RatioMoments::merge,
    )
    .unwrap_or_default();
    let (lhs_m, rhs_m) = (acc.x.mean(), acc.y.mean());
    let id = "bdg-core";
    if rhs_m == 0.0 {
        let r = IneqReport::vacuous(id, lhs_m, 0.0, reference.unwrap_or(f64::NAN), "decoupled side has zero moment");
        return Ok(r.monte_carlo(samples as u64, seed).param("p", p).param("n", n));
    }
    let r = acc.ratio();
    let c = r.powf(1.0 / p);
    let c_se = c / (p * r) * acc.ratio_std_error();
    let (lhs, rhs_norm) = (lhs_m.powf(1.0 / p), rhs_m.powf(1.0 / p));
    let report = match reference {
        Some(c_ref) => {
            let mut rep = IneqReport::exact(id, lhs, c_ref * rhs_norm, c_ref, 0.0);
            rep.set_holds(c <= c_ref + 3.0 * c_se);
            rep
        }
        None => IneqReport::exact(id, lhs, c * rhs_norm, c, f64::INFINITY)
            .note("realized constant only; no reference value"),
    };
    Ok(report.monte_carlo(samples as u64, seed).param("p", p).param("n", n).param("c_p", c).param("c_p_se", c_se))
}

/// `E sup‖∫Ψ dW‖^p ≤ C E‖Ψ‖^p_{L²(0,T;γ(H,X))}` on type-2 spaces.
pub fn type2_embedding_check(cfg: &BdgConfig, p: f64, reference: Option<f64>) -> Result<IneqReport> {
    if !cfg.space.is_type2() {
        return Err(Error::Precondition(format!("{} is not flagged type 2", cfg.space)));
    }
    if !(p > 0.0) || cfg.paths < 2 {
        return Err(Error::InvalidParameter(format!("need p > 0 and two paths; got {p}, {}", cfg.paths)));
    }
    let psi = cfg.family.build::<f64>(&cfg.space, cfg.driver.steps)?;
    let pairs: Vec<(f64, f64)> = ordered_map(cfg.paths, |i| {
        let path = cfg.driver.path(i as u64);
        let sup = integrate(&psi, &path)?.iter().map(|v| cfg.space.norm_unchecked(v.as_slice())).fold(0.0, f64::max);
        let l2 = l2_gamma_norm(&psi, &path, cfg.inner, cfg.driver.seed)?;
        Ok((sup.powf(p), l2.value.powf(p)))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let acc = pairs.iter().fold(RatioMoments::default(), |mut a, &(x, y)| {
        a.push(x, y);
        a
    });
    let id = "type2-embedding";
    let (lhs, rhs) = (acc.x.mean(), acc.y.mean());
    let report = if rhs == 0.0 {
        IneqReport::vacuous(id, lhs, 0.0, reference.unwrap_or(f64::NAN), "zero L²(γ) moment")
    } else {
        let c = acc.ratio();
        let se = acc.ratio_std_error();
        let rep = match reference {
            Some(c_ref) => {
                let mut rep = IneqReport::exact(id, lhs, c_ref * rhs, c_ref, 0.0);
                rep.set_holds(c <= c_ref + 3.0 * se);
                rep
            }
            None => {
                IneqReport::exact(id, lhs, c * rhs, c, f64::INFINITY).note("realized constant only; no reference value")
            }
        };
        rep.param("ratio", c).param("ratio_se", se)
    };
    Ok(report.monte_carlo(cfg.paths as u64, cfg.driver.seed).param("p", p).param("space", cfg.space.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hilbert_cfg(paths: usize, family: ProcessFamily) -> BdgConfig {
        BdgConfig::new(SpaceDescriptor::euclid(2).unwrap(), family, BrownianDriver::new(2, 16, 3).unwrap(), paths)
    }

    #[test]
    fn zero_integrand_is_vacuous() {
        let cfg = hilbert_cfg(100, ProcessFamily::Zero { intervals: 4, rank: 1 });
        let r = bdg_experiment(&cfg, 2.0).unwrap();
        assert!(r.vacuous);
        assert!(r.kappa.is_none());
    }

    #[test]
    fn deterministic_core_doob() {
        let space = SpaceDescriptor::euclid(2).unwrap();
        let rule = CoreRule::Deterministic { values: vec![vec![1.0, 0.0], vec![0.5, -1.0]] };
        let r = bdg_core_check(&space, 2.0, &rule, 8, 20_000, 1, Some(2.0)).unwrap();
        assert!(r.holds, "{r:?}");
        let single = bdg_core_check(&space, 2.0, &rule, 1, 20_000, 1, None).unwrap();
        let c = single.params["c_p"].as_f64().unwrap();
        let se = single.params["c_p_se"].as_f64().unwrap();
        assert!((c - 1.0).abs() < 4.0 * se, "{c} ± {se}");
    }

    #[test]
    fn anticipating_rule_is_rejected() {
        let space = SpaceDescriptor::euclid(1).unwrap();
        let rule = CoreRule::SignFeedback { x: vec![1.0], lag: 0 };
        assert!(matches!(bdg_core_check(&space, 2.0, &rule, 4, 100, 0, None), Err(Error::Precondition(_))));
        let ok = CoreRule::SignFeedback { x: vec![1.0], lag: 1 };
        assert!(bdg_core_check(&space, 2.0, &ok, 4, 100, 0, None).is_ok());
    }

    #[test]
    fn type2_precondition() {
        let cfg = BdgConfig::new(
            SpaceDescriptor::sup_norm(2).unwrap(),
            ProcessFamily::Constant { value: vec![1.0, 1.0] },
            BrownianDriver::new(1, 4, 0).unwrap(),
            10,
        );
        assert!(matches!(type2_embedding_check(&cfg, 2.0, None), Err(Error::Precondition(_))));
    }

    #[test]
    fn hilbert_type2_rhs_matches_gamma() {
        let fam = ProcessFamily::CosineFeedback { intervals: 4, rank: 2, scale: 1.0 };
        let cfg = hilbert_cfg(500, fam);
        let t2 = type2_embedding_check(&cfg, 2.0, None).unwrap();
        let bdg = bdg_experiment(&cfg, 2.0).unwrap();
        assert!((t2.lhs - bdg.sup_moment.mean).abs() < 1e-12);
        let r = t2.params["ratio"].as_f64().unwrap();
        assert!((r - bdg.sup_ratio.unwrap().mean).abs() < 1e-12);
    }

    #[test]
    fn horizon_does_not_change_the_ratio() {
        let fam = ProcessFamily::Deterministic { values: vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 2.0]]] };
        let base = hilbert_cfg(2000, fam);
        let mut long = base.clone();
        long.driver = long.driver.with_horizon(7.5).unwrap();
        let (a, b) = (bdg_experiment(&base, 2.0).unwrap(), bdg_experiment(&long, 2.0).unwrap());
        let (ra, rb) = (a.sup_ratio.unwrap().mean, b.sup_ratio.unwrap().mean);
        assert!((ra - rb).abs() < 1e-9 * ra, "{ra} vs {rb}");
    }
}
