//! Randomized verification suites: one checker run over many enumerated models.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::constants::{b_upper, bound_prop32_c};
use crate::error::{Error, Result};
use crate::inequalities::{
    bmo_analyze, check_condsym, check_contraction, check_extrapolation, check_goodlambda, check_levy,
    check_reverse_kolmogorov, check_symsum, check_tail_comparison, ConditionalModel, GoodLambdaParams, IneqReport,
    LevyMode, MomentFunctional, Status,
};
use crate::probmodel::{check_davis_bound, decouple, AdaptedSequence, ModelFamily};
use crate::rng::{derive_seed, purpose, stream};
use crate::scalar::Weight;
use crate::spaces::SpaceDescriptor;
use crate::Pair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Tangency,
    Levy,
    Contraction,
    Symsum,
    ReverseKolmogorov,
    TailComparison,
    Davis,
    Goodlambda,
    Extrapolation,
    Condsym,
}

impl Suite {
    pub const ALL: [Suite; 10] = [
        Suite::Tangency,
        Suite::Levy,
        Suite::Contraction,
        Suite::Symsum,
        Suite::ReverseKolmogorov,
        Suite::TailComparison,
        Suite::Davis,
        Suite::Goodlambda,
        Suite::Extrapolation,
        Suite::Condsym,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Tangency => "tangency",
            Suite::Levy => "levy",
            Suite::Contraction => "contraction",
            Suite::Symsum => "symsum",
            Suite::ReverseKolmogorov => "reverse-kolmogorov",
            Suite::TailComparison => "tail-comparison",
            Suite::Davis => "davis",
            Suite::Goodlambda => "goodlambda",
            Suite::Extrapolation => "extrapolation",
            Suite::Condsym => "condsym",
        }
    }

    /// Whether the suite draws conditionally symmetric models.
    fn symmetric(self) -> bool {
        !matches!(self, Suite::Condsym)
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown suite `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub space: SpaceDescriptor,
    pub p: f64,
    pub min_depth: usize,
    pub depth: usize,
    pub alphabet: usize,
    pub trials: usize,
    pub seed: u64,
}

impl SuiteConfig {
    pub fn new(space: SpaceDescriptor, p: f64, depth: usize, trials: usize, seed: u64) -> Self {
        Self { space, p, min_depth: 1, depth, alphabet: 3, trials, seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub suite: Suite,
    pub space: String,
    pub p: f64,
    pub depth: usize,
    pub trials: usize,
    pub seed: u64,
    pub checks: usize,
    pub holds: usize,
    pub vacuous: usize,
    pub not_applicable: usize,
    pub violations: usize,
    pub exact_violations: usize,
    /// Smallest-margin report among checked (holding or violated) ones.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst: Option<IneqReport>,
}

impl SuiteSummary {
    fn new(suite: Suite, cfg: &SuiteConfig) -> Self {
        Self {
            suite,
            space: cfg.space.to_string(),
            p: cfg.p,
            depth: cfg.depth,
            trials: cfg.trials,
            seed: cfg.seed,
            checks: 0,
            holds: 0,
            vacuous: 0,
            not_applicable: 0,
            violations: 0,
            exact_violations: 0,
            worst: None,
        }
    }

    fn add(&mut self, r: IneqReport) {
        self.checks += 1;
        self.exact_violations += usize::from(r.is_exact_violation());
        match r.status {
            Status::Holds => self.holds += 1,
            Status::Violated => self.violations += 1,
            Status::Vacuous => self.vacuous += 1,
            Status::NotApplicable => self.not_applicable += 1,
        }
        if matches!(r.status, Status::Holds | Status::Violated) {
            self.worst = Some(match self.worst.take() {
                Some(w) => w.worst(r),
                None => r,
            });
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Thresholds spread over `(0, 1.2 max f*]`, off the lattice of attained values.
fn grid(pair: &Pair) -> Vec<f64> {
    let depth = pair.depth();
    let top = (0..pair.tree().leaf_count()).map(|l| pair.functionals().f_star(depth, l)).fold(0.0, f64::max);
    let top = if top > 0.0 { top } else { 1.0 };
    (1..=6).map(|j| top * j as f64 / 5.0 * std::f64::consts::FRAC_1_SQRT_2).collect()
}

fn model(suite: Suite, cfg: &SuiteConfig, index: u64) -> Result<Pair> {
    let fam = ModelFamily::new(cfg.space.clone(), cfg.depth)
        .depth_range(cfg.min_depth.min(cfg.depth), cfg.depth)
        .alphabet(cfg.alphabet)
        .symmetric(suite.symmetric());
    let seq = AdaptedSequence::<f64, f64>::from_spec(&fam.generate(cfg.seed, index))?;
    Ok(decouple(seq))
}

fn trial(suite: Suite, cfg: &SuiteConfig, index: u64) -> Result<Vec<IneqReport>> {
    let pair = model(suite, cfg, index)?;
    let p = cfg.p;
    let tag = |r: IneqReport| r.param("model", index);
    let reports = match suite {
        Suite::Tangency => {
            let t = pair.tangency_discrepancy()?.to_f64();
            let c = pair.independence_discrepancy()?.to_f64();
            vec![
                IneqReport::exact("tangency", t, 0.0, f64::NAN, crate::scalar::PROB_SLACK),
                IneqReport::exact("conditional-independence", c, 0.0, f64::NAN, crate::scalar::PROB_SLACK),
            ]
        }
        Suite::Levy => {
            let m = ConditionalModel::from_decoupled(&pair)?;
            grid(&pair)
                .into_iter()
                .flat_map(|t| [check_levy(&m, t, LevyMode::MaxOfSums), check_levy(&m, t, LevyMode::MaxOfTerms)])
                .collect()
        }
        Suite::Contraction => {
            let m = ConditionalModel::from_decoupled(&pair)?;
            let mut rng = stream(derive_seed(cfg.seed, 1), purpose::MODEL, index);
            let mut out = Vec::new();
            for t in grid(&pair) {
                let mask: Vec<bool> = (0..pair.depth()).map(|_| rng.gen_bool(0.5)).collect();
                out.push(check_contraction(&m, &mask, t)?);
            }
            out
        }
        Suite::Symsum => {
            let m = ConditionalModel::from_decoupled(&pair)?;
            let mut out = Vec::new();
            for atom in m.atoms() {
                let first = &atom.marginals[0];
                let last = &atom.marginals[atom.marginals.len() - 1];
                // an asymmetric ξ: the first term shifted by a fixed vector
                let shift: Vec<f64> = first[0].0.iter().map(|x| 0.5 * x + 0.25).collect();
                let xi = first.iter().map(|(v, w)| (v.iter().zip(&shift).map(|(a, b)| a + b).collect(), *w)).collect();
                out.push(check_symsum(m.space(), &xi, last, p)?);
            }
            out
        }
        Suite::ReverseKolmogorov => {
            let m = ConditionalModel::from_decoupled(&pair)?;
            grid(&pair).into_iter().map(|t| check_reverse_kolmogorov(&m, t, p)).collect::<Result<_>>()?
        }
        Suite::TailComparison => check_tail_comparison(&pair, &grid(&pair))?.to_vec(),
        Suite::Davis => {
            let rho = pair.space().r_exponent().min(p);
            let d = check_davis_bound(&pair, rho)?;
            vec![IneqReport::exact("davis", -d.margin, 0.0, (1.0 - 2f64.powf(-rho)).recip(), 0.0)
                .param("rho", rho)
                .param("paths", d.paths)]
        }
        Suite::Goodlambda => {
            let b = 0.5;
            let d_hat = bmo_analyze(&pair, p)?.d_hat();
            if d_hat == 0.0 {
                vec![IneqReport::vacuous("goodlambda-proof", 0.0, 0.0, b, "zero sequence")]
            } else {
                let params = GoodLambdaParams { p, a: b.powf(-1.0 / p) * d_hat, b, delta: 0.05 };
                let rep = check_goodlambda(&pair, params, &grid(&pair))?;
                vec![rep.statement, rep.proof]
            }
        }
        Suite::Extrapolation => check_extrapolation(&pair, p, 0.5, &[1.0, 2.0, 3.0])?.checks,
        Suite::Condsym => {
            let r = pair.space().r_exponent();
            let c_sym = bound_prop32_c::<f64>(r, p, p, 1.0, 0.5 * b_upper(r, p))?.to_f64();
            let phi = MomentFunctional::power(p)?;
            check_condsym(&pair, &phi, c_sym)?
                .into_iter()
                .map(|x| x.note("c_sym from the extrapolation bound"))
                .collect()
        }
    };
    Ok(reports.into_iter().map(tag).collect())
}

/// Runs `suite` on `cfg.trials` models drawn from the random family.
pub fn run_suite(suite: Suite, cfg: &SuiteConfig) -> Result<SuiteSummary> {
    if cfg.trials == 0 || cfg.depth == 0 || !(cfg.p > 0.0) {
        return Err(Error::InvalidParameter("trials, depth and p must be positive".into()));
    }
    let per_model = crate::parallel::ordered_map(cfg.trials, |i| trial(suite, cfg, i as u64));
    let mut summary = SuiteSummary::new(suite, cfg);
    for reports in per_model {
        for r in reports? {
            summary.add(r.param("p", cfg.p));
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_suite_runs() {
        for suite in Suite::ALL {
            let cfg = SuiteConfig::new("l2:2".parse().unwrap(), 2.0, 3, 4, 1);
            let s = run_suite(suite, &cfg).unwrap();
            assert!(s.checks > 0, "{suite}");
            assert!(s.passed(), "{suite}: {s:?}");
        }
    }

    #[test]
    fn names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.as_str().parse::<Suite>().unwrap(), s);
        }
    }
}
