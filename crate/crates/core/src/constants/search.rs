//! Adversarial search for large decoupling ratios over predictable multipliers.
//!
//! A candidate is a table of labels `v_n(a)` on a fixed tree with increments
//! `d_n = ξ_n v_n`. Each restart draws labels at random and then proposes
//! single-coordinate changes from a finite alphabet, keeping strict
//! improvements. Budget steps are dealt round-robin to the restarts and every
//! proposal sequence depends only on `(seed, restart)`, so the best ratio is
//! non-decreasing in the budget.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ratio::{exact_count, ratio, ratio_mc, Direction};
use crate::error::{Error, Result};
use crate::inequalities::Method;
use crate::parallel::ordered_map;
use crate::probmodel::{
    decouple, AdaptedSequence, IncrementRule, LevelSpec, PredictableRule, Prob, SequenceSpec, TreeSpec, ENUMERATION_CAP,
};
use crate::rng::{derive_seed, purpose, stream};
use crate::spaces::SpaceDescriptor;

const EVAL_TAG: u64 = 0x5ea1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Rademacher innovations, labels in `{±2^k : |k| ≤ K}`.
    PaleyWalshMultipliers,
    /// Three-point Gauss–Hermite innovations `{−√3, 0, √3}` with weights
    /// `1/6, 2/3, 1/6`, labels in `{±2^k : |k| ≤ K}`.
    GaussianMultipliers,
    /// Rademacher innovations, sign labels in `{±1}^d`.
    GarlingLinf,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::PaleyWalshMultipliers, Family::GaussianMultipliers, Family::GarlingLinf];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::PaleyWalshMultipliers => "paley-walsh-multipliers",
            Family::GaussianMultipliers => "gaussian-multipliers",
            Family::GarlingLinf => "garling-linf",
        }
    }

    pub fn tree(self, depth: usize) -> TreeSpec {
        let level = match self {
            Family::GaussianMultipliers => {
                let s = 3f64.sqrt();
                LevelSpec {
                    values: vec![vec![-s], vec![0.0], vec![s]],
                    probs: vec![
                        Prob::Fraction("1/6".into()),
                        Prob::Fraction("2/3".into()),
                        Prob::Fraction("1/6".into()),
                    ],
                }
            }
            _ => LevelSpec {
                values: vec![vec![1.0], vec![-1.0]],
                probs: vec![Prob::Fraction("1/2".into()), Prob::Fraction("1/2".into())],
            },
        };
        TreeSpec { levels: vec![level; depth] }
    }

    fn arity(self) -> usize {
        match self {
            Family::GaussianMultipliers => 3,
            _ => 2,
        }
    }

    pub fn alphabet(self, max_exponent: u32) -> Vec<f64> {
        match self {
            Family::GarlingLinf => vec![1.0, -1.0],
            _ => {
                let k = max_exponent as i32;
                (-k..=k).flat_map(|e| [2f64.powi(e), -2f64.powi(e)]).collect()
            }
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown family `{s}`")))
    }
}

/// `labels[n−1][a][i]`: coordinate `i` of `v_n` on depth-`(n−1)` node `a`.
pub type Labels = Vec<Vec<Vec<f64>>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub space: SpaceDescriptor,
    pub p: f64,
    pub direction: Direction,
    pub family: Family,
    pub depth: usize,
    /// Coordinate-ascent proposals, shared by all restarts.
    pub budget: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Monte Carlo replicas per evaluation when enumeration is too large.
    pub samples: usize,
    pub max_exponent: u32,
    pub cap: u64,
    /// Labels for restart 0 instead of a random draw.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warm_start: Option<Labels>,
}

impl SearchConfig {
    pub fn new(space: SpaceDescriptor, p: f64, direction: Direction, family: Family) -> Self {
        Self {
            space,
            p,
            direction,
            family,
            depth: 3,
            budget: 64,
            restarts: 4,
            seed: 0,
            samples: 20_000,
            max_exponent: 2,
            cap: ENUMERATION_CAP as u64,
            warm_start: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p.is_finite()) {
            return Err(Error::InvalidParameter(format!("p = {} must be positive", self.p)));
        }
        if self.depth == 0 || self.restarts == 0 || self.samples == 0 {
            return Err(Error::InvalidParameter("depth, restarts and samples must be positive".into()));
        }
        if let Some(w) = &self.warm_start {
            let dim = self.space.dim();
            let arity = self.family.arity();
            let ok = w.len() == self.depth
                && w.iter()
                    .enumerate()
                    .all(|(n, lvl)| lvl.len() == arity.pow(n as u32) && lvl.iter().all(|v| v.len() == dim));
            if !ok {
                return Err(Error::InvalidParameter("warm-start labels do not fit the family tree".into()));
            }
        }
        Ok(())
    }
}

/// Best witness found by [`search_worst_case`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantEstimate {
    pub space: SpaceDescriptor,
    pub p: f64,
    pub direction: Direction,
    pub family: Family,
    pub depth: usize,
    pub ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    pub method: Method,
    /// Replicas per Monte Carlo evaluation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    pub budget: usize,
    pub restarts: usize,
    pub seed: u64,
    pub evaluations: usize,
    pub witness_hash: String,
    pub witness: SequenceSpec,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub ratio: f64,
    pub std_error: Option<f64>,
    pub method: Method,
}

/// Evaluates `spec` exactly if the enumeration fits in `cap`, by Monte Carlo otherwise.
pub fn evaluate_spec(
    spec: &SequenceSpec,
    p: f64,
    direction: Direction,
    cap: u64,
    samples: usize,
    seed: u64,
) -> Result<Evaluation> {
    let pair = decouple(AdaptedSequence::<f64, f64>::from_spec(spec)?);
    if exact_count(&pair, direction) <= cap as u128 {
        let pair = pair.with_cap(cap as u128);
        Ok(Evaluation { ratio: ratio(&pair, p, direction)?, std_error: None, method: Method::Exact })
    } else {
        let (r, se) = ratio_mc(&pair, p, direction, samples, derive_seed(seed, EVAL_TAG))?;
        Ok(Evaluation { ratio: r, std_error: Some(se), method: Method::Mc })
    }
}

/// Re-evaluates the witness with the recorded method.
pub fn replay(est: &ConstantEstimate) -> Result<Evaluation> {
    let cap = match est.method {
        Method::Exact => u64::MAX,
        Method::Mc => 0,
    };
    evaluate_spec(&est.witness, est.p, est.direction, cap, est.samples.unwrap_or(1), est.seed)
}

pub fn witness_spec(family: Family, space: &SpaceDescriptor, labels: &Labels) -> SequenceSpec {
    SequenceSpec::Rules {
        tree: family.tree(labels.len()),
        space: space.clone(),
        predictable: PredictableRule::Table { values: labels.clone() },
        increment: IncrementRule::Scale,
    }
}

/// Lowercase hex SHA-256 of the spec's JSON.
pub fn witness_hash(spec: &SequenceSpec) -> String {
    let json = serde_json::to_vec(spec).expect("sequence specs serialize");
    Sha256::digest(json).iter().map(|b| format!("{b:02x}")).collect()
}

/// Copies labels into `dim` coordinates by cycling the existing ones.
/// Sup-norms, and hence all ratios on `SupNorm`, are unchanged.
pub fn embed_labels(labels: &Labels, dim: usize) -> Labels {
    labels.iter().map(|lvl| lvl.iter().map(|v| (0..dim).map(|i| v[i % v.len()]).collect()).collect()).collect()
}

/// Labels of a witness produced by the search.
pub fn witness_labels(spec: &SequenceSpec) -> Option<&Labels> {
    match spec {
        SequenceSpec::Rules { predictable: PredictableRule::Table { values }, .. } => Some(values),
        _ => None,
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    labels: Labels,
    eval: Evaluation,
    hash: String,
}

impl Candidate {
    fn beats(&self, other: &Candidate) -> bool {
        self.eval.ratio > other.eval.ratio || (self.eval.ratio == other.eval.ratio && self.hash < other.hash)
    }
}

fn score(cfg: &SearchConfig, labels: Labels) -> Candidate {
    let spec = witness_spec(cfg.family, &cfg.space, &labels);
    let hash = witness_hash(&spec);
    let eval = evaluate_spec(&spec, cfg.p, cfg.direction, cfg.cap, cfg.samples, cfg.seed).unwrap_or(Evaluation {
        ratio: f64::NEG_INFINITY,
        std_error: None,
        method: Method::Exact,
    });
    Candidate { labels, eval, hash }
}

fn run_restart(cfg: &SearchConfig, index: usize, steps: usize) -> Candidate {
    let mut rng = stream(cfg.seed, purpose::SEARCH, index as u64);
    let alphabet = cfg.family.alphabet(cfg.max_exponent);
    let dim = cfg.space.dim();
    let arity = cfg.family.arity();
    let drawn: Labels = (0..cfg.depth)
        .map(|n| {
            (0..arity.pow(n as u32)).map(|_| (0..dim).map(|_| *alphabet.choose(&mut rng).unwrap()).collect()).collect()
        })
        .collect();
    let start = match (&cfg.warm_start, index) {
        (Some(w), 0) => w.clone(),
        _ => drawn,
    };
    let mut best = score(cfg, start);
    for _ in 0..steps {
        let n = rng.gen_range(0..cfg.depth);
        let node = rng.gen_range(0..best.labels[n].len());
        let i = rng.gen_range(0..dim);
        let value = *alphabet.choose(&mut rng).unwrap();
        if value == best.labels[n][node][i] {
            continue;
        }
        let mut labels = best.labels.clone();
        labels[n][node][i] = value;
        let cand = score(cfg, labels);
        if cand.eval.ratio > best.eval.ratio {
            best = cand;
        }
    }
    best
}

/// Random restarts plus single-label coordinate ascent.
///
/// With `budget = 0` each restart contributes only its initial draw.
pub fn search_worst_case(cfg: &SearchConfig) -> Result<ConstantEstimate> {
    cfg.validate()?;
    let (base, extra) = (cfg.budget / cfg.restarts, cfg.budget % cfg.restarts);
    let found = ordered_map(cfg.restarts, |i| run_restart(cfg, i, base + usize::from(i < extra)));
    let best = found.into_iter().reduce(|a, b| if b.beats(&a) { b } else { a }).expect("at least one restart");
    if !best.eval.ratio.is_finite() {
        return Err(Error::NotApplicable("no candidate had a finite ratio".into()));
    }
    Ok(ConstantEstimate {
        space: cfg.space.clone(),
        p: cfg.p,
        direction: cfg.direction,
        family: cfg.family,
        depth: cfg.depth,
        ratio: best.eval.ratio,
        std_error: best.eval.std_error,
        method: best.eval.method,
        samples: (best.eval.method == Method::Mc).then_some(cfg.samples),
        budget: cfg.budget,
        restarts: cfg.restarts,
        seed: cfg.seed,
        evaluations: cfg.restarts + cfg.budget,
        witness_hash: best.hash,
        witness: witness_spec(cfg.family, &cfg.space, &best.labels),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(space: &str, family: Family) -> SearchConfig {
        SearchConfig::new(space.parse().unwrap(), 2.0, Direction::DecoupleUpper, family)
    }

    #[test]
    fn zero_budget_returns_first_draw() {
        let mut c = cfg("linf:3", Family::GarlingLinf);
        c.budget = 0;
        c.restarts = 1;
        c.seed = 9;
        let est = search_worst_case(&c).unwrap();
        let first = run_restart(&c, 0, 0);
        assert_eq!(est.ratio, first.eval.ratio);
        assert_eq!(est.witness_hash, first.hash);
    }

    #[test]
    fn monotone_in_budget() {
        let mut c = cfg("linf:2", Family::PaleyWalshMultipliers);
        c.restarts = 3;
        let mut last = f64::NEG_INFINITY;
        for budget in [0, 1, 2, 5, 9, 20, 40] {
            c.budget = budget;
            let r = search_worst_case(&c).unwrap().ratio;
            assert!(r >= last, "budget {budget}: {r} < {last}");
            last = r;
        }
    }

    #[test]
    fn euclid_stays_at_one() {
        for family in Family::ALL {
            let mut c = cfg("l2:3", family);
            c.budget = 30;
            let est = search_worst_case(&c).unwrap();
            assert_eq!(est.method, Method::Exact);
            assert!((est.ratio - 1.0).abs() <= 1e-9, "{family}: {}", est.ratio);
        }
    }

    #[test]
    fn witness_replays() {
        let mut c = cfg("linf:4", Family::GaussianMultipliers);
        c.budget = 20;
        let est = search_worst_case(&c).unwrap();
        let again = replay(&est).unwrap();
        assert!((again.ratio - est.ratio).abs() <= 1e-9);
        assert_eq!(witness_hash(&est.witness), est.witness_hash);
        let json = serde_json::to_string(&est).unwrap();
        let back: ConstantEstimate = serde_json::from_str(&json).unwrap();
        assert_eq!(back, est);
    }

    #[test]
    fn mc_fallback_when_tree_is_large() {
        let mut c = cfg("linf:2", Family::GarlingLinf);
        c.depth = 6;
        c.cap = 100;
        c.samples = 2000;
        c.budget = 2;
        let est = search_worst_case(&c).unwrap();
        assert_eq!(est.method, Method::Mc);
        assert!(est.std_error.unwrap() > 0.0);
        let again = replay(&est).unwrap();
        assert_eq!(again.ratio, est.ratio);
    }

    #[test]
    fn embedding_preserves_ratio() {
        let mut c = cfg("linf:2", Family::GarlingLinf);
        c.budget = 40;
        let small = search_worst_case(&c).unwrap();
        let labels = witness_labels(&small.witness).unwrap();
        let mut big = cfg("linf:16", Family::GarlingLinf);
        big.budget = 40;
        big.warm_start = Some(embed_labels(labels, 16));
        let spec = witness_spec(Family::GarlingLinf, &big.space, big.warm_start.as_ref().unwrap());
        let embedded = evaluate_spec(&spec, 2.0, Direction::DecoupleUpper, u64::MAX, 1, 0).unwrap();
        assert!((embedded.ratio - small.ratio).abs() < 1e-12);
        assert!(search_worst_case(&big).unwrap().ratio >= small.ratio);
    }

    #[test]
    fn worker_count_does_not_matter() {
        let mut c = cfg("linf:3", Family::GarlingLinf);
        c.budget = 24;
        let a = crate::parallel::with_workers(1, || search_worst_case(&c).unwrap());
        let b = crate::parallel::with_workers(4, || search_worst_case(&c).unwrap());
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
