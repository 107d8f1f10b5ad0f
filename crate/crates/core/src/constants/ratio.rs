//! Moment ratios behind `D_p`, `C_p` and the randomized constants `β^±_p`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::chunked_reduce;
use crate::probmodel::sampling::sample_leaf;
use crate::probmodel::{TangentPair, ENUMERATION_CAP};
use crate::rng::{purpose, stream};
use crate::scalar::{Scalar, Vector, Weight};
use crate::stats::RatioMoments;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// `‖f_N‖_p / ‖g_N‖_p`.
    DecoupleUpper,
    /// `‖g_N‖_p / ‖f_N‖_p`.
    DecoupleLower,
    /// `‖Σ d_k‖_p / ‖Σ ε_k d_k‖_p`.
    RandomizedMinus,
    /// `‖Σ ε_k d_k‖_p / ‖Σ d_k‖_p`.
    RandomizedPlus,
}

impl Direction {
    pub const ALL: [Direction; 4] =
        [Direction::DecoupleUpper, Direction::DecoupleLower, Direction::RandomizedMinus, Direction::RandomizedPlus];

    pub fn is_randomized(self) -> bool {
        matches!(self, Direction::RandomizedMinus | Direction::RandomizedPlus)
    }

    /// Whether `f` sits in the numerator.
    fn f_on_top(self) -> bool {
        matches!(self, Direction::DecoupleUpper | Direction::RandomizedMinus)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::DecoupleUpper => "decouple-upper",
            Direction::DecoupleLower => "decouple-lower",
            Direction::RandomizedMinus => "randomized-minus",
            Direction::RandomizedPlus => "randomized-plus",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Direction::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown direction `{s}`")))
    }
}

/// Number of `(leaf, sign pattern)` outcomes of the randomized comparison.
pub fn randomized_count<S: Scalar, W: Weight>(pair: &TangentPair<S, W>) -> u128 {
    let depth = pair.depth() as u32;
    if depth >= 100 {
        return u128::MAX;
    }
    (pair.tree().leaf_count() as u128).saturating_mul(1u128 << depth)
}

/// Enumeration size needed for an exact ratio in `direction`.
pub fn exact_count<S: Scalar, W: Weight>(pair: &TangentPair<S, W>, direction: Direction) -> u128 {
    if direction.is_randomized() {
        randomized_count(pair)
    } else {
        pair.joint_count()
    }
}

/// Exact `E‖Σ_k ε_k d_k‖^p` with an independent Rademacher sequence `ε`.
pub fn randomized_moment<S: Scalar, W: Weight>(pair: &TangentPair<S, W>, p: S) -> Result<S> {
    let needed = randomized_count(pair);
    if needed > ENUMERATION_CAP {
        return Err(Error::BudgetExceeded { needed, cap: ENUMERATION_CAP });
    }
    let tree = pair.tree();
    let depth = pair.depth();
    let space = pair.space();
    let dim = pair.base().dim();
    let signs = 1usize << depth;
    let weight = S::of(1.0 / signs as f64);
    let total = chunked_reduce(
        tree.leaf_count(),
        |range| {
            let mut acc = S::zero();
            let mut sum = Vector::zeros(dim);
            for leaf in range {
                let pr: S = tree.leaf_prob(leaf).to_scalar();
                if pr == S::zero() {
                    continue;
                }
                let mut inner = S::zero();
                for mask in 0..signs {
                    sum.0.iter_mut().for_each(|x| *x = S::zero());
                    for n in 1..=depth {
                        let s = if mask >> (n - 1) & 1 == 1 { -S::one() } else { S::one() };
                        sum.add_scaled(s, pair.d(n, leaf));
                    }
                    inner += space.norm_unchecked(sum.as_slice()).powf(p);
                }
                acc += pr * weight * inner;
            }
            acc
        },
        |a, b| a + b,
    );
    Ok(total.unwrap_or_else(S::zero))
}

/// `E‖f_N‖^p` by summing over leaves.
pub fn terminal_moment<S: Scalar, W: Weight>(pair: &TangentPair<S, W>, p: S) -> S {
    let tree = pair.tree();
    let fx = pair.functionals();
    let space = pair.space();
    (0..tree.leaf_count())
        .map(|leaf| {
            tree.leaf_prob(leaf).to_scalar::<S>() * space.norm_unchecked(fx.partial_sum(pair.depth(), leaf)).powf(p)
        })
        .fold(S::zero(), |a, b| a + b)
}

/// Exact ratio of `p`-th moments in `direction`, raised to `1/p`.
///
/// The decoupled directions compare against the pair's tangent sequence, the
/// randomized ones against `Σ ε_k d_k`.
pub fn ratio<S: Scalar, W: Weight>(pair: &TangentPair<S, W>, p: S, direction: Direction) -> Result<S> {
    if !(p > S::zero()) {
        return Err(Error::InvalidParameter(format!("p = {} must be positive", p.as_f64())));
    }
    let (f, other) = if direction.is_randomized() {
        (terminal_moment(pair, p), randomized_moment(pair, p)?)
    } else {
        pair.moments(p)?
    };
    let (top, bottom) = if direction.f_on_top() { (f, other) } else { (other, f) };
    if bottom == S::zero() || !bottom.is_finite() || !top.is_finite() {
        return Err(Error::NotApplicable(format!("{direction}: denominator moment is {}", bottom.as_f64())));
    }
    Ok((top / bottom).powf(p.recip()))
}

/// Monte Carlo ratio with its delta-method standard error.
pub fn ratio_mc<S: Scalar, W: Weight>(
    pair: &TangentPair<S, W>,
    p: f64,
    direction: Direction,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if !(p > 0.0) || samples == 0 {
        return Err(Error::InvalidParameter(format!("need p > 0 and samples > 0; got p = {p}, samples = {samples}")));
    }
    let space = pair.space();
    let depth = pair.depth();
    let dim = pair.base().dim();
    let stats = chunked_reduce(
        samples,
        |range| {
            let mut acc = RatioMoments::default();
            let mut sum = Vector::zeros(dim);
            for i in range {
                let (f, other) = if direction.is_randomized() {
                    let leaf = sample_leaf(pair.tree(), &mut stream(seed, purpose::TREE_PATH, i as u64));
                    let mut signs = stream(seed, purpose::INNER, i as u64);
                    sum.0.iter_mut().for_each(|x| *x = S::zero());
                    for n in 1..=depth {
                        let s = if signs.gen::<bool>() { -S::one() } else { S::one() };
                        sum.add_scaled(s, pair.d(n, leaf));
                    }
                    let f = space.norm_unchecked(pair.functionals().partial_sum(depth, leaf));
                    (f, space.norm_unchecked(sum.as_slice()))
                } else {
                    let s = pair.sample(seed, i as u64);
                    (space.norm_unchecked(s.f.as_slice()), space.norm_unchecked(s.g.as_slice()))
                };
                let (f, other) = (f.as_f64().powf(p), other.as_f64().powf(p));
                if direction.f_on_top() {
                    acc.push(f, other);
                } else {
                    acc.push(other, f);
                }
            }
            acc
        },
        RatioMoments::merge,
    )
    .unwrap_or_default();
    if stats.y.mean() == 0.0 {
        return Err(Error::NotApplicable(format!("{direction}: denominator moment estimate is 0")));
    }
    let r = stats.ratio();
    let value = r.powf(1.0 / p);
    let se = value / (p * r) * stats.ratio_std_error();
    Ok((value, se))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probmodel::{decouple, AdaptedSequence, FiltrationTree, IncrementRule, ModelFamily, PredictableRule};
    use crate::spaces::SpaceDescriptor;
    use std::sync::Arc;

    fn pw(space: SpaceDescriptor, rule: PredictableRule) -> TangentPair<f64, f64> {
        let tree = Arc::new(FiltrationTree::paley_walsh(3).unwrap());
        decouple(AdaptedSequence::from_rules(tree, space, rule, IncrementRule::Scale).unwrap())
    }

    #[test]
    fn deterministic_labels_give_one() {
        let pair = pw(
            SpaceDescriptor::sup_norm(2).unwrap(),
            PredictableRule::PerLevel { values: vec![vec![1.0, -1.0], vec![2.0, 1.0], vec![-1.0, 0.5]] },
        );
        for d in Direction::ALL {
            for p in [0.5, 1.0, 3.0] {
                assert!((ratio(&pair, p, d).unwrap() - 1.0).abs() < 1e-12, "{d} {p}");
            }
        }
    }

    #[test]
    fn paley_walsh_randomized_matches_decoupled() {
        let fam = ModelFamily::new(SpaceDescriptor::sup_norm(3).unwrap(), 3).depth_range(3, 3).alphabet(2);
        for i in 0..5 {
            let seq = AdaptedSequence::<f64, f64>::from_rules(
                Arc::new(FiltrationTree::paley_walsh(3).unwrap()),
                SpaceDescriptor::sup_norm(3).unwrap(),
                match fam.generate(5, i) {
                    crate::probmodel::SequenceSpec::Rules { predictable, .. } => predictable,
                    _ => unreachable!(),
                },
                IncrementRule::Scale,
            );
            let Ok(seq) = seq else { continue };
            let pair = decouple(seq);
            let a = ratio(&pair, 1.5, Direction::DecoupleUpper).unwrap();
            let b = ratio(&pair, 1.5, Direction::RandomizedMinus).unwrap();
            assert!((a - b).abs() < 1e-12, "{a} {b}");
        }
    }

    #[test]
    fn zero_sequence_is_not_applicable() {
        let pair = pw(SpaceDescriptor::euclid(1).unwrap(), PredictableRule::Constant { value: vec![0.0] });
        assert!(matches!(ratio(&pair, 2.0, Direction::DecoupleUpper), Err(Error::NotApplicable(_))));
        assert!(matches!(ratio_mc(&pair, 2.0, Direction::RandomizedPlus, 100, 1), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn mc_agrees_with_exact() {
        let pair =
            pw(SpaceDescriptor::sup_norm(2).unwrap(), PredictableRule::PreviousIncrement { initial: vec![1.0, 1.0] });
        for d in Direction::ALL {
            let exact = ratio(&pair, 2.0, d).unwrap();
            let (est, se) = ratio_mc(&pair, 2.0, d, 20_000, 3).unwrap();
            assert!((est - exact).abs() <= 4.0 * se + 1e-12, "{d}: {est} ± {se} vs {exact}");
        }
    }

    #[test]
    fn direction_names_round_trip() {
        for d in Direction::ALL {
            assert_eq!(d.as_str().parse::<Direction>().unwrap(), d);
            assert_eq!(serde_json::to_string(&d).unwrap(), format!("\"{d}\""));
        }
    }
}
