//! Conditional Lévy, contraction, symmetrization, reverse Kolmogorov and
//! tangent tail inequalities.

use serde::{Deserialize, Serialize};

use super::report::IneqReport;
use crate::error::{Error, Result};
use crate::parallel::ordered_map;
use crate::probmodel::measure::is_symmetric_law;
use crate::probmodel::{AdaptedSequence, TangentPair, TangentRule};
use crate::scalar::{Scalar, Weight, PROB_SLACK};
use crate::spaces::{lu_constants, SpaceDescriptor};
use crate::stats::{wilson, Z_999};

/// Finite law as `(value, probability)` atoms.
pub type Law<S, W> = Vec<(Vec<S>, W)>;

/// One conditioning atom of `G`: its mass and the laws of `ξ_1, …, ξ_n`,
/// which are independent given the atom.
#[derive(Debug, Clone)]
pub struct Atom<S, W> {
    pub weight: W,
    pub marginals: Vec<Law<S, W>>,
}

/// Conditionally independent, conditionally symmetric `(ξ_k)` given a finite `G`.
#[derive(Debug, Clone)]
pub struct ConditionalModel<S, W> {
    space: SpaceDescriptor,
    atoms: Vec<Atom<S, W>>,
}

impl<S: Scalar, W: Weight> ConditionalModel<S, W> {
    /// The decoupled sequence `(e_n)` given `F_∞`.
    ///
    /// Given `ω`, `e_n` has the conditional law of `d_n` on the depth-`(n−1)`
    /// ancestor of `ω`; laws only depend on the depth-`(N−1)` ancestor, so
    /// those nodes are the atoms.
    pub fn from_decoupled(pair: &TangentPair<S, W>) -> Result<Self> {
        if pair.rule() != TangentRule::Decoupled {
            return Err(Error::Precondition(format!("{:?} copies are not conditionally independent", pair.rule())));
        }
        let seq = pair.base();
        if !seq.is_conditionally_symmetric() {
            return Err(Error::NotSymmetric("increments are not conditionally symmetric".into()));
        }
        pair.check_budget()?;
        let tree = pair.tree();
        let depth = pair.depth();
        let atoms = (0..tree.node_count(depth - 1))
            .map(|a| Atom {
                weight: tree.node_prob(depth - 1, a).clone(),
                marginals: (1..=depth).map(|n| law_of(seq, n, tree.ancestor_of(depth - 1, a, n - 1))).collect(),
            })
            .collect();
        Ok(Self { space: seq.space().clone(), atoms })
    }

    /// A sequence with independent increments, `G` trivial.
    pub fn from_independent(seq: &AdaptedSequence<S, W>) -> Result<Self> {
        if !seq.is_history_independent() {
            return Err(Error::Precondition("increments depend on the past".into()));
        }
        if !seq.is_conditionally_symmetric() {
            return Err(Error::NotSymmetric("increments are not symmetric".into()));
        }
        let marginals = (1..=seq.depth()).map(|n| law_of(seq, n, 0)).collect();
        Ok(Self { space: seq.space().clone(), atoms: vec![Atom { weight: W::one(), marginals }] })
    }

    /// Independent `ξ_k` with the given symmetric laws, `G` trivial.
    pub fn from_laws(space: SpaceDescriptor, marginals: Vec<Law<S, W>>) -> Result<Self> {
        for (k, law) in marginals.iter().enumerate() {
            check_law(&space, law)?;
            if !is_symmetric_law(law.iter().cloned(), PROB_SLACK) {
                return Err(Error::NotSymmetric(format!("law of ξ_{} is not symmetric", k + 1)));
            }
        }
        if marginals.is_empty() {
            return Err(Error::InvalidParameter("at least one variable required".into()));
        }
        Ok(Self { space, atoms: vec![Atom { weight: W::one(), marginals }] })
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn atoms(&self) -> &[Atom<S, W>] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms[0].marginals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check_mask(&self, mask: &[bool]) -> Result<()> {
        if mask.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: mask.len() });
        }
        Ok(())
    }
}

fn law_of<S: Scalar, W: Weight>(seq: &AdaptedSequence<S, W>, n: usize, node: usize) -> Law<S, W> {
    seq.conditional_law(n, node).map(|(v, p)| (v.to_vec(), p.clone())).collect()
}

fn check_law<S: Scalar, W: Weight>(space: &SpaceDescriptor, law: &Law<S, W>) -> Result<()> {
    if law.is_empty() {
        return Err(Error::InvalidParameter("empty law".into()));
    }
    for (v, p) in law {
        if v.len() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), got: v.len() });
        }
        if p < &W::zero() {
            return Err(Error::InvalidParameter("negative probability".into()));
        }
    }
    let total = law.iter().fold(W::zero(), |a, (_, p)| a + p.clone());
    if !total.within(&W::one(), PROB_SLACK) {
        return Err(Error::InvalidParameter(format!("law mass {} ≠ 1", total.to_f64())));
    }
    Ok(())
}

/// Calls `visit(prob, terms)` for every joint outcome of independent laws.
fn for_each_outcome<S: Scalar, W: Weight>(laws: &[Law<S, W>], mut visit: impl FnMut(W, &[&[S]])) {
    let mut idx = vec![0usize; laws.len()];
    let mut terms: Vec<&[S]> = laws.iter().map(|l| l[0].0.as_slice()).collect();
    loop {
        let prob = laws.iter().zip(&idx).fold(W::one(), |a, (l, &i)| a * l[i].1.clone());
        visit(prob, &terms);
        let mut k = laws.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < laws[k].len() {
                terms[k] = &laws[k][idx[k]].0;
                break;
            }
            idx[k] = 0;
            terms[k] = &laws[k][0].0;
        }
    }
}

/// Norms of the partial sums `S_1, …, S_n`.
fn partial_sum_norms<S: Scalar>(space: &SpaceDescriptor, terms: &[&[S]], mask: Option<&[bool]>) -> Vec<S> {
    let mut s = vec![S::zero(); space.dim()];
    terms
        .iter()
        .enumerate()
        .map(|(k, t)| {
            if mask.map_or(true, |m| m[k]) {
                s.iter_mut().zip(t.iter()).for_each(|(a, &b)| *a += b);
            }
            space.norm_unchecked(&s)
        })
        .collect()
}

fn levy_factor<S: Scalar>(space: &SpaceDescriptor) -> S {
    S::of(2f64.powf(1.0 - 1.0 / space.r_exponent()))
}

fn worst_of(reports: Vec<IneqReport>) -> IneqReport {
    reports.into_iter().reduce(IneqReport::worst).expect("at least one atom")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LevyMode {
    MaxOfSums,
    MaxOfTerms,
}

/// `P(max_k ‖S_k‖ > t | G) ≤ 2 P(‖S_n‖ > 2^{1−1/r} t | G)` on every atom, or
/// the same with `max_k ‖ξ_k‖` on the left.
pub fn check_levy<S: Scalar, W: Weight>(model: &ConditionalModel<S, W>, t: S, mode: LevyMode) -> IneqReport {
    let space = &model.space;
    let c = levy_factor::<S>(space);
    let reports = ordered_map(model.atoms.len(), |a| {
        let (mut lhs, mut tail) = (W::zero(), W::zero());
        for_each_outcome(&model.atoms[a].marginals, |p, terms| {
            let sums = partial_sum_norms(space, terms, None);
            let left = match mode {
                LevyMode::MaxOfSums => sums.iter().fold(S::zero(), |m, &x| m.max(x)),
                LevyMode::MaxOfTerms => terms.iter().fold(S::zero(), |m, x| m.max(space.norm_unchecked(x))),
            };
            if left > t {
                lhs = lhs.clone() + p.clone();
            }
            if sums[sums.len() - 1] > c * t {
                tail = tail.clone() + p;
            }
        });
        IneqReport::compare("levy", &lhs, &tail.double(), 2.0).param("atom", a)
    });
    worst_of(reports)
        .param("t", t.as_f64())
        .param("r", space.r_exponent())
        .param("mode", serde_json::to_value(mode).expect("serializable"))
        .param("atoms", model.atoms.len())
}

/// `P(‖Σ v_j ξ_j‖ > t | G) ≤ 2 P(‖Σ ξ_j‖ > 2^{1−1/r} t | G)` for `v_j ∈ {0, 1}`.
pub fn check_contraction<S: Scalar, W: Weight>(
    model: &ConditionalModel<S, W>,
    mask: &[bool],
    t: S,
) -> Result<IneqReport> {
    model.check_mask(mask)?;
    let space = &model.space;
    let c = levy_factor::<S>(space);
    let reports = ordered_map(model.atoms.len(), |a| {
        let (mut lhs, mut tail) = (W::zero(), W::zero());
        for_each_outcome(&model.atoms[a].marginals, |p, terms| {
            let masked = partial_sum_norms(space, terms, Some(mask));
            let full = partial_sum_norms(space, terms, None);
            if masked[masked.len() - 1] > t {
                lhs = lhs.clone() + p.clone();
            }
            if full[full.len() - 1] > c * t {
                tail = tail.clone() + p;
            }
        });
        IneqReport::compare("contraction", &lhs, &tail.double(), 2.0).param("atom", a)
    });
    let mask_str: String = mask.iter().map(|&b| if b { '1' } else { '0' }).collect();
    Ok(worst_of(reports).param("t", t.as_f64()).param("r", space.r_exponent()).param("mask", mask_str))
}

/// `E‖ξ‖^p ≤ 2^{1−p} u_{p/r} E‖ξ + ζ‖^p` for independent `ξ`, `ζ` with `ζ` symmetric.
pub fn check_symsum<S: Scalar, W: Weight>(
    space: &SpaceDescriptor,
    xi: &Law<S, W>,
    zeta: &Law<S, W>,
    p: S,
) -> Result<IneqReport> {
    check_law(space, xi)?;
    check_law(space, zeta)?;
    if !is_symmetric_law(zeta.iter().cloned(), PROB_SLACK) {
        return Err(Error::NotSymmetric("ζ is not symmetric".into()));
    }
    let r = S::of(space.r_exponent());
    let (_, u) = lu_constants(p / r)?;
    let constant = S::of(2.0).powf(S::one() - p) * u;
    let lhs = xi.iter().fold(S::zero(), |a, (x, w)| a + w.to_scalar::<S>() * space.norm_unchecked(x).powf(p));
    let mut sum = S::zero();
    let mut buf = vec![S::zero(); space.dim()];
    for (x, wx) in xi {
        for (z, wz) in zeta {
            buf.iter_mut().zip(x.iter().zip(z)).for_each(|(b, (&a, &c))| *b = a + c);
            sum += (wx.clone() * wz.clone()).to_scalar::<S>() * space.norm_unchecked(&buf).powf(p);
        }
    }
    let rhs = constant * sum;
    let slack = PROB_SLACK * (1.0 + rhs.as_f64().abs());
    Ok(IneqReport::exact("symsum", lhs.as_f64(), rhs.as_f64(), constant.as_f64(), slack)
        .param("p", p.as_f64())
        .param("r", r.as_f64()))
}

/// `P(max_k ‖S_k‖ > t | G) ≥ 2^{p−1}[u_{p/r}^{−2} − (t^p + E(ξ*^p | G)) / E(‖S_n‖^p | G)]`.
///
/// Reported as `lhs = bound`, `rhs = probability`. An atom with
/// `E‖S_n‖^p = 0` is vacuous with bound `−∞`.
pub fn check_reverse_kolmogorov<S: Scalar, W: Weight>(
    model: &ConditionalModel<S, W>,
    t: S,
    p: S,
) -> Result<IneqReport> {
    let space = &model.space;
    let r = S::of(space.r_exponent());
    let (_, u) = lu_constants(p / r)?;
    let two = S::of(2.0);
    let reports = ordered_map(model.atoms.len(), |a| {
        let (mut prob, mut sum_moment, mut star_moment) = (W::zero(), S::zero(), S::zero());
        for_each_outcome(&model.atoms[a].marginals, |w, terms| {
            let sums = partial_sum_norms(space, terms, None);
            let ws: S = w.to_scalar();
            sum_moment += ws * sums[sums.len() - 1].powf(p);
            let xi_star = terms.iter().fold(S::zero(), |m, x| m.max(space.norm_unchecked(x)));
            star_moment += ws * xi_star.powf(p);
            if sums.iter().any(|&s| s > t) {
                prob = prob.clone() + w;
            }
        });
        if sum_moment == S::zero() {
            return IneqReport::vacuous(
                "reverse-kolmogorov",
                f64::NEG_INFINITY,
                prob.to_f64(),
                f64::NAN,
                "zero p-th moment of the sum",
            )
            .param("atom", a);
        }
        let bound = two.powf(p - S::one()) * (u.powi(-2) - (t.powf(p) + star_moment) / sum_moment);
        IneqReport::exact("reverse-kolmogorov", bound.as_f64(), prob.to_f64(), u.as_f64(), PROB_SLACK).param("atom", a)
    });
    Ok(worst_of(reports).param("t", t.as_f64()).param("p", p.as_f64()).param("r", r.as_f64()))
}

/// `P(e* > t) ≤ 2 P(d* > t)` and `P(d* > t) ≤ 2 P(e* > t)` on every grid point,
/// by joint enumeration. Returns the worst grid point of each direction.
pub fn check_tail_comparison<S: Scalar, W: Weight>(pair: &TangentPair<S, W>, grid: &[S]) -> Result<[IneqReport; 2]> {
    if grid.is_empty() {
        return Err(Error::GridMismatch("empty t-grid".into()));
    }
    let tree = pair.tree();
    let depth = pair.depth();
    let pe = pair.fold_joint(
        || vec![W::zero(); grid.len()],
        |acc, o| {
            for (a, &t) in acc.iter_mut().zip(grid) {
                if o.e_star > t {
                    *a = a.clone() + o.prob.clone();
                }
            }
        },
        |a, b| a.into_iter().zip(b).map(|(x, y)| x + y).collect(),
    )?;
    let mut pd = vec![W::zero(); grid.len()];
    for leaf in 0..tree.leaf_count() {
        let d_star = pair.functionals().d_star(depth, leaf);
        for (a, &t) in pd.iter_mut().zip(grid) {
            if d_star > t {
                *a = a.clone() + tree.leaf_prob(leaf).clone();
            }
        }
    }
    let side = |id: &str, lhs: &[W], rhs: &[W]| {
        worst_of(
            grid.iter()
                .enumerate()
                .map(|(i, t)| IneqReport::compare(id, &lhs[i], &rhs[i].double(), 2.0).param("t", t.as_f64()))
                .collect(),
        )
        .param("grid", grid.len())
    };
    Ok([side("tail-e-by-d", &pe, &pd), side("tail-d-by-e", &pd, &pe)])
}

/// Monte Carlo version of [`check_tail_comparison`]. A grid point is flagged
/// only when the one-sided 99.9% Wilson bounds exclude the inequality, i.e.
/// `lower(P(lhs)) > 2 · upper(P(rhs))`.
pub fn check_tail_comparison_mc<S: Scalar, W: Weight>(
    pair: &TangentPair<S, W>,
    grid: &[S],
    samples: usize,
    seed: u64,
) -> Result<[IneqReport; 2]> {
    if grid.is_empty() {
        return Err(Error::GridMismatch("empty t-grid".into()));
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("zero samples".into()));
    }
    let counts = pair.fold_samples(
        samples,
        seed,
        || vec![(0u64, 0u64); grid.len()],
        |acc, s| {
            for (a, &t) in acc.iter_mut().zip(grid) {
                a.0 += (s.e_star > t) as u64;
                a.1 += (s.d_star > t) as u64;
            }
        },
        |a, b| a.into_iter().zip(b).map(|(x, y)| (x.0 + y.0, x.1 + y.1)).collect(),
    );
    let n = samples as u64;
    let side = |id: &str, pick: fn((u64, u64)) -> (u64, u64)| {
        worst_of(
            grid.iter()
                .zip(&counts)
                .map(|(t, &c)| {
                    let (kl, kr) = pick(c);
                    let (lo, _) = wilson(kl, n, Z_999);
                    let (_, hi) = wilson(kr, n, Z_999);
                    let lhs = kl as f64 / n as f64;
                    let rhs = 2.0 * kr as f64 / n as f64;
                    let mut r = IneqReport::exact(id, lhs, rhs, 2.0, 0.0).param("t", t.as_f64());
                    r.set_holds(lo <= 2.0 * hi);
                    r.margin = 2.0 * hi - lo;
                    r
                })
                .collect(),
        )
        .param("grid", grid.len())
        .monte_carlo(n, seed)
        .note("violation flagged only when one-sided 99.9% Wilson bounds exclude the inequality")
    };
    Ok([side("tail-e-by-d", |c| c), side("tail-d-by-e", |c| (c.1, c.0))])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probmodel::{decouple, FiltrationTree, IncrementRule, PredictableRule};
    use std::sync::Arc;

    fn rademacher(depth: usize) -> ConditionalModel<f64, f64> {
        let law = vec![(vec![1.0], 0.5), (vec![-1.0], 0.5)];
        ConditionalModel::from_laws(SpaceDescriptor::euclid(1).unwrap(), vec![law; depth]).unwrap()
    }

    fn walk(depth: usize) -> crate::DyadicSequence {
        let tree = Arc::new(FiltrationTree::paley_walsh(depth).unwrap());
        AdaptedSequence::from_rules(
            tree,
            SpaceDescriptor::euclid(1).unwrap(),
            PredictableRule::Constant { value: vec![1.0] },
            IncrementRule::Scale,
        )
        .unwrap()
    }

    #[test]
    fn levy_rademacher_walk() {
        let m = rademacher(3);
        // P(max|S_k| > 0.5) = 1, P(|S_3| > 0.5) = 1.
        let r = check_levy(&m, 0.5, LevyMode::MaxOfSums);
        assert!(r.holds);
        assert_eq!(r.lhs, 1.0);
        assert_eq!(r.rhs, 2.0);
        let r = check_levy(&m, 1.5, LevyMode::MaxOfSums);
        // P(max > 1.5) = P(|S_2| = 2) = 1/2, P(|S_3| > 1.5) = 1/4.
        assert!(r.holds);
        assert!((r.lhs - 0.5).abs() < 1e-15);
        assert!((r.rhs - 0.5).abs() < 1e-15);
    }

    #[test]
    fn levy_beyond_range_is_zero() {
        let r = check_levy(&rademacher(3), 10.0, LevyMode::MaxOfTerms);
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        assert!(r.holds);
    }

    #[test]
    fn levy_threshold_scales_for_quasi_norm() {
        let space = SpaceDescriptor::seq_lp(0.5, 2).unwrap();
        let law = vec![(vec![1.0, 0.0], 0.5), (vec![-1.0, 0.0], 0.5)];
        let m = ConditionalModel::from_laws(space, vec![law]).unwrap();
        // With one term, P(|ξ| > t) ≤ 2 P(|ξ| > t/2); t = 1.5 gives 0 ≤ 2.
        let r = check_levy(&m, 1.5, LevyMode::MaxOfSums);
        assert_eq!((r.lhs, r.rhs), (0.0, 2.0));
    }

    #[test]
    fn decoupled_model_from_walk() {
        let pair = decouple(walk(3));
        let m = ConditionalModel::from_decoupled(&pair).unwrap();
        assert_eq!(m.atoms().len(), 4);
        let r = check_levy(&m, 1.0, LevyMode::MaxOfSums);
        assert!(r.holds);
    }

    #[test]
    fn contraction_masks() {
        let m = rademacher(4);
        let all = check_contraction(&m, &[true; 4], 1.0).unwrap();
        assert!(all.holds);
        let none = check_contraction(&m, &[false; 4], 1.0).unwrap();
        assert_eq!(none.lhs, 0.0);
        assert!(check_contraction(&m, &[true, false, true, true], 0.5).unwrap().holds);
        assert!(check_contraction(&m, &[true], 0.5).is_err());
    }

    #[test]
    fn symsum_hilbert_identity() {
        let space = SpaceDescriptor::euclid(2).unwrap();
        let xi = vec![(vec![1.0, 2.0], 1.0)];
        let zeta = vec![(vec![3.0, -1.0], 0.5), (vec![-3.0, 1.0], 0.5)];
        let r = check_symsum(&space, &xi, &zeta, 2.0).unwrap();
        assert!((r.lhs - 5.0).abs() < 1e-12);
        assert!((r.rhs - 15.0).abs() < 1e-12);
        let zero = vec![(vec![0.0, 0.0], 1.0)];
        assert!(check_symsum(&space, &xi, &zero, 2.0).unwrap().holds);
        assert!(check_symsum(&space, &zeta, &xi, 2.0).is_err());
    }

    #[test]
    fn reverse_kolmogorov_depth3() {
        let m = rademacher(3);
        let r = check_reverse_kolmogorov(&m, 1.0, 2.0).unwrap();
        // E S_3² = 3, E ξ*² = 1, u_2 = 2: bound = 2[1/4 − 2/3] < 0.
        assert!((r.lhs - 2.0 * (0.25 - 2.0 / 3.0)).abs() < 1e-12);
        assert!(r.holds);
        let zero =
            ConditionalModel::from_laws(SpaceDescriptor::euclid(1).unwrap(), vec![vec![(vec![0.0], 1.0)]; 2]).unwrap();
        let v = check_reverse_kolmogorov(&zero, 1.0, 2.0).unwrap();
        assert_eq!(v.status, super::super::report::Status::Vacuous);
        assert_eq!(v.lhs, f64::NEG_INFINITY);
    }

    #[test]
    fn tail_comparison_exact_and_mc() {
        let pair = decouple(walk(3));
        let [a, b] = check_tail_comparison(&pair, &[0.5, 2.0]).unwrap();
        assert!(a.holds && b.holds);
        let pair = decouple(
            crate::probmodel::AdaptedSequence::<f64, f64>::from_rules(
                Arc::new(FiltrationTree::paley_walsh(6).unwrap()),
                SpaceDescriptor::euclid(1).unwrap(),
                PredictableRule::PreviousIncrement { initial: vec![1.0] },
                IncrementRule::Scale,
            )
            .unwrap(),
        );
        let [a, b] = check_tail_comparison_mc(&pair, &[0.5, 1.0, 3.0], 2000, 7).unwrap();
        assert!(a.holds && b.holds);
        assert_eq!(a.samples, 2000);
    }
}
