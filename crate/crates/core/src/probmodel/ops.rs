//! Windows, stopping times and the Davis decomposition.

use super::sequence::AdaptedSequence;
use super::tangent::{TangentPair, TangentRule};
use super::tree::FiltrationTree;
use crate::error::{Error, Result};
use crate::scalar::{Scalar, Weight};

impl<S: Scalar, W: Weight> AdaptedSequence<S, W> {
    /// The started-stopped sequence `^k f^l` with increments `1_{k<n≤l} d_n`.
    pub fn window(&self, k: usize, l: usize) -> Result<Self> {
        if k > l || l > self.depth() {
            return Err(Error::InvalidParameter(format!(
                "window needs 0 <= k <= l <= {}, got k={k}, l={l}",
                self.depth()
            )));
        }
        let increments = (1..=self.depth())
            .map(|n| {
                let t = self.increment_table(n);
                if k < n && n <= l {
                    t.to_vec()
                } else {
                    vec![S::zero(); t.len()]
                }
            })
            .collect();
        Ok(self.with_increments(increments))
    }

    /// `f^τ` with increments `1_{τ ≥ n} d_n`.
    pub fn stop(&self, rule: &StoppingRule) -> Result<Self> {
        self.gate(rule, true)
    }

    /// `f − f^τ` with increments `1_{τ < n} d_n`.
    pub fn start(&self, rule: &StoppingRule) -> Result<Self> {
        self.gate(rule, false)
    }

    fn gate(&self, rule: &StoppingRule, keep_alive: bool) -> Result<Self> {
        if rule.shape != self.tree().shape() {
            return Err(Error::TreeMismatch);
        }
        let dim = self.dim();
        let tree = self.tree();
        let increments = (1..=self.depth())
            .map(|n| {
                let mut t = self.increment_table(n).to_vec();
                for c in 0..tree.node_count(n) {
                    if rule.alive(n - 1, tree.parent(n, c)) != keep_alive {
                        t[c * dim..(c + 1) * dim].iter_mut().for_each(|x| *x = S::zero());
                    }
                }
                t
            })
            .collect();
        Ok(self.with_increments(increments))
    }
}

/// A stopping time given by per-node stop decisions; the decision at a
/// depth-`n` node only sees the history up to depth `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingRule {
    shape: Vec<usize>,
    /// `alive[n][node]`: no stop has occurred at depths `0..=n` on the path.
    alive: Vec<Vec<bool>>,
}

impl StoppingRule {
    /// Builds `τ = min{n : decide(n, node_n)}`.
    pub fn from_fn<S: Scalar, W: Weight>(
        tree: &FiltrationTree<S, W>,
        mut decide: impl FnMut(usize, usize) -> bool,
    ) -> Self {
        let mut alive = vec![vec![!decide(0, 0)]];
        for n in 1..=tree.depth() {
            let row = (0..tree.node_count(n)).map(|c| alive[n - 1][tree.parent(n, c)] && !decide(n, c)).collect();
            alive.push(row);
        }
        Self { shape: tree.shape(), alive }
    }

    pub fn never<S: Scalar, W: Weight>(tree: &FiltrationTree<S, W>) -> Self {
        Self::from_fn(tree, |_, _| false)
    }

    pub fn at_root<S: Scalar, W: Weight>(tree: &FiltrationTree<S, W>) -> Self {
        Self::from_fn(tree, |n, _| n == 0)
    }

    /// First `n` with `‖f_n‖ > threshold`.
    pub fn first_exceedance<S: Scalar, W: Weight>(seq: &AdaptedSequence<S, W>, threshold: S) -> Self {
        let fx = seq.functionals();
        let space = seq.space();
        Self::from_fn(seq.tree(), |n, c| space.norm_unchecked(fx.partial_sum(n, c)) > threshold)
    }

    /// `τ ∧ σ`.
    pub fn earliest(&self, other: &StoppingRule) -> Result<StoppingRule> {
        if self.shape != other.shape {
            return Err(Error::TreeMismatch);
        }
        let alive = self
            .alive
            .iter()
            .zip(&other.alive)
            .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| x && y).collect())
            .collect();
        Ok(StoppingRule { shape: self.shape.clone(), alive })
    }

    fn alive(&self, n: usize, node: usize) -> bool {
        self.alive[n][node]
    }

    /// `τ` on a leaf, `None` for `τ = ∞`.
    pub fn tau<S: Scalar, W: Weight>(&self, tree: &FiltrationTree<S, W>, leaf: usize) -> Option<usize> {
        (0..=tree.depth()).find(|&n| !self.alive[n][tree.ancestor(leaf, n)])
    }
}

impl<S: Scalar, W: Weight> TangentPair<S, W> {
    /// Davis decomposition `(d′, e′)`, `(d″, e″)`: for `n ≥ 2` the good part keeps
    /// increments with `‖·‖ ≤ 2 d*_{n−1}(ω)`; `d′_1 = 0`, `d″_1 = d_1`.
    pub fn davis_split(&self) -> Result<(Self, Self)> {
        if self.rule() != TangentRule::Decoupled {
            return Err(Error::Precondition("the Davis split is defined for decoupled pairs".into()));
        }
        let base = self.base();
        let tree = base.tree();
        let dim = base.dim();
        let fx = self.functionals();
        let two = S::of(2.0);
        let mut good = Vec::with_capacity(base.depth());
        let mut bad = Vec::with_capacity(base.depth());
        for n in 1..=base.depth() {
            let t = base.increment_table(n);
            let mut g = vec![S::zero(); t.len()];
            let mut b = vec![S::zero(); t.len()];
            for c in 0..tree.node_count(n) {
                let slot = c * dim..(c + 1) * dim;
                let small = n >= 2 && self.entry_norm(n, c) <= two * fx.d_star(n - 1, tree.parent(n, c));
                let target = if small { &mut g } else { &mut b };
                target[slot.clone()].copy_from_slice(&t[slot]);
            }
            good.push(g);
            bad.push(b);
        }
        Ok((
            TangentPair::new(base.with_increments(good), TangentRule::Decoupled),
            TangentPair::new(base.with_increments(bad), TangentRule::Decoupled),
        ))
    }
}

/// Outcome of the pathwise Davis bound `‖f″_n‖^r ≤ Σ‖d″_k‖^r ≤ (1−2^{−r})^{−1}(d*)^r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DavisCheck {
    pub holds: bool,
    /// Smallest `rhs − lhs` over paths and both inequalities.
    pub margin: f64,
    pub paths: usize,
}

pub fn check_davis_bound<S: Scalar, W: Weight>(pair: &TangentPair<S, W>, r: S) -> Result<DavisCheck> {
    let (_, bad) = pair.davis_split()?;
    let base = pair.base();
    let tree = base.tree();
    let space = base.space();
    let depth = base.depth();
    let bad_fx = bad.functionals();
    let fx = pair.functionals();
    let factor = (S::one() - S::of(2.0).powf(-r)).recip();
    let mut margin = f64::INFINITY;
    for leaf in 0..tree.leaf_count() {
        let mut sum = S::zero();
        let mut worst_partial = S::zero();
        for n in 1..=depth {
            let c = tree.ancestor(leaf, n);
            sum += bad.entry_norm(n, c).powf(r);
            worst_partial = worst_partial.max(space.norm_unchecked(bad_fx.partial_sum(n, c)).powf(r));
        }
        let cap = factor * fx.d_star(depth, leaf).powf(r);
        let slack = S::of(1e-12) * (S::one() + cap);
        let m1 = (sum - worst_partial + slack).as_f64();
        let m2 = (cap - sum + slack).as_f64();
        margin = margin.min(m1).min(m2);
    }
    Ok(DavisCheck { holds: margin >= 0.0, margin, paths: tree.leaf_count() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probmodel::sequence::{IncrementRule, PredictableRule};
    use crate::probmodel::tangent::decouple;
    use crate::spaces::SpaceDescriptor;
    use std::sync::Arc;

    type Seq = AdaptedSequence<f64, f64>;

    fn feedback(depth: usize) -> Seq {
        Seq::from_rules(
            Arc::new(FiltrationTree::paley_walsh(depth).unwrap()),
            SpaceDescriptor::euclid(1).unwrap(),
            PredictableRule::PartialSum { initial: vec![1.0] },
            IncrementRule::Scale,
        )
        .unwrap()
    }

    fn tables(seq: &Seq) -> Vec<Vec<f64>> {
        (1..=seq.depth()).map(|n| seq.increment_table(n).to_vec()).collect()
    }

    #[test]
    fn window_cases() {
        let seq = feedback(3);
        assert_eq!(tables(&seq.window(0, 3).unwrap()), tables(&seq));
        assert!(tables(&seq.window(2, 2).unwrap()).iter().flatten().all(|x| *x == 0.0));
        let w = tables(&seq.window(1, 2).unwrap());
        assert!(w[0].iter().all(|x| *x == 0.0));
        assert_eq!(w[1], seq.increment_table(2));
        assert!(w[2].iter().all(|x| *x == 0.0));
        assert!(seq.window(2, 1).is_err());
    }

    #[test]
    fn stop_and_start_partition_increments() {
        let seq = feedback(4);
        let tree = seq.tree().clone();
        assert_eq!(tables(&seq.stop(&StoppingRule::never(&tree)).unwrap()), tables(&seq));
        assert!(tables(&seq.stop(&StoppingRule::at_root(&tree)).unwrap()).iter().flatten().all(|x| *x == 0.0));
        let rule = StoppingRule::first_exceedance(&seq, 1.0);
        let a = tables(&seq.stop(&rule).unwrap());
        let b = tables(&seq.start(&rule).unwrap());
        for ((x, y), z) in a.iter().zip(&b).zip(tables(&seq)) {
            for i in 0..z.len() {
                assert_eq!(x[i] + y[i], z[i]);
            }
        }
    }

    #[test]
    fn tree_mismatch_is_rejected() {
        let seq = feedback(3);
        let other = FiltrationTree::<f64, f64>::paley_walsh(2).unwrap();
        assert!(matches!(seq.stop(&StoppingRule::never(&other)), Err(Error::TreeMismatch)));
    }

    #[test]
    fn stopped_sums_stay_bounded() {
        let seq = feedback(5);
        let rule = StoppingRule::first_exceedance(&seq, 1.0);
        let stopped = seq.stop(&rule).unwrap();
        let fx = stopped.functionals();
        let r = seq.space().r_exponent();
        let max_d = (1..=5).flat_map(|n| seq.increment_table(n).iter().map(|x| x.abs())).fold(0.0, f64::max);
        let bound = (1.0 + max_d.powf(r)).powf(1.0 / r);
        for n in 1..=5 {
            for c in 0..seq.tree().node_count(n) {
                assert!(fx.partial_sum(n, c)[0].abs() <= bound + 1e-12);
            }
        }
        let tree = seq.tree();
        for leaf in 0..tree.leaf_count() {
            if let Some(t) = rule.tau(tree, leaf) {
                assert!(fx.partial_sum(t, tree.ancestor(leaf, t))[0].abs() > 1.0);
            }
        }
    }

    #[test]
    fn davis_examples() {
        let tree = Arc::new(FiltrationTree::<f64, f64>::paley_walsh(3).unwrap());
        let space = SpaceDescriptor::euclid(1).unwrap();
        let constant = Seq::from_rules(
            tree.clone(),
            space.clone(),
            PredictableRule::Constant { value: vec![1.0] },
            IncrementRule::Scale,
        )
        .unwrap();
        let (g, b) = decouple(constant.clone()).davis_split().unwrap();
        assert_eq!(b.base().increment_table(1), constant.increment_table(1));
        assert!(g.base().increment_table(1).iter().all(|x| *x == 0.0));
        for n in 2..=3 {
            assert!(b.base().increment_table(n).iter().all(|x| *x == 0.0));
            assert_eq!(g.base().increment_table(n), constant.increment_table(n));
        }
        let growing = Seq::from_rules(
            tree,
            space,
            PredictableRule::PerLevel { values: vec![vec![3.0], vec![9.0], vec![27.0]] },
            IncrementRule::Scale,
        )
        .unwrap();
        let (g, b) = decouple(growing.clone()).davis_split().unwrap();
        assert!((1..=3).all(|n| g.base().increment_table(n).iter().all(|x| *x == 0.0)));
        assert_eq!(tables(b.base()), tables(&growing));
        assert!(check_davis_bound(&decouple(growing), 1.0).unwrap().holds);
    }

    #[test]
    fn davis_parts_sum_to_whole() {
        let seq = feedback(4);
        let pair = decouple(seq.clone());
        let (g, b) = pair.davis_split().unwrap();
        for n in 1..=4 {
            let (x, y, z) = (g.base().increment_table(n), b.base().increment_table(n), seq.increment_table(n));
            for i in 0..z.len() {
                assert_eq!(x[i] + y[i], z[i]);
            }
        }
        assert!(check_davis_bound(&pair, 1.0).unwrap().holds);
    }

    #[test]
    fn davis_split_needs_decoupled_rule() {
        let pair = TangentPair::new(feedback(2), TangentRule::Identical);
        assert!(pair.davis_split().is_err());
    }
}
