//! Monte Carlo sampling of joint outcomes `(ω, ω̃)`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tangent::TangentPair;
use super::tree::FiltrationTree;
use crate::parallel::chunked_reduce;
use crate::rng::{purpose, stream};
use crate::scalar::{Scalar, Vector, Weight};

/// One joint draw.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSample<S> {
    pub leaf: usize,
    pub copy: usize,
    pub f: Vector<S>,
    pub g: Vector<S>,
    pub f_star: S,
    pub d_star: S,
    pub e_star: S,
    pub g_star: S,
}

/// Draws a leaf by walking the tree with the level probabilities.
pub fn sample_leaf<S: Scalar, W: Weight>(tree: &FiltrationTree<S, W>, rng: &mut ChaCha8Rng) -> usize {
    let mut node = 0usize;
    for n in 1..=tree.depth() {
        let probs = tree.level(n).probs();
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut j = probs.len() - 1;
        for (i, p) in probs.iter().enumerate() {
            acc += p.to_f64();
            if u < acc {
                j = i;
                break;
            }
        }
        node = node * probs.len() + j;
    }
    node
}

impl<S: Scalar, W: Weight> TangentPair<S, W> {
    /// Statistics of the joint outcome `(leaf, copy)`.
    pub fn joint_at(&self, leaf: usize, copy: usize) -> JointSample<S> {
        let depth = self.depth();
        let space = self.space();
        let fx = self.functionals();
        let mut g = Vector::zeros(self.base().dim());
        let mut e_star = S::zero();
        let mut g_star = S::zero();
        for n in 1..=depth {
            let node = self.e_node(n, leaf, copy);
            g.add_assign_slice(self.base().increment(n, node));
            e_star = e_star.max(self.entry_norm(n, node));
            g_star = g_star.max(space.norm_unchecked(g.as_slice()));
        }
        JointSample {
            leaf,
            copy,
            f: Vector(fx.partial_sum(depth, leaf).to_vec()),
            g,
            f_star: fx.f_star(depth, leaf),
            d_star: fx.d_star(depth, leaf),
            e_star,
            g_star,
        }
    }

    /// Replica `index` under `seed`; ω and ω̃ come from disjoint streams.
    pub fn sample(&self, seed: u64, index: u64) -> JointSample<S> {
        let tree = self.tree();
        let leaf = sample_leaf(tree, &mut stream(seed, purpose::TREE_PATH, index));
        let copy = sample_leaf(tree, &mut stream(seed, purpose::TREE_COPY, index));
        self.joint_at(leaf, copy)
    }

    /// Lazily generated i.i.d. joint draws, deterministic in `(seed, index)`.
    pub fn sample_paths(&self, count: usize, seed: u64) -> impl Iterator<Item = JointSample<S>> + '_ {
        (0..count as u64).map(move |i| self.sample(seed, i))
    }

    /// Parallel fold over `count` replicas; identical for any worker count.
    pub fn fold_samples<A, I, F, M>(&self, count: usize, seed: u64, init: I, step: F, merge: M) -> A
    where
        A: Send,
        I: Fn() -> A + Sync,
        F: Fn(&mut A, &JointSample<S>) + Sync,
        M: Fn(A, A) -> A,
    {
        chunked_reduce(
            count,
            |range| {
                let mut acc = init();
                for i in range {
                    step(&mut acc, &self.sample(seed, i as u64));
                }
                acc
            },
            merge,
        )
        .unwrap_or_else(init)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probmodel::sequence::{AdaptedSequence, IncrementRule, PredictableRule};
    use crate::probmodel::tangent::decouple;
    use crate::spaces::SpaceDescriptor;
    use crate::stats::Moments;
    use std::sync::Arc;

    fn pair() -> TangentPair<f64, f64> {
        let seq = AdaptedSequence::from_rules(
            Arc::new(FiltrationTree::paley_walsh(4).unwrap()),
            SpaceDescriptor::seq_lp(1.5, 2).unwrap(),
            PredictableRule::PartialSum { initial: vec![1.0, 0.5] },
            IncrementRule::Scale,
        )
        .unwrap();
        decouple(seq)
    }

    #[test]
    fn reproducible_and_seed_sensitive() {
        let p = pair();
        let a: Vec<_> = p.sample_paths(1, 11).collect();
        let b: Vec<_> = p.sample_paths(1, 11).collect();
        assert_eq!(a, b);
        let x: Vec<(usize, usize)> = p.sample_paths(16, 1).map(|s| (s.leaf, s.copy)).collect();
        let y: Vec<(usize, usize)> = p.sample_paths(16, 2).map(|s| (s.leaf, s.copy)).collect();
        assert_ne!(x, y);
    }

    #[test]
    fn monte_carlo_mean_matches_enumeration() {
        let p = pair();
        let q = 1.7;
        let (exact, _) = p.moments(q).unwrap();
        let space = p.space().clone();
        let m = p.fold_samples(
            100_000,
            3,
            Moments::default,
            |acc, s| acc.push(space.norm_unchecked(s.f.as_slice()).powf(q)),
            Moments::merge,
        );
        assert!((m.mean() - exact).abs() <= 4.0 * m.std_error(), "{} vs {}", m.mean(), exact);
    }
}
