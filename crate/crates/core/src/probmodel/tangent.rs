use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::measure::{l1_distance, Interner};
use super::sequence::{AdaptedSequence, PathFunctionals};
use super::tree::FiltrationTree;
use crate::error::{Error, Result};
use crate::parallel::chunked_reduce;
use crate::scalar::{Scalar, Weight};
use crate::spaces::SpaceDescriptor;

/// Largest joint outcome count `|Ω|²` handled by exact enumeration.
pub const ENUMERATION_CAP: u128 = 10_000_000;

/// How the companion sequence `e` is read off the joint outcome `(ω, ω̃)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TangentRule {
    /// `e_n = h_n(ξ̃_n, v_n(ω))`.
    #[default]
    Decoupled,
    /// `e_n = d_n(ω)`.
    Identical,
    /// `e_n = d_n(ω̃)`.
    IndependentCopy,
}

/// Joint model of `(d, e)` on the product of two copies of the tree measure.
#[derive(Debug, Clone)]
pub struct TangentPair<S, W> {
    base: AdaptedSequence<S, W>,
    rule: TangentRule,
    functionals: PathFunctionals<S>,
    entry_norms: Vec<Vec<S>>,
    cap: u128,
}

/// One joint outcome `(ω, ω̃)` with its summary statistics.
#[derive(Debug)]
pub struct JointOutcome<'a, S, W> {
    pub leaf: usize,
    pub copy: usize,
    pub prob: W,
    pub f: &'a [S],
    pub g: &'a [S],
    pub f_norm: S,
    pub g_norm: S,
    pub f_star: S,
    pub d_star: S,
    pub e_star: S,
    pub g_star: S,
}

/// Decoupled tangent pair of `seq`.
pub fn decouple<S: Scalar, W: Weight>(seq: AdaptedSequence<S, W>) -> TangentPair<S, W> {
    TangentPair::new(seq, TangentRule::Decoupled)
}

impl<S: Scalar, W: Weight> TangentPair<S, W> {
    pub fn new(base: AdaptedSequence<S, W>, rule: TangentRule) -> Self {
        let functionals = base.functionals();
        let space = base.space().clone();
        let dim = base.dim();
        let entry_norms = (1..=base.depth())
            .map(|n| base.increment_table(n).chunks(dim).map(|d| space.norm_unchecked(d)).collect())
            .collect();
        Self { base, rule, functionals, entry_norms, cap: ENUMERATION_CAP }
    }

    /// Overrides the enumeration guard.
    pub fn with_cap(mut self, cap: u128) -> Self {
        self.cap = cap;
        self
    }

    pub fn base(&self) -> &AdaptedSequence<S, W> {
        &self.base
    }

    pub fn rule(&self) -> TangentRule {
        self.rule
    }

    pub fn tree(&self) -> &Arc<FiltrationTree<S, W>> {
        self.base.tree()
    }

    pub fn space(&self) -> &SpaceDescriptor {
        self.base.space()
    }

    pub fn depth(&self) -> usize {
        self.base.depth()
    }

    pub fn functionals(&self) -> &PathFunctionals<S> {
        &self.functionals
    }

    pub fn joint_count(&self) -> u128 {
        let l = self.tree().leaf_count() as u128;
        l * l
    }

    pub fn check_budget(&self) -> Result<()> {
        let needed = self.joint_count();
        if needed > self.cap {
            Err(Error::BudgetExceeded { needed, cap: self.cap })
        } else {
            Ok(())
        }
    }

    /// `d_n(ω)`.
    pub fn d(&self, n: usize, leaf: usize) -> &[S] {
        self.base.increment(n, self.tree().ancestor(leaf, n))
    }

    /// Depth-`n` table entry realizing `e_n(ω, ω̃)`.
    pub fn e_node(&self, n: usize, leaf: usize, copy: usize) -> usize {
        let tree = self.tree();
        match self.rule {
            TangentRule::Decoupled => tree.ancestor(leaf, n - 1) * tree.arity(n) + tree.index_at(copy, n),
            TangentRule::Identical => tree.ancestor(leaf, n),
            TangentRule::IndependentCopy => tree.ancestor(copy, n),
        }
    }

    /// `e_n(ω, ω̃)`.
    pub fn e(&self, n: usize, leaf: usize, copy: usize) -> &[S] {
        self.base.increment(n, self.e_node(n, leaf, copy))
    }

    pub(crate) fn entry_norm(&self, n: usize, node: usize) -> S {
        self.entry_norms[n - 1][node]
    }

    /// Largest L1 distance between `L(d_n | F_{n−1})` and `L(e_n | F_∞)` over
    /// all levels and paths.
    pub fn tangency_discrepancy(&self) -> Result<W> {
        self.check_budget()?;
        let tree = self.tree();
        let leaves = tree.leaf_count();
        let mut worst = W::zero();
        for n in 1..=self.depth() {
            let (ids, nids) = self.level_ids(n);
            let arity = tree.arity(n);
            let probs = tree.level(n).probs();
            let laws_d: Vec<Vec<W>> = (0..tree.node_count(n - 1))
                .map(|a| {
                    let mut law = vec![W::zero(); nids];
                    for (j, p) in probs.iter().enumerate() {
                        let id = ids[a * arity + j] as usize;
                        law[id] = law[id].clone() + p.clone();
                    }
                    law
                })
                .collect();
            let dists: Vec<W> = (0..leaves)
                .into_par_iter()
                .map(|leaf| {
                    let mut law = vec![W::zero(); nids];
                    for copy in 0..leaves {
                        let id = ids[self.e_node(n, leaf, copy)] as usize;
                        law[id] = law[id].clone() + tree.leaf_prob(copy).clone();
                    }
                    l1_distance(&laws_d[tree.ancestor(leaf, n - 1)], &law)
                })
                .collect();
            for d in dists {
                if d > worst {
                    worst = d;
                }
            }
        }
        Ok(worst)
    }

    /// `L(d_n | F_{n−1}) = L(e_n | F_∞)` for every `n`, atom by atom.
    pub fn verify_tangency(&self, tol: f64) -> Result<bool> {
        Ok(self.tangency_discrepancy()?.within(&W::zero(), tol))
    }

    /// Largest total-variation gap between the joint conditional law of
    /// `(e_1, …, e_N)` given `ω` and the product of its marginals.
    pub fn independence_discrepancy(&self) -> Result<W> {
        self.check_budget()?;
        let tree = self.tree();
        let depth = self.depth();
        let leaves = tree.leaf_count();
        let levels: Vec<(Vec<u32>, usize)> = (1..=depth).map(|n| self.level_ids(n)).collect();
        let mut radix = Vec::with_capacity(depth);
        let mut acc: u128 = 1;
        for (_, nids) in &levels {
            radix.push(acc);
            acc = acc
                .checked_mul(*nids as u128)
                .ok_or_else(|| Error::InvalidParameter("too many distinct increment values to encode".into()))?;
        }
        let dists: Vec<W> = (0..leaves)
            .into_par_iter()
            .map(|leaf| {
                let mut joint: HashMap<u128, W> = HashMap::new();
                let mut marg: Vec<Vec<W>> = levels.iter().map(|(_, k)| vec![W::zero(); *k]).collect();
                for copy in 0..leaves {
                    let p = tree.leaf_prob(copy);
                    let mut code = 0u128;
                    for n in 1..=depth {
                        let id = levels[n - 1].0[self.e_node(n, leaf, copy)] as usize;
                        code += id as u128 * radix[n - 1];
                        marg[n - 1][id] = marg[n - 1][id].clone() + p.clone();
                    }
                    let slot = joint.entry(code).or_insert_with(W::zero);
                    *slot = slot.clone() + p.clone();
                }
                let mut gap = W::zero();
                let mut covered = W::zero();
                let mut keys: Vec<&u128> = joint.keys().collect();
                keys.sort_unstable();
                for code in keys {
                    let mut prod = W::one();
                    for n in 0..depth {
                        let id = (code / radix[n]) % levels[n].1 as u128;
                        prod = prod * marg[n][id as usize].clone();
                    }
                    gap = gap + joint[code].abs_diff(&prod);
                    covered = covered + prod;
                }
                gap + W::one().abs_diff(&covered)
            })
            .collect();
        Ok(dists.into_iter().fold(W::zero(), |a, b| if b > a { b } else { a }))
    }

    /// `(e_n)` are conditionally independent given `F_∞`.
    pub fn verify_conditional_independence(&self, tol: f64) -> Result<bool> {
        Ok(self.independence_discrepancy()?.within(&W::zero(), tol))
    }

    fn level_ids(&self, n: usize) -> (Vec<u32>, usize) {
        let mut interner = Interner::new();
        let dim = self.base.dim();
        let ids = self.base.increment_table(n).chunks(dim).map(|d| interner.intern(d)).collect();
        (ids, interner.len())
    }

    /// Folds `step` over every joint outcome `(ω, ω̃)`; deterministic for any
    /// worker count.
    pub fn fold_joint<A, I, F, M>(&self, init: I, step: F, merge: M) -> Result<A>
    where
        A: Send,
        I: Fn() -> A + Sync,
        F: Fn(&mut A, &JointOutcome<'_, S, W>) + Sync,
        M: Fn(A, A) -> A,
    {
        self.check_budget()?;
        let tree = self.tree();
        let depth = self.depth();
        let dim = self.base.dim();
        let space = self.space();
        let leaves = tree.leaf_count();
        let out = chunked_reduce(
            leaves,
            |range| {
                let mut acc = init();
                let mut g = vec![S::zero(); dim];
                for leaf in range {
                    let f = self.functionals.partial_sum(depth, leaf);
                    let f_norm = space.norm_unchecked(f);
                    let f_star = self.functionals.f_star(depth, leaf);
                    let d_star = self.functionals.d_star(depth, leaf);
                    let pl = tree.leaf_prob(leaf);
                    for copy in 0..leaves {
                        g.iter_mut().for_each(|x| *x = S::zero());
                        let mut e_star = S::zero();
                        let mut g_star = S::zero();
                        for n in 1..=depth {
                            let node = self.e_node(n, leaf, copy);
                            for (x, &y) in g.iter_mut().zip(self.base.increment(n, node)) {
                                *x += y;
                            }
                            e_star = e_star.max(self.entry_norm(n, node));
                            g_star = g_star.max(space.norm_unchecked(&g));
                        }
                        let g_norm = space.norm_unchecked(&g);
                        let outcome = JointOutcome {
                            leaf,
                            copy,
                            prob: pl.clone() * tree.leaf_prob(copy).clone(),
                            f,
                            g: &g,
                            f_norm,
                            g_norm,
                            f_star,
                            d_star,
                            e_star,
                            g_star,
                        };
                        step(&mut acc, &outcome);
                    }
                }
                acc
            },
            merge,
        );
        Ok(out.unwrap_or_else(init))
    }

    /// Exact `(E‖f_N‖^p, E‖g_N‖^p)` by joint enumeration.
    pub fn moments(&self, p: S) -> Result<(S, S)> {
        let (f, g) = self.fold_joint(
            || (S::zero(), S::zero()),
            |acc, o| {
                let w: S = o.prob.to_scalar();
                acc.0 += w * o.f_norm.powf(p);
                acc.1 += w * o.g_norm.powf(p);
            },
            |a, b| (a.0 + b.0, a.1 + b.1),
        )?;
        Ok((f, g))
    }
}
