//! The conditional operator `T_p(f)(ω) = (E[‖Σ e_k‖^p | F_∞])^{1/p}`.

use crate::error::Result;
use crate::parallel::ordered_map;
use crate::probmodel::sampling::sample_leaf;
use crate::probmodel::TangentPair;
use crate::rng::{purpose, stream};
use crate::scalar::{Scalar, Weight};
use crate::stats::Moments;

/// Default inner sample count of the nested Monte Carlo estimator.
pub const DEFAULT_INNER_SAMPLES: usize = 256;

/// `T_p(f^n)(ω)` for all `n = 0..=N` (rows) and all leaves (columns).
pub fn t_p_table<S: Scalar, W: Weight>(pair: &TangentPair<S, W>, p: S) -> Result<Vec<Vec<S>>> {
    pair.check_budget()?;
    let tree = pair.tree();
    let depth = pair.depth();
    let leaves = tree.leaf_count();
    let space = pair.space();
    let dim = pair.base().dim();
    let weights: Vec<S> = (0..leaves).map(|l| tree.leaf_prob(l).to_scalar()).collect();
    let per_leaf: Vec<Vec<S>> = ordered_map(leaves, |leaf| {
        let mut acc = vec![S::zero(); depth + 1];
        let mut g = vec![S::zero(); dim];
        for (copy, &w) in weights.iter().enumerate() {
            g.iter_mut().for_each(|x| *x = S::zero());
            for n in 1..=depth {
                for (x, &y) in g.iter_mut().zip(pair.e(n, leaf, copy)) {
                    *x += y;
                }
                acc[n] += w * space.norm_unchecked(&g).powf(p);
            }
        }
        acc.into_iter().map(|m| m.powf(p.recip())).collect()
    });
    Ok((0..=depth).map(|n| per_leaf.iter().map(|row| row[n]).collect()).collect())
}

/// `T_p(f^n)` on every leaf.
pub fn t_p<S: Scalar, W: Weight>(pair: &TangentPair<S, W>, p: S, n: usize) -> Result<Vec<S>> {
    if n > pair.depth() {
        return Err(crate::Error::InvalidParameter(format!("n = {n} exceeds depth {}", pair.depth())));
    }
    Ok(t_p_table(pair, p)?.swap_remove(n))
}

/// `‖T_p(f)‖_p^p = E[T_p(f)^p]`.
pub fn t_p_moment<S: Scalar, W: Weight>(pair: &TangentPair<S, W>, p: S) -> Result<S> {
    let table = t_p_table(pair, p)?;
    let tree = pair.tree();
    Ok(table[pair.depth()]
        .iter()
        .enumerate()
        .map(|(leaf, t)| tree.leaf_prob(leaf).to_scalar::<S>() * t.powf(p))
        .fold(S::zero(), |a, b| a + b))
}

/// `T*_p(f) = max_{n ≥ 1} T_p(f^n)` on every leaf.
pub fn t_p_star<S: Scalar>(table: &[Vec<S>]) -> Vec<S> {
    let leaves = table[0].len();
    (0..leaves).map(|l| table[1..].iter().fold(S::zero(), |m, row| m.max(row[l]))).collect()
}

/// Checks that `T_p(f^n)` is constant on every depth-`(n−1)` atom.
pub fn is_predictable<S: Scalar, W: Weight>(pair: &TangentPair<S, W>, table: &[Vec<S>]) -> bool {
    let tree = pair.tree();
    (1..table.len()).all(|n| {
        let stride = tree.leaf_count() / tree.node_count(n - 1);
        table[n].chunks(stride).all(|c| c.iter().all(|x| x.to_bits_eq(&c[0])))
    })
}

trait BitsEq {
    fn to_bits_eq(&self, other: &Self) -> bool;
}

impl<S: Scalar> BitsEq for S {
    fn to_bits_eq(&self, other: &Self) -> bool {
        self.as_f64().to_bits() == other.as_f64().to_bits()
    }
}

/// `T_p(^k f^l)` on every leaf, for all `0 ≤ k ≤ l ≤ N`.
#[derive(Debug, Clone)]
pub struct WindowTable<S> {
    depth: usize,
    values: Vec<Vec<S>>,
}

impl<S: Scalar> WindowTable<S> {
    fn index(depth: usize, k: usize, l: usize) -> usize {
        debug_assert!(k <= l && l <= depth);
        k * (depth + 1) + l
    }

    pub fn get(&self, k: usize, l: usize) -> &[S] {
        &self.values[Self::index(self.depth, k, l)]
    }
}

/// One enumeration pass computing `T_p` of every window.
pub fn window_table<S: Scalar, W: Weight>(pair: &TangentPair<S, W>, p: S) -> Result<WindowTable<S>> {
    pair.check_budget()?;
    let tree = pair.tree();
    let depth = pair.depth();
    let leaves = tree.leaf_count();
    let space = pair.space();
    let dim = pair.base().dim();
    let weights: Vec<S> = (0..leaves).map(|l| tree.leaf_prob(l).to_scalar()).collect();
    let slots = (depth + 1) * (depth + 1);
    let per_leaf: Vec<Vec<S>> = ordered_map(leaves, |leaf| {
        let mut acc = vec![S::zero(); slots];
        let mut sums = vec![S::zero(); (depth + 1) * dim];
        let mut diff = vec![S::zero(); dim];
        for (copy, &w) in weights.iter().enumerate() {
            for n in 1..=depth {
                let e = pair.e(n, leaf, copy);
                for i in 0..dim {
                    sums[n * dim + i] = sums[(n - 1) * dim + i] + e[i];
                }
            }
            for k in 0..=depth {
                for l in k + 1..=depth {
                    for i in 0..dim {
                        diff[i] = sums[l * dim + i] - sums[k * dim + i];
                    }
                    acc[WindowTable::<S>::index(depth, k, l)] += w * space.norm_unchecked(&diff).powf(p);
                }
            }
        }
        acc.into_iter().map(|m| m.powf(p.recip())).collect()
    });
    let values = (0..slots).map(|s| per_leaf.iter().map(|row| row[s]).collect()).collect();
    Ok(WindowTable { depth, values })
}

/// Nested Monte Carlo estimate of `T_p(f^n)(ω)` with `inner` decoupled
/// resamples; returns the estimate and the standard error of `T_p^p`.
pub fn t_p_mc<S: Scalar, W: Weight>(
    pair: &TangentPair<S, W>,
    p: S,
    n: usize,
    leaf: usize,
    inner: usize,
    seed: u64,
) -> (S, f64) {
    let tree = pair.tree();
    let space = pair.space();
    let mut rng = stream(seed, purpose::INNER, leaf as u64);
    let mut m = Moments::default();
    let mut g = vec![S::zero(); pair.base().dim()];
    for _ in 0..inner {
        let copy = sample_leaf(tree, &mut rng);
        g.iter_mut().for_each(|x| *x = S::zero());
        for k in 1..=n {
            for (x, &y) in g.iter_mut().zip(pair.e(k, leaf, copy)) {
                *x += y;
            }
        }
        m.push(space.norm_unchecked(&g).powf(p).as_f64());
    }
    (S::of(m.mean()).powf(p.recip()), m.std_error())
}
