use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Scalar, Vector, Weight, PROB_SLACK};

/// One level of innovations: values `ξ^{(j)}` with probabilities `π(j)`.
#[derive(Debug, Clone)]
pub struct Level<S, W> {
    values: Vec<Vector<S>>,
    probs: Vec<W>,
}

impl<S: Scalar, W: Weight> Level<S, W> {
    pub fn new(values: Vec<Vector<S>>, probs: Vec<W>) -> Result<Self> {
        if values.is_empty() || values.len() != probs.len() {
            return Err(Error::InvalidParameter(
                "level needs a non-empty alphabet with one probability per value".into(),
            ));
        }
        let dim = values[0].dim();
        if dim == 0 {
            return Err(Error::InvalidParameter("innovation values must be non-empty vectors".into()));
        }
        if let Some(v) = values.iter().find(|v| v.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: v.dim() });
        }
        if probs.iter().any(|p| *p <= W::zero()) {
            return Err(Error::InvalidParameter("innovation probabilities must be strictly positive".into()));
        }
        let total = probs.iter().cloned().fold(W::zero(), |a, b| a + b);
        let ok = if W::EXACT { total == W::one() } else { (total.to_f64() - 1.0).abs() <= PROB_SLACK };
        if !ok {
            return Err(Error::InvalidParameter(format!("level probabilities sum to {} instead of 1", total.to_f64())));
        }
        Ok(Self { values, probs })
    }

    pub fn values(&self) -> &[Vector<S>] {
        &self.values
    }

    pub fn probs(&self) -> &[W] {
        &self.probs
    }

    pub fn arity(&self) -> usize {
        self.values.len()
    }
}

/// Finite product-innovation tree. Depth-`n` nodes are the atoms of `F_n`;
/// node ids at depth `n` run over `0..node_count(n)` and the child of node
/// `a` along innovation `j` is `a * arity(n+1) + j`.
#[derive(Debug, Clone)]
pub struct FiltrationTree<S, W> {
    levels: Vec<Level<S, W>>,
    counts: Vec<usize>,
    node_probs: Vec<Vec<W>>,
}

impl<S: Scalar, W: Weight> FiltrationTree<S, W> {
    pub fn new(levels: Vec<Level<S, W>>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidParameter("tree depth must be at least 1".into()));
        }
        let mut counts = vec![1usize];
        for level in &levels {
            let next = counts
                .last()
                .unwrap()
                .checked_mul(level.arity())
                .ok_or_else(|| Error::InvalidParameter("tree too large to index".into()))?;
            counts.push(next);
        }
        let mut node_probs = vec![vec![W::one()]];
        for level in &levels {
            let prev = node_probs.last().unwrap();
            let mut next = Vec::with_capacity(prev.len() * level.arity());
            for p in prev {
                for q in &level.probs {
                    next.push(p.clone() * q.clone());
                }
            }
            node_probs.push(next);
        }
        Ok(Self { levels, counts, node_probs })
    }

    /// Binary tree with Rademacher innovations `±1`, probability ½ each.
    pub fn paley_walsh(depth: usize) -> Result<Self> {
        if depth < 1 {
            return Err(Error::InvalidParameter("Paley-Walsh depth must be at least 1".into()));
        }
        let half = W::from_ratio(1, 2);
        let level = Level::new(vec![Vector(vec![S::one()]), Vector(vec![-S::one()])], vec![half.clone(), half])?;
        Self::new(vec![level; depth])
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Level `n`, 1-based.
    pub fn level(&self, n: usize) -> &Level<S, W> {
        &self.levels[n - 1]
    }

    pub fn levels(&self) -> &[Level<S, W>] {
        &self.levels
    }

    pub fn arity(&self, n: usize) -> usize {
        self.levels[n - 1].arity()
    }

    pub fn node_count(&self, n: usize) -> usize {
        self.counts[n]
    }

    pub fn leaf_count(&self) -> usize {
        self.counts[self.depth()]
    }

    pub fn innovation_dim(&self) -> usize {
        self.levels[0].values[0].dim()
    }

    pub fn node_prob(&self, n: usize, node: usize) -> &W {
        &self.node_probs[n][node]
    }

    pub fn leaf_prob(&self, leaf: usize) -> &W {
        &self.node_probs[self.depth()][leaf]
    }

    /// Depth-`n` ancestor of depth-`m` node (`n <= m`).
    pub fn ancestor_of(&self, m: usize, node: usize, n: usize) -> usize {
        node / (self.counts[m] / self.counts[n])
    }

    /// Depth-`n` ancestor of a leaf.
    pub fn ancestor(&self, leaf: usize, n: usize) -> usize {
        self.ancestor_of(self.depth(), leaf, n)
    }

    pub fn parent(&self, n: usize, node: usize) -> usize {
        node / self.arity(n)
    }

    /// Innovation index `j_n` taken at depth `n` by a depth-`n` node.
    pub fn last_index(&self, n: usize, node: usize) -> usize {
        node % self.arity(n)
    }

    /// Innovation index `j_n(ω)` of a leaf.
    pub fn index_at(&self, leaf: usize, n: usize) -> usize {
        self.last_index(n, self.ancestor(leaf, n))
    }

    /// Arity vector, used to compare tree shapes.
    pub fn shape(&self) -> Vec<usize> {
        self.levels.iter().map(Level::arity).collect()
    }

    pub fn to_spec(&self) -> TreeSpec {
        TreeSpec {
            levels: self
                .levels
                .iter()
                .map(|l| LevelSpec {
                    values: l.values.iter().map(Vector::to_f64_vec).collect(),
                    probs: l.probs.iter().map(|p| Prob::Float(p.to_f64())).collect(),
                })
                .collect(),
        }
    }

    pub fn from_spec(spec: &TreeSpec) -> Result<Self> {
        let mut levels = Vec::with_capacity(spec.levels.len());
        for l in &spec.levels {
            let values = l.values.iter().map(|v| Vector::from_f64(v)).collect();
            let probs = l.probs.iter().map(Prob::to_weight).collect::<Result<Vec<W>>>()?;
            levels.push(Level::new(values, probs)?);
        }
        Self::new(levels)
    }
}

/// A probability in a JSON spec: a number, or an exact fraction `"a/b"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Prob {
    Float(f64),
    Fraction(String),
}

impl Prob {
    fn to_weight<W: Weight>(&self) -> Result<W> {
        match self {
            Prob::Float(x) => W::from_f64(*x).ok_or_else(|| Error::InvalidParameter(format!("bad probability {x}"))),
            Prob::Fraction(s) => {
                let bad = || Error::InvalidParameter(format!("bad probability `{s}`"));
                let (a, b) = s.split_once('/').ok_or_else(bad)?;
                let a: u64 = a.trim().parse().map_err(|_| bad())?;
                let b: u64 = b.trim().parse().map_err(|_| bad())?;
                if b == 0 {
                    return Err(bad());
                }
                Ok(W::from_ratio(a, b))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSpec {
    pub values: Vec<Vec<f64>>,
    pub probs: Vec<Prob>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSpec {
    pub levels: Vec<LevelSpec>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    type T = FiltrationTree<f64, f64>;

    #[test]
    fn paley_walsh_shapes() {
        let t = T::paley_walsh(1).unwrap();
        assert_eq!(t.leaf_count(), 2);
        assert_eq!(t.level(1).probs(), &[0.5, 0.5]);
        let t = T::paley_walsh(3).unwrap();
        assert_eq!(t.leaf_count(), 8);
        assert!((0..8).all(|l| *t.leaf_prob(l) == 0.125));
        assert!(T::paley_walsh(0).is_err());
    }

    #[test]
    fn indexing_is_consistent() {
        let levels = vec![
            Level::new(vec![Vector(vec![1.0]), Vector(vec![-1.0])], vec![0.5, 0.5]).unwrap(),
            Level::new(vec![Vector(vec![1.0]), Vector(vec![0.0]), Vector(vec![-1.0])], vec![0.25, 0.5, 0.25]).unwrap(),
        ];
        let t = T::new(levels).unwrap();
        assert_eq!(t.leaf_count(), 6);
        for leaf in 0..6 {
            let a1 = t.ancestor(leaf, 1);
            assert_eq!(leaf, a1 * 3 + t.index_at(leaf, 2));
            assert_eq!(t.parent(2, leaf), a1);
            assert_eq!(t.ancestor(leaf, 0), 0);
        }
        let total: f64 = (0..6).map(|l| *t.leaf_prob(l)).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_levels() {
        assert!(Level::<f64, f64>::new(vec![Vector(vec![1.0])], vec![0.9]).is_err());
        assert!(Level::<f64, f64>::new(vec![Vector(vec![1.0]), Vector(vec![2.0])], vec![1.0, 0.0]).is_err());
        assert!(Level::<f64, f64>::new(vec![Vector(vec![1.0]), Vector(vec![2.0, 1.0])], vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn exact_fractions_in_specs() {
        let spec: TreeSpec =
            serde_json::from_str(r#"{"levels":[{"values":[[1],[0],[-1]],"probs":["1/3","1/3","1/3"]}]}"#).unwrap();
        let t = FiltrationTree::<f64, BigRational>::from_spec(&spec).unwrap();
        assert_eq!(t.leaf_count(), 3);
        assert!(FiltrationTree::<f64, BigRational>::from_spec(&TreeSpec {
            levels: vec![LevelSpec { values: vec![vec![1.0], vec![2.0], vec![3.0]], probs: vec![Prob::Float(0.1); 3] }]
        })
        .is_err());
    }
}
