use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::measure::is_symmetric_law;
use super::tree::{FiltrationTree, TreeSpec};
use crate::error::{Error, Result};
use crate::scalar::{Scalar, Vector, Weight, PROB_SLACK};
use crate::spaces::SpaceDescriptor;

/// Named rules for the predictable labels `v_n` (constant on depth-`(n−1)` nodes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum PredictableRule {
    /// `v_n ≡ value`.
    Constant { value: Vec<f64> },
    /// `v_n ≡ values[n−1]`.
    PerLevel { values: Vec<Vec<f64>> },
    /// `v_n(a) = values[n−1][a]` for depth-`(n−1)` node `a`.
    Table { values: Vec<Vec<Vec<f64>>> },
    /// `v_1 = initial`, `v_n = d_{n−1}`.
    PreviousIncrement { initial: Vec<f64> },
    /// `v_1 = initial`, `v_n = f_{n−1}`.
    PartialSum { initial: Vec<f64> },
}

/// Named increment maps `d_n = h(ξ_n, v_n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum IncrementRule {
    /// `h(ξ, v) = ξ_0 · v`.
    Scale,
    /// `h(ξ, v)_i = ξ_{i mod dim ξ} · v_i`.
    Coordinatewise,
    /// `h(ξ, v) = ξ_0 · v + shift`.
    Affine { shift: Vec<f64> },
    /// `h(ξ, v) = ξ`.
    Innovation,
}

/// Serializable description of an adapted sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SequenceSpec {
    Rules {
        tree: TreeSpec,
        space: SpaceDescriptor,
        predictable: PredictableRule,
        increment: IncrementRule,
    },
    /// Increment tables `increments[n−1][depth-n node]`.
    Explicit {
        tree: TreeSpec,
        space: SpaceDescriptor,
        increments: Vec<Vec<Vec<f64>>>,
    },
}

#[derive(Debug, Clone)]
enum Recipe {
    Rules { predictable: PredictableRule, increment: IncrementRule },
    Explicit,
}

/// Adapted sequence on a filtration tree. Increments are stored per node,
/// so `d_n` is constant on atoms of `F_n` by construction.
#[derive(Debug, Clone)]
pub struct AdaptedSequence<S, W> {
    tree: Arc<FiltrationTree<S, W>>,
    space: SpaceDescriptor,
    /// `increments[n−1]` is a flat `node_count(n) × dim` table.
    increments: Vec<Vec<S>>,
    /// `predictable[n−1]` is a flat `node_count(n−1) × dim_v` table, if tracked.
    predictable: Option<Vec<Vec<S>>>,
    symmetric: bool,
    recipe: Recipe,
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

impl IncrementRule {
    fn apply<S: Scalar>(&self, xi: &[S], v: &[S], dim: usize, out: &mut Vec<S>) -> Result<()> {
        match self {
            IncrementRule::Scale => {
                check_len(dim, v.len())?;
                out.extend(v.iter().map(|&x| xi[0] * x));
            }
            IncrementRule::Coordinatewise => {
                check_len(dim, v.len())?;
                out.extend(v.iter().enumerate().map(|(i, &x)| xi[i % xi.len()] * x));
            }
            IncrementRule::Affine { shift } => {
                check_len(dim, v.len())?;
                check_len(dim, shift.len())?;
                out.extend(v.iter().zip(shift).map(|(&x, &s)| xi[0] * x + S::of(s)));
            }
            IncrementRule::Innovation => {
                check_len(dim, xi.len())?;
                out.extend_from_slice(xi);
            }
        }
        Ok(())
    }
}

impl<S: Scalar, W: Weight> AdaptedSequence<S, W> {
    /// Builds `d_n = h(ξ_n, v_n)` level by level.
    pub fn from_rules(
        tree: Arc<FiltrationTree<S, W>>,
        space: SpaceDescriptor,
        predictable: PredictableRule,
        increment: IncrementRule,
    ) -> Result<Self> {
        let depth = tree.depth();
        let dim = space.dim();
        let mut increments: Vec<Vec<S>> = Vec::with_capacity(depth);
        let mut labels: Vec<Vec<S>> = Vec::with_capacity(depth);
        let mut partial: Vec<S> = vec![S::zero(); dim];
        for n in 1..=depth {
            let parents = tree.node_count(n - 1);
            let arity = tree.arity(n);
            let level = tree.level(n);
            let v_table: Vec<S> = match &predictable {
                PredictableRule::Constant { value } => {
                    (0..parents).flat_map(|_| value.iter().map(|&x| S::of(x))).collect()
                }
                PredictableRule::PerLevel { values } => {
                    let row = values
                        .get(n - 1)
                        .ok_or_else(|| Error::InvalidParameter(format!("per-level rule has no entry for level {n}")))?;
                    (0..parents).flat_map(|_| row.iter().map(|&x| S::of(x))).collect()
                }
                PredictableRule::Table { values } => {
                    let rows = values
                        .get(n - 1)
                        .ok_or_else(|| Error::InvalidParameter(format!("table rule has no entry for level {n}")))?;
                    check_len(parents, rows.len())?;
                    let w = rows.first().map_or(0, Vec::len);
                    if let Some(r) = rows.iter().find(|r| r.len() != w) {
                        return Err(Error::DimensionMismatch { expected: w, got: r.len() });
                    }
                    rows.iter().flat_map(|r| r.iter().map(|&x| S::of(x))).collect()
                }
                PredictableRule::PreviousIncrement { initial } => {
                    if n == 1 {
                        initial.iter().map(|&x| S::of(x)).collect()
                    } else {
                        increments[n - 2].clone()
                    }
                }
                PredictableRule::PartialSum { initial } => {
                    if n == 1 {
                        initial.iter().map(|&x| S::of(x)).collect()
                    } else {
                        partial.clone()
                    }
                }
            };
            if v_table.len() % parents != 0 {
                return Err(Error::InvalidParameter("predictable labels have inconsistent sizes".into()));
            }
            let vdim = v_table.len() / parents;
            let mut table = Vec::with_capacity(parents * arity * dim);
            for a in 0..parents {
                let v = &v_table[a * vdim..(a + 1) * vdim];
                for xi in level.values() {
                    increment.apply(xi.as_slice(), v, dim, &mut table)?;
                }
            }
            let mut next_partial = Vec::with_capacity(table.len());
            for c in 0..parents * arity {
                let base = &partial[(c / arity) * dim..(c / arity + 1) * dim];
                next_partial.extend(base.iter().zip(&table[c * dim..(c + 1) * dim]).map(|(&a, &b)| a + b));
            }
            partial = next_partial;
            labels.push(v_table);
            increments.push(table);
        }
        let mut seq = Self {
            tree,
            space,
            increments,
            predictable: Some(labels),
            symmetric: false,
            recipe: Recipe::Rules { predictable, increment },
        };
        seq.symmetric = seq.detect_symmetry();
        Ok(seq)
    }

    /// Builds a sequence from explicit per-node increments `table[n−1][node]`.
    pub fn from_increments(
        tree: Arc<FiltrationTree<S, W>>,
        space: SpaceDescriptor,
        table: Vec<Vec<Vector<S>>>,
    ) -> Result<Self> {
        check_len(tree.depth(), table.len())?;
        let dim = space.dim();
        let mut increments = Vec::with_capacity(table.len());
        for (i, rows) in table.into_iter().enumerate() {
            check_len(tree.node_count(i + 1), rows.len())?;
            let mut flat = Vec::with_capacity(rows.len() * dim);
            for r in rows {
                check_len(dim, r.dim())?;
                flat.extend(r.0);
            }
            increments.push(flat);
        }
        Ok(Self::from_flat(tree, space, increments))
    }

    pub(crate) fn from_flat(tree: Arc<FiltrationTree<S, W>>, space: SpaceDescriptor, increments: Vec<Vec<S>>) -> Self {
        let mut seq = Self { tree, space, increments, predictable: None, symmetric: false, recipe: Recipe::Explicit };
        seq.symmetric = seq.detect_symmetry();
        seq
    }

    /// Same tree and space, new increment tables; labels are dropped.
    pub(crate) fn with_increments(&self, increments: Vec<Vec<S>>) -> Self {
        Self::from_flat(self.tree.clone(), self.space.clone(), increments)
    }

    pub fn from_spec(spec: &SequenceSpec) -> Result<Self> {
        match spec {
            SequenceSpec::Rules { tree, space, predictable, increment } => Self::from_rules(
                Arc::new(FiltrationTree::from_spec(tree)?),
                space.clone(),
                predictable.clone(),
                increment.clone(),
            ),
            SequenceSpec::Explicit { tree, space, increments } => {
                let table = increments.iter().map(|lvl| lvl.iter().map(|v| Vector::from_f64(v)).collect()).collect();
                Self::from_increments(Arc::new(FiltrationTree::from_spec(tree)?), space.clone(), table)
            }
        }
    }

    pub fn to_spec(&self) -> SequenceSpec {
        match &self.recipe {
            Recipe::Rules { predictable, increment } => SequenceSpec::Rules {
                tree: self.tree.to_spec(),
                space: self.space.clone(),
                predictable: predictable.clone(),
                increment: increment.clone(),
            },
            Recipe::Explicit => self.to_explicit_spec(),
        }
    }

    pub fn to_explicit_spec(&self) -> SequenceSpec {
        let increments = (1..=self.depth())
            .map(|n| {
                (0..self.tree.node_count(n))
                    .map(|c| self.increment(n, c).iter().map(|x| x.as_f64()).collect())
                    .collect()
            })
            .collect();
        SequenceSpec::Explicit { tree: self.tree.to_spec(), space: self.space.clone(), increments }
    }

    pub fn tree(&self) -> &Arc<FiltrationTree<S, W>> {
        &self.tree
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn depth(&self) -> usize {
        self.tree.depth()
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// `d_n` at depth-`n` node `node`.
    pub fn increment(&self, n: usize, node: usize) -> &[S] {
        let dim = self.dim();
        &self.increments[n - 1][node * dim..(node + 1) * dim]
    }

    pub(crate) fn increment_table(&self, n: usize) -> &[S] {
        &self.increments[n - 1]
    }

    /// `v_n` at depth-`(n−1)` node, when the sequence was built from rules.
    pub fn predictable_label(&self, n: usize, node: usize) -> Option<&[S]> {
        let table = &self.predictable.as_ref()?[n - 1];
        let w = table.len() / self.tree.node_count(n - 1);
        Some(&table[node * w..(node + 1) * w])
    }

    /// Conditional law of `d_n` given the depth-`(n−1)` atom `node`.
    pub fn conditional_law(&self, n: usize, node: usize) -> impl Iterator<Item = (&[S], &W)> + '_ {
        let arity = self.tree.arity(n);
        self.tree.level(n).probs().iter().enumerate().map(move |(j, p)| (self.increment(n, node * arity + j), p))
    }

    pub fn is_conditionally_symmetric(&self) -> bool {
        self.symmetric
    }

    fn detect_symmetry(&self) -> bool {
        (1..=self.depth()).all(|n| {
            (0..self.tree.node_count(n - 1))
                .all(|a| is_symmetric_law(self.conditional_law(n, a).map(|(v, p)| (v.to_vec(), p.clone())), PROB_SLACK))
        })
    }

    /// Whether each `d_n` is a deterministic function of the innovation alone,
    /// i.e. the increment tables repeat across depth-`(n−1)` nodes.
    pub fn is_history_independent(&self) -> bool {
        (1..=self.depth()).all(|n| {
            let arity = self.tree.arity(n);
            let row = arity * self.dim();
            let t = self.increment_table(n);
            t.chunks(row).all(|c| c == &t[..row])
        })
    }

    /// Partial sums and running maxima on every node.
    pub fn functionals(&self) -> PathFunctionals<S> {
        let dim = self.dim();
        let depth = self.depth();
        let mut f = vec![vec![S::zero(); dim]];
        let mut f_star = vec![vec![S::zero()]];
        let mut d_star = vec![vec![S::zero()]];
        for n in 1..=depth {
            let count = self.tree.node_count(n);
            let arity = self.tree.arity(n);
            let mut fn_ = Vec::with_capacity(count * dim);
            let mut fs = Vec::with_capacity(count);
            let mut ds = Vec::with_capacity(count);
            for c in 0..count {
                let a = c / arity;
                let d = self.increment(n, c);
                let base = &f[n - 1][a * dim..(a + 1) * dim];
                let start = fn_.len();
                fn_.extend(base.iter().zip(d).map(|(&x, &y)| x + y));
                let fnorm = self.space.norm_unchecked(&fn_[start..]);
                fs.push(f_star[n - 1][a].max(fnorm));
                ds.push(d_star[n - 1][a].max(self.space.norm_unchecked(d)));
            }
            f.push(fn_);
            f_star.push(fs);
            d_star.push(ds);
        }
        PathFunctionals { dim, f, f_star, d_star }
    }

    /// Multiplies `d_n` by `−1` on every node, leaving all other levels as
    /// functions of the original path.
    pub fn negate_level(&self, n: usize) -> Self {
        let mut increments = self.increments.clone();
        for x in increments[n - 1].iter_mut() {
            *x = -*x;
        }
        self.with_increments(increments)
    }
}

/// `f_n`, `f*_n` and `d*_n` on every depth-`n` node.
#[derive(Debug, Clone)]
pub struct PathFunctionals<S> {
    dim: usize,
    f: Vec<Vec<S>>,
    f_star: Vec<Vec<S>>,
    d_star: Vec<Vec<S>>,
}

impl<S: Scalar> PathFunctionals<S> {
    pub fn partial_sum(&self, n: usize, node: usize) -> &[S] {
        &self.f[n][node * self.dim..(node + 1) * self.dim]
    }

    pub fn f_star(&self, n: usize, node: usize) -> S {
        self.f_star[n][node]
    }

    pub fn d_star(&self, n: usize, node: usize) -> S {
        self.d_star[n][node]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probmodel::tree::Level;

    type Seq = AdaptedSequence<f64, f64>;

    fn pw(depth: usize) -> Arc<FiltrationTree<f64, f64>> {
        Arc::new(FiltrationTree::paley_walsh(depth).unwrap())
    }

    #[test]
    fn partial_sums_example() {
        let tree =
            Arc::new(FiltrationTree::new(vec![Level::new(vec![Vector(vec![1.0])], vec![1.0]).unwrap(); 2]).unwrap());
        let seq = Seq::from_rules(
            tree,
            SpaceDescriptor::euclid(2).unwrap(),
            PredictableRule::PerLevel { values: vec![vec![1.0, 0.0], vec![0.0, 1.0]] },
            IncrementRule::Scale,
        )
        .unwrap();
        let fx = seq.functionals();
        assert_eq!(fx.partial_sum(2, 0), &[1.0, 1.0]);
        assert!((fx.f_star(2, 0) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(fx.f_star(1, 0), 1.0);
        assert_eq!(fx.d_star(2, 0), 1.0);
    }

    #[test]
    fn previous_increment_rule() {
        let seq = Seq::from_rules(
            pw(2),
            SpaceDescriptor::euclid(1).unwrap(),
            PredictableRule::PreviousIncrement { initial: vec![2.0] },
            IncrementRule::Scale,
        )
        .unwrap();
        assert_eq!(seq.increment(1, 0), &[2.0]);
        assert_eq!(seq.increment(1, 1), &[-2.0]);
        assert_eq!(seq.increment(2, 0), &[2.0]);
        assert_eq!(seq.increment(2, 1), &[-2.0]);
        assert_eq!(seq.increment(2, 2), &[-2.0]);
        assert_eq!(seq.increment(2, 3), &[2.0]);
        assert_eq!(seq.predictable_label(2, 1), Some(&[-2.0][..]));
        assert!(seq.is_conditionally_symmetric());
        assert!(!seq.is_history_independent());
    }

    #[test]
    fn affine_rule_breaks_symmetry() {
        let seq = Seq::from_rules(
            pw(2),
            SpaceDescriptor::euclid(1).unwrap(),
            PredictableRule::Constant { value: vec![1.0] },
            IncrementRule::Affine { shift: vec![0.5] },
        )
        .unwrap();
        assert!(!seq.is_conditionally_symmetric());
        assert!(seq.is_history_independent());
    }

    #[test]
    fn spec_round_trip() {
        let seq = Seq::from_rules(
            pw(3),
            SpaceDescriptor::sup_norm(2).unwrap(),
            PredictableRule::PartialSum { initial: vec![1.0, -1.0] },
            IncrementRule::Scale,
        )
        .unwrap();
        for spec in [seq.to_spec(), seq.to_explicit_spec()] {
            let json = serde_json::to_string(&spec).unwrap();
            let back = Seq::from_spec(&serde_json::from_str(&json).unwrap()).unwrap();
            for n in 1..=3 {
                assert_eq!(back.increment_table(n), seq.increment_table(n));
            }
        }
    }

    #[test]
    fn dimension_errors() {
        let r = Seq::from_rules(
            pw(2),
            SpaceDescriptor::euclid(2).unwrap(),
            PredictableRule::Constant { value: vec![1.0] },
            IncrementRule::Scale,
        );
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }
}
