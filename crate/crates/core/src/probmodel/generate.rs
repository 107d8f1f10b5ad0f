//! Random finite models for property tests and verification suites.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::sequence::{IncrementRule, PredictableRule, SequenceSpec};
use super::tree::{LevelSpec, Prob, TreeSpec};
use crate::rng::{purpose, stream};
use crate::spaces::SpaceDescriptor;

/// Parameters of the random model family.
#[derive(Debug, Clone)]
pub struct ModelFamily {
    pub space: SpaceDescriptor,
    pub min_depth: usize,
    pub max_depth: usize,
    pub max_alphabet: usize,
    /// Symmetric innovation alphabets and multiplier rules only.
    pub symmetric: bool,
}

impl ModelFamily {
    pub fn new(space: SpaceDescriptor, max_depth: usize) -> Self {
        Self { space, min_depth: 1, max_depth, max_alphabet: 3, symmetric: true }
    }

    pub fn depth_range(mut self, min: usize, max: usize) -> Self {
        self.min_depth = min;
        self.max_depth = max;
        self
    }

    pub fn alphabet(mut self, max: usize) -> Self {
        self.max_alphabet = max.max(2);
        self
    }

    pub fn symmetric(mut self, symmetric: bool) -> Self {
        self.symmetric = symmetric;
        self
    }

    /// Model number `index` of the family under `seed`.
    pub fn generate(&self, seed: u64, index: u64) -> SequenceSpec {
        let mut rng = stream(seed, purpose::MODEL, index);
        let depth = rng.gen_range(self.min_depth..=self.max_depth);
        let dim = self.space.dim();
        let vector_innovations = dim > 1 && rng.gen_bool(1.0 / 3.0);
        let idim = if vector_innovations { dim } else { 1 };
        let levels = (0..depth).map(|_| self.level(&mut rng, idim)).collect();
        let tree = TreeSpec { levels };
        let predictable = self.predictable(&mut rng, &tree, dim);
        let increment = if !self.symmetric && rng.gen_bool(0.5) {
            IncrementRule::Affine { shift: (0..dim).map(|_| small(&mut rng)).collect() }
        } else if vector_innovations {
            IncrementRule::Coordinatewise
        } else {
            IncrementRule::Scale
        };
        SequenceSpec::Rules { tree, space: self.space.clone(), predictable, increment }
    }

    fn level(&self, rng: &mut ChaCha8Rng, idim: usize) -> LevelSpec {
        let k = rng.gen_range(2..=self.max_alphabet);
        if self.symmetric {
            let x: Vec<f64> = (0..idim).map(|_| nonzero(rng)).collect();
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            if k == 2 {
                LevelSpec { values: vec![x, neg], probs: vec![Prob::Float(0.5), Prob::Float(0.5)] }
            } else {
                let q = *[0.125, 0.25, 0.375].choose(rng).unwrap();
                LevelSpec {
                    values: vec![x, vec![0.0; idim], neg],
                    probs: vec![Prob::Float(q), Prob::Float(1.0 - 2.0 * q), Prob::Float(q)],
                }
            }
        } else {
            let values = (0..k).map(|_| (0..idim).map(|_| small(rng)).collect()).collect();
            let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(1..=8) as f64).collect();
            let total: f64 = raw.iter().sum();
            let mut probs: Vec<f64> = raw.iter().map(|r| r / total).collect();
            let head: f64 = probs[..k - 1].iter().sum();
            probs[k - 1] = 1.0 - head;
            LevelSpec { values, probs: probs.into_iter().map(Prob::Float).collect() }
        }
    }

    fn predictable(&self, rng: &mut ChaCha8Rng, tree: &TreeSpec, dim: usize) -> PredictableRule {
        let initial: Vec<f64> = (0..dim).map(|_| nonzero(rng)).collect();
        match rng.gen_range(0..5) {
            0 => PredictableRule::Constant { value: initial },
            1 => PredictableRule::PerLevel {
                values: (0..tree.levels.len()).map(|_| (0..dim).map(|_| label(rng)).collect()).collect(),
            },
            2 => PredictableRule::PreviousIncrement { initial },
            3 => PredictableRule::PartialSum { initial },
            _ => {
                let mut count = 1usize;
                let mut values = Vec::new();
                for level in &tree.levels {
                    values.push((0..count).map(|_| (0..dim).map(|_| label(rng)).collect()).collect());
                    count *= level.values.len();
                }
                PredictableRule::Table { values }
            }
        }
    }
}

fn nonzero(rng: &mut ChaCha8Rng) -> f64 {
    *[-2.0, -1.5, -1.0, -0.5, 0.5, 1.0, 1.5, 2.0].choose(rng).unwrap()
}

fn label(rng: &mut ChaCha8Rng) -> f64 {
    *[-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0].choose(rng).unwrap()
}

fn small(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(-16..=16) as f64 / 8.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probmodel::sequence::AdaptedSequence;

    #[test]
    fn generated_models_build() {
        for text in ["l2:3", "lp:0.5:2", "linf:4"] {
            let fam = ModelFamily::new(text.parse().unwrap(), 4);
            for i in 0..20 {
                let spec = fam.generate(5, i);
                let seq = AdaptedSequence::<f64, f64>::from_spec(&spec).unwrap();
                assert!(seq.is_conditionally_symmetric());
                assert_eq!(spec, fam.generate(5, i));
            }
        }
    }

    #[test]
    fn asymmetric_family_builds() {
        let fam = ModelFamily::new("l2:2".parse().unwrap(), 3).symmetric(false);
        let built = (0..20)
            .map(|i| AdaptedSequence::<f64, f64>::from_spec(&fam.generate(1, i)).unwrap())
            .filter(|s| !s.is_conditionally_symmetric())
            .count();
        assert!(built > 10);
    }
}
