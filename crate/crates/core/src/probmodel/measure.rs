//! Finite measures keyed by exact vector identity.

use std::collections::HashMap;

use crate::scalar::{Scalar, Weight};

/// Interns vectors by their bit pattern (with `-0.0` identified with `0.0`).
#[derive(Debug, Default)]
pub struct Interner {
    ids: HashMap<Vec<u64>, u32>,
}

pub fn key_of<S: Scalar>(x: &[S]) -> Vec<u64> {
    x.iter()
        .map(|v| {
            let v = v.as_f64();
            if v == 0.0 {
                0
            } else {
                v.to_bits()
            }
        })
        .collect()
}

impl Interner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern<S: Scalar>(&mut self, x: &[S]) -> u32 {
        let next = self.ids.len() as u32;
        *self.ids.entry(key_of(x)).or_insert(next)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Total variation `Σ|μ(x) − ν(x)|` between two dense measures on ids.
pub fn l1_distance<W: Weight>(a: &[W], b: &[W]) -> W {
    let n = a.len().max(b.len());
    let zero = W::zero();
    (0..n).fold(W::zero(), |acc, i| {
        let x = a.get(i).unwrap_or(&zero);
        let y = b.get(i).unwrap_or(&zero);
        acc + x.abs_diff(y)
    })
}

/// Whether the law `{(value, mass)}` is invariant under negation.
pub fn is_symmetric_law<S: Scalar, W: Weight>(atoms: impl Iterator<Item = (Vec<S>, W)>, tol: f64) -> bool {
    let mut mass: HashMap<Vec<u64>, W> = HashMap::new();
    for (v, w) in atoms {
        let k = key_of(&v);
        let slot = mass.entry(k).or_insert_with(W::zero);
        *slot = slot.clone() + w;
    }
    mass.iter().all(|(k, w)| {
        let neg: Vec<u64> = k.iter().map(|&b| if b == 0 { 0 } else { b ^ (1u64 << 63) }).collect();
        match mass.get(&neg) {
            Some(m) => m.within(w, tol),
            None => w.within(&W::zero(), tol),
        }
    })
}
