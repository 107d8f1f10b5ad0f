//! Finite-rank adapted step processes `Ψ = Σ_n 1_{(t_{n−1}, t_n]} Σ_m h_m ⊗ ξ_{nm}`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::driver::{DriverPath, Past};
use crate::error::{Error, Result};
use crate::scalar::{Scalar, Vector};
use crate::spaces::SpaceDescriptor;

/// `(n, past) ↦ (ξ_{n1}, …, ξ_{nM})` for the `n`-th interval (1-based); `past`
/// holds the increments before `t_{n−1}`.
pub type CoefficientFn<S> = dyn Fn(usize, &Past<'_>) -> Vec<Vector<S>> + Send + Sync;

#[derive(Clone)]
pub struct StepProcess<S> {
    space: SpaceDescriptor,
    /// Grid indices `0 = k_0 < … < k_N`.
    partition: Vec<usize>,
    rank: usize,
    rule: Arc<CoefficientFn<S>>,
}

impl<S> fmt::Debug for StepProcess<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StepProcess")
            .field("space", &self.space)
            .field("partition", &self.partition)
            .field("rank", &self.rank)
            .finish_non_exhaustive()
    }
}

/// Uniform partition of `steps` grid steps into `intervals` pieces.
pub fn uniform_partition(steps: usize, intervals: usize) -> Result<Vec<usize>> {
    if intervals == 0 || steps % intervals != 0 {
        return Err(Error::GridMismatch(format!("{intervals} intervals do not divide {steps} grid steps")));
    }
    let w = steps / intervals;
    Ok((0..=intervals).map(|n| n * w).collect())
}

impl<S: Scalar> StepProcess<S> {
    pub fn new(
        space: SpaceDescriptor,
        partition: Vec<usize>,
        rank: usize,
        rule: impl Fn(usize, &Past<'_>) -> Vec<Vector<S>> + Send + Sync + 'static,
    ) -> Result<Self> {
        if partition.len() < 2 || partition[0] != 0 || partition.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::GridMismatch(format!("partition {partition:?} must start at 0 and increase")));
        }
        if rank == 0 {
            return Err(Error::InvalidParameter("rank must be positive".into()));
        }
        Ok(Self { space, partition, rank, rule: Arc::new(rule) })
    }

    /// `values[n−1][m−1] = ξ_{nm}`.
    pub fn deterministic(space: SpaceDescriptor, partition: Vec<usize>, values: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if values.len() + 1 != partition.len() {
            return Err(Error::GridMismatch(format!(
                "{} coefficient rows for {} intervals",
                values.len(),
                partition.len().saturating_sub(1)
            )));
        }
        let rank = values.first().map_or(0, Vec::len);
        if values.iter().any(|row| row.len() != rank) {
            return Err(Error::InvalidParameter("ragged coefficient table".into()));
        }
        let table: Vec<Vec<Vector<S>>> =
            values.iter().map(|row| row.iter().map(|v| Vector::from_f64(v)).collect()).collect();
        Self::new(space, partition, rank, move |n, _| table[n - 1].clone())
    }

    pub fn zero(space: SpaceDescriptor, partition: Vec<usize>, rank: usize) -> Result<Self> {
        let dim = space.dim();
        Self::new(space, partition, rank, move |_, _| vec![Vector::zeros(dim); rank])
    }

    /// `aΨ₁ + bΨ₂` on a shared partition.
    pub fn combine(a: S, x: &Self, b: S, y: &Self) -> Result<Self> {
        if x.partition != y.partition || x.space != y.space {
            return Err(Error::GridMismatch("processes live on different partitions or spaces".into()));
        }
        let rank = x.rank.max(y.rank);
        let dim = x.space.dim();
        let (fx, fy) = (x.rule.clone(), y.rule.clone());
        Self::new(x.space.clone(), x.partition.clone(), rank, move |n, past| {
            let (u, v) = (fx(n, past), fy(n, past));
            (0..rank)
                .map(|m| {
                    let mut out = Vector::zeros(dim);
                    if let Some(u) = u.get(m) {
                        out.add_scaled(a, u.as_slice());
                    }
                    if let Some(v) = v.get(m) {
                        out.add_scaled(b, v.as_slice());
                    }
                    out
                })
                .collect()
        })
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn partition(&self) -> &[usize] {
        &self.partition
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn intervals(&self) -> usize {
        self.partition.len() - 1
    }

    fn check_grid(&self, path: &DriverPath) -> Result<()> {
        let last = *self.partition.last().expect("partition has two points");
        if last != path.steps() {
            return Err(Error::GridMismatch(format!("partition ends at {last}, grid has {} steps", path.steps())));
        }
        if self.rank > path.h_dim() {
            return Err(Error::GridMismatch(format!("rank {} exceeds H-dimension {}", self.rank, path.h_dim())));
        }
        Ok(())
    }

    /// `ξ_{nm}(ω)` as `[n−1][m−1]`.
    pub fn coefficients(&self, path: &DriverPath) -> Result<Vec<Vec<Vector<S>>>> {
        self.check_grid(path)?;
        let dim = self.space.dim();
        (1..=self.intervals())
            .map(|n| {
                let row = (self.rule)(n, &path.past(self.partition[n - 1]));
                if row.len() != self.rank {
                    return Err(Error::DimensionMismatch { expected: self.rank, got: row.len() });
                }
                if let Some(v) = row.iter().find(|v| v.dim() != dim) {
                    return Err(Error::DimensionMismatch { expected: dim, got: v.dim() });
                }
                Ok(row)
            })
            .collect()
    }
}

/// Serializable integrand families for experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ProcessFamily {
    Zero {
        intervals: usize,
        rank: usize,
    },
    /// `Ψ ≡ h_1 ⊗ value` on `(0, T]`.
    Constant {
        value: Vec<f64>,
    },
    /// Uniform partition with `values[n−1][m−1] = ξ_{nm}`.
    Deterministic {
        values: Vec<Vec<Vec<f64>>>,
    },
    /// `ξ_{nm} = scale · sign(W(t_{n−1}) h_m) · u_{(n+m) mod d}`.
    SignFeedback {
        intervals: usize,
        rank: usize,
        scale: f64,
    },
    /// `ξ_{nm,i} = scale · cos(W(t_{n−1}) h_{(m+i) mod M} + i)`.
    CosineFeedback {
        intervals: usize,
        rank: usize,
        scale: f64,
    },
}

impl ProcessFamily {
    pub fn build<S: Scalar>(&self, space: &SpaceDescriptor, steps: usize) -> Result<StepProcess<S>> {
        let dim = space.dim();
        match self {
            ProcessFamily::Zero { intervals, rank } => {
                StepProcess::zero(space.clone(), uniform_partition(steps, *intervals)?, *rank)
            }
            ProcessFamily::Constant { value } => {
                StepProcess::deterministic(space.clone(), vec![0, steps], vec![vec![value.clone()]])
            }
            ProcessFamily::Deterministic { values } => {
                StepProcess::deterministic(space.clone(), uniform_partition(steps, values.len())?, values.clone())
            }
            &ProcessFamily::SignFeedback { intervals, rank, scale } => {
                StepProcess::new(space.clone(), uniform_partition(steps, intervals)?, rank, move |n, past| {
                    (0..rank)
                        .map(|m| {
                            let s = if past.w(m) < 0.0 { -scale } else { scale };
                            let mut v = Vector::zeros(dim);
                            v.0[(n + m) % dim] = S::of(s);
                            v
                        })
                        .collect()
                })
            }
            &ProcessFamily::CosineFeedback { intervals, rank, scale } => {
                StepProcess::new(space.clone(), uniform_partition(steps, intervals)?, rank, move |_, past| {
                    let w: Vec<f64> = (0..rank).map(|j| past.w(j)).collect();
                    (0..rank)
                        .map(|m| {
                            Vector((0..dim).map(|i| S::of(scale * (w[(m + i) % rank] + i as f64).cos())).collect())
                        })
                        .collect()
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochint::BrownianDriver;

    #[test]
    fn partition_checks() {
        let space = SpaceDescriptor::euclid(1).unwrap();
        assert!(StepProcess::<f64>::zero(space.clone(), vec![1, 2], 1).is_err());
        assert!(StepProcess::<f64>::zero(space.clone(), vec![0, 2, 2], 1).is_err());
        assert!(uniform_partition(64, 5).is_err());
        let psi = StepProcess::<f64>::zero(space, vec![0, 4, 8], 1).unwrap();
        let path = BrownianDriver::new(1, 16, 0).unwrap().path(0);
        assert!(matches!(psi.coefficients(&path), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn rules_see_only_the_past() {
        let space = SpaceDescriptor::euclid(1).unwrap();
        let psi = StepProcess::<f64>::new(space, vec![0, 3, 5, 8], 1, |n, past| {
            vec![Vector(vec![past.steps() as f64 + 10.0 * n as f64])]
        })
        .unwrap();
        let path = BrownianDriver::new(1, 8, 0).unwrap().path(0);
        let c = psi.coefficients(&path).unwrap();
        assert_eq!(c.iter().map(|r| r[0].0[0]).collect::<Vec<_>>(), vec![10.0, 23.0, 35.0]);
    }

    #[test]
    fn families_build() {
        let space = SpaceDescriptor::seq_lp(3.0, 4).unwrap();
        let path = BrownianDriver::new(2, 8, 0).unwrap().path(1);
        for fam in [
            ProcessFamily::SignFeedback { intervals: 4, rank: 2, scale: 1.0 },
            ProcessFamily::CosineFeedback { intervals: 8, rank: 2, scale: 0.5 },
            ProcessFamily::Constant { value: vec![1.0, 0.0, 0.0, 2.0] },
        ] {
            let psi = fam.build::<f64>(&space, 8).unwrap();
            assert!(psi.coefficients(&path).is_ok());
            let json = serde_json::to_string(&fam).unwrap();
            assert_eq!(serde_json::from_str::<ProcessFamily>(&json).unwrap(), fam);
        }
    }
}
