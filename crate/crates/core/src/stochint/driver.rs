//! Brownian increments on a uniform grid, `m` independent `H`-coordinates.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{purpose, stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrownianDriver {
    /// Dimension `m` of `H`.
    pub h_dim: usize,
    pub horizon: f64,
    pub steps: usize,
    pub seed: u64,
}

impl BrownianDriver {
    pub fn new(h_dim: usize, steps: usize, seed: u64) -> Result<Self> {
        Self { h_dim, horizon: 1.0, steps, seed }.validated()
    }

    pub fn with_horizon(self, horizon: f64) -> Result<Self> {
        Self { horizon, ..self }.validated()
    }

    fn validated(self) -> Result<Self> {
        if self.h_dim == 0 || self.steps == 0 || !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("bad driver {self:?}")));
        }
        Ok(self)
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Grid time `t_k`.
    pub fn time(&self, k: usize) -> f64 {
        self.horizon * k as f64 / self.steps as f64
    }

    /// Increments of path `index`.
    pub fn path(&self, index: u64) -> DriverPath {
        self.draw(purpose::DRIVER, index)
    }

    /// Increments of the independent copy `W̃` on path `index`.
    pub fn copy_path(&self, index: u64) -> DriverPath {
        self.draw(purpose::DRIVER_COPY, index)
    }

    fn draw(&self, purpose: u64, index: u64) -> DriverPath {
        let mut rng = stream(self.seed, purpose, index);
        let sd = self.dt().sqrt();
        let dw = (0..self.steps * self.h_dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sd * z
            })
            .collect();
        DriverPath { index, dw, h_dim: self.h_dim, dt: self.dt() }
    }
}

/// One realized path: `ΔW_{k,j} = (W(t_{k+1}) − W(t_k)) h_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriverPath {
    pub index: u64,
    dw: Vec<f64>,
    h_dim: usize,
    dt: f64,
}

impl DriverPath {
    pub fn steps(&self) -> usize {
        self.dw.len() / self.h_dim
    }

    pub fn h_dim(&self) -> usize {
        self.h_dim
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Increment over grid step `k` in direction `j`.
    pub fn increment(&self, k: usize, j: usize) -> f64 {
        self.dw[k * self.h_dim + j]
    }

    /// The increments strictly before grid point `k`.
    pub fn past(&self, k: usize) -> Past<'_> {
        Past { dw: &self.dw[..k * self.h_dim], h_dim: self.h_dim, dt: self.dt }
    }
}

/// Read-only view of the increments before a grid point. Coefficient rules
/// only ever receive this view, which makes them adapted by construction.
#[derive(Debug, Clone, Copy)]
pub struct Past<'a> {
    dw: &'a [f64],
    h_dim: usize,
    dt: f64,
}

impl Past<'_> {
    /// Number of grid steps visible.
    pub fn steps(&self) -> usize {
        self.dw.len() / self.h_dim
    }

    pub fn time(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    pub fn increment(&self, k: usize, j: usize) -> f64 {
        self.dw[k * self.h_dim + j]
    }

    /// `W(t) h_j` at the end of the view.
    pub fn w(&self, j: usize) -> f64 {
        self.dw.iter().skip(j).step_by(self.h_dim).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::Moments;

    #[test]
    fn increment_moments() {
        let driver = BrownianDriver::new(2, 4, 11).unwrap();
        let dt = driver.dt();
        let mut m = Moments::default();
        let mut sq = Moments::default();
        let mut cross = Moments::default();
        for i in 0..100_000 {
            let p = driver.path(i);
            let x = p.increment(1, 0);
            m.push(x);
            sq.push(x * x);
            cross.push(x * p.increment(2, 1));
        }
        assert!(m.mean().abs() < 4.0 * m.std_error());
        assert!((sq.mean() - dt).abs() < 4.0 * sq.std_error());
        assert!(cross.mean().abs() < 4.0 * cross.std_error());
    }

    #[test]
    fn past_is_truncated() {
        let p = BrownianDriver::new(3, 8, 1).unwrap().path(0);
        let past = p.past(5);
        assert_eq!(past.steps(), 5);
        let w: f64 = (0..5).map(|k| p.increment(k, 2)).sum();
        assert!((past.w(2) - w).abs() < 1e-15);
        assert_eq!(p.past(0).w(1), 0.0);
    }

    #[test]
    fn copy_is_a_different_stream() {
        let d = BrownianDriver::new(1, 4, 1).unwrap();
        assert_ne!(d.path(3), d.copy_path(3));
        assert_eq!(d.path(3), d.path(3));
    }
}
