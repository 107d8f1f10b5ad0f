//! Pathwise stochastic integrals of step processes and γ-radonifying norms.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::driver::{BrownianDriver, DriverPath};
use super::process::StepProcess;
use crate::error::Result;
use crate::parallel::ordered_map;
use crate::rng::{purpose, stream};
use crate::scalar::{Scalar, Vector};
use crate::spaces::SpaceDescriptor;
use crate::stats::Moments;

/// Default Gaussian draws per γ-norm estimate.
pub const GAMMA_INNER: usize = 1024;

/// `∫_0^{t_k} Ψ dW` at every grid point `k = 0, …, steps`, exact on the grid.
pub fn integrate<S: Scalar>(psi: &StepProcess<S>, path: &DriverPath) -> Result<Vec<Vector<S>>> {
    let coeffs = psi.coefficients(path)?;
    let part = psi.partition();
    let mut out = Vec::with_capacity(path.steps() + 1);
    let mut acc = Vector::zeros(psi.space().dim());
    out.push(acc.clone());
    for (n, row) in coeffs.iter().enumerate() {
        for k in part[n]..part[n + 1] {
            for (m, xi) in row.iter().enumerate() {
                acc.add_scaled(S::of(path.increment(k, m)), xi.as_slice());
            }
            out.push(acc.clone());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaEstimate {
    pub value: f64,
    /// Zero for the closed form.
    pub std_error: f64,
    pub exact: bool,
}

/// `(E_γ ‖Σ_j γ_j x_j‖²)^{1/2}`: closed form on Hilbert spaces, Monte Carlo
/// with `inner` draws from stream `(seed, GAMMA, index)` otherwise.
pub fn gaussian_sum_norm<S: Scalar>(
    space: &SpaceDescriptor,
    terms: &[Vector<S>],
    inner: usize,
    seed: u64,
    index: u64,
) -> GammaEstimate {
    if space.is_hilbert() {
        let sq: f64 = terms.iter().map(|x| space.norm_unchecked(x.as_slice()).as_f64().powi(2)).sum();
        return GammaEstimate { value: sq.sqrt(), std_error: 0.0, exact: true };
    }
    let mut rng = stream(seed, purpose::GAMMA, index);
    let dim = space.dim();
    let mut sum = Vector::zeros(dim);
    let mut m = Moments::default();
    for _ in 0..inner.max(1) {
        sum.0.iter_mut().for_each(|x| *x = S::zero());
        for x in terms {
            let g: f64 = StandardNormal.sample(&mut rng);
            sum.add_scaled(S::of(g), x.as_slice());
        }
        m.push(space.norm_unchecked(sum.as_slice()).as_f64().powi(2));
    }
    let value = m.mean().sqrt();
    let std_error = if value > 0.0 { m.std_error() / (2.0 * value) } else { 0.0 };
    GammaEstimate { value, std_error, exact: false }
}

/// `‖Ψ(·, ω)‖_{γ(0,T;H,X)}`, the Gaussian-series norm of `Σ_{n,m} γ_{nm} (Δt_n)^{1/2} ξ_{nm}(ω)`.
pub fn gamma_norm<S: Scalar>(
    psi: &StepProcess<S>,
    path: &DriverPath,
    inner: usize,
    seed: u64,
) -> Result<GammaEstimate> {
    let coeffs = psi.coefficients(path)?;
    let part = psi.partition();
    let terms: Vec<Vector<S>> = coeffs
        .iter()
        .enumerate()
        .flat_map(|(n, row)| {
            let h = S::of(((part[n + 1] - part[n]) as f64 * path.dt()).sqrt());
            row.iter().map(move |x| x.scaled(h))
        })
        .collect();
    Ok(gaussian_sum_norm(psi.space(), &terms, inner, seed, path.index))
}

/// `‖Ψ(·, ω)‖_{L²(0,T;γ(H,X))} = (Σ_n Δt_n ‖Σ_m h_m ⊗ ξ_{nm}‖²_{γ(H,X)})^{1/2}`.
pub fn l2_gamma_norm<S: Scalar>(
    psi: &StepProcess<S>,
    path: &DriverPath,
    inner: usize,
    seed: u64,
) -> Result<GammaEstimate> {
    let coeffs = psi.coefficients(path)?;
    let part = psi.partition();
    let intervals = coeffs.len() as u64;
    let (mut sq, mut var, mut exact) = (0.0, 0.0, true);
    for (n, row) in coeffs.iter().enumerate() {
        let dt = (part[n + 1] - part[n]) as f64 * path.dt();
        let g = gaussian_sum_norm(psi.space(), row, inner, seed, path.index * intervals + n as u64);
        sq += dt * g.value * g.value;
        // d(v²) = 2v dv
        var += (dt * 2.0 * g.value * g.std_error).powi(2);
        exact &= g.exact;
    }
    let value = sq.sqrt();
    let std_error = if value > 0.0 { var.sqrt() / (2.0 * value) } else { 0.0 };
    Ok(GammaEstimate { value, std_error, exact })
}

/// Per-path summary for plotting and moment estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathStats {
    pub path: u64,
    /// `sup_t ‖∫_0^t Ψ dW‖` over grid points.
    pub sup_norm: f64,
    pub terminal_norm: f64,
    pub gamma: f64,
    pub gamma_std_error: f64,
}

pub fn path_stats<S: Scalar>(
    psi: &StepProcess<S>,
    driver: &BrownianDriver,
    paths: usize,
    inner: usize,
) -> Result<Vec<PathStats>> {
    ordered_map(paths, |i| {
        let path = driver.path(i as u64);
        let values = integrate(psi, &path)?;
        let norms: Vec<f64> = values.iter().map(|v| psi.space().norm_unchecked(v.as_slice()).as_f64()).collect();
        let gamma = gamma_norm(psi, &path, inner, driver.seed)?;
        Ok(PathStats {
            path: i as u64,
            sup_norm: norms.iter().copied().fold(0.0, f64::max),
            terminal_norm: *norms.last().expect("grid has a terminal point"),
            gamma: gamma.value,
            gamma_std_error: gamma.std_error,
        })
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochint::ProcessFamily;

    fn euclid(d: usize) -> SpaceDescriptor {
        SpaceDescriptor::euclid(d).unwrap()
    }

    #[test]
    fn constant_integrand_is_scaled_brownian_motion() {
        let driver = BrownianDriver::new(2, 16, 5).unwrap();
        let psi = ProcessFamily::Constant { value: vec![2.0, -1.0] }.build::<f64>(&euclid(2), 16).unwrap();
        let path = driver.path(3);
        let out = integrate(&psi, &path).unwrap();
        let w: f64 = (0..16).map(|k| path.increment(k, 0)).sum();
        assert!((out[16].0[0] - 2.0 * w).abs() < 1e-12);
        assert!((out[16].0[1] + w).abs() < 1e-12);
        assert_eq!(out[0].0, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_integrand() {
        let driver = BrownianDriver::new(1, 8, 0).unwrap();
        let psi = StepProcess::<f64>::zero(euclid(3), vec![0, 4, 8], 1).unwrap();
        let out = integrate(&psi, &driver.path(0)).unwrap();
        assert!(out.iter().all(|v| v.is_zero()));
        assert_eq!(gamma_norm(&psi, &driver.path(0), 16, 0).unwrap().value, 0.0);
    }

    #[test]
    fn two_interval_variance() {
        let driver = BrownianDriver::new(1, 4, 2).unwrap();
        let psi = StepProcess::<f64>::deterministic(euclid(1), vec![0, 1, 4], vec![vec![vec![3.0]], vec![vec![-1.0]]])
            .unwrap();
        let mut m = Moments::default();
        for i in 0..50_000 {
            let out = integrate(&psi, &driver.path(i)).unwrap();
            m.push(out[4].0[0].powi(2));
        }
        let expected = 9.0 * 0.25 + 1.0 * 0.75;
        assert!((m.mean() - expected).abs() < 4.0 * m.std_error(), "{} vs {expected}", m.mean());
    }

    #[test]
    fn hilbert_gamma_closed_form() {
        let driver = BrownianDriver::new(2, 8, 1).unwrap();
        let values = vec![vec![vec![1.0, 2.0], vec![0.0, 1.0]], vec![vec![-1.0, 0.5], vec![3.0, 0.0]]];
        let psi = StepProcess::<f64>::deterministic(euclid(2), vec![0, 2, 8], values).unwrap();
        let g = gamma_norm(&psi, &driver.path(0), 1, 0).unwrap();
        let expected = 0.25 * (5.0 + 1.0) + 0.75 * (1.25 + 9.0);
        assert!(g.exact);
        assert!((g.value * g.value - expected).abs() < 1e-10);
        let l2 = l2_gamma_norm(&psi, &driver.path(0), 1, 0).unwrap();
        assert!((l2.value - g.value).abs() < 1e-12);
    }

    #[test]
    fn single_term_gamma_is_the_norm() {
        let space = SpaceDescriptor::sup_norm(3).unwrap();
        let psi = ProcessFamily::Constant { value: vec![0.5, -2.0, 1.0] }.build::<f64>(&space, 1).unwrap();
        let path = BrownianDriver::new(1, 1, 0).unwrap().path(0);
        let g = gamma_norm(&psi, &path, 20_000, 3).unwrap();
        assert!((g.value - 2.0).abs() < 4.0 * g.std_error, "{g:?}");
    }

    #[test]
    fn sup_norm_two_unit_intervals_quadrature() {
        // P(max(|γ₁|, |γ₂|) ≤ x) = (2Φ(x) − 1)²; quadrature of ∫ x² d(2Φ(x) − 1)² gives 1 + 2/π.
        let space = SpaceDescriptor::sup_norm(2).unwrap();
        let driver = BrownianDriver::new(1, 2, 0).unwrap().with_horizon(2.0).unwrap();
        let psi = ProcessFamily::Deterministic { values: vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]] }
            .build::<f64>(&space, 2)
            .unwrap();
        let g = gamma_norm(&psi, &driver.path(0), 200_000, 8).unwrap();
        let oracle: f64 = 1.636_619_772_367_581_3;
        let se_sq = 2.0 * g.value * g.std_error;
        assert!((g.value * g.value - oracle).abs() < 4.0 * se_sq, "{} vs {oracle}", g.value * g.value);
    }

    #[test]
    fn linearity_and_scaling() {
        let space = SpaceDescriptor::seq_lp(3.0, 3).unwrap();
        let driver = BrownianDriver::new(2, 16, 4).unwrap();
        let a = ProcessFamily::SignFeedback { intervals: 4, rank: 2, scale: 1.0 }.build::<f64>(&space, 16).unwrap();
        let b = ProcessFamily::CosineFeedback { intervals: 4, rank: 2, scale: 0.7 }.build::<f64>(&space, 16).unwrap();
        let c = StepProcess::combine(2.0, &a, -3.0, &b).unwrap();
        let doubled = StepProcess::combine(2.0, &a, 0.0, &a).unwrap();
        for i in 0..20 {
            let path = driver.path(i);
            let (ia, ib, ic) =
                (integrate(&a, &path).unwrap(), integrate(&b, &path).unwrap(), integrate(&c, &path).unwrap());
            for k in 0..=16 {
                for j in 0..3 {
                    assert!((ic[k].0[j] - (2.0 * ia[k].0[j] - 3.0 * ib[k].0[j])).abs() < 1e-12);
                }
            }
            let ga = gamma_norm(&a, &path, 64, 1).unwrap().value;
            let gd = gamma_norm(&doubled, &path, 64, 1).unwrap().value;
            assert!((gd - 2.0 * ga).abs() < 1e-12);
        }
        let sa = path_stats(&a, &driver, 20, 64).unwrap();
        let sd = path_stats(&doubled, &driver, 20, 64).unwrap();
        for (x, y) in sa.iter().zip(&sd) {
            assert!((y.sup_norm - 2.0 * x.sup_norm).abs() < 1e-12);
        }
    }
}
