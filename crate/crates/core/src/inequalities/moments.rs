//! Moment functionals `E Φ(·)`, the extrapolation estimate and the bound for
//! sequences without conditional symmetry.

use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use super::bmo::analyze;
use super::report::IneqReport;
use crate::constants::{b_upper, bound_prop32_c, condsym_constant};
use crate::error::{Error, Result};
use crate::probmodel::{JointOutcome, TangentPair};
use crate::scalar::{Scalar, Weight};
use crate::stats::Moments;

/// `Φ` with `Φ(0) = 0`, non-decreasing, and `Φ(st) ≤ s^q Φ(t)` for `s ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", try_from = "RawFunctional")]
pub enum MomentFunctional {
    /// `Φ(t) = t^q`.
    Power { q: f64 },
    /// `Φ(t) = t^{q−1} log(1 + t)`, admissible for `q ≥ 1`.
    PowerLog { q: f64 },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum RawFunctional {
    Power { q: f64 },
    PowerLog { q: f64 },
}

impl TryFrom<RawFunctional> for MomentFunctional {
    type Error = Error;

    fn try_from(raw: RawFunctional) -> Result<Self> {
        match raw {
            RawFunctional::Power { q } => MomentFunctional::power(q),
            RawFunctional::PowerLog { q } => MomentFunctional::power_log(q),
        }
    }
}

impl MomentFunctional {
    pub fn power(q: f64) -> Result<Self> {
        MomentFunctional::Power { q }.validated()
    }

    pub fn power_log(q: f64) -> Result<Self> {
        MomentFunctional::PowerLog { q }.validated()
    }

    pub fn q(&self) -> f64 {
        match *self {
            MomentFunctional::Power { q } | MomentFunctional::PowerLog { q } => q,
        }
    }

    pub fn phi(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match *self {
            MomentFunctional::Power { q } => t.powf(q),
            MomentFunctional::PowerLog { q } => t.powf(q - 1.0) * t.ln_1p(),
        }
    }

    /// Checks monotonicity and the growth condition on a sampled grid of
    /// `t ∈ [1e−6, 1e6]` and `s ∈ [1, 1e3]`.
    fn validated(self) -> Result<Self> {
        let q = self.q();
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::InvalidParameter(format!("q must be positive, got {q}")));
        }
        let ts: Vec<f64> = (0..=120).map(|i| 10f64.powf(-6.0 + 0.1 * i as f64)).collect();
        let ss = [1.0, 1.001, 1.5, 2.0, 3.7, 10.0, 100.0, 1e3];
        let mut prev = self.phi(0.0);
        for &t in &ts {
            let v = self.phi(t);
            if v < prev {
                return Err(Error::InvalidParameter(format!("{self:?} decreases near t = {t:e}")));
            }
            prev = v;
            for &s in &ss {
                if self.phi(s * t) > s.powf(q) * v * (1.0 + 1e-12) {
                    return Err(Error::InvalidParameter(format!(
                        "{self:?} violates Φ(st) ≤ s^q Φ(t) at s = {s}, t = {t:e}"
                    )));
                }
            }
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    FStar,
    FNorm,
    GNorm,
    GStar,
}

impl Statistic {
    fn of_outcome<S: Scalar, W>(&self, o: &JointOutcome<'_, S, W>) -> S {
        match self {
            Statistic::FStar => o.f_star,
            Statistic::FNorm => o.f_norm,
            Statistic::GNorm => o.g_norm,
            Statistic::GStar => o.g_star,
        }
    }
}

/// Exact `E Φ(statistic)` by enumeration.
pub fn moment_phi<S: Scalar, W: Weight>(
    pair: &TangentPair<S, W>,
    phi: &MomentFunctional,
    stat: Statistic,
) -> Result<f64> {
    let tree = pair.tree();
    let depth = pair.depth();
    let fx = pair.functionals();
    match stat {
        Statistic::FStar | Statistic::FNorm => Ok((0..tree.leaf_count())
            .map(|leaf| {
                let x = match stat {
                    Statistic::FStar => fx.f_star(depth, leaf),
                    _ => pair.space().norm_unchecked(fx.partial_sum(depth, leaf)),
                };
                tree.leaf_prob(leaf).to_f64() * phi.phi(x.as_f64())
            })
            .sum()),
        _ => pair.fold_joint(
            || 0.0,
            |acc, o| *acc += o.prob.to_f64() * phi.phi(stat.of_outcome(o).as_f64()),
            |a, b| a + b,
        ),
    }
}

/// Monte Carlo `E Φ(statistic)` with its standard error.
pub fn moment_phi_mc<S: Scalar, W: Weight>(
    pair: &TangentPair<S, W>,
    phi: &MomentFunctional,
    stat: Statistic,
    samples: usize,
    seed: u64,
) -> (f64, f64) {
    let m = pair.fold_samples(
        samples,
        seed,
        Moments::default,
        |m, s| {
            let x = match stat {
                Statistic::FStar => s.f_star,
                Statistic::FNorm => pair.space().norm_unchecked(s.f.as_slice()),
                Statistic::GNorm => pair.space().norm_unchecked(s.g.as_slice()),
                Statistic::GStar => s.g_star,
            };
            m.push(phi.phi(x.as_f64()));
        },
        Moments::merge,
    );
    (m.mean(), m.std_error())
}

fn relative_slack(rhs: f64) -> f64 {
    1e-12 * (1.0 + rhs.abs())
}

/// End-to-end extrapolation check on one model.
#[derive(Debug, Clone)]
pub struct ExtrapolationReport {
    pub b: f64,
    pub a: f64,
    pub d_hat: f64,
    pub b_hat: f64,
    /// `b̂ < b` held exactly, so the conclusion is expected.
    pub certified: bool,
    /// `E Φ(f*) ≤ C_{X,r,p,q} E Φ(‖g‖)` for each `Φ = Power(q)`.
    pub checks: Vec<IneqReport>,
}

/// Sets `b = fraction · 2^{−2p/ρ+p−1}` and `A = b^{−1/p} D̂_p`, certifies the
/// BMO condition `b̂ < b`, and compares `E Φ(f*)` with `C·E Φ(‖g‖)`.
pub fn check_extrapolation<S: Scalar, W: Weight>(
    pair: &TangentPair<S, W>,
    p: f64,
    fraction: f64,
    qs: &[f64],
) -> Result<ExtrapolationReport> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParameter(format!("fraction must lie in (0, 1), got {fraction}")));
    }
    let r = pair.space().r_exponent();
    let b = fraction * b_upper(r, p);
    let analysis = analyze(pair, S::of(p))?;
    let d_hat = analysis.d_hat().as_f64();
    if d_hat == 0.0 {
        let checks = qs
            .iter()
            .map(|&q| IneqReport::vacuous("extrapolation", 0.0, 0.0, f64::NAN, "zero sequence").param("q", q))
            .collect();
        return Ok(ExtrapolationReport { b, a: 0.0, d_hat, b_hat: 0.0, certified: true, checks });
    }
    let a = b.powf(-1.0 / p) * d_hat;
    let bmo = analysis.condition(S::of(a));
    let b_w = W::from_f64(b).ok_or_else(|| Error::InvalidParameter(format!("b = {b}")))?;
    let certified = bmo.b_hat < b_w;
    let mut checks = Vec::with_capacity(qs.len());
    for &q in qs {
        let phi = MomentFunctional::power(q)?;
        let report = if certified {
            let c = bound_prop32_c::<TwoFloat>(r, p, q, a, b)?.to_f64();
            let lhs = moment_phi(pair, &phi, Statistic::FStar)?;
            let rhs = c * moment_phi(pair, &phi, Statistic::GNorm)?;
            IneqReport::exact("extrapolation", lhs, rhs, c, relative_slack(rhs))
        } else {
            IneqReport::not_applicable("extrapolation", "bmo condition not certified")
        };
        checks.push(report.param("q", q).param("p", p).param("r", r).param("A", a).param("b", b));
    }
    Ok(ExtrapolationReport { b, a, d_hat, b_hat: bmo.b_hat.to_f64(), certified, checks })
}

/// `E Φ(f_N) ≤ 2^{q/r}(2^{1+q/r}C + 1) E Φ(g_N)` and the same for the maximal
/// functions, given the symmetric-case constant `c_sym`.
pub fn check_condsym<S: Scalar, W: Weight>(
    pair: &TangentPair<S, W>,
    phi: &MomentFunctional,
    c_sym: f64,
) -> Result<[IneqReport; 2]> {
    let r = pair.space().r_exponent();
    let constant = condsym_constant(phi.q(), r, c_sym);
    let side = |id: &str, f: Statistic, g: Statistic| -> Result<IneqReport> {
        let lhs = moment_phi(pair, phi, f)?;
        let rhs = constant * moment_phi(pair, phi, g)?;
        Ok(IneqReport::exact(id, lhs, rhs, constant, relative_slack(rhs))
            .param("q", phi.q())
            .param("r", r)
            .param("c_sym", c_sym))
    };
    Ok([
        side("condsym-terminal", Statistic::FNorm, Statistic::GNorm)?,
        side("condsym-maximal", Statistic::FStar, Statistic::GStar)?,
    ])
}
