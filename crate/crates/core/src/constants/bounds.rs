//! Closed-form constants, evaluated in base-2 log space so large exponents
//! stay finite, with an optional double-double backend.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::error::{Error, Result};

/// Real type used by the constant evaluators.
pub trait BoundScalar:
    Copy
    + Debug
    + PartialOrd
    + From<f64>
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn to_f64(self) -> f64;
    fn exp2(self) -> Self;
    fn log2(self) -> Self;
    fn floor(self) -> Self;
    fn log2_e() -> Self;
}

impl BoundScalar for f64 {
    fn to_f64(self) -> f64 {
        self
    }
    fn exp2(self) -> Self {
        f64::exp2(self)
    }
    fn log2(self) -> Self {
        f64::log2(self)
    }
    fn floor(self) -> Self {
        f64::floor(self)
    }
    fn log2_e() -> Self {
        std::f64::consts::LOG2_E
    }
}

impl BoundScalar for TwoFloat {
    fn to_f64(self) -> f64 {
        self.hi() + self.lo()
    }
    fn exp2(self) -> Self {
        if self.hi() == f64::NEG_INFINITY {
            return TwoFloat::from(0.0);
        }
        TwoFloat::exp2(self)
    }
    fn log2(self) -> Self {
        // twofloat 0.8 maps log2(1) to 1.
        if self == TwoFloat::from(1.0) {
            TwoFloat::from(0.0)
        } else if self == TwoFloat::from(0.0) {
            TwoFloat::from(f64::NEG_INFINITY)
        } else {
            TwoFloat::log2(self)
        }
    }
    fn floor(self) -> Self {
        TwoFloat::floor(self)
    }
    fn log2_e() -> Self {
        twofloat::consts::LOG2_E
    }
}

/// `mantissa · 2^pow2 · e^pow_e` with `mantissa ∈ [1, 2)` (or 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Factorized {
    pub mantissa: f64,
    pub pow2: i64,
    pub pow_e: f64,
}

impl Factorized {
    /// `log₂` of the value.
    pub fn log2(&self) -> f64 {
        self.mantissa.log2() + self.pow2 as f64 + self.pow_e * std::f64::consts::LOG2_E
    }
}

/// A constant `2^log2_rest · e^pow_e`.
#[derive(Debug, Clone, Copy)]
pub struct Evaluated<B> {
    pub log2_rest: B,
    pub pow_e: f64,
}

impl<B: BoundScalar> Evaluated<B> {
    fn new(log2_rest: B, pow_e: f64) -> Self {
        Self { log2_rest, pow_e }
    }

    fn zero() -> Self {
        Self { log2_rest: B::from(f64::NEG_INFINITY), pow_e: 0.0 }
    }

    pub fn value(&self) -> B {
        if self.log2_rest.to_f64() == f64::NEG_INFINITY {
            return B::from(0.0);
        }
        (self.log2_rest + B::from(self.pow_e) * B::log2_e()).exp2()
    }

    /// `f64` value; `inf` beyond the `f64` range.
    pub fn to_f64(&self) -> f64 {
        let l = self.log2_rest.to_f64() + self.pow_e * std::f64::consts::LOG2_E;
        if l >= 1024.0 {
            f64::INFINITY
        } else {
            self.value().to_f64()
        }
    }

    pub fn factorized(&self) -> Factorized {
        let l = self.log2_rest;
        if l.to_f64() == f64::NEG_INFINITY {
            return Factorized { mantissa: 0.0, pow2: 0, pow_e: 0.0 };
        }
        let a = l.floor();
        Factorized { mantissa: (l - a).exp2().to_f64(), pow2: a.to_f64() as i64, pow_e: self.pow_e }
    }
}

fn l2<B: BoundScalar>(x: f64) -> B {
    B::from(x).log2()
}

/// `log₂(2^a + 2^b)`.
fn log2_add<B: BoundScalar>(a: B, b: B) -> B {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (B::from(1.0) + (lo - hi).exp2()).log2()
}

/// `log₂(1 − 2^a)` for `a < 0`.
fn log2_one_minus<B: BoundScalar>(a: B) -> B {
    (B::from(1.0) - a.exp2()).log2()
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {x}")))
    }
}

fn non_negative(name: &str, x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be non-negative and finite, got {x}")))
    }
}

/// Upper end `2^{−2p/ρ+p−1}` of the admissible `b`.
pub fn b_upper(r: f64, p: f64) -> f64 {
    let rho = r.min(p);
    (-2.0 * p / rho + p - 1.0).exp2()
}

/// `β` solving `β^ρ − 1 = (2A^ρ + 1) δ^ρ`.
pub fn beta_from_delta(a: f64, delta: f64, rho: f64) -> f64 {
    (1.0 + (2.0 * a.powf(rho) + 1.0) * delta.powf(rho)).powf(rho.recip())
}

/// `C_{X,r,p,q}` of the extrapolation proposition:
///
/// `2^{2q/ρ−q+2} [2^{2p/ρ−p+2q/ρ−q+1} (2^{2q} + 2^{q/ρ}) (β/δ)^{q/ρ} + (1−2^{−ρ})^{−q/ρ}]`
/// with `β/δ = (2A^ρ+1)^{1/ρ} (1 − (2^{2p/ρ−p+1} b)^{ρ/q})^{−1/ρ}` and `ρ = min(r, p)`.
pub fn bound_prop32_c<B: BoundScalar>(r: f64, p: f64, q: f64, a: f64, b: f64) -> Result<Evaluated<B>> {
    positive("r", r)?;
    positive("p", p)?;
    positive("q", q)?;
    non_negative("A", a)?;
    if r > 1.0 {
        return Err(Error::InvalidParameter(format!("r must lie in (0, 1], got {r}")));
    }
    let rho = r.min(p);
    let upper = b_upper(r, p);
    if !(b > 0.0 && b < upper) {
        return Err(Error::BOutOfRange { b, upper });
    }
    let bf = B::from;
    let s = 2.0 * p / rho - p + 1.0;
    // log₂(2^s b) < 0
    let x = bf(s) + l2::<B>(b);
    let a_rho = a.powf(rho);
    let log_ratio = (l2::<B>(2.0 * a_rho + 1.0) - log2_one_minus(x * bf(rho / q))) / bf(rho);
    let first =
        bf(2.0 * p / rho - p + 2.0 * q / rho - q + 1.0) + log2_add(bf(2.0 * q), bf(q / rho)) + bf(q / rho) * log_ratio;
    let second = -(bf(q / rho) * log2_one_minus(bf(-rho)));
    Ok(Evaluated::new(bf(2.0 * q / rho - q + 2.0) + log2_add(first, second), 0.0))
}

/// The `r = 1`, `p ≥ 1` form
/// `2^{2q+2}[2^{p+q+1}(2^q+1)(2A+1)^q(1−(2^{p+1}b)^{1/q})^{−q} + 1]`.
pub fn bound_prop32_c_banach<B: BoundScalar>(p: f64, q: f64, a: f64, b: f64) -> Result<Evaluated<B>> {
    positive("q", q)?;
    non_negative("A", a)?;
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("the Banach form needs p >= 1, got {p}")));
    }
    let upper = b_upper(1.0, p);
    if !(b > 0.0 && b < upper) {
        return Err(Error::BOutOfRange { b, upper });
    }
    let bf = B::from;
    let x = bf(p + 1.0) + l2::<B>(b);
    let first =
        bf(p + q + 1.0) + log2_add(bf(q), bf(0.0)) + bf(q) * l2::<B>(2.0 * a + 1.0) - bf(q) * log2_one_minus(x / bf(q));
    Ok(Evaluated::new(bf(2.0 * q + 2.0) + log2_add(first, bf(0.0)), 0.0))
}

fn banach_range(p: f64, q: f64, d_p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("needs p >= 1, got {p}")));
    }
    positive("q", q)?;
    non_negative("D_p", d_p)
}

/// `K ≤ e^q 2^{3q/p+p+7q+7} D_p^q (q/p)^q`.
pub fn bound_thm41_k<B: BoundScalar>(p: f64, q: f64, d_p: f64) -> Result<Evaluated<B>> {
    banach_range(p, q, d_p)?;
    if d_p == 0.0 {
        return Ok(Evaluated::zero());
    }
    let bf = B::from;
    let rest = bf(3.0 * q / p + p + 7.0 * q + 7.0) + bf(q) * (l2::<B>(d_p) + l2::<B>(q) - l2::<B>(p));
    Ok(Evaluated::new(rest, q))
}

/// `D_q ≤ e 2^{3/p+p/q+7+7/q} D_p q/p`.
pub fn bound_thm41_dq<B: BoundScalar>(p: f64, q: f64, d_p: f64) -> Result<Evaluated<B>> {
    banach_range(p, q, d_p)?;
    if d_p == 0.0 {
        return Ok(Evaluated::zero());
    }
    let bf = B::from;
    let rest = bf(3.0 / p + p / q + 7.0 + 7.0 / q) + l2::<B>(d_p) + l2::<B>(q) - l2::<B>(p);
    Ok(Evaluated::new(rest, 1.0))
}

/// `e^q 2^{11+8q} D_ℝ^q`.
pub fn bound_hilbert_phi<B: BoundScalar>(q: f64, d_r: f64) -> Result<Evaluated<B>> {
    positive("q", q)?;
    non_negative("D_R", d_r)?;
    if d_r == 0.0 {
        return Ok(Evaluated::zero());
    }
    let bf = B::from;
    Ok(Evaluated::new(bf(11.0 + 8.0 * q) + bf(q) * l2::<B>(d_r), q))
}

/// `d^{1/p} ≤ 2`, decided exactly as `d ≤ 2^p`.
pub fn linf_kernel_holds(d: u64, p: f64) -> bool {
    if d <= 1 {
        return true;
    }
    if !(p > 0.0) {
        return false;
    }
    if p >= 64.0 {
        return true;
    }
    let k = p.floor();
    if d <= 1u64 << (k as u32) {
        return true;
    }
    if k + 1.0 < 64.0 && d > 1u64 << ((k + 1.0) as u32) {
        return false;
    }
    // 2^k < d ≤ 2^{k+1}: compare log₂ d with p in double-double.
    let ld = BoundScalar::log2(TwoFloat::from(d as f64));
    ld <= TwoFloat::from(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinfBound {
    pub applicable: bool,
    /// `d^{1/p}`.
    pub kernel: f64,
    /// `2 D_ℝ` when applicable.
    pub bound: Option<f64>,
}

/// `D_p(ℓ∞_d) ≤ 2 D_ℝ` for `p ≥ log₂ d`.
pub fn bound_linf_upper(d: u64, p: f64, d_r: f64) -> Result<LinfBound> {
    if d == 0 {
        return Err(Error::InvalidParameter("d must be at least 1".into()));
    }
    positive("p", p)?;
    non_negative("D_R", d_r)?;
    let applicable = linf_kernel_holds(d, p);
    Ok(LinfBound { applicable, kernel: (d as f64).powf(p.recip()), bound: applicable.then_some(2.0 * d_r) })
}

/// Value used for the Kahane–Khintchine constant `K_{p,2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum KhintchinePolicy {
    /// `K_{2,2} = 1`, `√(p−1)` for `p > 2`, `√2` for `1 ≤ p < 2`.
    Orthogonality,
    Fixed {
        value: f64,
    },
}

impl Default for KhintchinePolicy {
    fn default() -> Self {
        KhintchinePolicy::Orthogonality
    }
}

impl KhintchinePolicy {
    pub fn constant(&self, p: f64) -> f64 {
        match *self {
            KhintchinePolicy::Fixed { value } => value,
            KhintchinePolicy::Orthogonality if p == 2.0 => 1.0,
            KhintchinePolicy::Orthogonality if p > 2.0 => (p - 1.0).sqrt(),
            KhintchinePolicy::Orthogonality => std::f64::consts::SQRT_2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KhintchinePolicy::Orthogonality => "orthogonality",
            KhintchinePolicy::Fixed { .. } => "fixed",
        }
    }
}

/// `4^{−1} K_{p,2}^{−1} (log₂ d)^{1/2}`.
pub fn bound_garling_lower(d: u64, p: f64, policy: KhintchinePolicy) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("d must be at least 2, got {d}")));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("needs p >= 1, got {p}")));
    }
    let k = policy.constant(p);
    positive("K_{p,2}", k)?;
    Ok((d as f64).log2().sqrt() / (4.0 * k))
}

/// `2^{q/r}(2^{1+q/r} C + 1)`, the constant for sequences without
/// conditional symmetry.
pub fn condsym_constant(q: f64, r: f64, c: f64) -> f64 {
    let e = q / r;
    e.exp2() * ((1.0 + e).exp2() * c + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn double_double_log2_of_one() {
        assert_eq!(BoundScalar::log2(TwoFloat::from(1.0)).to_f64(), 0.0);
    }

    #[test]
    fn general_and_banach_forms_agree() {
        for (p, q, a, b) in [(2.0, 2.0, 1.0, 1.0 / 16.0), (1.0, 3.0, 0.5, 0.1), (3.0, 1.0, 4.0, 0.01)] {
            let g = bound_prop32_c::<f64>(1.0, p, q, a, b).unwrap().to_f64();
            let h = bound_prop32_c_banach::<f64>(p, q, a, b).unwrap().to_f64();
            assert!(rel(g, h) < 1e-12, "{g} vs {h}");
        }
    }

    #[test]
    fn b_range_is_enforced() {
        let e = bound_prop32_c::<f64>(1.0, 2.0, 2.0, 1.0, 0.125).unwrap_err();
        assert!(e.to_string().starts_with("b-out-of-range"));
        assert!(bound_prop32_c::<f64>(0.5, 1.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn small_a_and_b_stay_above_the_additive_floor() {
        let c = bound_prop32_c_banach::<f64>(2.0, 2.0, 1e-12, 1e-12).unwrap().to_f64();
        assert!(c.is_finite() && c >= 64.0);
    }

    #[test]
    fn large_q_factorizes_without_overflow() {
        let k = bound_thm41_k::<TwoFloat>(2.0, 400.0, 1.0).unwrap();
        assert_eq!(k.to_f64(), f64::INFINITY);
        let f = k.factorized();
        assert!((1.0..2.0).contains(&f.mantissa));
        assert_eq!(f.pow_e, 400.0);
        assert_eq!(f.pow2, (3.0 * 200.0 + 2.0 + 2800.0 + 7.0 + 400.0 * 200f64.log2()).floor() as i64);
    }

    #[test]
    fn dq_at_q_equal_p_exceeds_dp() {
        for p in [1.0, 1.5, 2.0, 7.0] {
            for d in [0.5, 1.0, 30.0] {
                assert!(bound_thm41_dq::<f64>(p, p, d).unwrap().to_f64() > d);
            }
        }
    }

    #[test]
    fn linf_examples() {
        let b = bound_linf_upper(8, 3.0, 1.0).unwrap();
        assert!(b.applicable);
        assert_eq!(b.bound, Some(2.0));
        assert!(!bound_linf_upper(16, 2.0, 1.0).unwrap().applicable);
        assert!(bound_linf_upper(1, 0.1, 1.0).unwrap().applicable);
        assert!(linf_kernel_holds(1024, 10.0));
        assert!(!linf_kernel_holds(1025, 10.0));
        assert!(!linf_kernel_holds(3, 1.5849625007211));
        assert!(linf_kernel_holds(3, 1.5849625007212));
    }

    #[test]
    fn garling_examples() {
        let k2 = KhintchinePolicy::Orthogonality;
        assert_eq!(bound_garling_lower(16, 2.0, k2).unwrap(), 0.5);
        assert_eq!(bound_garling_lower(2, 2.0, KhintchinePolicy::Fixed { value: 2.0 }).unwrap(), 0.125);
        assert!(bound_garling_lower(64, 2.0, k2).unwrap() > bound_garling_lower(4, 2.0, k2).unwrap());
    }

    #[test]
    fn beta_at_rho_one() {
        assert!((beta_from_delta(2.0, 0.2, 1.0) - 2.0).abs() < 1e-15);
    }
}
