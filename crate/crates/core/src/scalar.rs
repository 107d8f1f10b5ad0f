//! Numeric abstractions shared by the whole crate.
//!
//! Vector coordinates and norms are generic over [`Scalar`] (`f32`/`f64`).
//! Probability masses on finite trees are generic over [`Weight`], which is
//! either `f64` or an exact [`BigRational`]; the rational mode makes the
//! enumeration checks on dyadic (Paley–Walsh) trees genuinely exact.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FromPrimitive, One, Signed, ToPrimitive, Zero};

/// Comparison slack used for floating-point probability comparisons.
pub const PROB_SLACK: f64 = 1e-12;

/// Real scalar type for vector coordinates and moments.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 converts to every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Probability mass type.
pub trait Weight:
    Clone
    + Debug
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
{
    /// Whether arithmetic on this type is exact.
    const EXACT: bool;

    fn from_f64(x: f64) -> Option<Self>;

    fn from_ratio(num: u64, den: u64) -> Self;

    fn to_f64(&self) -> f64;

    fn to_scalar<S: Scalar>(&self) -> S {
        S::of(self.to_f64())
    }

    fn abs_diff(&self, other: &Self) -> Self {
        if self >= other {
            self.clone() - other.clone()
        } else {
            other.clone() - self.clone()
        }
    }

    /// `self <= other`, allowing [`PROB_SLACK`] for inexact types.
    fn le_slack(&self, other: &Self) -> bool {
        if Self::EXACT {
            self <= other
        } else {
            self.to_f64() <= other.to_f64() + PROB_SLACK
        }
    }

    /// Equality within `tol`; exact types ignore the tolerance.
    fn within(&self, other: &Self, tol: f64) -> bool {
        if Self::EXACT {
            self == other
        } else {
            self.abs_diff(other).to_f64() <= tol
        }
    }

    fn double(&self) -> Self {
        self.clone() + self.clone()
    }
}

impl Weight for f64 {
    const EXACT: bool = false;

    fn from_f64(x: f64) -> Option<Self> {
        x.is_finite().then_some(x)
    }

    fn from_ratio(num: u64, den: u64) -> Self {
        num as f64 / den as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Weight for BigRational {
    const EXACT: bool = true;

    fn from_f64(x: f64) -> Option<Self> {
        BigRational::from_float(x)
    }

    fn from_ratio(num: u64, den: u64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn abs_diff(&self, other: &Self) -> Self {
        (self - other).abs()
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum<S> {
    sum: S,
    compensation: S,
}

impl<S: Scalar> KahanSum<S> {
    pub fn new() -> Self {
        Self { sum: S::zero(), compensation: S::zero() }
    }

    pub fn add(&mut self, x: S) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> S {
        self.sum + self.compensation
    }
}

/// Sums `values`, switching to compensated summation above `threshold` terms.
pub fn sum_with_threshold<S: Scalar>(values: impl ExactSizeIterator<Item = S>, threshold: usize) -> S {
    if values.len() > threshold {
        let mut acc = KahanSum::new();
        values.for_each(|x| acc.add(x));
        acc.value()
    } else {
        values.fold(S::zero(), |a, b| a + b)
    }
}

/// Dense coordinate vector.
#[derive(Debug, Clone, PartialEq, Default, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct Vector<S>(pub Vec<S>);

impl<S: Scalar> Vector<S> {
    pub fn zeros(dim: usize) -> Self {
        Vector(vec![S::zero(); dim])
    }

    pub fn from_f64(values: &[f64]) -> Self {
        Vector(values.iter().map(|&x| S::of(x)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.0
    }

    pub fn scaled(&self, a: S) -> Self {
        Vector(self.0.iter().map(|&x| a * x).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|x| x.is_zero())
    }

    pub fn add_assign_slice(&mut self, other: &[S]) {
        debug_assert_eq!(self.0.len(), other.len());
        for (a, &b) in self.0.iter_mut().zip(other) {
            *a += b;
        }
    }

    pub fn add_scaled(&mut self, a: S, other: &[S]) {
        debug_assert_eq!(self.0.len(), other.len());
        for (x, &y) in self.0.iter_mut().zip(other) {
            *x += a * y;
        }
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.0.iter().map(|x| x.as_f64()).collect()
    }

    /// Bit-level key identifying the vector exactly (with `-0.0 == 0.0`).
    pub fn key(&self) -> Vec<u64> {
        self.0
            .iter()
            .map(|x| {
                let v = x.as_f64();
                if v == 0.0 {
                    0u64
                } else {
                    v.to_bits()
                }
            })
            .collect()
    }
}

impl<S: Scalar> Add for &Vector<S> {
    type Output = Vector<S>;
    fn add(self, rhs: Self) -> Vector<S> {
        debug_assert_eq!(self.dim(), rhs.dim());
        Vector(self.0.iter().zip(&rhs.0).map(|(&a, &b)| a + b).collect())
    }
}

impl<S: Scalar> Sub for &Vector<S> {
    type Output = Vector<S>;
    fn sub(self, rhs: Self) -> Vector<S> {
        debug_assert_eq!(self.dim(), rhs.dim());
        Vector(self.0.iter().zip(&rhs.0).map(|(&a, &b)| a - b).collect())
    }
}

impl<S: Scalar> Neg for &Vector<S> {
    type Output = Vector<S>;
    fn neg(self) -> Vector<S> {
        Vector(self.0.iter().map(|&a| -a).collect())
    }
}

impl<S> From<Vec<S>> for Vector<S> {
    fn from(v: Vec<S>) -> Self {
        Vector(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_recovers_small_terms() {
        let mut acc = KahanSum::<f64>::new();
        acc.add(1.0);
        for _ in 0..10_000 {
            acc.add(1e-16);
        }
        assert!((acc.value() - (1.0 + 1e-12)).abs() < 1e-15);
    }

    #[test]
    fn rational_weights_are_exact() {
        let half = <BigRational as Weight>::from_ratio(1, 2);
        let third = <BigRational as Weight>::from_ratio(1, 3);
        let s = half.clone() + third.clone() + <BigRational as Weight>::from_ratio(1, 6);
        assert!(s.is_one());
        assert!(!half.within(&third, 1.0));
    }

    #[test]
    fn negative_zero_shares_key() {
        let a = Vector(vec![0.0f64, 1.0]);
        let b = Vector(vec![-0.0f64, 1.0]);
        assert_eq!(a.key(), b.key());
    }
}
