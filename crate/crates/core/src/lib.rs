//! Verification laboratory for vector-valued martingale decoupling.
//!
//! Builds decoupled tangent sequences exactly on finite filtration trees,
//! checks the probabilistic inequalities around them, estimates decoupling
//! constants in finite-dimensional (quasi-)Banach spaces, evaluates the
//! closed-form constants, and simulates step-process stochastic integrals.

pub mod constants;
pub mod error;
pub mod inequalities;
pub mod parallel;
pub mod probmodel;
pub mod rng;
pub mod scalar;
pub mod spaces;
pub mod stats;
pub mod stochint;
pub mod suites;

pub use error::{Error, Result};
pub use scalar::{Scalar, Vector, Weight};
pub use spaces::{lu_constants, SpaceDescriptor, SpaceKind};

use num_rational::BigRational;

/// Floating-point tree.
pub type Tree = probmodel::FiltrationTree<f64, f64>;
/// Tree with exact rational probabilities.
pub type DyadicTree = probmodel::FiltrationTree<f64, BigRational>;
pub type Sequence = probmodel::AdaptedSequence<f64, f64>;
pub type DyadicSequence = probmodel::AdaptedSequence<f64, BigRational>;
pub type Pair = probmodel::TangentPair<f64, f64>;
pub type DyadicPair = probmodel::TangentPair<f64, BigRational>;
