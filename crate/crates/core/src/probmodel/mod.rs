//! Finite filtration trees, adapted sequences and their decoupled tangent
//! sequences, with exact enumeration and Monte Carlo sampling.

pub mod generate;
pub mod measure;
pub mod ops;
pub mod sampling;
pub mod sequence;
pub mod tangent;
pub mod tree;

pub use generate::ModelFamily;
pub use ops::{check_davis_bound, DavisCheck, StoppingRule};
pub use sampling::JointSample;
pub use sequence::{AdaptedSequence, IncrementRule, PathFunctionals, PredictableRule, SequenceSpec};
pub use tangent::{decouple, JointOutcome, TangentPair, TangentRule, ENUMERATION_CAP};
pub use tree::{FiltrationTree, Level, LevelSpec, Prob, TreeSpec};
