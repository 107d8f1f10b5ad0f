//! Decoupling-constant estimation and the closed-form bounds.

pub mod bounds;
pub mod ratio;
pub mod search;

pub use bounds::{
    b_upper, beta_from_delta, bound_garling_lower, bound_hilbert_phi, bound_linf_upper, bound_prop32_c,
    bound_prop32_c_banach, bound_thm41_dq, bound_thm41_k, condsym_constant, linf_kernel_holds, BoundScalar, Evaluated,
    Factorized, KhintchinePolicy, LinfBound,
};
pub use ratio::{ratio, ratio_mc, Direction};
pub use search::{
    embed_labels, evaluate_spec, replay, search_worst_case, witness_hash, witness_labels, witness_spec,
    ConstantEstimate, Evaluation, Family, Labels, SearchConfig,
};
