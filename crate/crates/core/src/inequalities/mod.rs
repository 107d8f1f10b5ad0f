//! Checkers for the decoupling inequalities. Every checker reports both
//! sides, the constant used and the margin.

pub mod bmo;
pub mod goodlambda;
pub mod lemmas;
pub mod moments;
pub mod report;
pub mod tp;

pub use bmo::{analyze as bmo_analyze, bmo_condition, BmoAnalysis, BmoCell, BmoReport};
pub use goodlambda::{check_goodlambda, GoodLambdaParams, GoodLambdaReport};
pub use lemmas::{
    check_contraction, check_levy, check_reverse_kolmogorov, check_symsum, check_tail_comparison,
    check_tail_comparison_mc, ConditionalModel, Law, LevyMode,
};
pub use moments::{
    check_condsym, check_extrapolation, moment_phi, moment_phi_mc, ExtrapolationReport, MomentFunctional, Statistic,
};
pub use report::{IneqReport, Method, Status};
pub use tp::{t_p, t_p_mc, t_p_moment, t_p_star, t_p_table, window_table, WindowTable, DEFAULT_INNER_SAMPLES};
