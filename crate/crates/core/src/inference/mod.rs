//! Forward–backward inference on auxiliary and original trellises.

pub mod bcjr;
pub mod logdomain;
pub mod params;

pub use bcjr::{
    ab_conditional_posteriors, debug_dump, forward_logz, forward_marks, posteriors, visit_posteriors, Mode,
    ModelRef, PosteriorMarginals, StepMetrics,
};
pub use params::{AuxBackwardParams, AuxForwardParams, FsmcModel, EPS_FLOOR};
